"""City model: height rasters, base stations, scenario assembly and generation.

Everything lives on a 1 m grid. Cell (x, y) spans [x, x+1) x [y, y+1) in
grid metres, x indexes columns, y indexes rows, row 0 is the northernmost
raster line. Heights are metres above a common datum.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    GridBoundsError,
    GridDimensionError,
    ParameterError,
    RasterFormatError,
    ScenarioError,
    UnsupportedResolutionError,
)

logger = logging.getLogger(__name__)

# Vertical clearances applied when deriving the minimum safe altitude.
TERRAIN_CLEARANCE_M = 10.0
BUILDING_GUARD_M = 3.0
DEFAULT_BUILDING_THRESHOLD_M = 2.0

_ASC_NODATA = -9999.0
_REQUIRED_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


# ---------------------------------------------------------------------------
# Height rasters
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HeightGrid:
    """Immutable single-band height raster on the 1 m grid.

    Attributes:
        heights: (rows, cols) float64 metres; 0.0 where nodata is flagged.
        nodata: (rows, cols) bool, True where the source had no data.
        origin: (xllcorner, yllcorner) of the raster, metres.
    """

    heights: np.ndarray
    nodata: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)
    cell_size: float = 1.0

    def __post_init__(self):
        heights = np.ascontiguousarray(np.asarray(self.heights, dtype=np.float64))
        nodata = np.ascontiguousarray(np.asarray(self.nodata, dtype=bool))
        if heights.ndim != 2 or heights.shape[0] < 2 or heights.shape[1] < 2:
            raise GridDimensionError(
                f"height grid must be at least 2x2, got shape {heights.shape}"
            )
        if nodata.shape != heights.shape:
            raise GridDimensionError(
                f"nodata mask shape {nodata.shape} != heights shape {heights.shape}"
            )
        if self.cell_size != 1.0:
            raise UnsupportedResolutionError(
                f"only 1 m cells are supported, got cellsize={self.cell_size}"
            )
        valid = heights[~nodata]
        if valid.size and (not np.all(np.isfinite(valid)) or np.any(valid < 0.0)):
            raise RasterFormatError("heights must be finite and >= 0 outside nodata")
        heights = heights.copy()
        heights[nodata] = 0.0
        heights.flags.writeable = False
        nodata = nodata.copy()
        nodata.flags.writeable = False
        object.__setattr__(self, "heights", heights)
        object.__setattr__(self, "nodata", nodata)

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.cols and 0 <= y < self.rows

    def height_at(self, x: int, y: int) -> float:
        """Height of cell (x, y); nodata cells read as 0.0."""
        if not self.in_bounds(x, y):
            raise GridBoundsError(f"cell ({x}, {y}) outside {self.cols}x{self.rows} grid")
        return float(self.heights[y, x])


def parse_surface_raster(text: str) -> HeightGrid:
    """Parse an ESRI ASCII grid into a HeightGrid.

    Header keys (case-insensitive): ncols, nrows, xllcorner, yllcorner,
    cellsize and optionally NODATA_value. The first data line is the
    northernmost row. Values equal to the nodata marker are flagged and
    read back as height 0.
    """
    lines = text.splitlines()
    header: dict[str, float] = {}
    data_start = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if not parts:
            data_start = i + 1
            continue
        key = parts[0].lower()
        if key in _REQUIRED_HEADER_KEYS or key == "nodata_value":
            if len(parts) != 2:
                raise RasterFormatError(f"malformed header line for key '{parts[0]}'")
            try:
                header[key] = float(parts[1])
            except ValueError:
                raise RasterFormatError(
                    f"header key '{parts[0]}' has non-numeric value '{parts[1]}'"
                ) from None
            data_start = i + 1
        else:
            data_start = i
            break
    for key in _REQUIRED_HEADER_KEYS:
        if key not in header:
            raise RasterFormatError(f"missing required header key '{key}'")

    ncols_f, nrows_f = header["ncols"], header["nrows"]
    if ncols_f != int(ncols_f) or nrows_f != int(nrows_f):
        raise RasterFormatError("ncols/nrows must be integers")
    ncols, nrows = int(ncols_f), int(nrows_f)
    if ncols < 2 or nrows < 2:
        raise GridDimensionError(f"grid must be at least 2x2, got {ncols}x{nrows}")
    if header["cellsize"] != 1.0:
        raise UnsupportedResolutionError(
            f"only 1 m cells are supported, got cellsize={header['cellsize']}"
        )

    tokens: list[str] = []
    for line in lines[data_start:]:
        tokens.extend(line.split())
    if len(tokens) != nrows * ncols:
        raise GridDimensionError(
            f"expected {nrows * ncols} values ({nrows}x{ncols}), got {len(tokens)}"
        )
    try:
        values = np.array(tokens, dtype=np.float64).reshape(nrows, ncols)
    except ValueError:
        raise RasterFormatError("non-numeric value in raster body") from None

    nodata = np.zeros_like(values, dtype=bool)
    if "nodata_value" in header:
        nodata = values == header["nodata_value"]
    values = np.where(nodata, 0.0, values)
    return HeightGrid(
        heights=values,
        nodata=nodata,
        origin=(header["xllcorner"], header["yllcorner"]),
    )


def serialize_surface_raster(grid: HeightGrid) -> str:
    """Render a HeightGrid back to ESRI ASCII text.

    Floats are written with shortest round-trip precision, so
    parse(serialize(g)) reproduces the numeric grid exactly.
    """
    out = [
        f"ncols {grid.cols}",
        f"nrows {grid.rows}",
        f"xllcorner {grid.origin[0]!r}",
        f"yllcorner {grid.origin[1]!r}",
        "cellsize 1.0",
        f"NODATA_value {_ASC_NODATA!r}",
    ]
    for y in range(grid.rows):
        row = grid.heights[y]
        mask = grid.nodata[y]
        out.append(
            " ".join(
                repr(_ASC_NODATA) if mask[x] else repr(float(row[x]))
                for x in range(grid.cols)
            )
        )
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseStation:
    """A cell site. mast_height is metres above local terrain, so the
    antenna sits at terrain + mast_height absolute."""

    id: str
    x: float
    y: float
    mast_height: float

    def __post_init__(self):
        if self.mast_height <= 0.0:
            raise ScenarioError(f"station {self.id}: mast_height must be > 0")


@dataclass(frozen=True)
class Roi:
    """Axis-aligned evaluation region, half-open cell ranges [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ScenarioError(f"empty ROI {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True, eq=False)
class CityScenario:
    """Terrain + surface rasters, the stations that illuminate them, and the ROI.

    surface >= terrain everywhere; a cell is a building where
    surface - terrain exceeds building_threshold.
    """

    terrain: HeightGrid
    surface: HeightGrid
    stations: tuple[BaseStation, ...]
    roi: Roi
    building_threshold: float = DEFAULT_BUILDING_THRESHOLD_M
    building_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t, s = self.terrain, self.surface
        if (t.rows, t.cols) != (s.rows, s.cols):
            raise ScenarioError(
                f"terrain {t.cols}x{t.rows} and surface {s.cols}x{s.rows} differ"
            )
        if np.any(s.heights < t.heights):
            raise ScenarioError("surface must be >= terrain everywhere")
        if not self.stations:
            raise ScenarioError("scenario needs at least one station")
        ids = [st.id for st in self.stations]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate station ids")
        for st in self.stations:
            if not (0.0 <= st.x < t.cols and 0.0 <= st.y < t.rows):
                raise ScenarioError(f"station {st.id} at ({st.x}, {st.y}) outside grid")
        if not (0 <= self.roi.x0 and self.roi.x1 <= t.cols
                and 0 <= self.roi.y0 and self.roi.y1 <= t.rows):
            raise ScenarioError(f"ROI {self.roi} outside {t.cols}x{t.rows} grid")
        object.__setattr__(self, "stations", tuple(self.stations))
        mask = (s.heights - t.heights) > self.building_threshold
        mask.flags.writeable = False
        object.__setattr__(self, "building_mask", mask)
        n_nodata = int(t.nodata.sum() + s.nodata.sum())
        if n_nodata:
            logger.warning("scenario contains %d nodata cells treated as height 0", n_nodata)

    @property
    def rows(self) -> int:
        return self.terrain.rows

    @property
    def cols(self) -> int:
        return self.terrain.cols

    def is_building(self, x: int, y: int) -> bool:
        if not self.terrain.in_bounds(x, y):
            raise GridBoundsError(f"cell ({x}, {y}) outside grid")
        return bool(self.building_mask[y, x])


def min_safe_altitude(scenario: CityScenario, x: int, y: int) -> float:
    """Lowest legal absolute flight altitude over cell (x, y).

    Terrain clearance of 10 m always applies; over building cells the
    rooftop guard of 3 m applies as well.
    """
    terrain = scenario.terrain.height_at(x, y)
    if scenario.is_building(x, y):
        return max(terrain + TERRAIN_CLEARANCE_M,
                   scenario.surface.height_at(x, y) + BUILDING_GUARD_M)
    return terrain + TERRAIN_CLEARANCE_M


def min_safe_altitude_cells(scenario: CityScenario,
                            xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorised min_safe_altitude over arrays of cell indices."""
    terrain = scenario.terrain.heights[ys, xs]
    surface = scenario.surface.heights[ys, xs]
    building = scenario.building_mask[ys, xs]
    lifted = np.maximum(terrain + TERRAIN_CLEARANCE_M, surface + BUILDING_GUARD_M)
    return np.where(building, lifted, terrain + TERRAIN_CLEARANCE_M)


# ---------------------------------------------------------------------------
# Procedural generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CityParams:
    """Knobs for generate_city. Defaults give a 600 m square city with a
    400 m square ROI, matching the package's reference experiment."""

    width_m: int = 600
    height_m: int = 600
    block_pitch_m: int = 50
    street_width_m: int = 12
    building_height_min_m: float = 6.0
    building_height_max_m: float = 40.0
    terrain_amplitude_m: float = 5.0
    n_stations: int = 12
    mast_height_m: float = 25.0
    roi_buffer_m: int = 100

    def __post_init__(self):
        p = self
        if p.width_m < 4 * p.block_pitch_m or p.height_m < 4 * p.block_pitch_m:
            raise ParameterError("map must span at least four blocks per axis")
        if p.block_pitch_m <= 0 or not (0 < p.street_width_m < p.block_pitch_m):
            raise ParameterError("need 0 < street_width_m < block_pitch_m")
        if not (0.0 <= p.building_height_min_m <= p.building_height_max_m):
            raise ParameterError("need 0 <= building_height_min_m <= building_height_max_m")
        if p.terrain_amplitude_m < 0.0:
            raise ParameterError("terrain_amplitude_m must be >= 0")
        if p.n_stations < 1:
            raise ParameterError("need at least one station")
        if p.mast_height_m <= 0.0:
            raise ParameterError("mast_height_m must be > 0")
        if p.roi_buffer_m < 0:
            raise ParameterError("roi_buffer_m must be >= 0")
        if (p.width_m - 2 * p.roi_buffer_m < 2) or (p.height_m - 2 * p.roi_buffer_m < 2):
            raise ParameterError("roi_buffer_m leaves no ROI")


def _smooth_terrain(rng: np.random.Generator, cols: int, rows: int,
                    amplitude: float) -> np.ndarray:
    """Sum of a few low-frequency seeded sinusoids, min-max scaled to
    [0, amplitude]."""
    xs = (np.arange(cols) + 0.5) / cols
    ys = (np.arange(rows) + 0.5) / rows
    xg, yg = np.meshgrid(xs, ys)
    fx = rng.uniform(0.5, 1.5, 4)
    fy = rng.uniform(0.5, 1.5, 4)
    amp = rng.uniform(0.5, 1.0, 4)
    phase = rng.uniform(0.0, 2.0 * np.pi, 4)
    fieldv = np.zeros((rows, cols))
    for i in range(4):
        fieldv += amp[i] * np.sin(2.0 * np.pi * (fx[i] * xg + fy[i] * yg) + phase[i])
    lo, hi = fieldv.min(), fieldv.max()
    if amplitude == 0.0 or hi == lo:
        return np.zeros((rows, cols))
    return (fieldv - lo) / (hi - lo) * amplitude


def generate_city(params: CityParams, seed: int) -> CityScenario:
    """Build a deterministic synthetic city.

    Smooth terrain, rectangular building blocks on a street lattice with
    per-block uniform heights, and stations on a jittered placement grid
    covering the whole map. Station antennas end up at local surface +
    mast_height_m; the stored mast_height is adjusted so rooftop sites
    keep the terrain-relative convention of BaseStation.

    Identical (params, seed) yield a bit-identical scenario. Draw order is
    fixed: terrain field, block heights, station jitter, then the optional
    relocation draw that guarantees at least one station inside the ROI.
    """
    p = params
    rng = np.random.default_rng(seed)
    cols, rows = p.width_m, p.height_m

    terrain = _smooth_terrain(rng, cols, rows, p.terrain_amplitude_m)

    # Street lattice: cells within street_width of a block boundary are street.
    xs = np.arange(cols) % p.block_pitch_m
    ys = np.arange(rows) % p.block_pitch_m
    street = (xs[None, :] < p.street_width_m) | (ys[:, None] < p.street_width_m)
    nbx = math.ceil(cols / p.block_pitch_m)
    nby = math.ceil(rows / p.block_pitch_m)
    block_heights = rng.uniform(p.building_height_min_m, p.building_height_max_m,
                                size=(nby, nbx))
    bx = np.arange(cols) // p.block_pitch_m
    by = np.arange(rows) // p.block_pitch_m
    building_h = block_heights[by[:, None], bx[None, :]]
    surface = terrain + np.where(street, 0.0, building_h)

    roi = Roi(p.roi_buffer_m, p.roi_buffer_m,
              cols - p.roi_buffer_m, rows - p.roi_buffer_m)

    # Jittered placement grid over the full map, row-major tile order.
    gx = math.ceil(math.sqrt(p.n_stations))
    gy = math.ceil(p.n_stations / gx)
    tile_w, tile_h = cols / gx, rows / gy
    coords = []
    for t in range(p.n_stations):
        ti, tj = t % gx, t // gx
        x = (ti + rng.uniform(0.15, 0.85)) * tile_w
        y = (tj + rng.uniform(0.15, 0.85)) * tile_h
        coords.append((min(x, cols - 0.5), min(y, rows - 0.5)))
    if not any(roi.contains(x, y) for x, y in coords):
        cx, cy = (roi.x0 + roi.x1) / 2.0, (roi.y0 + roi.y1) / 2.0
        spread_x, spread_y = roi.width / 4.0, roi.height / 4.0
        dist2 = [(x - cx) ** 2 + (y - cy) ** 2 for x, y in coords]
        idx = int(np.argmin(dist2))
        coords[idx] = (cx + rng.uniform(-spread_x, spread_x),
                       cy + rng.uniform(-spread_y, spread_y))

    pad = max(2, len(str(p.n_stations - 1)))
    stations = []
    for i, (x, y) in enumerate(coords):
        cxi, cyi = int(x), int(y)
        antenna_z = surface[cyi, cxi] + p.mast_height_m
        stations.append(BaseStation(
            id=f"bs{i:0{pad}d}", x=float(x), y=float(y),
            mast_height=float(antenna_z - terrain[cyi, cxi]),
        ))

    zeros = np.zeros((rows, cols), dtype=bool)
    return CityScenario(
        terrain=HeightGrid(terrain, zeros),
        surface=HeightGrid(surface, zeros),
        stations=tuple(stations),
        roi=roi,
    )


# ---------------------------------------------------------------------------
# Scenario descriptor I/O
# ---------------------------------------------------------------------------

def save_scenario(scenario: CityScenario, out_dir: str | Path,
                  generator_meta: dict | None = None) -> Path:
    """Write dtm.asc, dsm.asc and scenario.json into out_dir.

    Returns the descriptor path. Output bytes are deterministic for a
    given scenario.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dtm.asc").write_text(serialize_surface_raster(scenario.terrain))
    (out / "dsm.asc").write_text(serialize_surface_raster(scenario.surface))
    desc = {
        "terrain_file": "dtm.asc",
        "surface_file": "dsm.asc",
        "stations": [asdict(s) for s in scenario.stations],
        "roi": asdict(scenario.roi),
        "building_threshold": scenario.building_threshold,
    }
    if generator_meta is not None:
        desc["generator"] = generator_meta
    path = out / "scenario.json"
    path.write_text(json.dumps(desc, indent=2, sort_keys=True) + "\n")
    return path


def load_scenario(path: str | Path) -> CityScenario:
    """Load a scenario descriptor; raster paths resolve relative to it."""
    path = Path(path)
    try:
        desc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario descriptor {path} is not valid JSON: {e}") from None
    if "terrain_file" in desc and "surface_file" in desc:
        terrain = parse_surface_raster((path.parent / desc["terrain_file"]).read_text())
        surface = parse_surface_raster((path.parent / desc["surface_file"]).read_text())
        try:
            stations = tuple(BaseStation(**s) for s in desc["stations"])
            roi = Roi(**desc["roi"])
        except (KeyError, TypeError) as e:
            raise ScenarioError(f"bad scenario descriptor field: {e}") from None
        return CityScenario(
            terrain=terrain, surface=surface, stations=stations, roi=roi,
            building_threshold=float(desc.get("building_threshold",
                                              DEFAULT_BUILDING_THRESHOLD_M)),
        )
    if "generator" in desc:
        meta = desc["generator"]
        return generate_city(CityParams(**meta["params"]), int(meta["seed"]))
    raise ScenarioError("scenario descriptor needs raster files or generator metadata")


def scenario_fingerprint(scenario: CityScenario) -> str:
    """Content hash covering rasters, stations, ROI and threshold."""
    h = hashlib.sha256()
    h.update(scenario.terrain.heights.tobytes())
    h.update(scenario.terrain.nodata.tobytes())
    h.update(scenario.surface.heights.tobytes())
    h.update(scenario.surface.nodata.tobytes())
    for s in scenario.stations:
        h.update(f"{s.id}|{s.x!r}|{s.y!r}|{s.mast_height!r}".encode())
    h.update(repr(asdict(scenario.roi)).encode())
    h.update(repr(scenario.building_threshold).encode())
    return h.hexdigest()
