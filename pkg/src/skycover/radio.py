"""Link budget, visibility and coverage volumes.

Path loss uses two deterministic models (no shadowing term):

  * "uma": urban-macro dual slope. LoS 28.0 + 22 log10(d3d) + 20 log10(f),
    NLoS is the LoS value floored under 13.54 + 39.08 log10(d3d) + 20 log10(f).
  * "ci": close-in reference at 1 m, 32.4 + 20 log10(f) + 10 n log10(d3d)
    with separate LoS / NLoS exponents; intended for mmWave bands.

f in GHz, d3d in metres (>= 1). SINR treats every non-serving station as a
full-load interferer; the serving station is the one with the highest
received power, ties going to the lexicographically smallest station id.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._kernels import march_ray, min_clear_altitude_grid
from .errors import ConfigError, DomainError, GeometryError, GridBoundsError
from .terrain import BaseStation, CityScenario

THERMAL_NOISE_DBM_PER_HZ = -174.0
MIN_LINK_DISTANCE_M = 1.0
ROI_CEILING_ABOVE_SURFACE_M = 120.0
UNREACHABLE_SERVING = -1


# ---------------------------------------------------------------------------
# Band configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathLossParams:
    model: str = "uma"
    los_exponent: float = 2.1
    nlos_exponent: float = 3.4

    def __post_init__(self):
        if self.model not in ("uma", "ci"):
            raise ConfigError(f"unknown path loss model '{self.model}'")
        if self.nlos_exponent < self.los_exponent:
            raise ConfigError("nlos_exponent must be >= los_exponent")


@dataclass(frozen=True)
class BandConfig:
    name: str
    carrier_ghz: float
    bandwidth_hz: float
    tx_power_dbm: float
    noise_figure_db: float = 9.0
    pathloss: PathLossParams = field(default_factory=PathLossParams)

    def __post_init__(self):
        if self.carrier_ghz <= 0.0:
            raise ConfigError(f"band {self.name}: carrier_ghz must be > 0")
        if self.bandwidth_hz <= 0.0:
            raise ConfigError(f"band {self.name}: bandwidth_hz must be > 0")


BUILTIN_BANDS: dict[str, BandConfig] = {
    "4g-1800": BandConfig("4g-1800", carrier_ghz=1.8, bandwidth_hz=20e6,
                          tx_power_dbm=46.0, pathloss=PathLossParams("uma")),
    "5g-3500": BandConfig("5g-3500", carrier_ghz=3.5, bandwidth_hz=100e6,
                          tx_power_dbm=46.0, pathloss=PathLossParams("uma")),
    "5g-28000": BandConfig("5g-28000", carrier_ghz=28.0, bandwidth_hz=400e6,
                           tx_power_dbm=43.0,
                           pathloss=PathLossParams("ci", 2.1, 3.4)),
}


def resolve_band(name: str) -> BandConfig:
    try:
        return BUILTIN_BANDS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_BANDS))
        raise ConfigError(f"unknown band '{name}'; known bands: {known}") from None


def band_from_dict(spec: dict) -> BandConfig:
    """Build a BandConfig from a JSON-shaped dict."""
    try:
        pl = spec.get("pathloss", {})
        return BandConfig(
            name=spec["name"],
            carrier_ghz=float(spec["carrier_ghz"]),
            bandwidth_hz=float(spec["bandwidth_hz"]),
            tx_power_dbm=float(spec["tx_power_dbm"]),
            noise_figure_db=float(spec.get("noise_figure_db", 9.0)),
            pathloss=PathLossParams(
                model=pl.get("model", "uma"),
                los_exponent=float(pl.get("los_exponent", 2.1)),
                nlos_exponent=float(pl.get("nlos_exponent", 3.4)),
            ),
        )
    except KeyError as e:
        raise ConfigError(f"band spec missing key {e}") from None


def band_to_dict(band: BandConfig) -> dict:
    return {
        "name": band.name,
        "carrier_ghz": band.carrier_ghz,
        "bandwidth_hz": band.bandwidth_hz,
        "tx_power_dbm": band.tx_power_dbm,
        "noise_figure_db": band.noise_figure_db,
        "pathloss": {
            "model": band.pathloss.model,
            "los_exponent": band.pathloss.los_exponent,
            "nlos_exponent": band.pathloss.nlos_exponent,
        },
    }


def band_fingerprint(band: BandConfig) -> str:
    payload = json.dumps(band_to_dict(band), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Link budget
# ---------------------------------------------------------------------------

def noise_power_dbm(band: BandConfig) -> float:
    """Thermal noise plus receiver noise figure over the band's bandwidth."""
    return (THERMAL_NOISE_DBM_PER_HZ
            + 10.0 * math.log10(band.bandwidth_hz)
            + band.noise_figure_db)


def path_loss_db(band: BandConfig, d3d_m: float, los: bool) -> float:
    """Deterministic path loss for a 3D link distance in metres."""
    if d3d_m < MIN_LINK_DISTANCE_M:
        raise DomainError(f"d3d_m must be >= {MIN_LINK_DISTANCE_M}, got {d3d_m}")
    f = band.carrier_ghz
    logd = math.log10(d3d_m)
    if band.pathloss.model == "uma":
        pl_los = 28.0 + 22.0 * logd + 20.0 * math.log10(f)
        if los:
            return pl_los
        return max(pl_los, 13.54 + 39.08 * logd + 20.0 * math.log10(f))
    n = band.pathloss.los_exponent if los else band.pathloss.nlos_exponent
    return 32.4 + 20.0 * math.log10(f) + 10.0 * n * logd


def antenna_position(scenario: CityScenario, station: BaseStation) -> tuple[float, float, float]:
    """Antenna point of a station: (x, y, terrain at its cell + mast_height)."""
    cx, cy = int(math.floor(station.x)), int(math.floor(station.y))
    return station.x, station.y, scenario.terrain.height_at(cx, cy) + station.mast_height


def _check_point(scenario: CityScenario, p: tuple[float, float, float],
                 allow_on_surface: bool) -> None:
    x, y, z = p
    cx, cy = int(math.floor(x)), int(math.floor(y))
    if not scenario.terrain.in_bounds(cx, cy):
        raise GridBoundsError(f"point ({x}, {y}) outside grid")
    surf = scenario.surface.heights[cy, cx]
    if allow_on_surface:
        if z < surf:
            raise GeometryError(f"point ({x}, {y}, {z}) below surface {surf}")
    elif z <= surf:
        raise GeometryError(f"point ({x}, {y}, {z}) not above surface {surf}")


def is_los(scenario: CityScenario, a: tuple[float, float, float],
           b: tuple[float, float, float]) -> bool:
    """True when the segment a-b clears the surface at every crossed cell.

    The endpoints' own cells are excluded so a rooftop antenna does not
    occlude itself. Clearance is evaluated where the segment enters and
    leaves each crossed cell; the test is exact for the piecewise-constant
    surface except at floating-point graze ties.
    """
    _check_point(scenario, a, allow_on_surface=True)
    _check_point(scenario, b, allow_on_surface=True)
    _, clearance = march_ray(scenario.surface.heights,
                             a[0], a[1], a[2], b[0], b[1], b[2])
    return bool(clearance >= 0.0)


def los_clearance_m(scenario: CityScenario, a: tuple[float, float, float],
                    b: tuple[float, float, float]) -> float:
    """Minimum (segment height - surface) over crossed cells; +inf if the
    endpoints share a cell. Negative values measure obstruction depth."""
    _check_point(scenario, a, allow_on_surface=True)
    _check_point(scenario, b, allow_on_surface=True)
    _, clearance = march_ray(scenario.surface.heights,
                             a[0], a[1], a[2], b[0], b[1], b[2])
    return float(clearance) if clearance < 1.0e29 else math.inf


class SinrSample(NamedTuple):
    sinr_db: float
    serving_id: str


def _sorted_station_indices(scenario: CityScenario) -> list[int]:
    return sorted(range(len(scenario.stations)),
                  key=lambda i: scenario.stations[i].id)


def sinr_at(scenario: CityScenario, band: BandConfig,
            p: tuple[float, float, float]) -> SinrSample:
    """SINR at a free-space point, all non-serving stations at full load.

    Link distances are floored at 1 m so points next to an antenna stay in
    the far-field domain of the path loss models.
    """
    _check_point(scenario, p, allow_on_surface=False)
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    noise_lin = 10.0 ** (noise_power_dbm(band) / 10.0)
    surface = scenario.surface.heights
    total_lin = 0.0
    best_rx = -math.inf
    best_lin = 0.0
    best_id = ""
    for i in _sorted_station_indices(scenario):
        st = scenario.stations[i]
        ax, ay, az = antenna_position(scenario, st)
        req_z, _ = march_ray(surface, ax, ay, az, x, y, z)
        los = z >= req_z
        d = math.sqrt((x - ax) ** 2 + (y - ay) ** 2 + (z - az) ** 2)
        rx = band.tx_power_dbm - path_loss_db(band, max(d, MIN_LINK_DISTANCE_M), los)
        lin = 10.0 ** (rx / 10.0)
        total_lin += lin
        if rx > best_rx:
            best_rx = rx
            best_lin = lin
            best_id = st.id
    interference = max(total_lin - best_lin, 0.0)
    sinr = best_rx - 10.0 * math.log10(interference + noise_lin)
    return SinrSample(sinr_db=sinr, serving_id=best_id)


# ---------------------------------------------------------------------------
# Coverage volumes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoverageVolume:
    """SINR and serving-station index over the ROI airspace.

    Voxel (i, j, k) samples the column centre (origin_x + i + 0.5,
    origin_y + j + 0.5) at absolute altitude z0 + k. Voxels at or below
    the local surface are unreachable: SINR NaN, serving -1. Arrays are
    (nx, ny, nz), x-major.
    """

    band: str
    origin: tuple[int, int]
    z0: int
    sinr_db: np.ndarray
    serving: np.ndarray
    station_ids: tuple[str, ...]

    def __post_init__(self):
        sinr = np.ascontiguousarray(np.asarray(self.sinr_db, dtype=np.float32))
        serving = np.ascontiguousarray(np.asarray(self.serving, dtype=np.int16))
        if sinr.ndim != 3 or serving.shape != sinr.shape:
            raise ValueError("sinr_db and serving must be matching 3D arrays")
        sinr.flags.writeable = False
        serving.flags.writeable = False
        object.__setattr__(self, "sinr_db", sinr)
        object.__setattr__(self, "serving", serving)
        object.__setattr__(self, "station_ids", tuple(self.station_ids))

    @property
    def nx(self) -> int:
        return self.sinr_db.shape[0]

    @property
    def ny(self) -> int:
        return self.sinr_db.shape[1]

    @property
    def nz(self) -> int:
        return self.sinr_db.shape[2]

    def index_of(self, x: int, y: int, z: int) -> tuple[int, int, int]:
        i = x - self.origin[0]
        j = y - self.origin[1]
        k = z - self.z0
        if not (0 <= i < self.nx and 0 <= j < self.ny and 0 <= k < self.nz):
            raise GridBoundsError(f"voxel ({x}, {y}, {z}) outside volume")
        return i, j, k

    def is_reachable(self, x: int, y: int, z: int) -> bool:
        i, j, k = self.index_of(x, y, z)
        return bool(self.serving[i, j, k] != UNREACHABLE_SERVING)

    def value_at(self, x: int, y: int, z: int) -> tuple[float, str | None]:
        i, j, k = self.index_of(x, y, z)
        idx = int(self.serving[i, j, k])
        if idx == UNREACHABLE_SERVING:
            return math.nan, None
        return float(self.sinr_db[i, j, k]), self.station_ids[idx]


def compute_coverage_volumes(scenario: CityScenario,
                             bands: list[BandConfig],
                             workers: int | None = None,
                             ) -> dict[str, CoverageVolume]:
    """Coverage volumes for several bands, sharing the visibility pass.

    The per-station critical LoS altitude over each ROI column is band
    independent, so it is computed once. Results are bit-identical for
    identical inputs regardless of the worker count.
    """
    if workers is not None:
        import numba
        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))

    roi = scenario.roi
    nx, ny = roi.width, roi.height
    surface_full = scenario.surface.heights
    surface_xy = np.ascontiguousarray(
        surface_full[roi.y0:roi.y1, roi.x0:roi.x1].T)
    terrain_roi = scenario.terrain.heights[roi.y0:roi.y1, roi.x0:roi.x1]
    z0 = int(math.floor(terrain_roi.min()))
    z_top = int(math.ceil(surface_xy.max()) + ROI_CEILING_ABOVE_SURFACE_M)
    nz = z_top - z0 + 1
    z_levels = z0 + np.arange(nz, dtype=np.float64)

    order = _sorted_station_indices(scenario)
    antennas = []
    crit_z = []
    dxy2 = []
    xc = roi.x0 + np.arange(nx, dtype=np.float64) + 0.5
    yc = roi.y0 + np.arange(ny, dtype=np.float64) + 0.5
    for i in order:
        st = scenario.stations[i]
        ax, ay, az = antenna_position(scenario, st)
        antennas.append((ax, ay, az))
        crit_z.append(min_clear_altitude_grid(surface_full, ax, ay, az,
                                              float(roi.x0), float(roi.y0), nx, ny))
        dxy2.append((xc[:, None] - ax) ** 2 + (yc[None, :] - ay) ** 2)

    station_ids = tuple(st.id for st in scenario.stations)
    reachable = z_levels[None, None, :] > surface_xy[:, :, None]
    chunk = 16
    volumes: dict[str, CoverageVolume] = {}
    for band in bands:
        noise_lin = 10.0 ** (noise_power_dbm(band) / 10.0)
        log_f = math.log10(band.carrier_ghz)
        sinr_out = np.empty((nx, ny, nz), dtype=np.float32)
        serving_out = np.empty((nx, ny, nz), dtype=np.int16)
        for k0 in range(0, nz, chunk):
            k1 = min(k0 + chunk, nz)
            zc = z_levels[k0:k1]
            shape = (nx, ny, k1 - k0)
            total_lin = np.zeros(shape)
            best_rx = np.full(shape, -np.inf)
            best_lin = np.zeros(shape)
            best_idx = np.full(shape, UNREACHABLE_SERVING, dtype=np.int16)
            for pos, i in enumerate(order):
                ax, ay, az = antennas[pos]
                d = np.sqrt(dxy2[pos][:, :, None] + (zc[None, None, :] - az) ** 2)
                np.maximum(d, MIN_LINK_DISTANCE_M, out=d)
                logd = np.log10(d)
                los = zc[None, None, :] >= crit_z[pos][:, :, None]
                if band.pathloss.model == "uma":
                    pl = 28.0 + 22.0 * logd + 20.0 * log_f
                    pl_n = np.maximum(pl, 13.54 + 39.08 * logd + 20.0 * log_f)
                    pl = np.where(los, pl, pl_n)
                else:
                    n_exp = np.where(los, 10.0 * band.pathloss.los_exponent,
                                     10.0 * band.pathloss.nlos_exponent)
                    pl = 32.4 + 20.0 * log_f + n_exp * logd
                rx = band.tx_power_dbm - pl
                lin = 10.0 ** (rx / 10.0)
                total_lin += lin
                upd = rx > best_rx
                best_rx = np.where(upd, rx, best_rx)
                best_lin = np.where(upd, lin, best_lin)
                best_idx = np.where(upd, np.int16(i), best_idx)
            interference = np.maximum(total_lin - best_lin, 0.0)
            sinr = best_rx - 10.0 * np.log10(interference + noise_lin)
            reach = reachable[:, :, k0:k1]
            sinr_out[:, :, k0:k1] = np.where(reach, sinr, np.nan).astype(np.float32)
            serving_out[:, :, k0:k1] = np.where(reach, best_idx,
                                                np.int16(UNREACHABLE_SERVING))
        volumes[band.name] = CoverageVolume(
            band=band.name, origin=(roi.x0, roi.y0), z0=z0,
            sinr_db=sinr_out, serving=serving_out, station_ids=station_ids)
    return volumes


def compute_coverage_volume(scenario: CityScenario, band: BandConfig,
                            workers: int | None = None) -> CoverageVolume:
    return compute_coverage_volumes(scenario, [band], workers=workers)[band.name]


# ---------------------------------------------------------------------------
# Volume cache files
# ---------------------------------------------------------------------------

_VOLUME_MAGIC = b"SCVOL001"


def save_volume(volume: CoverageVolume, path: str | Path) -> None:
    """Write the cache file: magic, JSON header, f32 LE SINR then i16 LE
    serving indices, both in x-major voxel order."""
    header = json.dumps({
        "band": volume.band,
        "origin": list(volume.origin),
        "z0": volume.z0,
        "nx": volume.nx,
        "ny": volume.ny,
        "nz": volume.nz,
        "station_ids": list(volume.station_ids),
    }, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_VOLUME_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(volume.sinr_db.astype("<f4", copy=False).tobytes())
        fh.write(volume.serving.astype("<i2", copy=False).tobytes())


def load_volume(path: str | Path) -> CoverageVolume:
    raw = Path(path).read_bytes()
    if raw[:8] != _VOLUME_MAGIC:
        raise ValueError(f"{path} is not a coverage volume file")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + hlen].decode())
    nx, ny, nz = header["nx"], header["ny"], header["nz"]
    off = 12 + hlen
    n = nx * ny * nz
    sinr = np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(nx, ny, nz)
    serving = np.frombuffer(raw, dtype="<i2", count=n,
                            offset=off + 4 * n).reshape(nx, ny, nz)
    return CoverageVolume(
        band=header["band"], origin=tuple(header["origin"]), z0=header["z0"],
        sinr_db=sinr, serving=serving, station_ids=tuple(header["station_ids"]))
