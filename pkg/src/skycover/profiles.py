"""Ground tracks and the 2D altitude/SINR profiles planners run on.

A track is the 8-connected raster line between two ROI cells. Its profile
is the vertical slice of a coverage volume above it: one SINR column per
track cell, plus the geometry (terrain, surface, minimum safe altitude)
and a blocked mask the planners must respect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTrackError, GridBoundsError, NoAirspaceError
from .radio import UNREACHABLE_SERVING, CoverageVolume
from .terrain import CityScenario, min_safe_altitude_cells

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class GroundTrack:
    """Cells of a rasterized start-goal line and their cumulative advance.

    step_positions[i] is the horizontal distance flown after reaching cell
    i: +1.0 per axis step, +sqrt(2) per diagonal step.
    """

    cells: np.ndarray
    step_positions: np.ndarray

    def __post_init__(self):
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64))
        pos = np.ascontiguousarray(np.asarray(self.step_positions, dtype=np.float64))
        if cells.ndim != 2 or cells.shape[1] != 2 or cells.shape[0] < 2:
            raise ValueError("track needs at least two (x, y) cells")
        if pos.shape != (cells.shape[0],):
            raise ValueError("step_positions must match the cell count")
        cells.flags.writeable = False
        pos.flags.writeable = False
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "step_positions", pos)

    @property
    def n_steps(self) -> int:
        return self.cells.shape[0]

    @property
    def length_m(self) -> float:
        return float(self.step_positions[-1])


def rasterize_track(start: tuple[int, int], goal: tuple[int, int]) -> GroundTrack:
    """8-connected Bresenham line from start to goal, inclusive."""
    x0, y0 = int(start[0]), int(start[1])
    x1, y1 = int(goal[0]), int(goal[1])
    if (x0, y0) == (x1, y1):
        raise DegenerateTrackError(f"start and goal are the same cell ({x0}, {y0})")
    dx = abs(x1 - x0)
    sx = 1 if x0 < x1 else -1
    dy = -abs(y1 - y0)
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    cells = [(x0, y0)]
    x, y = x0, y0
    while (x, y) != (x1, y1):
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
        cells.append((x, y))
    arr = np.array(cells, dtype=np.int64)
    inc = np.where((np.abs(np.diff(arr[:, 0])) + np.abs(np.diff(arr[:, 1]))) == 2,
                   SQRT2, 1.0)
    pos = np.concatenate(([0.0], np.cumsum(inc)))
    return GroundTrack(cells=arr, step_positions=pos)


@dataclass(frozen=True, eq=False)
class PathProfile:
    """Vertical slice of a coverage volume along a track.

    sinr_db[s, k] is the volume value at track cell s, absolute altitude
    z0 + k (an exact copy, NaN where unreachable). blocked[s, k] is True
    below the minimum safe altitude or at unreachable voxels.
    """

    track: GroundTrack
    z0: int
    sinr_db: np.ndarray
    blocked: np.ndarray
    terrain_m: np.ndarray
    surface_m: np.ndarray
    min_alt_m: np.ndarray

    def __post_init__(self):
        ns = self.track.n_steps
        sinr = np.ascontiguousarray(np.asarray(self.sinr_db, dtype=np.float32))
        blocked = np.ascontiguousarray(np.asarray(self.blocked, dtype=bool))
        if sinr.ndim != 2 or sinr.shape[0] != ns:
            raise ValueError("sinr_db must be (n_steps, nz)")
        if blocked.shape != sinr.shape:
            raise ValueError("blocked must match sinr_db's shape")
        for name in ("terrain_m", "surface_m", "min_alt_m"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.shape != (ns,):
                raise ValueError(f"{name} must have one value per step")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if bool(np.all(blocked, axis=1).any()):
            step = int(np.argmax(np.all(blocked, axis=1)))
            raise NoAirspaceError(f"profile step {step} has no unblocked altitude")
        sinr.flags.writeable = False
        blocked.flags.writeable = False
        object.__setattr__(self, "sinr_db", sinr)
        object.__setattr__(self, "blocked", blocked)

    @property
    def n_steps(self) -> int:
        return self.track.n_steps

    @property
    def nz(self) -> int:
        return self.sinr_db.shape[1]

    def lowest_unblocked(self, step: int) -> int:
        """Lowest unblocked altitude index at a step."""
        return int(np.argmax(~self.blocked[step]))


def extract_profile(volume: CoverageVolume, scenario: CityScenario,
                    track: GroundTrack) -> PathProfile:
    """Cut the volume along a track.

    The altitude range is trimmed to one metre below the lowest minimum
    safe altitude on the track; SINR columns are copied without
    resampling. Raises NoAirspaceError if any step ends up fully blocked.
    """
    xs = track.cells[:, 0]
    ys = track.cells[:, 1]
    ox, oy = volume.origin
    ii = xs - ox
    jj = ys - oy
    if (ii.min() < 0 or ii.max() >= volume.nx
            or jj.min() < 0 or jj.max() >= volume.ny):
        raise GridBoundsError("track leaves the coverage volume's ROI")

    terrain = scenario.terrain.heights[ys, xs]
    surface = scenario.surface.heights[ys, xs]
    min_alt = min_safe_altitude_cells(scenario, xs, ys)

    z0 = max(volume.z0, int(math.floor(min_alt.min())) - 1)
    k_off = z0 - volume.z0
    nz = volume.nz - k_off
    sinr = volume.sinr_db[ii, jj, k_off:]
    serving = volume.serving[ii, jj, k_off:]

    z_abs = z0 + np.arange(nz, dtype=np.float64)
    blocked = (z_abs[None, :] < min_alt[:, None]) | (serving == UNREACHABLE_SERVING)
    return PathProfile(track=track, z0=z0, sinr_db=sinr, blocked=blocked,
                       terrain_m=terrain, surface_m=surface, min_alt_m=min_alt)


def profile_to_csv(profile: PathProfile) -> str:
    """Debug export: one row per step, one SINR column per altitude,
    'B' where blocked."""
    header = ["step", "cum_distance_m", "terrain_m", "surface_m", "min_alt_m"]
    header += [f"alt_{profile.z0 + k}" for k in range(profile.nz)]
    lines = [",".join(header)]
    for s in range(profile.n_steps):
        row = [str(s),
               f"{profile.track.step_positions[s]:.3f}",
               f"{profile.terrain_m[s]:.3f}",
               f"{profile.surface_m[s]:.3f}",
               f"{profile.min_alt_m[s]:.3f}"]
        for k in range(profile.nz):
            row.append("B" if profile.blocked[s, k]
                       else f"{profile.sinr_db[s, k]:.3f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
