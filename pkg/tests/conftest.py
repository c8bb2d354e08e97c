"""Shared fixtures: small scenarios, synthetic profiles, and path oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest

import skycover as sc
from skycover.profiles import GroundTrack, PathProfile


@pytest.fixture(scope="session")
def toy_params():
    return sc.CityParams(width_m=220, height_m=220, block_pitch_m=50,
                         street_width_m=12, building_height_min_m=6.0,
                         building_height_max_m=20.0, terrain_amplitude_m=2.0,
                         n_stations=3, mast_height_m=25.0, roi_buffer_m=40)


@pytest.fixture(scope="session")
def toy_scenario(toy_params):
    return sc.generate_city(toy_params, seed=3)


@pytest.fixture(scope="session")
def toy_volume(toy_scenario):
    return sc.compute_coverage_volume(toy_scenario, sc.resolve_band("4g-1800"))


def flat_scenario(side=200, station_xy=((5.5, 5.5),), mast=30.0,
                  surface_patch=None, roi_buffer=2):
    """All-zero terrain scenario with explicit stations.

    surface_patch: optional (x0, x1, y0, y1, height) rectangle of building.
    """
    zeros = np.zeros((side, side))
    surface = zeros.copy()
    if surface_patch is not None:
        x0, x1, y0, y1, h = surface_patch
        surface[y0:y1, x0:x1] = h
    terrain = sc.HeightGrid(heights=zeros, nodata=np.zeros((side, side), bool))
    surf = sc.HeightGrid(heights=surface, nodata=np.zeros((side, side), bool))
    stations = tuple(sc.BaseStation(id=f"bs{i:02d}", x=float(x), y=float(y),
                                    mast_height=mast)
                     for i, (x, y) in enumerate(station_xy))
    roi = sc.Roi(roi_buffer, roi_buffer, side - roi_buffer, side - roi_buffer)
    return sc.CityScenario(terrain=terrain, surface=surf, stations=stations,
                           roi=roi)


def axis_track(n_steps: int) -> GroundTrack:
    return sc.rasterize_track((0, 0), (n_steps - 1, 0))


def make_profile(sinr, blocked=None, min_alt=None, z0=0, track=None,
                 terrain=None, surface=None) -> PathProfile:
    """Synthetic PathProfile from a (n_steps, nz) SINR array.

    blocked defaults to altitudes below min_alt (itself defaulting to z0,
    i.e. nothing blocked); extra blocked cells model unreachable voxels.
    """
    sinr = np.asarray(sinr, dtype=np.float32)
    ns, nz = sinr.shape
    if track is None:
        track = axis_track(ns)
    if min_alt is None:
        min_alt = np.full(ns, float(z0))
    min_alt = np.asarray(min_alt, dtype=np.float64)
    z_abs = z0 + np.arange(nz, dtype=np.float64)
    base = z_abs[None, :] < min_alt[:, None]
    if blocked is not None:
        base = base | np.asarray(blocked, dtype=bool)
    terrain = np.zeros(ns) if terrain is None else np.asarray(terrain, float)
    surface = terrain if surface is None else np.asarray(surface, float)
    return PathProfile(track=track, z0=z0, sinr_db=sinr, blocked=base,
                       terrain_m=terrain, surface_m=surface,
                       min_alt_m=min_alt)


def random_profile(rng, ns, nz, z0=0, wall_prob=0.0):
    """Random synthetic profile with optional partial walls."""
    sinr = rng.uniform(-15.0, 15.0, size=(ns, nz))
    min_alt = z0 + rng.integers(0, max(1, nz // 3), size=ns).astype(float)
    blocked = None
    if wall_prob > 0.0:
        blocked = rng.random((ns, nz)) < wall_prob
        blocked[:, -1] = False  # keep every column plannable
    return make_profile(sinr, blocked=blocked, min_alt=min_alt, z0=z0)


# ---------------------------------------------------------------------------
# Shortest-path oracles (independent of the planner implementation)
# ---------------------------------------------------------------------------

def edge_cost(length: float, arrival_sinr: float, cfg: sc.AStarConfig) -> float:
    cost = length + (cfg.sinr_threshold_db - arrival_sinr) / cfg.cost_normalization
    if not cfg.allow_negative_costs and cost < cfg.edge_cost_floor:
        cost = cfg.edge_cost_floor
    return cost


def dijkstra_cost(profile: PathProfile, cfg: sc.AStarConfig,
                  free_anchors: bool = True) -> float:
    """Reference optimal cost via scipy's Dijkstra over the profile graph.

    A virtual source (and, with free anchors, a min over last-step nodes)
    mirrors the planner's endpoint freedom.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    ns, nz = profile.n_steps, profile.nz
    blocked = profile.blocked
    sinr = profile.sinr_db.astype(np.float64)
    pos = profile.track.step_positions
    n = ns * nz
    rows, cols, vals = [], [], []
    for s in range(ns):
        for k in range(nz):
            if blocked[s, k]:
                continue
            u = s * nz + k
            for ds, dk in ((1, 0), (0, 1), (0, -1), (1, 1), (1, -1)):
                s2, k2 = s + ds, k + dk
                if s2 >= ns or not (0 <= k2 < nz) or blocked[s2, k2]:
                    continue
                if ds == 1:
                    dxm = pos[s2] - pos[s]
                    length = dxm if dk == 0 else math.sqrt(dxm * dxm + 1.0)
                else:
                    length = 1.0
                rows.append(u)
                cols.append(s2 * nz + k2)
                vals.append(edge_cost(length, sinr[s2, k2], cfg))
    src = n
    if free_anchors:
        for k in range(nz):
            if not blocked[0, k]:
                rows.append(src)
                cols.append(k)
                vals.append(0.0)
    else:
        rows.append(src)
        cols.append(int(np.argmax(~blocked[0])))
        vals.append(0.0)
    graph = csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))
    dist = dijkstra(graph, directed=True, indices=src)
    last = dist[(ns - 1) * nz:(ns * nz)]
    if free_anchors:
        cand = last[~blocked[ns - 1]]
    else:
        cand = last[[int(np.argmax(~blocked[ns - 1]))]]
    return float(cand.min())


def brute_force_cost(profile: PathProfile, cfg: sc.AStarConfig,
                     free_anchors: bool = True) -> float:
    """Exact minimum path cost by exhaustive DFS over simple monotone paths.

    Only the current step's visited altitudes matter (steps never
    decrease), so the DFS state is (step, alt, visited-in-column). Partial
    costs prune branches; with clamped costs every edge is positive so
    pruning never cuts the optimum.
    """
    ns, nz = profile.n_steps, profile.nz
    blocked = profile.blocked
    sinr = profile.sinr_db.astype(np.float64)
    pos = profile.track.step_positions
    best = [math.inf]

    def advance_len(s, dk):
        dxm = pos[s + 1] - pos[s]
        return dxm if dk == 0 else math.sqrt(dxm * dxm + 1.0)

    def dfs(s, k, visited, cost):
        if cost >= best[0]:
            return
        if s == ns - 1:
            best[0] = cost
            return
        for dk in (0, 1, -1):
            k2 = k + dk
            if 0 <= k2 < nz and not blocked[s + 1, k2]:
                dfs(s + 1, k2, 1 << k2,
                    cost + edge_cost(advance_len(s, dk), sinr[s + 1, k2], cfg))
        for dk in (1, -1):
            k2 = k + dk
            if 0 <= k2 < nz and not blocked[s, k2] and not (visited >> k2) & 1:
                dfs(s, k2, visited | (1 << k2),
                    cost + edge_cost(1.0, sinr[s, k2], cfg))

    if free_anchors:
        starts = [k for k in range(nz) if not blocked[0, k]]
    else:
        starts = [int(np.argmax(~blocked[0]))]
    for k0 in starts:
        dfs(0, k0, 1 << k0, 0.0)
    return best[0]


def mean_sinr(path: sc.FlightPath) -> float:
    return float(np.dot(path.trace_lengths_m, path.trace_sinr_db) / path.length_m)


def los_oracle_margin(scenario, a, b, step_m=0.1) -> float:
    """Min (segment height - surface) by dense 3D sampling, endpoint cells
    excluded. +inf when every sample falls in an endpoint cell."""
    ax, ay, az = a
    bx, by, bz = b
    length = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2 + (bz - az) ** 2)
    n = max(2, int(math.ceil(length / step_m)) + 1)
    t = np.linspace(0.0, 1.0, n)
    xs = ax + t * (bx - ax)
    ys = ay + t * (by - ay)
    zs = az + t * (bz - az)
    cx = np.floor(xs).astype(np.int64)
    cy = np.floor(ys).astype(np.int64)
    cx = np.clip(cx, 0, scenario.cols - 1)
    cy = np.clip(cy, 0, scenario.rows - 1)
    in_a = (cx == int(math.floor(ax))) & (cy == int(math.floor(ay)))
    in_b = (cx == int(math.floor(bx))) & (cy == int(math.floor(by)))
    keep = ~(in_a | in_b)
    if not keep.any():
        return math.inf
    surf = scenario.surface.heights[cy[keep], cx[keep]]
    return float((zs[keep] - surf).min())


def random_air_segments(scenario, rng, n, max_agl=60.0):
    """Random in-grid segments with both endpoints strictly above surface."""
    segs = []
    while len(segs) < n:
        x0, x1 = rng.uniform(0.2, scenario.cols - 0.2, 2)
        y0, y1 = rng.uniform(0.2, scenario.rows - 0.2, 2)
        s0 = scenario.surface.heights[int(y0), int(x0)]
        s1 = scenario.surface.heights[int(y1), int(x1)]
        a = (x0, y0, s0 + rng.uniform(0.5, max_agl))
        b = (x1, y1, s1 + rng.uniform(0.5, max_agl))
        if (int(x0), int(y0)) == (int(x1), int(y1)):
            continue
        segs.append((a, b))
    return segs
