"""Vertical flight planners over a PathProfile.

All planners emit a FlightPath whose nodes advance monotonically along the
track using the move set H (+1 step), V+/V- (+-1 m altitude) and D+/D-
(+1 step with +-1 m altitude). Lengths: H contributes the track's per-step
increment (1 or sqrt(2) m), V contributes 1 m, D the Euclidean combination.

Planners:
  * plan_straight: one constant altitude clearing the whole track.
  * plan_agl: terrain following at a fixed clearance, lifted over tall
    buildings by the rooftop guard.
  * plan_och: per-step argmax of SINR (ties to the lowest altitude).
  * plan_caa_star: A* trading path length against coverage, edge cost
    move_length + (sinr_threshold - arrival SINR) / cost_normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import astar_search
from .errors import NoAirspaceError, NoPathError, ParameterError
from .profiles import PathProfile

DEFAULT_AGL_CLEARANCE_M = 22.0

MOVE_H = "H"
MOVE_VU = "V+"
MOVE_VD = "V-"
MOVE_DU = "D+"
MOVE_DD = "D-"


@dataclass(frozen=True)
class AStarConfig:
    """Cost shaping for plan_caa_star.

    With allow_negative_costs False every edge cost is clamped below at
    edge_cost_floor, which keeps the search admissible and the result a
    true shortest path; the raw, possibly negative costs reproduce the
    greedier reward-chasing behaviour instead. The floor doubles as the
    length pressure inside the clamp region: with a tiny floor, detours
    through well-covered air are nearly free and paths balloon, while a
    floor near 1 stops the planner from dodging weak-coverage pockets at
    all. The default keeps dodging much cheaper than flying through
    sub-threshold air without letting detours grow unboundedly.
    """

    sinr_threshold_db: float = -3.0
    cost_normalization: float = 1.5
    edge_cost_floor: float = 0.2
    allow_negative_costs: bool = False

    def __post_init__(self):
        if self.cost_normalization <= 0.0:
            raise ParameterError("cost_normalization must be > 0")
        if self.edge_cost_floor <= 0.0:
            raise ParameterError("edge_cost_floor must be > 0")


@dataclass(frozen=True, eq=False)
class FlightPath:
    """A planner result.

    nodes are (step, absolute altitude in metres); moves[i] labels the leg
    nodes[i] -> nodes[i+1]. trace_lengths_m / trace_sinr_db give, per move,
    the segment length and the SINR at the arrival node. total_cost is the
    accumulated search cost for planners that have one.
    """

    planner: str
    nodes: tuple[tuple[int, int], ...]
    moves: tuple[str, ...]
    length_m: float
    trace_lengths_m: np.ndarray
    trace_sinr_db: np.ndarray
    total_cost: float | None = None

    def __post_init__(self):
        lengths = np.ascontiguousarray(np.asarray(self.trace_lengths_m, dtype=np.float64))
        sinr = np.ascontiguousarray(np.asarray(self.trace_sinr_db, dtype=np.float64))
        if len(self.moves) != len(self.nodes) - 1 and self.nodes:
            raise ValueError("need exactly one move between consecutive nodes")
        if lengths.shape != (len(self.moves),) or sinr.shape != lengths.shape:
            raise ValueError("trace arrays must have one entry per move")
        lengths.flags.writeable = False
        sinr.flags.writeable = False
        object.__setattr__(self, "trace_lengths_m", lengths)
        object.__setattr__(self, "trace_sinr_db", sinr)
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "moves", tuple(self.moves))

    @property
    def sinr_trace(self) -> list[tuple[float, float]]:
        return list(zip(self.trace_lengths_m.tolist(), self.trace_sinr_db.tolist()))


def path_length(path: FlightPath) -> float:
    """Sum of segment lengths; 0.0 for an empty move list."""
    return float(np.sum(path.trace_lengths_m)) if len(path.moves) else 0.0


def step_cost(move_length_m: float, arrival_sinr_db: float,
              config: AStarConfig) -> float:
    """Edge cost used by plan_caa_star."""
    cost = move_length_m + (config.sinr_threshold_db - arrival_sinr_db) / config.cost_normalization
    if not config.allow_negative_costs and cost < config.edge_cost_floor:
        cost = config.edge_cost_floor
    return cost


# ---------------------------------------------------------------------------
# Path assembly
# ---------------------------------------------------------------------------

def _assemble(planner: str, profile: PathProfile, node_ks: list[tuple[int, int]],
              total_cost: float | None = None) -> FlightPath:
    """Build a FlightPath from (step, altitude index) nodes."""
    pos = profile.track.step_positions
    moves: list[str] = []
    lengths: list[float] = []
    sinr: list[float] = []
    for (s1, k1), (s2, k2) in zip(node_ks, node_ks[1:]):
        ds, dk = s2 - s1, k2 - k1
        if ds == 1 and dk == 0:
            moves.append(MOVE_H)
            lengths.append(float(pos[s2] - pos[s1]))
        elif ds == 0 and dk in (1, -1):
            moves.append(MOVE_VU if dk == 1 else MOVE_VD)
            lengths.append(1.0)
        elif ds == 1 and dk in (1, -1):
            moves.append(MOVE_DU if dk == 1 else MOVE_DD)
            dpos = float(pos[s2] - pos[s1])
            lengths.append(math.sqrt(dpos * dpos + 1.0))
        else:
            raise ValueError(f"illegal move ({ds}, {dk}) in assembled path")
        sinr.append(float(profile.sinr_db[s2, k2]))
    nodes = tuple((s, profile.z0 + k) for s, k in node_ks)
    return FlightPath(planner=planner, nodes=nodes, moves=tuple(moves),
                      length_m=float(np.sum(np.asarray(lengths))) if lengths else 0.0,
                      trace_lengths_m=np.asarray(lengths),
                      trace_sinr_db=np.asarray(sinr),
                      total_cost=total_cost)


def _connect_targets(targets: np.ndarray) -> list[tuple[int, int]]:
    """Canonical node sequence through one altitude target per step.

    Climbs insert vertical moves before the diagonal advance; descents
    advance diagonally first and drop the remaining metres at the next
    step, so intermediate nodes never dip below either step's target.
    """
    nodes: list[tuple[int, int]] = [(0, int(targets[0]))]
    for s in range(len(targets) - 1):
        a, b = int(targets[s]), int(targets[s + 1])
        if abs(b - a) <= 1:
            nodes.append((s + 1, b))
        elif b > a:
            for k in range(a + 1, b):
                nodes.append((s, k))
            nodes.append((s + 1, b))
        else:
            nodes.append((s + 1, a - 1))
            for k in range(a - 2, b - 1, -1):
                nodes.append((s + 1, k))
    return nodes


# ---------------------------------------------------------------------------
# Planners
# ---------------------------------------------------------------------------

def plan_straight(profile: PathProfile) -> FlightPath:
    """Constant altitude: the maximum of the per-step minimum safe
    altitudes, rounded up to the altitude grid."""
    alt = int(math.ceil(profile.min_alt_m.max()))
    k = alt - profile.z0
    if k >= profile.nz:
        raise NoAirspaceError(f"clearing altitude {alt} m exceeds the profile ceiling")
    return _assemble("straight", profile, [(s, k) for s in range(profile.n_steps)])


def plan_agl(profile: PathProfile,
             clearance_m: float = DEFAULT_AGL_CLEARANCE_M) -> FlightPath:
    """Terrain following at a fixed height above ground.

    The per-step target is terrain + clearance_m, lifted onto the rooftop
    guard wherever the minimum safe altitude demands more (buildings taller
    than clearance_m - 3 above terrain), then rounded to the altitude grid
    and lifted to the lowest unblocked altitude if needed.
    """
    if clearance_m <= 0.0:
        raise ParameterError("clearance_m must be > 0")
    t = np.maximum(profile.terrain_m + clearance_m, profile.min_alt_m)
    ks = np.floor(t + 0.5).astype(np.int64) - profile.z0
    ks = np.minimum(ks, profile.nz - 1)
    for s in range(profile.n_steps):
        ks[s] = max(ks[s], profile.lowest_unblocked(s))
    return _assemble("agl22", profile, _connect_targets(ks))


def plan_och(profile: PathProfile) -> FlightPath:
    """Per-step altitude with the highest SINR, ties to the lowest
    altitude, connected by the canonical climb/descend move pattern."""
    sinr = np.where(profile.blocked, -np.inf, profile.sinr_db.astype(np.float64))
    ks = np.argmax(sinr, axis=1)
    return _assemble("och", profile, _connect_targets(ks))


def plan_caa_star(profile: PathProfile, config: AStarConfig | None = None,
                  *, free_anchors: bool = True) -> FlightPath:
    """Coverage-aware A* along the track.

    With free_anchors (the default) the search may start and finish at any
    unblocked altitude of the first and last steps — like the other
    altitude planners, which anchor at their own per-step targets. Setting
    it False pins both ends to the lowest safe altitude instead.

    The heuristic is the remaining profile-plane distance to the goal
    (horizontal only when the goal altitude is free). With cost clamping
    it is scaled by edge_cost_floor / sqrt(3) (no move is longer than
    sqrt(3) m, so the scaled heuristic never exceeds the remaining cost),
    which keeps the search exact while effectively ordering expansion by
    accumulated cost.
    """
    cfg = config or AStarConfig()
    blocked = np.ascontiguousarray(profile.blocked)
    sinr = np.ascontiguousarray(profile.sinr_db, dtype=np.float64)
    pos = profile.track.step_positions
    if free_anchors:
        start_ks = np.flatnonzero(~blocked[0]).astype(np.int64)
        goal_k = -1
    else:
        start_ks = np.asarray([profile.lowest_unblocked(0)], dtype=np.int64)
        goal_k = profile.lowest_unblocked(profile.n_steps - 1)
    clamp = not cfg.allow_negative_costs
    h_scale = cfg.edge_cost_floor / math.sqrt(3.0) if clamp else 1.0
    parent, cost, found, goal_id = astar_search(
        blocked, sinr, pos, start_ks, goal_k, free_anchors,
        cfg.sinr_threshold_db, cfg.cost_normalization, cfg.edge_cost_floor,
        clamp, h_scale)
    if not found:
        raise NoPathError("no unblocked route between start and goal")
    nz = profile.nz
    node_ks: list[tuple[int, int]] = []
    nid = int(goal_id)
    while nid >= 0:
        node_ks.append((nid // nz, nid % nz))
        nid = int(parent[nid])
    node_ks.reverse()
    return _assemble("caastar", profile, node_ks, total_cost=float(cost))


PLANNERS = ("straight", "agl22", "och", "caastar")


def plan(planner: str, profile: PathProfile,
         config: AStarConfig | None = None) -> FlightPath:
    """Dispatch by planner name."""
    if planner == "straight":
        return plan_straight(profile)
    if planner == "agl22":
        return plan_agl(profile)
    if planner == "och":
        return plan_och(profile)
    if planner == "caastar":
        return plan_caa_star(profile, config)
    raise ParameterError(f"unknown planner '{planner}'; known: {', '.join(PLANNERS)}")


# ---------------------------------------------------------------------------
# Validation and export
# ---------------------------------------------------------------------------

def check_flight_path(path: FlightPath, profile: PathProfile) -> None:
    """Raise ValueError if a path violates any FlightPath invariant."""
    nodes = path.nodes
    if not nodes:
        raise ValueError("empty path")
    if nodes[0][0] != 0 or nodes[-1][0] != profile.n_steps - 1:
        raise ValueError("path must span the whole track")
    pos = profile.track.step_positions
    for i, ((s1, a1), (s2, a2)) in enumerate(zip(nodes, nodes[1:])):
        ds, dk = s2 - s1, a2 - a1
        move = path.moves[i]
        expected = {(1, 0): MOVE_H, (0, 1): MOVE_VU, (0, -1): MOVE_VD,
                    (1, 1): MOVE_DU, (1, -1): MOVE_DD}.get((ds, dk))
        if expected is None:
            raise ValueError(f"illegal node delta ({ds}, {dk}) at move {i}")
        if move != expected:
            raise ValueError(f"move {i} labelled {move}, geometry says {expected}")
        k2 = a2 - profile.z0
        if not (0 <= k2 < profile.nz) or profile.blocked[s2, k2]:
            raise ValueError(f"node {i + 1} = (step {s2}, {a2} m) is blocked")
        if ds == 1:
            dpos = float(pos[s2] - pos[s1])
            want = dpos if dk == 0 else math.sqrt(dpos * dpos + 1.0)
        else:
            want = 1.0
        if abs(path.trace_lengths_m[i] - want) > 1e-9:
            raise ValueError(f"move {i} length {path.trace_lengths_m[i]} != {want}")
        if path.trace_sinr_db[i] != float(profile.sinr_db[s2, k2]):
            raise ValueError(f"move {i} SINR does not match the profile")
    k0 = nodes[0][1] - profile.z0
    if not (0 <= k0 < profile.nz) or profile.blocked[0, k0]:
        raise ValueError("start node is blocked")
    if abs(path.length_m - path_length(path)) > 1e-9:
        raise ValueError("length_m does not match the trace")


def flight_path_to_csv(path: FlightPath, profile: PathProfile | None = None) -> str:
    """One row per node: index, step, cumulative path distance, altitude,
    SINR at the node, and the move that reached it."""
    lines = ["node_index,step,cum_distance_m,altitude_m,sinr_db,move_type"]
    cum = 0.0
    for i, (s, alt) in enumerate(path.nodes):
        if i == 0:
            if profile is not None:
                sinr = f"{float(profile.sinr_db[s, alt - profile.z0]):.6f}"
            else:
                sinr = ""
            move = ""
        else:
            cum += float(path.trace_lengths_m[i - 1])
            sinr = f"{path.trace_sinr_db[i - 1]:.6f}"
            move = path.moves[i - 1]
        lines.append(f"{i},{s},{cum:.6f},{alt},{sinr},{move}")
    return "\n".join(lines) + "\n"
