"""The four altitude planners and their shared path machinery."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import skycover as sc
from skycover.errors import NoAirspaceError, NoPathError, ParameterError
from skycover.profiles import PathProfile

from conftest import (brute_force_cost, dijkstra_cost, edge_cost, make_profile,
                      mean_sinr, random_profile)

SQRT2 = math.sqrt(2.0)
FLOOR_MILLI = sc.AStarConfig(edge_cost_floor=0.001)


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------

def test_step_cost_at_threshold():
    assert sc.step_cost(1.0, -3.0, FLOOR_MILLI) == pytest.approx(1.0)


def test_step_cost_below_threshold():
    assert sc.step_cost(1.0, -6.0, FLOOR_MILLI) == pytest.approx(3.0)


def test_step_cost_clamped_at_floor():
    assert sc.step_cost(1.0, 12.0, FLOOR_MILLI) == pytest.approx(0.001)


def test_step_cost_unclamped_goes_negative():
    cfg = sc.AStarConfig(allow_negative_costs=True)
    assert sc.step_cost(1.0, 12.0, cfg) == pytest.approx(-9.0)


def test_astar_config_validation():
    with pytest.raises(ParameterError):
        sc.AStarConfig(cost_normalization=0.0)
    with pytest.raises(ParameterError):
        sc.AStarConfig(edge_cost_floor=-0.1)


# ---------------------------------------------------------------------------
# Path length and CSV export
# ---------------------------------------------------------------------------

def _hand_path(moves, lengths, sinr, nodes):
    return sc.FlightPath(planner="straight", nodes=nodes, moves=moves,
                         length_m=float(np.sum(lengths)) if moves else 0.0,
                         trace_lengths_m=np.asarray(lengths, float),
                         trace_sinr_db=np.asarray(sinr, float))


def test_path_length_horizontal_run():
    p = _hand_path(tuple("H" * 10), [1.0] * 10, [0.0] * 10,
                   tuple((s, 10) for s in range(11)))
    assert sc.path_length(p) == pytest.approx(10.0)


def test_path_length_mixed_moves():
    p = _hand_path(("H",) * 5 + ("D+",) * 5, [1.0] * 5 + [SQRT2] * 5,
                   [0.0] * 10,
                   tuple((s, 10) for s in range(6))
                   + tuple((5 + i, 10 + i) for i in range(1, 6)))
    assert sc.path_length(p) == pytest.approx(12.071, abs=1e-3)


def test_path_length_single_node():
    p = _hand_path((), [], [], ((0, 10),))
    assert sc.path_length(p) == 0.0


def test_flight_path_csv_layout():
    prof = make_profile(np.full((4, 12), -3.0, np.float32), min_alt=[10] * 4)
    path = sc.plan_straight(prof)
    text = sc.flight_path_to_csv(path, prof)
    lines = text.strip().split("\n")
    assert lines[0] == "node_index,step,cum_distance_m,altitude_m,sinr_db,move_type"
    assert len(lines) == 1 + len(path.nodes)
    first = lines[1].split(",")
    assert first[:4] == ["0", "0", "0.000000", "10"]
    assert first[5] == ""
    last = lines[-1].split(",")
    assert float(last[2]) == pytest.approx(path.length_m)
    assert last[5] == "H"
    # without a profile the first node has no SINR column value
    assert sc.flight_path_to_csv(path).split("\n")[1].split(",")[4] == ""


# ---------------------------------------------------------------------------
# Straight planner
# ---------------------------------------------------------------------------

def test_straight_clears_highest_min_altitude():
    prof = make_profile(np.zeros((6, 20), np.float32),
                        min_alt=[10, 10, 10, 10, 10, 10])
    path = sc.plan_straight(prof)
    assert all(alt == 10 for _, alt in path.nodes)
    assert path.moves == ("H",) * 5
    assert path.length_m == pytest.approx(5.0)
    sc.check_flight_path(path, prof)


def test_straight_rounds_up_fractional_clearance():
    prof = make_profile(np.zeros((4, 20), np.float32),
                        min_alt=[10, 12.3, 11, 10])
    path = sc.plan_straight(prof)
    assert all(alt == 13 for _, alt in path.nodes)


def test_straight_raises_above_profile_ceiling():
    # profile whose altitude range stops under the clearing altitude
    prof = PathProfile(track=sc.rasterize_track((0, 0), (3, 0)), z0=0,
                       sinr_db=np.zeros((4, 3), np.float32),
                       blocked=np.zeros((4, 3), bool),
                       terrain_m=np.zeros(4), surface_m=np.zeros(4),
                       min_alt_m=np.array([0.0, 5.5, 0.0, 0.0]))
    with pytest.raises(NoAirspaceError):
        sc.plan_straight(prof)


# ---------------------------------------------------------------------------
# AGL planner
# ---------------------------------------------------------------------------

def test_agl_follows_terrain_and_lifts_over_buildings():
    # open terrain at 5 m -> 27; a 30 m building -> 33; a 23 m rooftop
    # still sits under the 22 m clearance -> 27
    terrain = [5.0, 0.0, 5.0]
    surface = [5.0, 30.0, 28.0]
    min_alt = [15.0, 33.0, 31.0]
    prof = make_profile(np.zeros((3, 45), np.float32), min_alt=min_alt,
                        terrain=terrain, surface=surface)
    path = sc.plan_agl(prof)
    alts_per_step = {0: set(), 1: set(), 2: set()}
    for s, alt in path.nodes:
        alts_per_step[s].add(alt)
    # each step's target is attained (climb legs arrive at it, descents end on it)
    assert path.nodes[0] == (0, 27)
    assert 33 in alts_per_step[1]
    assert path.nodes[-1] == (2, 31)
    sc.check_flight_path(path, prof)


def test_agl_rounds_half_up():
    prof = make_profile(np.zeros((2, 40), np.float32), terrain=[4.6, 4.4])
    path = sc.plan_agl(prof)
    assert path.nodes[0][1] == 27     # 26.6 rounds up
    assert path.nodes[-1][1] == 26    # 26.4 rounds down


def test_agl_custom_clearance_and_validation():
    prof = make_profile(np.zeros((3, 20), np.float32))
    path = sc.plan_agl(prof, clearance_m=5.0)
    assert all(alt == 5 for _, alt in path.nodes)
    with pytest.raises(ParameterError):
        sc.plan_agl(prof, clearance_m=0.0)


def test_agl_clipped_to_profile_ceiling():
    prof = make_profile(np.zeros((3, 10), np.float32))
    path = sc.plan_agl(prof, clearance_m=50.0)
    assert all(alt == 9 for _, alt in path.nodes)


def test_agl_climb_descend_moves_are_legal():
    # 0 -> 6 climb: verticals then one diagonal; 6 -> 0 descent mirrors it
    prof = make_profile(np.zeros((3, 12), np.float32), min_alt=[0, 6, 0])
    path = sc.plan_agl(prof, clearance_m=1.0)
    sc.check_flight_path(path, prof)
    assert path.nodes[0] == (0, 1)
    assert (1, 6) in path.nodes
    assert path.nodes[-1] == (2, 1)
    # descent advances before dropping, so no node undercuts a step target
    for s, alt in path.nodes:
        assert alt >= prof.min_alt_m[s]


# ---------------------------------------------------------------------------
# OCH planner
# ---------------------------------------------------------------------------

def test_och_picks_argmax_lowest_tie():
    sinr = np.array([[0.0, 5.0, 5.0], [1.0, 9.0, 9.0]], dtype=np.float32)
    path = sc.plan_och(make_profile(sinr))
    assert [alt for _, alt in path.nodes] == [1, 1]


def test_och_ignores_blocked_maxima():
    sinr = np.array([[9.0, 5.0, 1.0], [9.0, 5.0, 1.0]], dtype=np.float32)
    prof = make_profile(sinr, min_alt=[1, 1])
    path = sc.plan_och(prof)
    assert [alt for _, alt in path.nodes] == [1, 1]


def test_och_climb_uses_verticals_then_diagonal():
    ns, nz = 2, 60
    sinr = np.zeros((ns, nz), dtype=np.float32)
    sinr[0, 20] = 10.0
    sinr[1, 50] = 10.0
    path = sc.plan_och(make_profile(sinr))
    assert path.nodes[0] == (0, 20)
    assert path.nodes[-1] == (1, 50)
    assert path.moves == ("V+",) * 29 + ("D+",)
    assert path.length_m == pytest.approx(29.0 + SQRT2, abs=1e-9)


# ---------------------------------------------------------------------------
# Coverage-aware A*
# ---------------------------------------------------------------------------

def test_caa_star_uniform_sinr_flies_straight_and_low():
    prof = make_profile(np.full((8, 24), -3.0, np.float32), min_alt=[10] * 8)
    path = sc.plan_caa_star(prof)
    assert path.moves == ("H",) * 7
    assert all(alt == 10 for _, alt in path.nodes)
    assert path.total_cost == pytest.approx(7.0)
    sc.check_flight_path(path, prof)


def test_caa_star_climbs_over_weak_coverage_slab():
    ns, nz = 12, 30
    sinr = np.full((ns, nz), 0.0, dtype=np.float32)
    sinr[4:8, :15] = -20.0  # deep outage pocket at low altitude
    prof = make_profile(sinr, min_alt=[5] * ns)
    cfg = sc.AStarConfig()
    path = sc.plan_caa_star(prof, cfg)
    sc.check_flight_path(path, prof)
    arrival = dict(zip(path.nodes[1:], path.trace_sinr_db))
    assert all(v > -20.0 for v in arrival.values())
    # beats the all-low alternative on search cost
    low = [(0, 5)] + [(s, 5) for s in range(1, ns)]
    low_cost = sum(edge_cost(1.0, float(sinr[s, 5]), cfg) for s in range(1, ns))
    assert path.total_cost < low_cost


def test_caa_star_no_route_raises():
    ns, nz = 4, 6
    wall = np.zeros((ns, nz), dtype=bool)
    wall[2, 1:] = True  # only the bottom cell open at step 2
    prof = make_profile(np.zeros((ns, nz), np.float32), blocked=wall)
    wall2 = wall.copy()
    wall2[2, 1:] = True
    wall2[1, 0] = True  # and the bottom cell unreachable next to it
    wall2[1, 1] = True
    prof2 = make_profile(np.zeros((ns, nz), np.float32), blocked=wall2)
    sc.plan_caa_star(prof)  # squeeze through the gap is fine
    with pytest.raises(NoPathError):
        sc.plan_caa_star(prof2)


def test_caa_star_anchored_endpoints():
    ns = 10
    prof = make_profile(np.full((ns, 16), -3.0, np.float32),
                        min_alt=[10] + [0] * (ns - 1))
    cfg = sc.AStarConfig()
    path = sc.plan_caa_star(prof, cfg, free_anchors=False)
    assert path.nodes[0] == (0, 10)
    assert path.nodes[-1] == (ns - 1, 0)
    assert path.total_cost == pytest.approx(
        dijkstra_cost(prof, cfg, free_anchors=False))
    sc.check_flight_path(path, prof)


def test_caa_star_matches_dijkstra_on_random_profiles():
    rng = np.random.default_rng(12)
    cfg = sc.AStarConfig()
    for trial in range(15):
        prof = random_profile(rng, ns=30, nz=40,
                              wall_prob=0.1 if trial % 2 else 0.0)
        path = sc.plan_caa_star(prof, cfg)
        assert path.total_cost == dijkstra_cost(prof, cfg), f"trial {trial}"
        sc.check_flight_path(path, prof)


def test_caa_star_matches_dijkstra_anchored():
    rng = np.random.default_rng(13)
    cfg = sc.AStarConfig(sinr_threshold_db=-5.0, cost_normalization=2.0,
                         edge_cost_floor=0.35)
    for trial in range(10):
        prof = random_profile(rng, ns=25, nz=30)
        path = sc.plan_caa_star(prof, cfg, free_anchors=False)
        assert path.total_cost == dijkstra_cost(prof, cfg, free_anchors=False)


def test_caa_star_matches_brute_force_on_tiny_profiles():
    rng = np.random.default_rng(14)
    cfg = sc.AStarConfig()
    for trial in range(10):
        prof = random_profile(rng, ns=8, nz=6,
                              wall_prob=0.15 if trial % 2 else 0.0)
        path = sc.plan_caa_star(prof, cfg)
        assert path.total_cost == brute_force_cost(prof, cfg), f"trial {trial}"


def test_cost_normalization_scale_equivalence():
    # multiplying the normalization by m re-weights the objective: paths
    # minimizing L + S/(m n) are exactly those minimizing m L + S/n
    rng = np.random.default_rng(15)
    prof = random_profile(rng, ns=5, nz=4)
    cfg = sc.AStarConfig(allow_negative_costs=True)
    m = 3.0

    paths = []

    def enumerate_paths(s, k, visited, acc):
        if s == prof.n_steps - 1:
            paths.append(tuple(acc))
            return
        for dk in (0, 1, -1):
            k2 = k + dk
            if 0 <= k2 < prof.nz and not prof.blocked[s + 1, k2]:
                enumerate_paths(s + 1, k2, 1 << k2, acc + [(s + 1, k2)])
        for dk in (1, -1):
            k2 = k + dk
            if (0 <= k2 < prof.nz and not prof.blocked[s, k2]
                    and not (visited >> k2) & 1):
                enumerate_paths(s, k2, visited | (1 << k2), acc + [(s, k2)])

    for k0 in range(prof.nz):
        if not prof.blocked[0, k0]:
            enumerate_paths(0, k0, 1 << k0, [(0, k0)])
    assert len(paths) > 50

    pos = prof.track.step_positions
    sinr = prof.sinr_db.astype(np.float64)

    def split_cost(nodes):
        length = penalty = 0.0
        for (s1, k1), (s2, k2) in zip(nodes, nodes[1:]):
            if s2 > s1:
                dxm = pos[s2] - pos[s1]
                length += dxm if k2 == k1 else math.sqrt(dxm * dxm + 1.0)
            else:
                length += 1.0
            penalty += cfg.sinr_threshold_db - sinr[s2, k2]
        return length, penalty

    costs = [split_cost(p) for p in paths]
    n = cfg.cost_normalization
    j_scaled = [length + pen / (m * n) for length, pen in costs]
    j_reweighted = [m * length + pen / n for length, pen in costs]
    assert int(np.argmin(j_scaled)) == int(np.argmin(j_reweighted))
    assert min(j_reweighted) == pytest.approx(m * min(j_scaled), rel=1e-12)


def test_plan_dispatch():
    prof = make_profile(np.zeros((4, 12), np.float32), min_alt=[5] * 4)
    for name in sc.PLANNERS:
        path = sc.plan(name, prof)
        assert path.planner == ("agl22" if name == "agl22" else name)
        sc.check_flight_path(path, prof)
    with pytest.raises(ParameterError, match="unknown planner"):
        sc.plan("zigzag", prof)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_all_planners_emit_valid_paths(seed):
    # blocked regions are per-step altitude prefixes, as extracted profiles
    # guarantee; mid-air obstructions are exercised in the caastar tests
    rng = np.random.default_rng(seed)
    prof = random_profile(rng, ns=int(rng.integers(2, 14)),
                          nz=int(rng.integers(4, 16)))
    for name in sc.PLANNERS:
        path = sc.plan(name, prof)
        sc.check_flight_path(path, prof)
        assert path.length_m >= prof.track.length_m - 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_och_beats_straight_when_sinr_is_altitude_only(seed):
    rng = np.random.default_rng(seed)
    ns, nz = 8, 12
    column = rng.uniform(-10.0, 10.0, nz).astype(np.float32)
    prof = make_profile(np.tile(column, (ns, 1)),
                        min_alt=[int(rng.integers(0, 4))] * ns)
    och = sc.plan_och(prof)
    straight = sc.plan_straight(prof)
    assert mean_sinr(och) >= mean_sinr(straight) - 1e-9


# ---------------------------------------------------------------------------
# Validation helper
# ---------------------------------------------------------------------------

def test_check_flight_path_catches_tampering():
    prof = make_profile(np.arange(60, dtype=np.float32).reshape(5, 12),
                        min_alt=[3] * 5)
    good = sc.plan_caa_star(prof)
    sc.check_flight_path(good, prof)

    def rebuild(**kw):
        base = dict(planner=good.planner, nodes=good.nodes, moves=good.moves,
                    length_m=good.length_m,
                    trace_lengths_m=good.trace_lengths_m.copy(),
                    trace_sinr_db=good.trace_sinr_db.copy())
        base.update(kw)
        return sc.FlightPath(**base)

    wrong_moves = ("V+",) + good.moves[1:]
    with pytest.raises(ValueError):
        sc.check_flight_path(rebuild(moves=wrong_moves), prof)

    lengths = good.trace_lengths_m.copy()
    lengths[0] += 0.5
    with pytest.raises(ValueError):
        sc.check_flight_path(rebuild(trace_lengths_m=lengths), prof)

    sinr = good.trace_sinr_db.copy()
    sinr[-1] += 1.0
    with pytest.raises(ValueError):
        sc.check_flight_path(rebuild(trace_sinr_db=sinr), prof)

    with pytest.raises(ValueError):
        sc.check_flight_path(
            rebuild(nodes=good.nodes[:-1], moves=good.moves[:-1],
                    trace_lengths_m=good.trace_lengths_m[:-1],
                    trace_sinr_db=good.trace_sinr_db[:-1]), prof)

    with pytest.raises(ValueError):
        sc.check_flight_path(rebuild(length_m=good.length_m + 1.0), prof)
