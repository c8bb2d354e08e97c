"""Monte-Carlo evaluation of planners over random endpoint pairs.

Pipeline: sample endpoint pairs inside the ROI, rasterize the ground track,
extract a profile per band, run every planner, then pool per-trajectory
statistics into per-(planner, band) aggregates: length-weighted mean SINR
(dB domain), length-weighted outage probability at a -6 dB threshold,
outage run lengths and their distribution, and path length normalized by
the straight planner's length for the same pair.

Aggregation walks pair-indexed result slots in order, so the report is
byte-identical no matter how many workers produced the slots.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoAirspaceError, NoPathError, ParameterError
from .planners import PLANNERS, AStarConfig, FlightPath, plan
from .profiles import extract_profile, rasterize_track
from .radio import (BandConfig, CoverageVolume, band_fingerprint,
                    compute_coverage_volumes)
from .terrain import CityScenario, Roi, scenario_fingerprint

OUTAGE_THRESHOLD_DB = -6.0
DEFAULT_MIN_SEPARATION_M = 100.0
CDF_MAX_POINTS = 512


@dataclass(frozen=True)
class OutageRun:
    """Maximal stretch of path flown at SINR <= threshold."""

    start_distance_m: float
    length_m: float

    def __post_init__(self):
        if self.length_m <= 0.0:
            raise ParameterError("outage runs must have positive length")


def outage_runs(path: FlightPath,
                threshold_db: float = OUTAGE_THRESHOLD_DB) -> list[OutageRun]:
    """Maximal consecutive segment runs whose arrival SINR <= threshold."""
    runs: list[OutageRun] = []
    cum = 0.0
    run_start = None
    run_len = 0.0
    for length, sinr in zip(path.trace_lengths_m, path.trace_sinr_db):
        if sinr <= threshold_db:
            if run_start is None:
                run_start = cum
                run_len = 0.0
            run_len += float(length)
        elif run_start is not None:
            runs.append(OutageRun(run_start, run_len))
            run_start = None
        cum += float(length)
    if run_start is not None:
        runs.append(OutageRun(run_start, run_len))
    return runs


def empirical_cdf(values) -> list[tuple[float, float]]:
    """Sorted (value, fraction <= value) step points; ends at 1.0."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("empirical_cdf needs at least one value")
    uniq, counts = np.unique(arr, return_counts=True)
    frac = np.cumsum(counts) / arr.size
    return list(zip(uniq.tolist(), frac.tolist()))


def _weighted_cdf(values: np.ndarray, weights: np.ndarray) -> list[tuple[float, float]]:
    """CDF where each value carries a weight (here: segment length)."""
    if values.size == 0:
        raise DomainError("weighted CDF needs at least one value")
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    uniq = np.unique(v)
    idx = np.searchsorted(v, uniq, side="right") - 1
    frac = cw[idx] / cw[-1]
    return list(zip(uniq.tolist(), frac.tolist()))


def downsample_cdf(points: list[tuple[float, float]],
                   max_points: int = CDF_MAX_POINTS) -> list[tuple[float, float]]:
    """Thin a step-function point set, keeping the first and last points."""
    if len(points) <= max_points:
        return points
    idx = np.unique(np.round(np.linspace(0, len(points) - 1, max_points)).astype(int))
    return [points[i] for i in idx]


def sample_endpoints(roi: Roi, n: int, seed: int,
                     min_separation_m: float = DEFAULT_MIN_SEPARATION_M,
                     ) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """n uniform (start, goal) cell pairs with 2D separation >= the minimum.

    Rejection sampling: a candidate pair is redrawn whole until it meets
    the separation, so the sequence is deterministic in the seed.
    """
    if n < 1:
        raise ParameterError("need at least one endpoint pair")
    diag = float(np.hypot(roi.width - 1, roi.height - 1))
    if min_separation_m > diag:
        raise ParameterError(
            f"min separation {min_separation_m} m exceeds the ROI diagonal {diag:.1f} m")
    rng = np.random.default_rng(seed)
    pairs: list[tuple[tuple[int, int], tuple[int, int]]] = []
    attempts = 0
    while len(pairs) < n:
        sx, gx = rng.integers(roi.x0, roi.x1, size=2)
        sy, gy = rng.integers(roi.y0, roi.y1, size=2)
        attempts += 1
        if attempts > 1000 * n + 1000:
            raise ParameterError("endpoint sampling did not converge; "
                                 "separation too close to the ROI diagonal")
        d = float(np.hypot(int(gx) - int(sx), int(gy) - int(sy)))
        if d >= min_separation_m and d > 0.0:
            pairs.append(((int(sx), int(sy)), (int(gx), int(gy))))
    return pairs


# ---------------------------------------------------------------------------
# Per-pair evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryStats:
    """Everything the aggregator needs from one planned trajectory."""

    length_m: float
    len_sinr_sum: float
    seg_len: np.ndarray
    seg_sinr: np.ndarray
    runs: tuple[OutageRun, ...]
    norm_length: float


def evaluate_pair(scenario: CityScenario, volumes: dict[str, CoverageVolume],
                  pair: tuple[tuple[int, int], tuple[int, int]],
                  planners: tuple[str, ...], astar_config: AStarConfig,
                  outage_threshold_db: float,
                  ) -> dict[tuple[str, str], TrajectoryStats] | str:
    """Plan every requested planner on every band for one endpoint pair.

    Returns the per-(planner, band) statistics, or a failure reason string
    when any trajectory cannot be planned — the caller then drops the pair
    for all planners and bands to keep comparisons paired.
    """
    try:
        track = rasterize_track(*pair)
    except Exception as e:  # degenerate pairs are sampled out, but be safe
        return f"track: {e}"
    out: dict[tuple[str, str], TrajectoryStats] = {}
    for band_name, volume in volumes.items():
        try:
            profile = extract_profile(volume, scenario, track)
        except NoAirspaceError as e:
            return f"{band_name}: {e}"
        paths: dict[str, FlightPath] = {}
        try:
            paths["straight"] = plan("straight", profile)
            for name in planners:
                if name not in paths:
                    paths[name] = plan(name, profile, astar_config)
        except (NoAirspaceError, NoPathError) as e:
            return f"{band_name}: {e}"
        base = paths["straight"].length_m
        for name in planners:
            p = paths[name]
            out[(name, band_name)] = TrajectoryStats(
                length_m=p.length_m,
                len_sinr_sum=float(np.dot(p.trace_lengths_m, p.trace_sinr_db)),
                seg_len=p.trace_lengths_m,
                seg_sinr=p.trace_sinr_db,
                runs=tuple(outage_runs(p, outage_threshold_db)),
                norm_length=p.length_m / base,
            )
    return out


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlannerBandStats:
    """Aggregates for one planner on one band over all used pairs."""

    planner: str
    band: str
    n_trajectories: int
    total_length_m: float
    mean_length_m: float
    mean_sinr_db: float
    outage_probability: float
    total_outage_length_m: float
    n_outage_runs: int
    mean_outage_duration_m: float
    mean_normalized_length: float
    sinr_cdf: list[tuple[float, float]]
    outage_cdf: list[tuple[float, float]]


@dataclass(frozen=True)
class EvaluationReport:
    """Full evaluation result plus the configuration that produced it."""

    scenario_fp: str
    band_fps: dict[str, str]
    bands: tuple[str, ...]
    planners: tuple[str, ...]
    n_pairs: int
    n_pairs_used: int
    excluded_pairs: tuple[int, ...]
    endpoint_seed: int | None
    min_separation_m: float
    outage_threshold_db: float
    astar: AStarConfig
    stats: dict[tuple[str, str], PlannerBandStats]


def _aggregate(planner: str, band: str, rows: list[TrajectoryStats],
               ) -> PlannerBandStats:
    n = len(rows)
    total_len = float(np.sum(np.asarray([r.length_m for r in rows])))
    len_sinr = float(np.sum(np.asarray([r.len_sinr_sum for r in rows])))
    run_lengths = [run.length_m for r in rows for run in r.runs]
    total_outage = float(np.sum(np.asarray(run_lengths))) if run_lengths else 0.0
    seg_len = np.concatenate([r.seg_len for r in rows]) if rows else np.empty(0)
    seg_sinr = np.concatenate([r.seg_sinr for r in rows]) if rows else np.empty(0)
    norm = [r.norm_length for r in rows]
    return PlannerBandStats(
        planner=planner, band=band, n_trajectories=n,
        total_length_m=total_len,
        mean_length_m=total_len / n if n else 0.0,
        mean_sinr_db=len_sinr / total_len if total_len else 0.0,
        outage_probability=total_outage / total_len if total_len else 0.0,
        total_outage_length_m=total_outage,
        n_outage_runs=len(run_lengths),
        mean_outage_duration_m=(total_outage / len(run_lengths)
                                if run_lengths else 0.0),
        mean_normalized_length=float(np.mean(np.asarray(norm))) if norm else 0.0,
        sinr_cdf=(downsample_cdf(_weighted_cdf(seg_sinr, seg_len))
                  if seg_sinr.size else []),
        outage_cdf=(downsample_cdf(empirical_cdf(run_lengths))
                    if run_lengths else []),
    )


def summarize(scenario: CityScenario, bands: list[BandConfig],
              planners: tuple[str, ...],
              pairs: list[tuple[tuple[int, int], tuple[int, int]]],
              *, astar_config: AStarConfig | None = None,
              outage_threshold_db: float = OUTAGE_THRESHOLD_DB,
              endpoint_seed: int | None = None,
              min_separation_m: float = DEFAULT_MIN_SEPARATION_M,
              workers: int = 1,
              volumes: dict[str, CoverageVolume] | None = None,
              ) -> EvaluationReport:
    """Evaluate all (planner, band) combinations over the endpoint pairs.

    Pairs where any trajectory fails are excluded from every aggregate.
    The result is a pure function of its inputs; the worker count only
    changes wall-clock time.
    """
    if not pairs:
        raise ParameterError("need at least one endpoint pair")
    for name in planners:
        if name not in PLANNERS:
            raise ParameterError(f"unknown planner '{name}'")
    if len(set(b.name for b in bands)) != len(bands) or not bands:
        raise ParameterError("bands must be non-empty and uniquely named")
    cfg = astar_config or AStarConfig()
    if volumes is None:
        volumes = compute_coverage_volumes(scenario, bands, workers=workers)
    else:
        missing = [b.name for b in bands if b.name not in volumes]
        if missing:
            raise ParameterError(f"no volume supplied for bands: {missing}")
        volumes = {b.name: volumes[b.name] for b in bands}

    slots: list[dict | str | None] = [None] * len(pairs)

    def work(i: int) -> None:
        slots[i] = evaluate_pair(scenario, volumes, pairs[i], planners,
                                 cfg, outage_threshold_db)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(len(pairs))))
    else:
        for i in range(len(pairs)):
            work(i)

    excluded = tuple(i for i, s in enumerate(slots) if isinstance(s, str))
    stats: dict[tuple[str, str], PlannerBandStats] = {}
    for name in planners:
        for band in bands:
            rows = [slots[i][(name, band.name)]
                    for i in range(len(pairs)) if i not in excluded]
            stats[(name, band.name)] = _aggregate(name, band.name, rows)
    return EvaluationReport(
        scenario_fp=scenario_fingerprint(scenario),
        band_fps={b.name: band_fingerprint(b) for b in bands},
        bands=tuple(b.name for b in bands),
        planners=tuple(planners),
        n_pairs=len(pairs),
        n_pairs_used=len(pairs) - len(excluded),
        excluded_pairs=excluded,
        endpoint_seed=endpoint_seed,
        min_separation_m=min_separation_m,
        outage_threshold_db=outage_threshold_db,
        astar=cfg,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def report_to_dict(report: EvaluationReport) -> dict:
    """JSON-ready dict; keys are sorted at dump time for stable bytes."""
    results = {}
    for (planner, band), s in report.stats.items():
        results[f"{planner}/{band}"] = {
            "planner": s.planner,
            "band": s.band,
            "n_trajectories": s.n_trajectories,
            "total_length_m": s.total_length_m,
            "mean_length_m": s.mean_length_m,
            "mean_sinr_db": s.mean_sinr_db,
            "outage_probability": s.outage_probability,
            "total_outage_length_m": s.total_outage_length_m,
            "n_outage_runs": s.n_outage_runs,
            "mean_outage_duration_m": s.mean_outage_duration_m,
            "mean_normalized_length": s.mean_normalized_length,
            "sinr_cdf": [[v, f] for v, f in s.sinr_cdf],
            "outage_cdf": [[v, f] for v, f in s.outage_cdf],
        }
    return {
        "config": {
            "scenario_fingerprint": report.scenario_fp,
            "band_fingerprints": report.band_fps,
            "bands": list(report.bands),
            "planners": list(report.planners),
            "n_pairs": report.n_pairs,
            "endpoint_seed": report.endpoint_seed,
            "min_separation_m": report.min_separation_m,
            "outage_threshold_db": report.outage_threshold_db,
            "astar": {
                "sinr_threshold_db": report.astar.sinr_threshold_db,
                "cost_normalization": report.astar.cost_normalization,
                "edge_cost_floor": report.astar.edge_cost_floor,
                "allow_negative_costs": report.astar.allow_negative_costs,
            },
        },
        "pairs": {
            "n_total": report.n_pairs,
            "n_used": report.n_pairs_used,
            "n_excluded": len(report.excluded_pairs),
            "excluded_indices": list(report.excluded_pairs),
        },
        "results": results,
    }


def report_to_json(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def write_report_files(report_dict: dict, out_dir) -> list[str]:
    """Write summary.csv and per-(planner, band) CDF CSVs from a report dict.

    Returns the written file names. Works from a freshly built report or
    one loaded back from report.json.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = ["planner,band,mean_sinr_db,outage_prob,mean_outage_m,mean_norm_length"]
    for key in sorted(report_dict["results"]):
        s = report_dict["results"][key]
        rows.append(f"{s['planner']},{s['band']},{s['mean_sinr_db']:.6f},"
                    f"{s['outage_probability']:.6f},{s['mean_outage_duration_m']:.6f},"
                    f"{s['mean_normalized_length']:.6f}")
        for kind, field, header in (("sinr", "sinr_cdf", "sinr_db,fraction"),
                                    ("outage", "outage_cdf", "duration_m,fraction")):
            name = f"{kind}_cdf_{s['planner']}_{s['band']}.csv"
            lines = [header] + [f"{v:.6f},{f:.8f}" for v, f in s[field]]
            (out / name).write_text("\n".join(lines) + "\n")
            written.append(name)
    (out / "summary.csv").write_text("\n".join(rows) + "\n")
    written.append("summary.csv")
    return written
