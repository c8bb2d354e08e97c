"""Command-line entry point.

Subcommands:
  gen-city   generate a procedural scenario (dtm.asc, dsm.asc, scenario.json)
  coverage   compute and cache coverage volumes for one or more bands
  plan       plan a single endpoint pair and emit path CSVs
  evaluate   run the Monte-Carlo evaluation and write report.json + CSVs
  export     regenerate the CSV files from an existing report.json

Exit codes: 0 success, 1 runtime failure, 2 configuration error. All
randomness flows from explicit --seed values; commands are deterministic
given their config, and --workers only changes wall-clock time.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation, planners, profiles, radio, terrain
from .errors import (ConfigError, GridBoundsError, GridDimensionError,
                     ParameterError, RasterFormatError, ScenarioError,
                     UnsupportedResolutionError)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

_CONFIG_ERRORS = (ConfigError, ParameterError, ScenarioError, RasterFormatError,
                  GridDimensionError, UnsupportedResolutionError, GridBoundsError)

log = logging.getLogger("skycover")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _require_seed(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("this command is stochastic; pass --seed (or 'seed' in --config)")
    return int(seed)


def _resolve_bands(names: list[str] | None, cfg: dict) -> list[radio.BandConfig]:
    """Band names resolve against the built-ins; a name that is a path to a
    JSON file is loaded as a custom band definition."""
    names = names or cfg.get("bands") or sorted(radio.BUILTIN_BANDS)
    bands = []
    for name in names:
        if isinstance(name, dict):
            bands.append(radio.band_from_dict(name))
        elif name in radio.BUILTIN_BANDS:
            bands.append(radio.resolve_band(name))
        elif Path(name).suffix == ".json" and Path(name).is_file():
            bands.append(radio.band_from_dict(json.loads(Path(name).read_text())))
        else:
            bands.append(radio.resolve_band(name))  # raises with the known list
    return bands


def _resolve_planners(names: list[str] | None, cfg: dict) -> tuple[str, ...]:
    names = tuple(names or cfg.get("planners") or planners.PLANNERS)
    for n in names:
        if n not in planners.PLANNERS:
            raise ConfigError(
                f"unknown planner '{n}'; known: {', '.join(planners.PLANNERS)}")
    return names


def _astar_config(args, cfg: dict) -> planners.AStarConfig:
    base = dict(cfg.get("astar", {}))
    for flag, key in (("sinr_threshold_db", "sinr_threshold_db"),
                      ("cost_normalization", "cost_normalization"),
                      ("edge_cost_floor", "edge_cost_floor")):
        v = getattr(args, flag, None)
        if v is not None:
            base[key] = v
    if getattr(args, "allow_negative_costs", False):
        base["allow_negative_costs"] = True
    try:
        return planners.AStarConfig(**base)
    except TypeError as e:
        raise ConfigError(f"bad astar config: {e}") from None


def _load_scenario(path: str | None) -> terrain.CityScenario:
    if path is None:
        raise ConfigError("missing --scenario (path to scenario.json or its directory)")
    p = Path(path)
    if p.is_dir():
        p = p / "scenario.json"
    if not p.is_file():
        raise ConfigError(f"scenario descriptor not found: {p}")
    return terrain.load_scenario(p)


def _cached_volumes(scenario, bands, out_dir: Path, workers: int,
                    ) -> dict[str, radio.CoverageVolume]:
    """Load volumes cached under out_dir, computing and saving the rest.

    Cache names are keyed by content hashes of the scenario and band, so a
    changed input never reuses a stale file.
    """
    scen_fp = terrain.scenario_fingerprint(scenario)[:10]
    volumes: dict[str, radio.CoverageVolume] = {}
    missing = []
    for band in bands:
        path = out_dir / f"volume_{scen_fp}_{radio.band_fingerprint(band)[:10]}.svol"
        if path.is_file():
            log.info("reusing cached volume %s", path.name)
            volumes[band.name] = radio.load_volume(path)
        else:
            missing.append((band, path))
    if missing:
        computed = radio.compute_coverage_volumes(
            scenario, [b for b, _ in missing], workers=workers)
        out_dir.mkdir(parents=True, exist_ok=True)
        for band, path in missing:
            radio.save_volume(computed[band.name], path)
            volumes[band.name] = computed[band.name]
    return volumes


def _parse_cell(text: str, flag: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{flag} must be 'x,y' integers, got {text!r}") from None
    return x, y


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_city(args) -> int:
    cfg = _load_config(args.config)
    seed = _require_seed(args, cfg)
    fields = {f.name for f in dataclasses.fields(terrain.CityParams)}
    params_dict = {k: v for k, v in cfg.items() if k in fields}
    for name in fields:
        v = getattr(args, name, None)
        if v is not None:
            params_dict[name] = v
    unknown = set(cfg) - fields - {"seed"}
    if unknown:
        raise ConfigError(f"unknown gen-city config keys: {sorted(unknown)}")
    params = terrain.CityParams(**params_dict)
    scenario = terrain.generate_city(params, seed)
    out = Path(args.out)
    terrain.save_scenario(scenario, out, generator_meta={
        "params": dataclasses.asdict(params), "seed": seed})
    n_bldg = int(np.count_nonzero(scenario.building_mask))
    print(f"wrote scenario to {out}: {scenario.cols}x{scenario.rows} m, "
          f"{len(scenario.stations)} stations, {n_bldg} building cells, "
          f"roi {scenario.roi.width}x{scenario.roi.height} m")
    return EXIT_OK


def cmd_coverage(args) -> int:
    cfg = _load_config(args.config)
    scenario = _load_scenario(args.scenario or cfg.get("scenario"))
    bands = _resolve_bands(args.band, cfg)
    out = Path(args.out)
    volumes = _cached_volumes(scenario, bands, out, args.workers)
    for name in sorted(volumes):
        v = volumes[name]
        reachable = v.serving >= 0
        sinr = v.sinr_db[reachable]
        print(f"{name}: {v.nx}x{v.ny}x{v.nz} voxels ({int(reachable.sum())} reachable), "
              f"sinr min/mean/max = {sinr.min():.2f}/{sinr.mean():.2f}/{sinr.max():.2f} dB")
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _load_config(args.config)
    scenario = _load_scenario(args.scenario or cfg.get("scenario"))
    band_names = args.band or cfg.get("bands") or ["4g-1800"]
    if len(band_names) != 1:
        raise ConfigError("plan works on exactly one band")
    band = _resolve_bands(band_names, cfg)[0]
    names = _resolve_planners(args.planner, cfg)
    astar_cfg = _astar_config(args, cfg)
    start = _parse_cell(args.start, "--start")
    goal = _parse_cell(args.goal, "--goal")
    out = Path(args.out) if args.out else None
    if out is not None:
        volume = _cached_volumes(scenario, [band], out, args.workers)[band.name]
    else:
        volume = radio.compute_coverage_volumes(scenario, [band],
                                                workers=args.workers)[band.name]
    track = profiles.rasterize_track(start, goal)
    profile = profiles.extract_profile(volume, scenario, track)
    for name in names:
        path = planners.plan(name, profile, astar_cfg)
        planners.check_flight_path(path, profile)
        csv_text = planners.flight_path_to_csv(path, profile)
        mean = (float(np.dot(path.trace_lengths_m, path.trace_sinr_db)) / path.length_m
                if path.length_m else 0.0)
        print(f"{name}: length {path.length_m:.2f} m, mean sinr {mean:.2f} dB, "
              f"{len(path.nodes)} nodes")
        if out is not None:
            (out / f"path_{name}_{band.name}.csv").write_text(csv_text)
        else:
            print(csv_text, end="")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    seed = _require_seed(args, cfg)
    scenario = _load_scenario(args.scenario or cfg.get("scenario"))
    bands = _resolve_bands(args.band, cfg)
    names = _resolve_planners(args.planner, cfg)
    astar_cfg = _astar_config(args, cfg)
    n_pairs = args.pairs if args.pairs is not None else int(cfg.get("n_pairs", 200))
    min_sep = (args.min_separation_m if args.min_separation_m is not None
               else float(cfg.get("min_separation_m", evaluation.DEFAULT_MIN_SEPARATION_M)))
    threshold = (args.outage_threshold_db if args.outage_threshold_db is not None
                 else float(cfg.get("outage_threshold_db", evaluation.OUTAGE_THRESHOLD_DB)))
    out = Path(args.out)
    volumes = _cached_volumes(scenario, bands, out, args.workers)
    pairs = evaluation.sample_endpoints(scenario.roi, n_pairs, seed, min_sep)
    report = evaluation.summarize(
        scenario, bands, names, pairs, astar_config=astar_cfg,
        outage_threshold_db=threshold, endpoint_seed=seed,
        min_separation_m=min_sep, workers=args.workers, volumes=volumes)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(evaluation.report_to_json(report))
    evaluation.write_report_files(evaluation.report_to_dict(report), out)
    print(f"evaluated {report.n_pairs_used}/{report.n_pairs} pairs "
          f"({len(report.excluded_pairs)} excluded) over {len(bands)} bands, "
          f"{len(names)} planners -> {out / 'report.json'}")
    for key in sorted(report.stats):
        s = report.stats[key]
        print(f"  {s.planner:9s} {s.band:9s} mean_sinr {s.mean_sinr_db:7.2f} dB  "
              f"outage {s.outage_probability:.4f}  norm_len {s.mean_normalized_length:.4f}")
    return EXIT_OK


def cmd_export(args) -> int:
    path = Path(args.report)
    if not path.is_file():
        raise ConfigError(f"report file not found: {path}")
    try:
        report_dict = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from None
    if "results" not in report_dict:
        raise ConfigError(f"{path} does not look like an evaluation report")
    written = evaluation.write_report_files(report_dict, args.out)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skycover",
        description="Cellular-coverage-aware UAV path planning simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int, help="RNG seed (required for stochastic commands)")
    common.add_argument("--workers", type=int, default=1,
                        help="parallel workers (identical output for any value)")
    common.add_argument("--verbose", action="store_true", help="log progress details")

    astar = argparse.ArgumentParser(add_help=False)
    astar.add_argument("--sinr-threshold-db", type=float, dest="sinr_threshold_db",
                       help="search cost SINR threshold (default -3)")
    astar.add_argument("--cost-normalization", type=float, dest="cost_normalization",
                       help="search cost normalization (default 1.5)")
    astar.add_argument("--edge-cost-floor", type=float, dest="edge_cost_floor",
                       help="minimum clamped edge cost (default 0.2)")
    astar.add_argument("--allow-negative-costs", action="store_true",
                       dest="allow_negative_costs",
                       help="disable edge-cost clamping in the search")

    p = sub.add_parser("gen-city", parents=[common],
                       help="generate a procedural city scenario")
    p.add_argument("--out", required=True, help="output directory")
    for f in dataclasses.fields(terrain.CityParams):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, type=type(f.default), dest=f.name, default=None,
                       help=f"(default {f.default})")
    p.set_defaults(func=cmd_gen_city)

    p = sub.add_parser("coverage", parents=[common],
                       help="compute and cache coverage volumes")
    p.add_argument("--scenario", help="scenario.json or its directory")
    p.add_argument("--band", action="append",
                   help="band name or band JSON file (repeatable; default: all built-ins)")
    p.add_argument("--out", required=True, help="cache directory")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("plan", parents=[common, astar],
                       help="plan one endpoint pair and emit path CSVs")
    p.add_argument("--scenario", help="scenario.json or its directory")
    p.add_argument("--band", action="append", help="band name (default 4g-1800)")
    p.add_argument("--planner", action="append",
                   help=f"planner name (repeatable; default all: {', '.join(planners.PLANNERS)})")
    p.add_argument("--start", required=True, help="start cell 'x,y'")
    p.add_argument("--goal", required=True, help="goal cell 'x,y'")
    p.add_argument("--out", help="directory for path CSVs (default: print to stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("evaluate", parents=[common, astar],
                       help="Monte-Carlo evaluation over random endpoint pairs")
    p.add_argument("--scenario", help="scenario.json or its directory")
    p.add_argument("--band", action="append",
                   help="band name or band JSON file (repeatable; default: all built-ins)")
    p.add_argument("--planner", action="append",
                   help="planner name (repeatable; default: all)")
    p.add_argument("--pairs", type=int, help="number of endpoint pairs (default 200)")
    p.add_argument("--min-separation-m", type=float, dest="min_separation_m",
                   help="minimum endpoint separation (default 100)")
    p.add_argument("--outage-threshold-db", type=float, dest="outage_threshold_db",
                   help="outage SINR threshold (default -6)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", parents=[common],
                       help="regenerate CSV exports from an existing report.json")
    p.add_argument("--report", required=True, help="path to report.json")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
