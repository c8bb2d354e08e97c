"""Coverage-aware UAV path planning over simulated cellular networks.

The package computes altitude-dependent SINR volumes over a 3D city model
and plans UAV altitude trajectories along fixed ground tracks with four
strategies (constant clearing altitude, fixed height above ground, per-step
best-coverage height, and coverage-aware A*), plus a Monte-Carlo harness
comparing them on mean SINR, outage, and path-length overhead.
"""

from .errors import (ConfigError, DegenerateTrackError, DomainError,
                     GeometryError, GridBoundsError, GridDimensionError,
                     NoAirspaceError, NoPathError, ParameterError,
                     RasterFormatError, ScenarioError,
                     UnsupportedResolutionError)
from .evaluation import (CDF_MAX_POINTS, DEFAULT_MIN_SEPARATION_M,
                         OUTAGE_THRESHOLD_DB, EvaluationReport, OutageRun,
                         PlannerBandStats, TrajectoryStats, downsample_cdf,
                         empirical_cdf, outage_runs, report_to_dict,
                         report_to_json, sample_endpoints, summarize,
                         write_report_files)
from .planners import (PLANNERS, AStarConfig, FlightPath, check_flight_path,
                       flight_path_to_csv, path_length, plan, plan_agl,
                       plan_caa_star, plan_och, plan_straight, step_cost)
from .profiles import (GroundTrack, PathProfile, extract_profile,
                       profile_to_csv, rasterize_track)
from .radio import (BUILTIN_BANDS, UNREACHABLE_SERVING, BandConfig,
                    CoverageVolume, PathLossParams, SinrSample,
                    band_fingerprint, band_from_dict, band_to_dict,
                    compute_coverage_volume, compute_coverage_volumes, is_los,
                    load_volume, los_clearance_m, noise_power_dbm,
                    path_loss_db, resolve_band, save_volume, sinr_at)
from .terrain import (BaseStation, CityParams, CityScenario, HeightGrid, Roi,
                      generate_city, load_scenario, min_safe_altitude,
                      min_safe_altitude_cells, parse_surface_raster,
                      save_scenario, scenario_fingerprint,
                      serialize_surface_raster)

__version__ = "0.1.0"
