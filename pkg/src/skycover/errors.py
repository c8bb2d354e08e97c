"""Exception types shared across the package.

Config-shaped problems (bad parameters, malformed inputs) subclass
ValueError so callers can catch broadly; runtime planning failures get
their own branch.
"""


class RasterFormatError(ValueError):
    """Raster header or data section is malformed; message names the offender."""


class GridDimensionError(ValueError):
    """Cell count in a raster body does not match the declared dimensions."""


class UnsupportedResolutionError(ValueError):
    """Raster cell size differs from the 1 m grid this package assumes."""


class GridBoundsError(ValueError):
    """A queried cell or point lies outside the grid."""


class ParameterError(ValueError):
    """Infeasible or inconsistent parameter combination."""


class DomainError(ValueError):
    """Numeric argument outside the valid domain of a model function."""


class ScenarioError(ValueError):
    """Scenario pieces are mutually inconsistent (dims, ROI, stations)."""


class GeometryError(ValueError):
    """A 3D query point violates a geometric precondition (e.g. underground)."""


class ConfigError(ValueError):
    """Bad run configuration handed to the CLI."""


class DegenerateTrackError(ValueError):
    """Start and goal rasterize to the same cell."""


class NoAirspaceError(RuntimeError):
    """A profile step has no unblocked altitude at all."""


class NoPathError(RuntimeError):
    """The planner could not connect start and goal."""
