"""Simulator and verification laboratory for 1-D Schrodinger map flow.

The package evolves closed loops (and decaying lines) in Kahler targets by
the direct geometric flow, reduces solutions to complex coefficient fields
through parallel frames, tracks loop holonomy by three independent routes,
and checks the dispersive estimates that the reduced equation is expected
to satisfy.
"""

__version__ = "0.1.0"

from .errors import (
    BlowUpSuspectedError,
    ConfigError,
    InconsistentHolonomyError,
    NoConvergenceError,
    OffManifoldError,
    RejectedStepError,
    ResolutionError,
    SingularChartError,
    SmflowError,
    UnsupportedCombinationError,
    UnsupportedOperationError,
)
from .spectral import SpectralGrid

__all__ = [
    "BlowUpSuspectedError",
    "ConfigError",
    "InconsistentHolonomyError",
    "NoConvergenceError",
    "OffManifoldError",
    "RejectedStepError",
    "ResolutionError",
    "SingularChartError",
    "SmflowError",
    "SpectralGrid",
    "UnsupportedCombinationError",
    "UnsupportedOperationError",
    "__version__",
]
