"""Statistical stability of Lorenz-like flows, computed.

Ulam discretizations of a family of one-dimensional Lorenz-like maps,
Keller's oscillation seminorm, Green-Kubo variances, suspension flows with
logarithmic roofs and numerical checks on the classical Lorenz ODE.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    BranchRangeError,
    ConfigError,
    ConvergenceError,
    DegenerateVarianceError,
    DiscontinuityError,
    FitError,
    LorenzStabilityError,
    PreconditionError,
    PropertyViolation,
    ResourceError,
    TruncationError,
)
from .function_space import GridFunction, norm_11p, p_variation, seminorm_v11p  # noqa: E402
from .maps import DoublingMap, ModelMapParams, expansion_certificate  # noqa: E402
from .statistics import center_observable, clt_empirical, green_kubo_variance  # noqa: E402
from .suspension import FlowObservableSpec, SkewProduct, SuspensionSystem, flow_variance  # noqa: E402
from .transfer import invariant_density, stability_curve, ulam_matrix  # noqa: E402

__all__ = [
    "BlowUpError", "BranchRangeError", "ConfigError", "ConvergenceError",
    "DegenerateVarianceError", "DiscontinuityError", "FitError", "LorenzStabilityError",
    "PreconditionError", "PropertyViolation", "ResourceError", "TruncationError",
    "GridFunction", "norm_11p", "p_variation", "seminorm_v11p",
    "DoublingMap", "ModelMapParams", "expansion_certificate",
    "center_observable", "clt_empirical", "green_kubo_variance",
    "FlowObservableSpec", "SkewProduct", "SuspensionSystem", "flow_variance",
    "invariant_density", "stability_curve", "ulam_matrix",
]
