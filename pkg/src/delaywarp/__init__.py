"""delaywarp: time-transformations for DDEs with constant-plus-periodic delay.

Builds the strictly increasing map h from new time lambda to original time
t under which  x_dot(t) = A0 x(t) + A1 x(t - tau(t))  becomes a constant-
delay system with the scalar factor h_dot(lambda) in front of the state
matrices.  Provides first/second-order perturbative expansions of h, a
numerically exact seed-propagated construction, method-of-steps simulation
of both forms, and the feedback/PIE decomposition of the transformed
system for external robust-stability tooling.
"""

__version__ = "0.1.0"

from .abel import (
    KnotTableTransform,
    PropagatedTransform,
    SeedFunction,
    exact_transform,
    fit_seed,
    g,
    g_inverse,
    load_knot_table,
    propagate,
)
from .dde_sim import (
    DdeSystem,
    EquivalenceReport,
    ProbeVerdict,
    Trajectory,
    simulate_original,
    simulate_transformed,
    stability_probe,
    verify_equivalence,
)
from .errors import (
    DelayWarpError,
    HypothesisError,
    InvalidDelayError,
    MonotonicityError,
    ResonanceError,
    RootFindingError,
    SeedFitError,
    SimulationError,
    TransformDomainError,
)
from .periodic_delay import (
    FourierSeries,
    HypothesisReport,
    PeriodicDelay,
    delay_from_config,
    load_delay,
    sinusoid_delay,
)
from .perturbation import (
    ExpansionCoefficients,
    ResidualReport,
    SeriesTransform,
    SinusoidClosedForm,
    TimeTransform,
    abel_residual,
    closed_form_sinusoid,
    first_order_coeffs,
    min_h_dot,
    perturbative_transform,
    second_order_coeffs,
    seed_compatibility_error,
)
from .robust_decomp import (
    FeedbackForm,
    HdotBounds,
    PieOperatorData,
    PiOperator,
    PolyKernel,
    assemble_feedback_form,
    assemble_pie,
    compute_hdot_bounds,
    delta_signal,
    export_pie_json,
)

__all__ = [
    "__version__",
    "DelayWarpError", "HypothesisError", "InvalidDelayError", "MonotonicityError",
    "ResonanceError", "RootFindingError", "SeedFitError", "SimulationError",
    "TransformDomainError",
    "FourierSeries", "HypothesisReport", "PeriodicDelay", "delay_from_config",
    "load_delay", "sinusoid_delay",
    "ExpansionCoefficients", "ResidualReport", "SeriesTransform",
    "SinusoidClosedForm", "TimeTransform", "abel_residual",
    "closed_form_sinusoid", "first_order_coeffs", "min_h_dot",
    "perturbative_transform", "second_order_coeffs", "seed_compatibility_error",
    "KnotTableTransform", "PropagatedTransform", "SeedFunction",
    "exact_transform", "fit_seed", "g", "g_inverse", "load_knot_table",
    "propagate",
    "DdeSystem", "EquivalenceReport", "ProbeVerdict", "Trajectory",
    "simulate_original", "simulate_transformed", "stability_probe",
    "verify_equivalence",
    "FeedbackForm", "HdotBounds", "PieOperatorData", "PiOperator", "PolyKernel",
    "assemble_feedback_form", "assemble_pie", "compute_hdot_bounds",
    "delta_signal", "export_pie_json",
]
