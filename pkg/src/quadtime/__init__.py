"""Dissipative dynamics through the quadratic change of time theta = t^2/2.

A conservative second-order system x'' = -grad(phi)(x) started at rest,
rewritten in the time variable theta = t^2/2, follows its gradient flow
z' = -grad(phi)(z) up to a correction that vanishes with theta.  The
package follows that one substitution through four settings of
increasing structure:

  ode      finite-dimensional oscillators against their gradient flows
  gas      the 1d isentropic Euler system started at rest against its porous-
           medium / heat diffusion limit
  curves   parametric curve-shortening flow (the gradient flow of
           length) and its eps-regularized hyperbolic ancestor
  strings  the regularized string equations whose quadratic-time limit
           is curve shortening
  fields   the same dynamics in Eulerian form: a divergence-free
           current B on the torus with momentum P = div(B (x) B / |B|)

certify adds relative-entropy certificates for the Eulerian runs: a
family of integral inequalities indexed by smooth trial fields whose
margins must stay nonpositive on any dissipative trajectory.  cli wires
the experiments behind a config-driven command line runner.
"""

from .certify import (
    CertificateReport,
    CertParams,
    TrialTriple,
    WeakStrongReport,
    cert_params_for,
    certify,
    certify_klambda,
    compute_cstar,
    convexity_check,
    eta_defect,
    k_lambda,
    standard_trial_dictionary,
    weak_strong_experiment,
)
from .curves import (
    PeriodicCurve,
    curvature_vector,
    curve_length,
    make_circle,
    make_ellipse,
    make_trefoil,
    mean_radius,
    orthogonality_residual,
    run_curve_shortening,
    run_eps_flow,
    shrink_circle_oracle,
)
from .errors import (
    ConfigError,
    DegenerateCurve,
    GridMismatch,
    InvalidParams,
    InvalidTrial,
    IterationLimit,
    NumericalBlowup,
    QuadtimeError,
    ResolvabilityError,
    StateInvalid,
    StepRejected,
)
from .fields import (
    FieldState,
    LiftParams,
    apriori_bounds_check,
    compute_P,
    effective_radius,
    leray_project,
    lift_curve,
    lift_string_state,
    load_field_state,
    orthogonality_measure,
    residual_diagnostics,
    run_eulerian_short,
    save_field_state,
)
from .gas import (
    GasState1D,
    PressureLaw,
    euler_heat_compare,
    run_euler_to,
    run_porous_to,
)
from .ode import (
    linear_potential,
    log_cosh_potential,
    quadratic_potential,
    quadratic_time_compare,
    suite_potentials,
)
from .strings import run_string_to, string_at_rest, string_vs_shortening

__version__ = "0.1.0"

__all__ = [
    "CertParams",
    "CertificateReport",
    "ConfigError",
    "DegenerateCurve",
    "FieldState",
    "GasState1D",
    "GridMismatch",
    "InvalidParams",
    "InvalidTrial",
    "IterationLimit",
    "LiftParams",
    "NumericalBlowup",
    "PeriodicCurve",
    "PressureLaw",
    "QuadtimeError",
    "ResolvabilityError",
    "StateInvalid",
    "StepRejected",
    "TrialTriple",
    "WeakStrongReport",
    "apriori_bounds_check",
    "cert_params_for",
    "certify",
    "certify_klambda",
    "compute_P",
    "compute_cstar",
    "convexity_check",
    "curvature_vector",
    "curve_length",
    "effective_radius",
    "eta_defect",
    "euler_heat_compare",
    "k_lambda",
    "leray_project",
    "lift_curve",
    "lift_string_state",
    "linear_potential",
    "load_field_state",
    "log_cosh_potential",
    "make_circle",
    "make_ellipse",
    "make_trefoil",
    "mean_radius",
    "orthogonality_measure",
    "orthogonality_residual",
    "quadratic_potential",
    "quadratic_time_compare",
    "residual_diagnostics",
    "run_curve_shortening",
    "run_eps_flow",
    "run_euler_to",
    "run_eulerian_short",
    "run_porous_to",
    "run_string_to",
    "save_field_state",
    "shrink_circle_oracle",
    "standard_trial_dictionary",
    "string_at_rest",
    "string_vs_shortening",
    "suite_potentials",
    "weak_strong_experiment",
]
