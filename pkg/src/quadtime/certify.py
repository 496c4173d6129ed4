"""Relative-entropy certificates for dissipative field trajectories.

A trajectory (B, P) is tested against a family of integral inequalities
indexed by trial triples (b*, v*, A) with |b*| = 1 and ||A|| <= lambda.
The misalignment entropy eta = |B| - B.b* is nonnegative and vanishes
exactly when B is a nonnegative multiple of b*.  For each trial and each
frame time theta we evaluate the discounted margin

    e^{-r theta} int eta(theta)
      + int_0^theta e^{-r sigma} [ int P.(A - L3)
                                   + (r - c* - w) eta
                                   - B.(L2 + b* w) ] dsigma
      - int eta(0),

with w = A.(A + 2v*)/2.  Genuine dissipative trajectories keep every
margin nonpositive up to discretization, so a positive margin is a
certificate of failure.  The converse does not hold: a finite dictionary
of trials yields a necessary condition only, and reports say so.

The A-dependent part of the integrand is A.(P - rho v*) - rho|A|^2/2,
whose pointwise supremum over |A| <= lambda is the truncated kinetic
term K_lambda(rho, P - rho v*).  certify_klambda evaluates that variant
directly; dictionary margins lower-bound it and approach it as the
dictionary grows.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GridMismatch, InvalidParams, InvalidTrial
from .fields import _advect, _frame_spacing, spectral_gradient, with_momentum

UNIT_TOL = 1e-12
DICTIONARY_KIND = "finite trial dictionary (necessary condition only)"


def _resolve(spec, theta):
    return spec(theta) if callable(spec) else spec


@dataclass(frozen=True)
class TrialTriple:
    """Trial fields (b*, v*, A) with |b*| = 1 and ||A||_inf <= lam.

    Each field is either a static array of shape (d, n, ..., n) or a
    callable of theta returning one; None stands for the zero field.
    dbstar may supply the analytic theta-derivative of b*; otherwise a
    centered difference over the trajectory spacing is used for callables
    and zero for static arrays.
    """

    bstar: object
    vstar: object = None
    avec: object = None
    lam: float = 1.0
    name: str = "trial"
    dbstar: object = None

    def __post_init__(self):
        if self.lam <= 0:
            raise InvalidTrial("lambda must be positive")
        if not callable(self.bstar):
            self.bstar_at(0.0)
        if self.avec is not None and not callable(self.avec):
            self.a_at(0.0)

    def bstar_at(self, theta):
        b = np.asarray(_resolve(self.bstar, theta), dtype=float)
        norms = np.sqrt(np.sum(b * b, axis=0))
        if np.max(np.abs(norms - 1.0)) > UNIT_TOL:
            raise InvalidTrial("trial direction field must have unit length")
        return b

    def vstar_at(self, theta):
        if self.vstar is None:
            return np.zeros_like(self.bstar_at(theta))
        return np.asarray(_resolve(self.vstar, theta), dtype=float)

    def a_at(self, theta):
        if self.avec is None:
            return np.zeros_like(self.bstar_at(theta))
        a = np.asarray(_resolve(self.avec, theta), dtype=float)
        sup = np.max(np.sqrt(np.sum(a * a, axis=0)))
        if sup > self.lam * (1.0 + 1e-12):
            raise InvalidTrial("trial field A exceeds the lambda bound")
        return a

    def dbstar_at(self, theta, spacing):
        if self.dbstar is not None:
            return np.asarray(_resolve(self.dbstar, theta), dtype=float)
        if not callable(self.bstar):
            return np.zeros_like(self.bstar_at(theta))
        delta = 0.5 * spacing
        return (self.bstar_at(theta + delta) - self.bstar_at(theta - delta)) / (
            2.0 * delta
        )

    @property
    def is_static(self):
        return not (
            callable(self.bstar) or callable(self.vstar) or callable(self.avec)
        )


@dataclass(frozen=True)
class CertParams:
    """Discount rate r and Gronwall constant c* for one trial."""

    r: float
    cstar: float
    quad_rule: str = "trapezoid"


def eta_defect(b_field, bstar):
    """eta = |B| - B.b*, the pointwise misalignment entropy (>= 0)."""
    b_field = np.asarray(b_field, dtype=float)
    rho = np.sqrt(np.sum(b_field * b_field, axis=0))
    return np.maximum(rho - np.sum(b_field * bstar, axis=0), 0.0)


def trial_coefficients(trial, theta=0.0, spacing=1e-4):
    """The linearization coefficients (L1, L2, L3) of a trial at theta.

    L1 = v*^2 - b*.grad(b*.v*)            (scalar field)
    L2 = -d_theta b* - (v*.grad)b* + (b*.grad)v* + b* v*^2
         - b* (b*.grad)(b*.v*)            (vector field)
    L3 = -v* + (b*.grad)b*                (vector field)
    """
    bs = trial.bstar_at(theta)
    vs = trial.vstar_at(theta)
    dbs = trial.dbstar_at(theta, spacing)
    vsq = np.sum(vs * vs, axis=0)
    bv = np.sum(bs * vs, axis=0)
    bgrad_bv = np.sum(bs * spectral_gradient(bv), axis=0)
    l1 = vsq - bgrad_bv
    l2 = -dbs - _advect(vs, bs) + _advect(bs, vs) + bs * vsq - bs * bgrad_bv
    l3 = -vs + _advect(bs, bs)
    return l1, l2, l3


def _op_norm_sq_max(mat):
    # largest eigenvalue of M^T M over the grid, i.e. squared spectral norm
    moved = np.moveaxis(mat, (0, 1), (-2, -1))
    gram = np.einsum("...ki,...kj->...ij", moved, moved)
    return float(np.max(np.linalg.eigvalsh(gram)))


def compute_cstar(trial, thetas=(0.0,), spacing=1e-4):
    """Gronwall constant of a trial:

    c* = sup ||grad v* + (grad v*)^T||_op
         + sup ||grad b* - (grad b*)^T||_op^2
         + sup |L1|,

    the explicit Cauchy-Schwarz constant making the discounted entropy
    inequality hold for smooth solutions.  Any upper bound stays sound;
    a larger c* only forces a larger discount rate r.
    """
    worst = 0.0
    for theta in thetas:
        bs = trial.bstar_at(theta)
        vs = trial.vstar_at(theta)
        grad_v = np.stack([spectral_gradient(c) for c in vs], axis=1)
        grad_b = np.stack([spectral_gradient(c) for c in bs], axis=1)
        swap = (1, 0) + tuple(range(2, grad_v.ndim))
        sym = grad_v + np.transpose(grad_v, swap)
        anti = grad_b - np.transpose(grad_b, swap)
        l1 = trial_coefficients(trial, theta, spacing)[0]
        value = (
            np.sqrt(_op_norm_sq_max(sym))
            + _op_norm_sq_max(anti)
            + float(np.max(np.abs(l1)))
        )
        worst = max(worst, value)
    return worst


def cert_params_for(trial, r=None, thetas=(0.0,)):
    """Build CertParams with the minimal admissible discount rate.

    Validity requires r >= c* + lambda^2/2 + lambda ||v*||_inf.
    """
    cstar = compute_cstar(trial, thetas)
    vsup = max(
        float(np.max(np.sqrt(np.sum(trial.vstar_at(t) ** 2, axis=0))))
        for t in thetas
    )
    threshold = cstar + 0.5 * trial.lam**2 + trial.lam * vsup
    if r is None:
        r = threshold
    if r < threshold * (1.0 - 1e-12) - 1e-12:
        raise InvalidParams(
            f"discount rate r={r:.6g} below the validity threshold "
            f"{threshold:.6g} for trial '{trial.name}'"
        )
    return CertParams(r=float(r), cstar=cstar)


def k_lambda(rho, z, lam):
    """Truncated kinetic term K_lambda(rho, Z), the sup over |A| <= lam
    of Z.A - rho |A|^2 / 2:

        K = |Z|^2/(2 rho) - ((|Z| - lam rho)_+)^2 / (2 rho).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("k_lambda needs rho > 0; apply a floor first")
    z = np.asarray(z, dtype=float)
    if z.ndim > rho.ndim:
        mag = np.sqrt(np.sum(z * z, axis=0))
    else:
        mag = np.abs(z)
    excess = np.maximum(mag - lam * rho, 0.0)
    return (mag**2 - excess**2) / (2.0 * rho)


@dataclass
class CertificateReport:
    """Margins of the discounted inequality family along one trajectory.

    pass criterion: every margin of every trial stays <= tolerance.  A
    pass certifies consistency with the dictionary only, not that the
    trajectory is a dissipative solution; `kind` records this.
    """

    trial_names: list
    thetas: np.ndarray
    margins: np.ndarray
    eta_integrals: np.ndarray
    dissipation: np.ndarray
    tolerance: float
    kind: str = field(default=DICTIONARY_KIND)

    @property
    def max_margin(self):
        return float(np.max(self.margins))

    @property
    def worst_trial(self):
        row = int(np.unravel_index(np.argmax(self.margins), self.margins.shape)[0])
        return self.trial_names[row]

    @property
    def passed(self):
        return self.max_margin <= self.tolerance

    def to_dict(self):
        return {
            "kind": self.kind,
            "passed": bool(self.passed),
            "tolerance": self.tolerance,
            "max_margin": self.max_margin,
            "worst_trial": self.worst_trial,
            "trials": self.trial_names,
            "theta": self.thetas.tolist(),
            "margins": self.margins.tolist(),
            "eta_integrals": self.eta_integrals.tolist(),
            "dissipation": self.dissipation.tolist(),
        }


def _prepared_frames(states):
    spacing = _frame_spacing(states)
    frames = [s if s.p is not None else with_momentum(s) for s in states]
    thetas = np.array([s.theta for s in frames])
    return frames, thetas, spacing


def _margin_series(frames, thetas, spacing, trial, params, use_klambda=False):
    cell = frames[0].cell
    r, cstar = params.r, params.cstar
    static = trial.is_static
    cached = None
    etas = np.empty(len(frames))
    integrand = np.empty(len(frames))
    dissipation = np.empty(len(frames))
    for k, state in enumerate(frames):
        theta = thetas[k]
        if cached is None or not static:
            bs = trial.bstar_at(theta)
            vs = trial.vstar_at(theta)
            a = trial.a_at(theta)
            l1, l2, l3 = trial_coefficients(trial, theta, spacing)
            w = 0.5 * np.sum(a * (a + 2.0 * vs), axis=0)
            cached = (bs, vs, a, l2, l3, w)
        bs, vs, a, l2, l3, w = cached
        eta = eta_defect(state.b, bs)
        etas[k] = np.sum(eta) * cell
        rho = state.rho()
        z = state.p - rho * vs
        dissipation[k] = np.sum(k_lambda(state.rho_floored(), z, trial.lam)) * cell
        if use_klambda:
            point = (
                k_lambda(state.rho_floored(), z, trial.lam)
                + (r - cstar) * eta
                - np.sum(state.b * l2, axis=0)
                - np.sum(state.p * l3, axis=0)
            )
        else:
            point = (
                np.sum(state.p * (a - l3), axis=0)
                + (r - cstar - w) * eta
                - np.sum(state.b * (l2 + bs * w), axis=0)
            )
        integrand[k] = np.sum(point) * cell
    discounted = np.exp(-r * (thetas - thetas[0])) * integrand
    history = cumulative_trapezoid(discounted, thetas, initial=0.0)
    margins = np.exp(-r * (thetas - thetas[0])) * etas + history - etas[0]
    return margins, etas, dissipation


def _params_list(trials, params):
    if params is None:
        return [cert_params_for(t) for t in trials]
    if isinstance(params, CertParams):
        params = [params] * len(trials)
    if len(params) != len(trials):
        raise ValueError("need one CertParams per trial")
    for trial, p in zip(trials, params):
        cert_params_for(trial, r=p.r)  # re-validate r against this trial
    return list(params)


def certify(states, trials, tolerance, params=None):
    """Evaluate the discounted inequality margins of a trajectory against
    a trial dictionary; passes when every margin is <= tolerance."""
    frames, thetas, spacing = _prepared_frames(states)
    params = _params_list(trials, params)
    margins, etas, diss = [], [], []
    for trial, p in zip(trials, params):
        if p.quad_rule != "trapezoid":
            raise ValueError("only trapezoid quadrature is implemented")
        m, e, k = _margin_series(frames, thetas, spacing, trial, p)
        margins.append(m)
        etas.append(e)
        diss.append(k)
    return CertificateReport(
        trial_names=[t.name for t in trials],
        thetas=thetas,
        margins=np.array(margins),
        eta_integrals=np.array(etas),
        dissipation=np.array(diss),
        tolerance=float(tolerance),
    )


def certify_klambda(states, trial, params=None):
    """Margins of the truncated-kinetic variant, where the A-dependent
    terms are replaced by their pointwise supremum K_lambda(rho, P - rho v*).
    Dictionary margins for the same (b*, v*) lower-bound these."""
    frames, thetas, spacing = _prepared_frames(states)
    if params is None:
        params = cert_params_for(trial)
    else:
        cert_params_for(trial, r=params.r)
    margins, _, _ = _margin_series(
        frames, thetas, spacing, trial, params, use_klambda=True
    )
    return margins


def convexity_check(traj1, traj2, t, trials, tolerance, params=None):
    """Certify the convex mixture (t B1 + (1-t) B2, t P1 + (1-t) P2).

    Both inputs must live on the same grid, carry the same frame times,
    and share the initial field; the margin of the mixture is then
    bounded by the convex combination of the input margins because eta
    is convex in B and every other term of the inequality is affine.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("mixture weight t must lie in [0, 1]")
    if len(traj1) != len(traj2):
        raise GridMismatch("trajectories have different frame counts")
    f1, th1, _ = _prepared_frames(traj1)
    f2, th2, _ = _prepared_frames(traj2)
    if f1[0].b.shape != f2[0].b.shape:
        raise GridMismatch("trajectories live on different grids")
    if np.max(np.abs(th1 - th2)) > 1e-12:
        raise GridMismatch("trajectories have different frame times")
    scale = np.max(np.abs(f1[0].b))
    if np.max(np.abs(f1[0].b - f2[0].b)) > 1e-12 * max(scale, 1.0):
        raise GridMismatch("trajectories start from different initial fields")
    from .fields import FieldState

    mixed = [
        FieldState(
            t * a.b + (1.0 - t) * b.b,
            t * a.p + (1.0 - t) * b.p,
            a.theta,
            max(a.rho_floor, b.rho_floor),
        )
        for a, b in zip(f1, f2)
    ]
    return certify(mixed, trials, tolerance, params)


def _fourier_mode(axis_values, d, component, wave_axis, amplitude):
    shape = [1] * d
    shape[wave_axis] = len(axis_values)
    profile = amplitude * np.sin(2 * np.pi * axis_values).reshape(shape)
    out = np.zeros((d,) + (len(axis_values),) * d)
    out[component] = profile
    return out


def standard_trial_dictionary(d, n, lam=1.0):
    """Constant unit directions plus low-order Fourier v* and A entries.

    A finite dictionary: certificates built from it are necessary
    conditions for dissipativity, never sufficient ones.
    """
    ax = np.arange(n) / n
    grid_shape = (n,) * d

    def const_dir(vec, name):
        v = np.asarray(vec, dtype=float)
        v = v / np.linalg.norm(v)
        b = np.broadcast_to(v.reshape((d,) + (1,) * d), (d,) + grid_shape).copy()
        return TrialTriple(bstar=b, lam=lam, name=name)

    trials = [
        const_dir(np.eye(d)[i], f"const-e{i + 1}") for i in range(d)
    ]
    trials.append(const_dir(np.ones(d), "const-diagonal"))
    anti = np.ones(d)
    anti[-1] = -1.0
    trials.append(const_dir(anti, "const-antidiagonal"))

    e1 = trials[0].bstar
    v_mode = _fourier_mode(ax, d, component=0, wave_axis=1, amplitude=0.3)
    trials.append(
        TrialTriple(bstar=e1, vstar=v_mode, lam=lam, name="e1+fourier-v")
    )
    a_mode = _fourier_mode(ax, d, component=1, wave_axis=0, amplitude=lam)
    trials.append(
        TrialTriple(bstar=e1, avec=a_mode, lam=lam, name="e1+fourier-A")
    )
    diag = trials[d].bstar
    v_mode2 = _fourier_mode(ax, d, component=1, wave_axis=0, amplitude=0.2)
    a_mode2 = _fourier_mode(ax, d, component=0, wave_axis=1, amplitude=0.5 * lam)
    trials.append(
        TrialTriple(
            bstar=diag,
            vstar=v_mode2,
            avec=a_mode2,
            lam=lam,
            name="diagonal+fourier-vA",
        )
    )
    return trials


@dataclass
class WeakStrongReport:
    """Entropy and momentum-defect series of a run measured against a
    smooth reference solution (b, v) of the reduced system."""

    thetas: np.ndarray
    eta_series: np.ndarray
    defect_series: np.ndarray
    mass0: float
    cstar: float
    tolerance: float

    @property
    def eta_bounded(self):
        return bool(np.max(self.eta_series) <= self.tolerance * self.mass0)

    @property
    def defect_bounded(self):
        return bool(np.max(self.defect_series) <= self.tolerance * self.mass0)

    @property
    def gronwall_ok(self):
        eta0 = self.eta_series[0]
        if eta0 <= self.tolerance * self.mass0:
            return self.eta_bounded
        envelope = eta0 * np.exp(self.cstar * (self.thetas - self.thetas[0]))
        return bool(np.all(self.eta_series <= envelope * (1.0 + 1e-2)))

    def to_dict(self):
        return {
            "theta": self.thetas.tolist(),
            "eta": self.eta_series.tolist(),
            "momentum_defect": self.defect_series.tolist(),
            "mass0": self.mass0,
            "cstar": self.cstar,
            "tolerance": self.tolerance,
            "eta_bounded": self.eta_bounded,
            "defect_bounded": self.defect_bounded,
            "gronwall_ok": self.gronwall_ok,
        }


def weak_strong_experiment(
    smooth, state0, horizon, tolerance=1e-8, dtheta=None, record_every=50
):
    """Run the dissipative system from state0 and compare it with a smooth
    reference solution of the reduced system.

    smooth supplies the unit direction field b and velocity v (a
    NonConsFields instance or a (b, v) pair).  Along the run we track
    int eta (misalignment against b) and int |P - rho v| (momentum
    defect).  Aligned initial data must keep both at zero; a misaligned
    start obeys the Gronwall envelope eta(0) e^{c* theta}; a reference
    velocity that does not solve the reduced system leaves the defect
    series large, which is the detection case.
    """
    from .fields import admissible_short_dtheta, run_eulerian_short

    if hasattr(smooth, "b") and hasattr(smooth, "v"):
        b_ref, v_ref = smooth.b, smooth.v
    else:
        b_ref, v_ref = smooth
    b_ref = np.asarray(b_ref, dtype=float)
    v_ref = np.asarray(v_ref, dtype=float)
    trial = TrialTriple(bstar=b_ref, vstar=v_ref, name="smooth-reference")
    cstar = compute_cstar(trial)
    if dtheta is None:
        dtheta = admissible_short_dtheta(state0)
    run = run_eulerian_short(state0, dtheta, horizon, record_every=record_every)
    cell = state0.cell
    etas = np.array(
        [np.sum(eta_defect(s.b, b_ref)) * cell for s in run.states]
    )
    defects = np.array(
        [
            np.sum(np.sqrt(np.sum((s.p - s.rho() * v_ref) ** 2, axis=0))) * cell
            for s in run.states
        ]
    )
    return WeakStrongReport(
        thetas=np.asarray(run.thetas),
        eta_series=etas,
        defect_series=defects,
        mass0=float(run.masses[0]),
        cstar=cstar,
        tolerance=float(tolerance),
    )
