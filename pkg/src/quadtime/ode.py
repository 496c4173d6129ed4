"""Newtonian motion in a convex potential versus its gradient flow.

A trajectory of ``X'' = -grad(phi)(X)`` released at rest is compared with
the gradient flow ``Z' = -grad(phi)(Z)`` through the substitution
``theta = t^2/2``.  The module provides the symplectic and gradient-flow
steppers, the modulated energy used to measure distance between
trajectories, and the Gronwall-type inequality residual that tests whether
a sampled trajectory behaves dissipatively against a smooth trial curve.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IterationLimit, NumericalBlowup

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class Potential:
    """A smooth convex potential with explicit spectral bounds.

    ``value`` and ``grad`` accept batched points of shape (..., dim);
    ``hess`` takes a single point of shape (dim,) and returns (dim, dim).
    ``convexity_lo``/``convexity_hi`` bound the Hessian spectrum, with
    ``convexity_hi == 1/convexity_lo`` for the bundled convex potentials,
    and ``third_deriv_bound`` dominates the operator norm of the third
    derivative tensor.
    """

    dim: int
    value: Callable
    grad: Callable
    hess: Callable
    convexity_lo: float
    convexity_hi: float
    third_deriv_bound: float
    name: str = ""


def quadratic_potential(dim=1):
    """phi(x) = |x|^2 / 2; the harmonic case, exactly solvable."""
    return Potential(
        dim=dim,
        value=lambda x: 0.5 * np.sum(np.asarray(x, float) ** 2, axis=-1),
        grad=lambda x: np.asarray(x, float),
        hess=lambda x: np.eye(dim),
        convexity_lo=1.0,
        convexity_hi=1.0,
        third_deriv_bound=0.0,
        name="quadratic",
    )


def anisotropic_potential(eigs=(0.5, 1.0, 2.0)):
    """phi(x) = x^T diag(eigs) x / 2 with eigenvalues spanning [lo, 1/lo]."""
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs <= 0):
        raise ValueError("anisotropic potential needs positive eigenvalues")
    lo = float(min(eigs.min(), 1.0 / eigs.max()))
    return Potential(
        dim=eigs.size,
        value=lambda x: 0.5 * np.sum(eigs * np.asarray(x, float) ** 2, axis=-1),
        grad=lambda x: eigs * np.asarray(x, float),
        hess=lambda x: np.diag(eigs),
        convexity_lo=lo,
        convexity_hi=1.0 / lo,
        third_deriv_bound=0.0,
        name="anisotropic",
    )


# max of |d^3/dx^3 log cosh(x)| = |2 sech^2(x) tanh(x)| over the real line
_LOGCOSH_THIRD = 4.0 / (3.0 * np.sqrt(3.0))


def log_cosh_potential(dim=2, mu=0.5, a=0.5):
    """phi(x) = mu |x|^2/2 + a sum_i log cosh(x_i).

    Strongly convex with Hessian spectrum in [mu, mu + a] and a bounded
    third derivative, so every constant the comparison theory needs is
    available in closed form.
    """
    if mu <= 0 or a <= 0:
        raise ValueError("log-cosh potential needs mu > 0 and a > 0")
    lo = float(min(mu, 1.0 / (mu + a)))

    def value(x):
        x = np.asarray(x, float)
        return 0.5 * mu * np.sum(x**2, axis=-1) + a * np.sum(
            np.logaddexp(x, -x) - np.log(2.0), axis=-1
        )

    def grad(x):
        x = np.asarray(x, float)
        return mu * x + a * np.tanh(x)

    def hess(x):
        x = np.asarray(x, float)
        return np.diag(mu + a / np.cosh(x) ** 2)

    return Potential(
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        convexity_lo=lo,
        convexity_hi=1.0 / lo,
        third_deriv_bound=a * _LOGCOSH_THIRD,
        name="log-cosh",
    )


def linear_potential(slope):
    """phi(x) = -slope . x, the free-fall case with constant acceleration.

    Degenerate (zero Hessian): used by the exactness tests, excluded from
    the convexity-based diagnostics.
    """
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    return Potential(
        dim=slope.size,
        value=lambda x: -np.sum(slope * np.asarray(x, float), axis=-1),
        grad=lambda x: np.broadcast_to(-slope, np.asarray(x, float).shape).copy(),
        hess=lambda x: np.zeros((slope.size, slope.size)),
        convexity_lo=0.0,
        convexity_hi=0.0,
        third_deriv_bound=0.0,
        name="linear",
    )


def suite_potentials():
    """The convex potentials exercised by the comparison test suites."""
    return [quadratic_potential(1), anisotropic_potential(), log_cosh_potential()]


@dataclass(frozen=True)
class OdeState:
    """Position/velocity state of the second-order system at time t."""

    t: float
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class GradientFlowState:
    """State of the first-order flow at rescaled time theta."""

    theta: float
    z: np.ndarray


def _vec(x, dim, name):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise ValueError(f"{name} must have shape ({dim},), got {x.shape}")
    return x


def step_conservative(state, potential, dt):
    """One velocity-Verlet step of X'' = -grad(phi)(X).

    Symplectic and time-reversible; exact for constant acceleration.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    a0 = -potential.grad(state.x)
    x1 = state.x + dt * state.v + 0.5 * dt * dt * a0
    a1 = -potential.grad(x1)
    v1 = state.v + 0.5 * dt * (a0 + a1)
    return OdeState(state.t + dt, x1, v1)


def run_conservative(x0, potential, dt, n_steps, v0=None):
    """March velocity Verlet and return times, positions and velocities."""
    x0 = _vec(x0, potential.dim, "x0")
    v0 = np.zeros(potential.dim) if v0 is None else _vec(v0, potential.dim, "v0")
    xs = np.empty((n_steps + 1, potential.dim))
    vs = np.empty_like(xs)
    xs[0], vs[0] = x0, v0
    state = OdeState(0.0, x0, v0)
    # overflow en route to the blowup check is expected and reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            state = step_conservative(state, potential, dt)
            xs[k + 1], vs[k + 1] = state.x, state.v
            if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.v))):
                raise NumericalBlowup(
                    f"conservative run produced non-finite values at step {k + 1}",
                    step=k + 1,
                )
    times = dt * np.arange(n_steps + 1)
    return times, xs, vs


def _rk4(z, potential, dtheta):
    k1 = -potential.grad(z)
    k2 = -potential.grad(z + 0.5 * dtheta * k1)
    k3 = -potential.grad(z + 0.5 * dtheta * k2)
    k4 = -potential.grad(z + dtheta * k3)
    return z + (dtheta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _implicit_euler(z, potential, dtheta, tol, max_iter):
    # Newton on z1 - z + dtheta * grad(z1) = 0; A-stable for stiff spectra.
    z1 = z - dtheta * potential.grad(z)
    scale = 1.0 + float(np.linalg.norm(z))
    res = np.inf
    for _ in range(max_iter):
        r = z1 - z + dtheta * potential.grad(z1)
        res = float(np.linalg.norm(r))
        if res <= tol * scale:
            return z1
        jac = np.eye(z.size) + dtheta * potential.hess(z1)
        z1 = z1 - np.linalg.solve(jac, r)
    raise IterationLimit(
        f"implicit gradient-flow step failed to converge (residual {res:.3e})",
        residual=res,
    )


def step_gradient_flow(state, potential, dtheta, method="rk4", tol=1e-12, max_iter=50):
    """One step of Z' = -grad(phi)(Z).

    ``method="rk4"`` is the default explicit integrator; ``"implicit"``
    selects backward Euler (Newton solve) for stiff spectra.
    """
    if dtheta <= 0:
        raise ValueError("dtheta must be positive")
    if method == "rk4":
        z1 = _rk4(state.z, potential, dtheta)
    elif method == "implicit":
        z1 = _implicit_euler(state.z, potential, dtheta, tol, max_iter)
    else:
        raise ValueError(f"unknown gradient-flow method {method!r}")
    return GradientFlowState(state.theta + dtheta, z1)


def run_gradient_flow(z0, potential, dtheta, n_steps, method="rk4"):
    """March the gradient flow and return thetas and positions."""
    z0 = _vec(z0, potential.dim, "z0")
    zs = np.empty((n_steps + 1, potential.dim))
    zs[0] = z0
    state = GradientFlowState(0.0, z0)
    for k in range(n_steps):
        state = step_gradient_flow(state, potential, dtheta, method=method)
        zs[k + 1] = state.z
        if not np.all(np.isfinite(state.z)):
            raise NumericalBlowup(
                f"gradient flow produced non-finite values at step {k + 1}",
                step=k + 1,
            )
    return dtheta * np.arange(n_steps + 1), zs


def modulated_energy(x, v, y, w, potential):
    """Relative energy between (x, v) and (y, w).

    eta = |v - w|^2/2 + phi(x) - phi(y) - grad(phi)(y).(x - y); for a
    potential with Hessian spectrum in [r, 1/r] this is equivalent to the
    squared phase-space distance up to the factors r, 1/r.
    """
    x = _vec(x, potential.dim, "x")
    v = _vec(v, potential.dim, "v")
    y = _vec(y, potential.dim, "y")
    w = _vec(w, potential.dim, "w")
    kinetic = 0.5 * float(np.sum((v - w) ** 2))
    bregman = float(
        potential.value(x) - potential.value(y) - np.dot(potential.grad(y), x - y)
    )
    return kinetic + bregman


@dataclass(frozen=True)
class QuadraticTimeResult:
    """Mismatch e(t) between X(t) and Z(t^2/2) on a shared time grid."""

    t: np.ndarray
    e: np.ndarray
    x: np.ndarray
    v: np.ndarray
    z: np.ndarray
    zdot: np.ndarray

    def error_slope(self, window=(1e-3, 1e-1)):
        from .fitting import loglog_slope

        return loglog_slope(self.t, self.e, window)


def quadratic_time_compare(x0, potential, t_max, dt, dtheta_max=1e-4):
    """Squared mismatch e(t) = |X(t)-Z(t^2/2)|^2 + |X'(t) - t Z'(t^2/2)|^2.

    X solves the conservative system from rest at x0; Z solves the
    gradient flow from x0, sampled at theta = t^2/2 with RK4 substeps no
    coarser than ``dtheta_max``.
    """
    n_steps = int(round(t_max / dt))
    times, xs, vs = run_conservative(x0, potential, dt, n_steps)
    thetas = 0.5 * times**2

    zs = np.empty_like(xs)
    zs[0] = _vec(x0, potential.dim, "x0")
    z = zs[0]
    for k in range(n_steps):
        gap = thetas[k + 1] - thetas[k]
        m = max(1, int(np.ceil(gap / dtheta_max)))
        sub = gap / m
        for _ in range(m):
            z = _rk4(z, potential, sub)
        zs[k + 1] = z

    zdots = -potential.grad(zs)
    e = np.sum((xs - zs) ** 2, axis=1) + np.sum(
        (vs - times[:, None] * zdots) ** 2, axis=1
    )
    return QuadraticTimeResult(t=times, e=e, x=xs, v=vs, z=zs, zdot=zdots)


def gronwall_constant(potential, sup_trial_speed):
    """Constant C in the dissipative inequality for a given trial speed.

    Zero whenever the third derivative vanishes (linear and quadratic
    potentials make the modulated-energy identity exact).
    """
    if potential.third_deriv_bound == 0.0:
        return 0.0
    if potential.convexity_lo <= 0.0:
        raise ValueError("need a strongly convex potential (convexity_lo > 0)")
    return (
        potential.third_deriv_bound
        * (1.0 + float(sup_trial_speed))
        / potential.convexity_lo
    )


def _fd_velocity(y, dt):
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt)
    d[-1] = (3.0 * y[-1] - 4.0 * y[-2] + y[-3]) / (2.0 * dt)
    return d


def _fd_acceleration(y, dt):
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / dt**2
    d[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / dt**2
    d[-1] = (2.0 * y[-1] - 5.0 * y[-2] + 4.0 * y[-3] - y[-4]) / dt**2
    return d


def ode_dissipative_residual(times, x, v, y, potential, c=None):
    """LHS - RHS of the dissipative trajectory inequality.

    With eta(t) the modulated energy between the sampled (x, v) and the
    trial curve y (velocities and accelerations of y recovered by centered
    differences), the inequality

        eta(T) + int_0^T (x' - y').(y'' + grad(phi)(y)) e^{(T-t)C} dt
            <= eta(0) e^{CT}

    holds for every true trajectory x and every smooth trial y once C
    dominates the Gronwall constant.  Returns the residual; a value <= 0
    (up to discretization tolerance) means the inequality is satisfied.
    """
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if times.ndim != 1 or times.size < 4:
        raise ValueError("need at least four samples on a 1-d time grid")
    expected = (times.size, potential.dim)
    if x.shape != expected or v.shape != expected or y.shape != expected:
        raise ValueError("x, v, y must all have shape (n_times, dim)")
    dts = np.diff(times)
    dt = dts[0]
    if not np.allclose(dts, dt, rtol=1e-10, atol=0.0):
        raise ValueError("time grid must be uniform")

    yp = _fd_velocity(y, dt)
    ypp = _fd_acceleration(y, dt)

    kin = 0.5 * np.sum((v - yp) ** 2, axis=1)
    grad_y = potential.grad(y)
    breg = potential.value(x) - potential.value(y) - np.sum(grad_y * (x - y), axis=1)
    eta = kin + breg

    if c is None:
        sup_speed = float(np.max(np.linalg.norm(yp, axis=1)))
        c = gronwall_constant(potential, sup_speed)

    omega = ypp + grad_y
    t_final = times[-1]
    weight = np.exp((t_final - times) * c)
    integrand = np.sum((v - yp) * omega, axis=1) * weight
    lhs = eta[-1] + _trapezoid(integrand, times)
    rhs = eta[0] * np.exp(c * t_final)
    return float(lhs - rhs)
