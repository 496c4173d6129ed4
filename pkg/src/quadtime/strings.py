"""Regularized relativistic string dynamics on a closed parameter circle.

The state carries positions X(s) and velocities dX/dt on s in R/Z.  With
a = sqrt(eps^2 + |X_s|^2) and the per-node scalars

    S = sqrt((eps^2 + |X_s|^2)(1 - |X_t|^2) + (X_t . X_s)^2),
    F = (eps^2 + |X_s|^2)/S,  G = (X_t . X_s)/S,  H = (1 - |X_t|^2)/S,

the motion conserves the nodal momentum density W = F X_t - G X_s and
advances it by the divergence of the flux G X_t + H X_s.  Recovering the
velocity from W is a per-node nonlinear solve, done here by a damped
fixed-point iteration on the scalar multiplier u in X_t = u * M^-1 W with
M = a^2 I - X_s (x) X_s (the damping 1/(1+c^2) kills the linear term of
the iteration map, so convergence is locally quadratic).

In the slow regime the quadratic change of time theta = t^2/2 sends these
trajectories to the regularized curve-shortening flow;
``string_vs_shortening`` measures that distance directly.
"""

from dataclasses import dataclass

import numpy as np

from .curves import PeriodicCurve, _d1, run_eps_flow
from .errors import (
    IterationLimit,
    NumericalBlowup,
    StateInvalid,
    StepRejected,
)
from .fitting import loglog_slope


@dataclass(frozen=True)
class StringState:
    """Positions and velocities of a closed string, sampled at s_k = k/N."""

    x: np.ndarray
    v: np.ndarray
    eps: float
    time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.ndim != 2 or x.shape[0] < 8 or x.shape[1] < 2:
            raise ValueError("string needs shape (N, d) with N >= 8, d >= 2")
        if v.shape != x.shape:
            raise ValueError("velocity array must match position array")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        speed_sq = np.max(np.sum(v * v, axis=1))
        if not speed_sq < 1.0:
            raise StateInvalid(f"superluminal node: |dX/dt|^2 = {speed_sq:.6f} >= 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def h(self):
        return 1.0 / self.n


def string_at_rest(curve, eps):
    """String state with X from a closed curve and zero velocity."""
    return StringState(curve.x.copy(), np.zeros_like(curve.x), eps, 0.0)


def fghs(q, v, eps):
    """Coefficient arrays (F, G, H, S) from raw tangents and velocities."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    a2 = eps**2 + np.sum(q * q, axis=1)
    vv = np.sum(v * v, axis=1)
    vq = np.sum(v * q, axis=1)
    s_sq = a2 * (1.0 - vv) + vq**2
    if not np.all(np.isfinite(s_sq)) or np.any(s_sq <= 0.0):
        raise StateInvalid("S^2 must be finite and positive at every node")
    s = np.sqrt(s_sq)
    return a2 / s, vq / s, (1.0 - vv) / s, s


def string_coefficients(state):
    """(F, G, H, S) per node, tangents by centered periodic differences."""
    q = _d1(state.x, state.h)
    return fghs(q, state.v, state.eps)


def momentum_density(state):
    """W = F dX/dt - G dX/ds per node."""
    q = _d1(state.x, state.h)
    f, g, _, _ = fghs(q, state.v, state.eps)
    return f[:, None] * state.v - g[:, None] * q


def total_momentum(state):
    return momentum_density(state).sum(axis=0) * state.h


def recover_velocity(w, q, eps, v0=None, tol=1e-12, max_iter=100):
    """Solve W = F(v) v - G(v) q for the velocity, given tangents q.

    Writing what = M^-1 W with M = (eps^2+|q|^2) I - q (x) q, the solution
    is v = u * what where u solves u = sqrt(a^2 - c^2 u^2); the damped
    iteration below converges quadratically.  Requires |W.q| < eps^2,
    otherwise no subluminal velocity exists.
    """
    if eps <= 0:
        raise ValueError("velocity recovery needs eps > 0")
    w = np.asarray(w, dtype=float)
    q = np.asarray(q, dtype=float)
    a2 = eps**2 + np.sum(q * q, axis=1)
    wq_over = np.sum(w * q, axis=1) / eps**2
    if np.any(np.abs(wq_over) >= 1.0):
        node = int(np.argmax(np.abs(wq_over)))
        raise StateInvalid(
            f"momentum at node {node} admits no subluminal velocity "
            f"(|W.q|/eps^2 = {abs(wq_over[node]):.6f} >= 1)"
        )
    what = (w + q * wq_over[:, None]) / a2[:, None]
    c2 = a2 * np.sum(what * what, axis=1) - wq_over**2
    damping = 1.0 / (1.0 + c2)

    if v0 is not None:
        _, _, _, u = fghs(q, v0, eps)
    else:
        u = np.sqrt(a2)
    for _ in range(max_iter):
        target = np.sqrt(np.maximum(a2 - c2 * u * u, 0.0))
        u_new = u + damping * (target - u)
        residual = float(np.max(np.abs(u_new - u) / np.maximum(1.0, u_new)))
        u = u_new
        if residual <= tol:
            break
    else:
        raise IterationLimit(
            f"velocity recovery stalled at residual {residual:.3e}",
            residual=residual,
        )
    return u[:, None] * what


def admissible_string_dt(state, cfl=0.25):
    """Hyperbolic step bound c * h * eps / (1 + max |dX/ds|)."""
    q = _d1(state.x, state.h)
    sup_q = float(np.max(np.sqrt(np.sum(q * q, axis=1))))
    return cfl * state.h * state.eps / (1.0 + sup_q)


def step_string(state, dt, tol=1e-12, max_iter=100):
    """Advance the conserved momentum by the centered flux divergence,
    then recover velocities; X moves with the updated velocity."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.eps <= 0:
        raise ValueError("time stepping needs eps > 0")
    adm = admissible_string_dt(state)
    if dt > adm * (1.0 + 1e-12):
        raise StepRejected(
            f"dt={dt:.3e} exceeds admissible {adm:.3e}", admissible=adm
        )
    q = _d1(state.x, state.h)
    f, g, h_coef, _ = fghs(q, state.v, state.eps)
    w = f[:, None] * state.v - g[:, None] * q
    flux = g[:, None] * state.v + h_coef[:, None] * q
    w_new = w + dt * _d1(flux, state.h)
    if not np.all(np.isfinite(w_new)):
        raise NumericalBlowup("string momentum update produced non-finite values")

    v_mid = recover_velocity(w_new, q, state.eps, v0=state.v, tol=tol, max_iter=max_iter)
    x_new = state.x + dt * v_mid
    q_new = _d1(x_new, state.h)
    v_new = recover_velocity(w_new, q_new, state.eps, v0=v_mid, tol=tol, max_iter=max_iter)
    return StringState(x_new, v_new, state.eps, state.time + dt)


def run_string_to(state, t_target, safety=0.8, tol=1e-12):
    """Step to t_target with the admissible dt, landing exactly."""
    while state.time < t_target - 1e-15:
        dt = min(safety * admissible_string_dt(state), t_target - state.time)
        state = step_string(state, dt, tol=tol)
    return state


@dataclass
class StringCompareResult:
    """Sup-node distances between the string at t and the regularized
    curve-shortening flow at theta = t^2/2, from the same initial curve."""

    times: np.ndarray
    distances: np.ndarray
    eps: float

    def fitted_order(self, window=None):
        return loglog_slope(self.times, self.distances, window=window)

    def to_report(self):
        return {
            "time": self.times.tolist(),
            "sup_distance": self.distances.tolist(),
            "eps": self.eps,
        }


def string_vs_shortening(curve0, eps, t_max, n_samples=8, dtheta_max=None):
    """Distance time series between the conservative string (from rest)
    and the dissipative flow in the quadratic time theta = t^2/2."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    state = string_at_rest(curve0, eps)
    curve = PeriodicCurve(curve0.x.copy(), 0.0)
    times = t_max * np.arange(1, n_samples + 1) / n_samples
    distances = np.empty(n_samples)
    for j, t in enumerate(times):
        state = run_string_to(state, t)
        curve = run_eps_flow(curve, eps, 0.5 * t * t, dtheta_max=dtheta_max)
        gap = state.x - curve.x
        distances[j] = float(np.max(np.sqrt(np.sum(gap * gap, axis=1))))
    return StringCompareResult(times, distances, eps)


def write_string_csv(state, path):
    """Write the node table as ``s,X1..Xd,V1..Vd`` rows."""
    d = state.dim
    header = (
        "s,"
        + ",".join(f"X{j + 1}" for j in range(d))
        + ","
        + ",".join(f"V{j + 1}" for j in range(d))
    )
    s = np.arange(state.n) / state.n
    table = np.column_stack([s, state.x, state.v])
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
