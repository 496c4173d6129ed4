"""One-dimensional isentropic gas flow and its diffusive long-time image.

The Euler system (rho, m) with pressure p(rho) = kappa rho^gamma, started
from rest, is compared under theta = t^2/2 with the nonlinear diffusion
rho_theta = Lap p(rho) (gamma = 1 gives the heat equation, gamma = 2 a
porous-medium equation).  Both solvers live on the periodic unit interval
with n equal cells.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalBlowup, StepRejected

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

# density floor used inside flux quotients only; cell averages are untouched
VACUUM_FLOOR = 1e-12


@dataclass(frozen=True)
class PressureLaw:
    """p(rho) = kappa rho^gamma with kappa > 0, gamma >= 1."""

    kappa: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")

    def pressure(self, rho):
        return self.kappa * np.asarray(rho, float) ** self.gamma

    def dpressure(self, rho):
        rho = np.asarray(rho, float)
        if self.gamma == 1.0:
            return np.full_like(rho, self.kappa)
        return self.kappa * self.gamma * rho ** (self.gamma - 1.0)

    def sound_speed(self, rho):
        return np.sqrt(self.dpressure(rho))


@dataclass(frozen=True)
class GasState1D:
    """Cell averages of density and momentum on the periodic unit interval."""

    rho: np.ndarray
    mom: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        mom = np.asarray(self.mom, dtype=float)
        if rho.ndim != 1 or rho.shape != mom.shape:
            raise ValueError("rho and mom must be 1-d arrays of equal length")
        if np.any(rho < 0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mom", mom)

    @property
    def n(self):
        return self.rho.size

    @property
    def h(self):
        return 1.0 / self.rho.size

    @property
    def cells(self):
        return (np.arange(self.n) + 0.5) * self.h

    def mass(self):
        return float(np.sum(self.rho)) * self.h

    def momentum(self):
        return float(np.sum(self.mom)) * self.h


def _flux(rho, mom, law):
    rho_safe = np.maximum(rho, VACUUM_FLOOR)
    return mom, mom * mom / rho_safe + law.pressure(rho)


def max_wave_speed(state, law):
    rho_safe = np.maximum(state.rho, VACUUM_FLOOR)
    return float(np.max(np.abs(state.mom / rho_safe) + law.sound_speed(rho_safe)))


def admissible_euler_dt(state, law, cfl=0.4):
    return cfl * state.h / max(max_wave_speed(state, law), 1e-300)


def step_euler(state, law, dt, cfl=0.4):
    """One local Lax-Friedrichs step of the isentropic Euler system.

    Conservative by construction (mass and momentum telescope).  Raises
    StepRejected carrying the admissible dt when the CFL bound fails.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    adm = admissible_euler_dt(state, law, cfl)
    if dt > adm * (1.0 + 1e-12):
        raise StepRejected(
            f"dt={dt:.3e} exceeds CFL bound {adm:.3e} (cfl={cfl})", admissible=adm
        )
    rho, mom = state.rho, state.mom
    rho_r, mom_r = np.roll(rho, -1), np.roll(mom, -1)

    rho_safe = np.maximum(rho, VACUUM_FLOOR)
    speed = np.abs(mom / rho_safe) + law.sound_speed(rho_safe)
    a_face = np.maximum(speed, np.roll(speed, -1))

    f_rho, f_mom = _flux(rho, mom, law)
    f_rho_r, f_mom_r = _flux(rho_r, mom_r, law)
    # face i holds the flux between cell i and cell i+1
    face_rho = 0.5 * (f_rho + f_rho_r) - 0.5 * a_face * (rho_r - rho)
    face_mom = 0.5 * (f_mom + f_mom_r) - 0.5 * a_face * (mom_r - mom)

    lam = dt / state.h
    new_rho = rho - lam * (face_rho - np.roll(face_rho, 1))
    new_mom = mom - lam * (face_mom - np.roll(face_mom, 1))
    if not (np.all(np.isfinite(new_rho)) and np.all(np.isfinite(new_mom))):
        raise NumericalBlowup("euler step produced non-finite values")
    new_rho = np.maximum(new_rho, 0.0)
    return GasState1D(new_rho, new_mom, state.time + dt)


def run_euler_to(state, law, t_target, cfl=0.4):
    """March LLF steps at the CFL limit, landing exactly on t_target."""
    while state.time < t_target - 1e-14:
        dt = min(admissible_euler_dt(state, law, cfl), t_target - state.time)
        state = step_euler(state, law, dt, cfl)
    return state


def admissible_diffusion_dtheta(state, law):
    # explicit monotone update needs dtheta * p'(rho) / h^2 <= 1/2
    dp_max = float(np.max(law.dpressure(np.maximum(state.rho, VACUUM_FLOOR))))
    return 0.5 * state.h**2 / max(dp_max, 1e-300)


def darcy_momentum(rho, law, h):
    """Diagnostic momentum rho*v = -d/dx p(rho), centered differences."""
    p = law.pressure(rho)
    return -(np.roll(p, -1) - np.roll(p, 1)) / (2.0 * h)


def step_porous_medium(state, law, dtheta, method="explicit"):
    """One step of rho_theta = Lap p(rho) on the periodic grid.

    ``explicit`` enforces the monotone stability bound and raises
    StepRejected beyond it; ``semi-implicit`` stabilizes the Laplacian with
    a constant-coefficient implicit solve and takes any step size.  The
    momentum field is set to the Darcy diagnostic -d/dx p(rho).
    """
    if dtheta <= 0:
        raise ValueError("dtheta must be positive")
    h = state.h
    rho = state.rho
    p = law.pressure(rho)
    lap_p = (np.roll(p, -1) - 2.0 * p + np.roll(p, 1)) / h**2

    if method == "explicit":
        adm = admissible_diffusion_dtheta(state, law)
        if dtheta > adm * (1.0 + 1e-12):
            raise StepRejected(
                f"dtheta={dtheta:.3e} exceeds diffusive bound {adm:.3e}",
                admissible=adm,
            )
        new_rho = rho + dtheta * lap_p
    elif method == "semi-implicit":
        # (I - dtheta*D*Lap) delta = dtheta * Lap p(rho), D = max p'(rho);
        # the periodic constant-coefficient solve is exact in Fourier space
        big_d = float(np.max(law.dpressure(np.maximum(rho, VACUUM_FLOOR))))
        n = state.n
        k = np.arange(n // 2 + 1)
        symbol = -4.0 * np.sin(np.pi * k / n) ** 2 / h**2
        rhs_hat = np.fft.rfft(dtheta * lap_p)
        delta = np.fft.irfft(rhs_hat / (1.0 - dtheta * big_d * symbol), n=n)
        new_rho = rho + delta
    else:
        raise ValueError(f"unknown porous-medium method {method!r}")

    if not np.all(np.isfinite(new_rho)):
        raise NumericalBlowup("porous-medium step produced non-finite values")
    new_rho = np.maximum(new_rho, 0.0)
    return GasState1D(new_rho, darcy_momentum(new_rho, law, h), state.time + dtheta)


def run_porous_to(state, law, theta_target, dtheta=None, method="explicit"):
    """March the diffusion solver, landing exactly on theta_target."""
    while state.time < theta_target - 1e-16:
        if method == "explicit":
            step = 0.95 * admissible_diffusion_dtheta(state, law)
        else:
            step = dtheta if dtheta is not None else theta_target / 2000.0
        step = min(step, theta_target - state.time)
        state = step_porous_medium(state, law, step, method=method)
    return state


def mode_amplitude(values, k=1):
    """Amplitude of the k-th Fourier cosine mode of a sampled profile."""
    values = np.asarray(values, dtype=float)
    return 2.0 * np.fft.rfft(values)[k].real / values.size


def acoustic_frequency(rho0, law, t_max=1.0, cfl=0.4):
    """Measured oscillation frequency of the first density mode.

    Runs the Euler solver from rest and locates the zero crossings of the
    mode-1 cosine amplitude; for a small standing wave the continuum answer
    is the sound speed sqrt(p'(rho_bar)) times the wavenumber.
    """
    state = GasState1D(np.asarray(rho0, float), np.zeros_like(rho0))
    times = [0.0]
    amps = [mode_amplitude(state.rho)]
    while state.time < t_max:
        dt = min(admissible_euler_dt(state, law, cfl), t_max - state.time)
        state = step_euler(state, law, dt, cfl)
        times.append(state.time)
        amps.append(mode_amplitude(state.rho))
    times = np.asarray(times)
    amps = np.asarray(amps)
    crossings = []
    sign_change = np.where(np.sign(amps[:-1]) * np.sign(amps[1:]) < 0)[0]
    for i in sign_change:
        # linear interpolation of the crossing instant
        frac = amps[i] / (amps[i] - amps[i + 1])
        crossings.append(times[i] + frac * (times[i + 1] - times[i]))
    if len(crossings) < 2:
        raise ValueError("fewer than two zero crossings; run longer")
    half_period = np.mean(np.diff(crossings))
    return 0.5 / half_period


@dataclass(frozen=True)
class GasCompareResult:
    """L1 distances between Euler at t and diffusion at theta = t^2/2."""

    t: np.ndarray
    distance: np.ndarray
    euler_final: GasState1D
    diffusion_final: GasState1D

    def fitted_order(self, window=None):
        from .fitting import loglog_slope

        return loglog_slope(self.t, self.distance, window)


def euler_heat_compare(rho0, law, t_samples, cfl=0.4, pm_dtheta=1e-6):
    """Distance between the Euler flow started at rest and its diffusive limit.

    Both solvers start from rho0 (momentum zero); the diffusion runs in the
    rescaled time theta = t^2/2 with the semi-implicit stepper.  Returns the
    L1 cell distances at the requested times.
    """
    t_samples = np.asarray(t_samples, dtype=float)
    if np.any(np.diff(t_samples) <= 0) or np.any(t_samples <= 0):
        raise ValueError("t_samples must be positive and increasing")
    rho0 = np.asarray(rho0, dtype=float)
    euler = GasState1D(rho0, np.zeros_like(rho0))
    diff = GasState1D(rho0, np.zeros_like(rho0))
    h = euler.h
    distances = np.empty_like(t_samples)
    for j, t in enumerate(t_samples):
        euler = run_euler_to(euler, law, t, cfl)
        diff = run_porous_to(diff, law, 0.5 * t * t, dtheta=pm_dtheta, method="semi-implicit")
        distances[j] = h * float(np.sum(np.abs(euler.rho - diff.rho)))
    return GasCompareResult(
        t=t_samples, distance=distances, euler_final=euler, diffusion_final=diff
    )
