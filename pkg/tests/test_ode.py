"""Tests for the conservative/gradient-flow comparison machinery."""

import numpy as np
import pytest

from quadtime.errors import IterationLimit, NumericalBlowup
from quadtime.ode import (
    GradientFlowState,
    OdeState,
    anisotropic_potential,
    gronwall_constant,
    linear_potential,
    log_cosh_potential,
    modulated_energy,
    ode_dissipative_residual,
    quadratic_potential,
    quadratic_time_compare,
    run_conservative,
    run_gradient_flow,
    step_gradient_flow,
    suite_potentials,
)


def test_potential_consistency():
    # grad matches finite differences of value, hess matches those of grad,
    # and the Hessian spectrum sits inside [convexity_lo, convexity_hi].
    rng = np.random.default_rng(0)
    for pot in suite_potentials():
        for _ in range(10):
            x = rng.normal(size=pot.dim)
            h = 1e-6
            fd_grad = np.array(
                [
                    (pot.value(x + h * e) - pot.value(x - h * e)) / (2 * h)
                    for e in np.eye(pot.dim)
                ]
            )
            np.testing.assert_allclose(pot.grad(x), fd_grad, rtol=1e-6, atol=1e-8)
            fd_hess = np.array(
                [
                    (pot.grad(x + h * e) - pot.grad(x - h * e)) / (2 * h)
                    for e in np.eye(pot.dim)
                ]
            )
            np.testing.assert_allclose(pot.hess(x), fd_hess, rtol=1e-5, atol=1e-7)
            eigs = np.linalg.eigvalsh(pot.hess(x))
            assert np.all(eigs >= pot.convexity_lo - 1e-12)
            assert np.all(eigs <= pot.convexity_hi + 1e-12)


def test_harmonic_tracks_cosine():
    pot = quadratic_potential(1)
    times, xs, _ = run_conservative([1.0], pot, dt=1e-4, n_steps=10_000)
    assert np.max(np.abs(xs[:, 0] - np.cos(times))) <= 1e-6


def test_free_motion_is_exact():
    # zero force: straight-line motion to round-off
    pot = linear_potential([0.0, 0.0])
    times, xs, vs = run_conservative([1.0, -2.0], pot, dt=0.01, n_steps=500, v0=[0.3, 0.7])
    exact = np.array([1.0, -2.0]) + times[:, None] * np.array([0.3, 0.7])
    np.testing.assert_allclose(xs, exact, rtol=0, atol=1e-13)
    np.testing.assert_allclose(vs, np.tile([0.3, 0.7], (times.size, 1)), rtol=0, atol=0)


def test_constant_acceleration_is_exact():
    g = 2.5
    pot = linear_potential([g])
    times, xs, vs = run_conservative([0.5], pot, dt=0.01, n_steps=800)
    np.testing.assert_allclose(xs[:, 0], 0.5 + 0.5 * g * times**2, rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(vs[:, 0], g * times, rtol=1e-13, atol=1e-13)


def test_energy_drift_second_order():
    # |E(t)-E(0)| = O(dt^2): halving dt quarters the drift
    pot = quadratic_potential(1)

    def drift(dt):
        times, xs, vs = run_conservative([1.0], pot, dt=dt, n_steps=int(10.0 / dt))
        energy = 0.5 * vs[:, 0] ** 2 + pot.value(xs)
        return np.max(np.abs(energy - energy[0]))

    ratio = drift(0.01) / drift(0.005)
    assert 3.5 <= ratio <= 4.5


def test_gradient_flow_exponential_decay():
    pot = quadratic_potential(1)
    thetas, zs = run_gradient_flow([1.0], pot, dtheta=1e-3, n_steps=1000)
    assert np.max(np.abs(zs[:, 0] - np.exp(-thetas))) <= 1e-8


def test_gradient_flow_critical_point_stationary():
    for pot in suite_potentials():
        z0 = np.zeros(pot.dim)
        _, zs = run_gradient_flow(z0, pot, dtheta=0.05, n_steps=100)
        np.testing.assert_allclose(zs, 0.0, atol=1e-14)


def test_gradient_flow_dissipation_rate():
    # (phi(Z_{k+1}) - phi(Z_k))/dtheta = -|grad phi(Z_k)|^2 + O(dtheta)
    pot = log_cosh_potential()
    z0 = np.array([1.3, -0.8])

    def rate_defect(dtheta):
        state = GradientFlowState(0.0, z0)
        new = step_gradient_flow(state, pot, dtheta)
        discrete = (pot.value(new.z) - pot.value(z0)) / dtheta
        return abs(discrete + np.sum(pot.grad(z0) ** 2))

    d1, d2 = rate_defect(1e-3), rate_defect(5e-4)
    assert d2 <= 0.7 * d1


def test_gradient_flow_energy_decreases():
    for pot in suite_potentials():
        rng = np.random.default_rng(7)
        z = rng.normal(size=pot.dim)
        state = GradientFlowState(0.0, z)
        for _ in range(50):
            new = step_gradient_flow(state, pot, 1e-2)
            assert pot.value(new.z) <= pot.value(state.z) + 1e-15
            state = new


def test_implicit_euler_handles_stiff_step():
    # dtheta far beyond the explicit stability limit still contracts
    pot = anisotropic_potential([0.5, 1.0, 2.0])
    state = GradientFlowState(0.0, np.array([1.0, 1.0, 1.0]))
    new = step_gradient_flow(state, pot, dtheta=50.0, method="implicit")
    exact = np.exp(-50.0 * np.array([0.5, 1.0, 2.0]))
    # backward Euler: componentwise 1/(1 + dtheta*eig), all tiny and positive
    expected = 1.0 / (1.0 + 50.0 * np.array([0.5, 1.0, 2.0]))
    np.testing.assert_allclose(new.z, expected, rtol=1e-12)
    assert np.all(new.z < 1e-1) and np.all(new.z > 0) and np.all(exact < new.z)


def test_implicit_euler_iteration_limit():
    pot = log_cosh_potential()
    state = GradientFlowState(0.0, np.array([2.0, -1.0]))
    with pytest.raises(IterationLimit) as info:
        step_gradient_flow(state, pot, dtheta=10.0, method="implicit", max_iter=1)
    assert info.value.residual > 0


def test_blowup_is_reported():
    pot = quadratic_potential(1)
    with pytest.raises(NumericalBlowup) as info:
        run_conservative([1.0], pot, dt=3.0, n_steps=5000)
    assert info.value.step is not None


def test_modulated_energy_pinned_values():
    pot = quadratic_potential(1)
    assert modulated_energy([1.0], [0.5], [1.0], [0.5], pot) == pytest.approx(0.0, abs=1e-15)
    assert modulated_energy([1.0], [0.0], [0.0], [0.0], pot) == pytest.approx(0.5)
    assert modulated_energy([2.0], [1.0], [1.0], [0.0], pot) == pytest.approx(1.0)


def test_modulated_energy_equivalence_sandwich():
    # convexity_lo <= 2 eta / (|x-y|^2 + |v-w|^2) <= 1/convexity_lo
    rng = np.random.default_rng(42)
    for pot in suite_potentials():
        lo = pot.convexity_lo
        for _ in range(200):
            x, v, y, w = (rng.normal(size=pot.dim) for _ in range(4))
            denom = np.sum((x - y) ** 2) + np.sum((v - w) ** 2)
            if denom < 1e-12:
                continue
            ratio = 2.0 * modulated_energy(x, v, y, w, pot) / denom
            assert lo - 1e-10 <= ratio <= 1.0 / lo + 1e-10


def test_quadratic_time_galileo_exact():
    pot = linear_potential([3.0])
    res = quadratic_time_compare([0.2], pot, t_max=1.0, dt=1e-3)
    assert np.max(res.e) <= 1e-10


def test_quadratic_time_harmonic_matches_closed_form():
    # closed forms X = cos t, Z = exp(-theta); e(t) = t^6/9 - 17 t^8/240 + ...
    pot = quadratic_potential(1)
    res = quadratic_time_compare([1.0], pot, t_max=0.1, dt=1e-4)
    # skip t < 10*dt where the integrator error is comparable to the t^6 signal
    t = res.t[10:]
    exact = (np.cos(t) - np.exp(-0.5 * t**2)) ** 2 + (
        -np.sin(t) + t * np.exp(-0.5 * t**2)
    ) ** 2
    np.testing.assert_allclose(res.e[10:], exact, rtol=2e-2, atol=1e-30)
    lead = res.e[-1] / res.t[-1] ** 6
    assert lead == pytest.approx(1.0 / 9.0, rel=2e-2)


def test_quadratic_time_error_slope_window():
    pot = quadratic_potential(1)
    res = quadratic_time_compare([1.0], pot, t_max=0.1, dt=1e-4)
    assert 5.7 <= res.error_slope((1e-3, 1e-1)) <= 6.3


def test_quadratic_time_suite_slopes():
    rng = np.random.default_rng(3)
    for pot in suite_potentials()[1:]:
        x0 = 0.5 + rng.random(pot.dim)
        res = quadratic_time_compare(x0, pot, t_max=0.1, dt=1e-4)
        assert res.error_slope((1e-3, 1e-1)) >= 4.7


def test_dissipative_residual_vanishes_on_self():
    pot = quadratic_potential(1)
    times, xs, vs = run_conservative([1.0], pot, dt=1e-3, n_steps=1000)
    res = ode_dissipative_residual(times, xs, vs, xs, pot)
    assert abs(res) <= 1e-6


def test_dissipative_residual_random_smooth_trials():
    # the inequality holds (residual <= 0 up to discretization) for a true
    # trajectory against arbitrary smooth trial curves
    pot = log_cosh_potential()
    times, xs, vs = run_conservative([0.9, -0.4], pot, dt=1e-3, n_steps=1000, v0=[0.1, 0.0])
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = rng.normal(scale=0.5, size=2)
        b = rng.normal(scale=0.3, size=2)
        amp = rng.normal(scale=0.4, size=2)
        freq = 1.0 + 2.0 * rng.random(2)
        phase = 2 * np.pi * rng.random(2)
        ys = a + b * times[:, None] + amp * np.sin(freq * times[:, None] + phase)
        res = ode_dissipative_residual(times, xs, vs, ys, pot)
        sup_speed = np.max(np.abs(b) + np.abs(amp * freq))
        scale = max(
            1.0,
            modulated_energy(xs[0], vs[0], ys[0], (ys[1] - ys[0]) / 1e-3, pot)
            * np.exp(gronwall_constant(pot, sup_speed) * times[-1]),
        )
        assert res <= 1e-4 * scale


def test_dissipative_residual_flags_non_solution():
    # x = cos(2t) does not solve x'' = -x; against the true solution cos(t)
    # the residual must go positive for some horizon T <= 1
    pot = quadratic_potential(1)
    positive = []
    for t_final in (0.25, 0.5, 0.75, 1.0):
        times = np.linspace(0.0, t_final, 400)
        xs = np.cos(2 * times)[:, None]
        vs = -2 * np.sin(2 * times)[:, None]
        ys = np.cos(times)[:, None]
        positive.append(ode_dissipative_residual(times, xs, vs, ys, pot) > 1e-3)
    assert any(positive)


def test_dissipative_residual_argument_errors():
    pot = quadratic_potential(1)
    t = np.linspace(0, 1, 10)
    good = np.zeros((10, 1))
    with pytest.raises(ValueError):
        ode_dissipative_residual(t[:3], good[:3], good[:3], good[:3], pot)
    with pytest.raises(ValueError):
        ode_dissipative_residual(t, good[:, :], good, np.zeros((10, 2)), pot)
    bad_grid = t.copy()
    bad_grid[4] += 0.05
    with pytest.raises(ValueError):
        ode_dissipative_residual(bad_grid, good, good, good, pot)


def test_step_rejects_nonpositive_dt():
    pot = quadratic_potential(1)
    state = OdeState(0.0, np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        from quadtime.ode import step_conservative

        step_conservative(state, pot, 0.0)
    gstate = GradientFlowState(0.0, np.array([1.0]))
    with pytest.raises(ValueError):
        step_gradient_flow(gstate, pot, -1e-3)
