import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from quadtime.certify import (
    CertParams,
    TrialTriple,
    cert_params_for,
    certify,
    certify_klambda,
    compute_cstar,
    convexity_check,
    eta_defect,
    k_lambda,
    standard_trial_dictionary,
    trial_coefficients,
    weak_strong_experiment,
)
from quadtime.curves import make_circle
from quadtime.errors import GridMismatch, InvalidParams, InvalidTrial
from quadtime.fields import FieldState, leray_project, lift_curve, run_eulerian_short

R0 = 0.25


def unit_e(component, n=32, d=2):
    b = np.zeros((d,) + (n,) * d)
    b[component] = 1.0
    return b


@pytest.fixture(scope="module")
def circle_pair():
    state0 = lift_curve(make_circle(1024, radius=R0, center=(0.5, 0.5)), 64)
    dtheta = 0.08 * state0.h**2
    run1 = run_eulerian_short(state0, dtheta, 0.1 * R0**2, record_every=32)
    run2 = run_eulerian_short(state0, dtheta / 2, 0.1 * R0**2, record_every=64)
    return run1, run2


def test_eta_defect_geometry():
    rng = np.random.default_rng(11)
    bstar = unit_e(0)
    rho = rng.uniform(0.2, 2.0, size=(32, 32))
    aligned = np.stack([rho, np.zeros_like(rho)])
    assert np.max(eta_defect(aligned, bstar)) == 0.0
    anti = -aligned
    assert eta_defect(anti, bstar) == pytest.approx(2 * rho)
    perp = np.stack([np.zeros_like(rho), rho])
    assert eta_defect(perp, bstar) == pytest.approx(rho)
    random_b = rng.standard_normal((2, 32, 32))
    eta = eta_defect(random_b, bstar)
    assert np.all(eta >= 0.0)
    # zero exactly where B is a nonnegative multiple of b*
    zero = eta < 1e-14
    assert np.array_equal(zero, (random_b[1] == 0) & (random_b[0] >= 0))


def test_trial_validation():
    with pytest.raises(InvalidTrial):
        TrialTriple(bstar=2.0 * unit_e(0))
    with pytest.raises(InvalidTrial):
        TrialTriple(bstar=unit_e(0), lam=0.0)
    with pytest.raises(InvalidTrial):
        TrialTriple(bstar=unit_e(0), avec=3.0 * unit_e(1), lam=1.0)
    ok = TrialTriple(bstar=unit_e(0), avec=0.5 * unit_e(1), lam=1.0)
    assert np.max(np.abs(ok.a_at(0.0))) == pytest.approx(0.5)


def test_golden_trial_coefficients():
    n = 64
    x = (np.arange(n) / n)[:, None] * np.ones((1, n))
    f = np.sin(2 * np.pi * x)
    fprime = 2 * np.pi * np.cos(2 * np.pi * x)
    v = np.zeros((2, n, n))
    v[1] = f
    trial = TrialTriple(bstar=unit_e(0, n), vstar=v, name="golden")
    l1, l2, l3 = trial_coefficients(trial)
    assert np.max(np.abs(l1 - f**2)) < 1e-11
    assert np.max(np.abs(l2[0] - f**2)) < 1e-11
    assert np.max(np.abs(l2[1] - fprime)) < 1e-10
    assert np.max(np.abs(l3[0])) < 1e-12
    assert np.max(np.abs(l3[1] + f)) < 1e-12
    rest = TrialTriple(bstar=unit_e(0, n))
    for part in trial_coefficients(rest):
        assert np.max(np.abs(part)) == 0.0


def test_cstar_values():
    assert compute_cstar(TrialTriple(bstar=unit_e(0))) == 0.0
    v = np.zeros((2, 32, 32))
    v[0], v[1] = 0.3, -0.4
    assert compute_cstar(TrialTriple(bstar=unit_e(0), vstar=v)) == pytest.approx(0.25)
    n = 64
    x = (np.arange(n) / n)[:, None] * np.ones((1, n))
    vf = np.zeros((2, n, n))
    vf[1] = np.sin(2 * np.pi * x)
    golden = compute_cstar(TrialTriple(bstar=unit_e(0, n), vstar=vf))
    assert golden == pytest.approx(2 * np.pi + 1.0, abs=1e-9)


def test_cert_params_threshold():
    trial = TrialTriple(bstar=unit_e(0), lam=2.0)
    params = cert_params_for(trial)
    assert params.r == pytest.approx(2.0)  # lam^2/2 with cstar = 0, v* = 0
    assert params.cstar == 0.0
    with pytest.raises(InvalidParams):
        cert_params_for(trial, r=1.0)
    bigger = cert_params_for(trial, r=5.0)
    assert bigger.r == 5.0


def test_k_lambda_formula_and_bounds():
    assert k_lambda(1.0, 2.0, 1.0) == pytest.approx(1.5)
    assert k_lambda(1.0, 0.5, 1.0) == pytest.approx(0.125)
    assert k_lambda(2.0, np.array([3.0, 4.0]), 10.0) == pytest.approx(25.0 / 4)
    with pytest.raises(ValueError):
        k_lambda(0.0, 1.0, 1.0)
    rng = np.random.default_rng(42)
    for _ in range(2000):
        rho = rng.uniform(0.05, 3.0)
        z = rng.normal(size=3) * rng.uniform(0.1, 3.0)
        lam = rng.uniform(0.2, 2.0)
        value = k_lambda(rho, z, lam)
        zn = np.linalg.norm(z)
        best = minimize_scalar(
            lambda t: -(zn * lam * t - rho * (lam * t) ** 2 / 2),
            bounds=(0.0, 1.0),
            method="bounded",
            options={"xatol": 1e-12},
        )
        assert abs(value + best.fun) <= 1e-4 * max(value, 1e-12)
        # sampled A never beats the formula; lower bound never violated
        a = rng.normal(size=(64, 3))
        radii = lam * rng.uniform(0, 1, 64) ** (1 / 3)
        a *= (radii / np.linalg.norm(a, axis=1))[:, None]
        sampled = a @ z - rho * np.sum(a**2, axis=1) / 2
        assert sampled.max() <= value + 1e-12
        assert min(zn**2 / (2 * rho), lam * zn / 2) <= value + 1e-12


def test_stationary_constant_field_margin_is_quadrature_zero():
    b = np.zeros((2, 48, 48))
    b[0], b[1] = 0.3, 0.8
    frames = [
        FieldState(b, np.zeros_like(b), th) for th in np.linspace(0.0, 0.5, 26)
    ]
    report = certify(frames, [TrialTriple(bstar=unit_e(1, 48), name="e2")], 1e-6)
    assert np.max(np.abs(report.margins)) < 1e-6
    assert report.passed


def test_circle_run_passes_dictionary(circle_pair):
    run, _ = circle_pair
    mass0 = run.masses[0]
    trials = standard_trial_dictionary(2, 64)
    report = certify(run.states, trials, 1e-3 * mass0)
    assert report.passed
    assert report.max_margin <= 0.0 + 1e-12
    assert len(report.trial_names) == 7
    payload = report.to_dict()
    assert payload["passed"] and payload["worst_trial"] in payload["trials"]


def test_corrupted_trajectory_is_flagged(circle_pair):
    run, _ = circle_pair
    mass0 = run.masses[0]
    trials = standard_trial_dictionary(2, 64)
    corrupted = [run.states[0]] + [
        FieldState(1.05 * s.b, s.p, s.theta, s.rho_floor) for s in run.states[1:]
    ]
    report = certify(corrupted, trials, 1e-3 * mass0)
    assert not report.passed
    assert report.max_margin > 0.05  # mass bump of 5% shows up directly


def test_convexity_mixture_bounded_by_combination(circle_pair):
    run1, run2 = circle_pair
    mass0 = run1.masses[0]
    tol = 1e-3 * mass0
    trials = standard_trial_dictionary(2, 64)[:4]
    params = [cert_params_for(t) for t in trials]
    rep1 = certify(run1.states, trials, tol, params)
    rep2 = certify(run2.states, trials, tol, params)
    for t in (0.1, 0.5, 0.9):
        mixed = convexity_check(run1.states, run2.states, t, trials, tol, params)
        assert mixed.passed
        combo = t * rep1.margins + (1 - t) * rep2.margins
        assert np.max(mixed.margins - combo) <= 1e-12
    same = convexity_check(run1.states, run1.states, 1.0, trials, tol, params)
    assert same.margins == pytest.approx(rep1.margins)


def test_convexity_guards(circle_pair):
    run1, run2 = circle_pair
    trials = standard_trial_dictionary(2, 64)[:1]
    with pytest.raises(ValueError):
        convexity_check(run1.states, run2.states, 1.5, trials, 1e-3)
    with pytest.raises(GridMismatch):
        convexity_check(run1.states, run2.states[:-1], 0.5, trials, 1e-3)
    shifted = [
        FieldState(1.2 * s.b, s.p, s.theta, s.rho_floor) for s in run2.states
    ]
    with pytest.raises(GridMismatch):
        convexity_check(run1.states, shifted, 0.5, trials, 1e-3)


def test_dictionary_margins_lower_bound_klambda(circle_pair):
    run, _ = circle_pair
    trials = standard_trial_dictionary(2, 64)
    base = TrialTriple(bstar=trials[0].bstar, lam=1.0, name="e1")
    params = cert_params_for(base)
    km = certify_klambda(run.states, base, params)
    rng = np.random.default_rng(3)
    n = 64
    ax = np.arange(n) / n
    xg, yg = np.meshgrid(ax, ax, indexing="ij")

    def random_a():
        f = np.zeros((2, n, n))
        for c in range(2):
            for _ in range(3):
                kx, ky = rng.integers(-3, 4, size=2)
                f[c] += rng.normal() * np.cos(
                    2 * np.pi * (kx * xg + ky * yg) + rng.uniform(0, 2 * np.pi)
                )
        return f / max(np.max(np.sqrt(np.sum(f**2, axis=0))), 1e-12)

    pool = [random_a() for _ in range(128)]
    gaps = []
    for size in (8, 32, 128):
        best = np.full(len(run.states), -np.inf)
        for a in pool[:size]:
            entry = TrialTriple(bstar=base.bstar, avec=a, lam=1.0, name="a")
            rep = certify(run.states, [entry], 1.0, [params])
            best = np.maximum(best, rep.margins[0])
        assert np.max(best - km) <= 1e-12
        gaps.append(float(np.max(km - best)))
    # nested dictionaries close the gap monotonically
    assert gaps[0] >= gaps[1] >= gaps[2]
    assert gaps[2] < gaps[0]


def test_margin_monotonicity_in_r():
    n = 48
    ax = np.arange(n) / n
    rho0 = 1.0 + 0.3 * np.cos(2 * np.pi * ax)[None, :] * np.ones((n, 1))
    aligned = FieldState(np.stack([rho0, np.zeros_like(rho0)]), None, 0.0)
    run = run_eulerian_short(aligned, 0.08 * aligned.h**2, 0.02, record_every=144)
    trial = TrialTriple(bstar=unit_e(0, n), lam=1.0, name="e1")
    for r in (None, 3.0, 10.0):
        params = cert_params_for(trial, r=r)
        report = certify(run.states, [trial], 1e-6, [params])
        assert report.passed


def test_jensen_time_convexity_of_dissipation(circle_pair):
    run, _ = circle_pair
    base = TrialTriple(bstar=standard_trial_dictionary(2, 64)[0].bstar, name="e1")
    params = cert_params_for(base)
    report = certify(run.states, [base], 1.0, [params])
    th = np.asarray(run.thetas)
    lhs = np.trapezoid(np.exp(-params.r * th) * report.dissipation[0], th)
    cell = run.states[0].cell
    rho_ints = [s.rho().sum() * cell for s in run.states]
    z_ints = [
        np.sum(np.sqrt(np.sum(s.p**2, axis=0))) * cell for s in run.states
    ]
    pointwise = [k_lambda(r, z, 1.0) for r, z in zip(rho_ints, z_ints)]
    rhs = np.exp(-params.r * th[-1]) * np.trapezoid(pointwise, th)
    assert lhs >= rhs - 1e-12


def test_weak_strong_aligned_and_misaligned():
    n = 64
    ax = np.arange(n) / n
    xg, yg = np.meshgrid(ax, ax, indexing="ij")
    rho0 = 1.0 + 0.3 * np.cos(2 * np.pi * yg)
    b_ref = unit_e(0, n)
    v_zero = np.zeros((2, n, n))
    aligned = FieldState(np.stack([rho0, np.zeros_like(rho0)]), None, 0.0)
    report = weak_strong_experiment((b_ref, v_zero), aligned, 0.05, record_every=256)
    assert report.eta_bounded and report.defect_bounded and report.gronwall_ok
    assert np.max(report.eta_series) == 0.0

    psi = 0.05 * np.sin(2 * np.pi * xg) * np.sin(4 * np.pi * yg) / (2 * np.pi)
    pert = np.stack(
        [np.gradient(psi, 1 / n, axis=1), -np.gradient(psi, 1 / n, axis=0)]
    )
    start = leray_project(np.stack([rho0, np.zeros_like(rho0)]) + pert)
    misaligned = FieldState(start, None, 0.0)
    report2 = weak_strong_experiment((b_ref, v_zero), misaligned, 0.05, record_every=256)
    assert not report2.eta_bounded  # genuinely misaligned at the start
    assert report2.gronwall_ok
    assert report2.cstar == 0.0
    assert np.max(report2.eta_series) <= report2.eta_series[0] * (1 + 1e-2)


def test_weak_strong_detects_wrong_velocity():
    n = 64
    ax = np.arange(n) / n
    rho0 = 1.0 + 0.3 * np.cos(2 * np.pi * ax)[None, :] * np.ones((n, 1))
    aligned = FieldState(np.stack([rho0, np.zeros_like(rho0)]), None, 0.0)
    v_wrong = np.zeros((2, n, n))
    v_wrong[1] = 0.1
    report = weak_strong_experiment(
        (unit_e(0, n), v_wrong), aligned, 0.05, record_every=256
    )
    assert not report.defect_bounded
    assert report.defect_series[-1] > 0.5 * report.defect_series[0]
    with pytest.raises(InvalidTrial):
        weak_strong_experiment((2.0 * unit_e(0, n), v_wrong), aligned, 0.05)
