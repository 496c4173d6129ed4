"""Configuration-driven experiment runner.

Subcommands:
  run       execute an experiment described by a TOML or JSON config
  validate  schema-check a config without running anything
  list      print the available experiment kinds

Every run writes CSV/JSON artifacts plus a manifest.json listing each
emitted file with its sha256.  Identical config and seed reproduce
byte-identical artifacts, so the manifest hashes double as a determinism
check.  The bundled experiment kinds are deterministic; the seed is
validated and recorded for suites that draw randomness.

Exit codes: 0 success, 2 config error, 3 numerical blowup, 4 failed
certification.  The default output root is ./runs, overridable by the
QUADTIME_OUT environment variable or the --out flag.

Floats in CSV files are printed with 17 significant digits; JSON uses
shortest round-trip formatting.  Both are stable across reruns.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError, QuadtimeError

TOOL_VERSION = "0.1.0"

KINDS = {
    "ode-compare": "conservative ODE against the gradient flow in quadratic time",
    "gas-heat": "1d Euler flow started at rest against its diffusive limit",
    "string-vs-curve": "regularized string against the curve-shortening flow",
    "curve-run": "curve-shortening run with length and radius series",
    "eulerian-run": "dissipative field run from a lifted circle",
    "certify": "relative-entropy certification of a field run",
    "weak-strong": "field run compared against a smooth aligned solution",
}


def _fail(key, message):
    raise ConfigError(f"{key}: {message}")


def _check_float(key, value, lo=None, hi=None, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(key, "expected a number")
    value = float(value)
    if positive and value <= 0:
        _fail(key, "must be positive")
    if lo is not None and value < lo:
        _fail(key, f"must be >= {lo}")
    if hi is not None and value > hi:
        _fail(key, f"must be <= {hi}")
    return value


def _check_int(key, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(key, "expected an integer")
    if lo is not None and value < lo:
        _fail(key, f"must be >= {lo}")
    return value


def _check_bool(key, value):
    if not isinstance(value, bool):
        _fail(key, "expected true or false")
    return value


def _check_str(key, value, choices=None):
    if not isinstance(value, str):
        _fail(key, "expected a string")
    if choices is not None and value not in choices:
        _fail(key, f"must be one of {sorted(choices)}")
    return value


def _check_float_list(key, value, positive=False, increasing=False):
    if not isinstance(value, list) or not value:
        _fail(key, "expected a non-empty list of numbers")
    try:
        out = [_check_float(key, v, positive=positive) for v in value]
    except ConfigError:
        _fail(key, "expected a list of numbers")
    if increasing and any(b <= a for a, b in zip(out, out[1:])):
        _fail(key, "must be strictly increasing")
    return out


# each schema entry: key -> (default, checker); None default means the
# experiment computes it at run time and echoes the realized value
SCHEMAS = {
    "ode-compare": {
        "potential": (
            "quadratic",
            lambda k, v: _check_str(
                k, v, {"quadratic", "anisotropic", "log-cosh", "linear"}
            ),
        ),
        "t_max": (0.1, lambda k, v: _check_float(k, v, positive=True)),
        "dt": (2e-4, lambda k, v: _check_float(k, v, positive=True)),
        "dtheta_max": (1e-4, lambda k, v: _check_float(k, v, positive=True)),
        "x0": (None, lambda k, v: _check_float_list(k, v)),
    },
    "gas-heat": {
        "n": (256, lambda k, v: _check_int(k, v, lo=8)),
        "amplitude": (0.01, lambda k, v: _check_float(k, v, positive=True, hi=0.99)),
        "kappa": (1.0, lambda k, v: _check_float(k, v, positive=True)),
        "gamma": (1.0, lambda k, v: _check_float(k, v, lo=1.0)),
        "cfl": (0.4, lambda k, v: _check_float(k, v, positive=True, hi=1.0)),
        "pm_dtheta": (1e-6, lambda k, v: _check_float(k, v, positive=True)),
        "t_samples": (
            [0.05, 0.1, 0.2, 0.4],
            lambda k, v: _check_float_list(k, v, positive=True, increasing=True),
        ),
    },
    "string-vs-curve": {
        "curve_n": (128, lambda k, v: _check_int(k, v, lo=8)),
        "radius": (0.25, lambda k, v: _check_float(k, v, positive=True)),
        "eps": (0.2, lambda k, v: _check_float(k, v, positive=True)),
        "t_max": (0.3, lambda k, v: _check_float(k, v, positive=True)),
        "n_samples": (6, lambda k, v: _check_int(k, v, lo=2)),
    },
    "curve-run": {
        "curve_n": (256, lambda k, v: _check_int(k, v, lo=8)),
        "radius": (1.0, lambda k, v: _check_float(k, v, positive=True)),
        "dtheta": (5e-5, lambda k, v: _check_float(k, v, positive=True)),
        "theta_end": (None, lambda k, v: _check_float(k, v, positive=True)),
        "record_every": (100, lambda k, v: _check_int(k, v, lo=1)),
        "estimate_extinction": (True, _check_bool),
    },
    "eulerian-run": {
        "n": (128, lambda k, v: _check_int(k, v, lo=16)),
        "curve_n": (2048, lambda k, v: _check_int(k, v, lo=8)),
        "radius": (0.25, lambda k, v: _check_float(k, v, positive=True, hi=0.49)),
        "kernel_width": (2.0, lambda k, v: _check_float(k, v, lo=1.5)),
        "theta_end": (None, lambda k, v: _check_float(k, v, positive=True)),
        "record_every": (64, lambda k, v: _check_int(k, v, lo=1)),
        "save_final": (True, _check_bool),
    },
    "certify": {
        "n": (64, lambda k, v: _check_int(k, v, lo=16)),
        "curve_n": (1024, lambda k, v: _check_int(k, v, lo=8)),
        "radius": (0.25, lambda k, v: _check_float(k, v, positive=True, hi=0.49)),
        "theta_end": (None, lambda k, v: _check_float(k, v, positive=True)),
        "record_every": (32, lambda k, v: _check_int(k, v, lo=1)),
        "lambda": (1.0, lambda k, v: _check_float(k, v, positive=True)),
        "tolerance_factor": (1e-3, lambda k, v: _check_float(k, v, positive=True)),
        "corrupt": (False, _check_bool),
    },
    "weak-strong": {
        "n": (64, lambda k, v: _check_int(k, v, lo=16)),
        "case": (
            "aligned",
            lambda k, v: _check_str(k, v, {"aligned", "misaligned", "wrong-velocity"}),
        ),
        "horizon": (0.2, lambda k, v: _check_float(k, v, positive=True)),
        "record_every": (256, lambda k, v: _check_int(k, v, lo=1)),
        "tolerance": (1e-8, lambda k, v: _check_float(k, v, positive=True)),
        "amplitude": (0.3, lambda k, v: _check_float(k, v, positive=True, hi=0.99)),
        "perturbation": (0.05, lambda k, v: _check_float(k, v, positive=True)),
    },
}

COMMON = {
    "out": (None, lambda k, v: _check_str(k, v)),
    "seed": (0, lambda k, v: _check_int(k, v, lo=0)),
    "threads": (1, lambda k, v: _check_int(k, v, lo=1)),
}


def load_raw_config(path):
    """Parse a TOML or JSON config file into a dict."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(
                f"JSON parse error at line {err.lineno}, column {err.colno}: "
                f"{err.msg}"
            ) from err
    else:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"TOML parse error: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table of keys")
    return raw


def validate_config(raw, overrides=None):
    """Schema-check a raw config dict; returns the fully defaulted config."""
    raw = dict(raw)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    kind = raw.pop("kind", None)
    if kind is None:
        raise ConfigError("kind: missing (pick one of " + ", ".join(KINDS) + ")")
    if kind not in SCHEMAS:
        raise ConfigError(f"kind: unknown experiment '{kind}'")
    schema = {**SCHEMAS[kind], **COMMON}
    config = {"kind": kind}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"{key}: unknown key for experiment '{kind}'")
        config[key] = schema[key][1](key, value)
    for key, (default, _) in schema.items():
        config.setdefault(key, default)
    return config


def _atomic_bytes(path, payload):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _write_json(path, obj):
    _atomic_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def _write_csv(path, columns):
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    tmp = path.with_name(path.name + ".tmp")
    np.savetxt(tmp, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")
    os.replace(tmp, path)


def _run_ode_compare(cfg, outdir):
    from . import ode

    x0 = cfg["x0"]
    if cfg["potential"] == "quadratic":
        x0 = x0 if x0 is not None else [1.0]
        potential = ode.quadratic_potential(dim=len(x0))
    elif cfg["potential"] == "anisotropic":
        x0 = x0 if x0 is not None else [0.7, -0.4, 0.5]
        if len(x0) != 3:
            raise ConfigError("x0: anisotropic potential needs 3 components")
        potential = ode.anisotropic_potential()
    elif cfg["potential"] == "log-cosh":
        x0 = x0 if x0 is not None else [0.6, -0.3]
        if len(x0) != 2:
            raise ConfigError("x0: log-cosh potential needs 2 components")
        potential = ode.log_cosh_potential()
    else:
        x0 = x0 if x0 is not None else [1.0]
        potential = ode.linear_potential(np.ones(len(x0)))
    cfg["x0"] = list(map(float, x0))
    result = ode.quadratic_time_compare(
        np.asarray(x0, dtype=float), potential, cfg["t_max"], cfg["dt"],
        dtheta_max=cfg["dtheta_max"],
    )
    _write_csv(outdir / "series.csv", {"t": result.t, "e": result.e})
    window = (1e-3, min(1e-1, cfg["t_max"]))
    report = {
        "potential": cfg["potential"],
        "fitted_slope": float(result.error_slope(window)),
        "window": list(window),
        "final_error": float(result.e[-1]),
        "max_error": float(np.max(result.e)),
    }
    _write_json(outdir / "report.json", report)
    return ["series.csv", "report.json"], 0


def _run_gas_heat(cfg, outdir):
    from .gas import PressureLaw, GasState1D, euler_heat_compare, mode_amplitude, run_porous_to

    law = PressureLaw(cfg["kappa"], cfg["gamma"])
    n = cfg["n"]
    x = (np.arange(n) + 0.5) / n
    rho0 = 1.0 + cfg["amplitude"] * np.cos(2 * np.pi * x)
    result = euler_heat_compare(
        rho0, law, cfg["t_samples"], cfl=cfg["cfl"], pm_dtheta=cfg["pm_dtheta"]
    )
    _write_csv(outdir / "series.csv", {"t": result.t, "distance": result.distance})
    thetas = np.linspace(0.0, 0.01, 11)
    state = GasState1D(rho0, np.zeros_like(rho0))
    amps = [mode_amplitude(state.rho)]
    for hi in thetas[1:]:
        state = run_porous_to(state, law, hi, method="explicit")
        amps.append(mode_amplitude(state.rho))
    rate = float(-np.polyfit(thetas, np.log(amps), 1)[0])
    report = {
        "fitted_order": float(result.fitted_order()),
        "decay_rate": rate,
        "decay_rate_target": float(4 * np.pi**2),
        "n": n,
        "gamma": cfg["gamma"],
    }
    _write_json(outdir / "report.json", report)
    return ["series.csv", "report.json"], 0


def _run_string_vs_curve(cfg, outdir):
    from .curves import make_circle
    from .strings import string_vs_shortening

    curve = make_circle(cfg["curve_n"], radius=cfg["radius"])
    result = string_vs_shortening(
        curve, cfg["eps"], cfg["t_max"], n_samples=cfg["n_samples"]
    )
    _write_csv(outdir / "series.csv", {"t": result.times, "distance": result.distances})
    report = {
        "eps": cfg["eps"],
        "max_distance": float(np.max(result.distances)),
        "final_distance": float(result.distances[-1]),
    }
    _write_json(outdir / "report.json", report)
    return ["series.csv", "report.json"], 0


def _run_curve_run(cfg, outdir):
    from .curves import make_circle, run_curve_shortening

    radius = cfg["radius"]
    if cfg["theta_end"] is None:
        cfg["theta_end"] = 0.45 * radius**2
    curve = make_circle(cfg["curve_n"], radius=radius)
    result = run_curve_shortening(
        curve,
        cfg["dtheta"],
        cfg["theta_end"],
        record_every=cfg["record_every"],
        estimate_extinction=cfg["estimate_extinction"],
    )
    _write_csv(
        outdir / "series.csv",
        {
            "theta": result.thetas,
            "length": result.lengths,
            "mean_radius": result.radii,
            "orthogonality_residual": result.orthogonality,
        },
    )
    _write_json(outdir / "report.json", result.to_report())
    return ["series.csv", "report.json"], 0


def _circle_field_run(cfg):
    from .curves import make_circle
    from .fields import LiftParams, lift_curve, run_eulerian_short

    params = LiftParams(kernel_width=cfg.get("kernel_width", 2.0))
    state = lift_curve(
        make_circle(cfg["curve_n"], radius=cfg["radius"], center=(0.5, 0.5)),
        cfg["n"],
        params,
    )
    # whole record blocks keep the frames uniformly spaced; rounding the
    # step count up keeps dtheta at or below the stable scale
    record = cfg["record_every"]
    coarse = 0.08 * state.h**2
    n_steps = record * int(np.ceil(cfg["theta_end"] / (coarse * record) - 1e-12))
    dtheta = cfg["theta_end"] / n_steps
    return run_eulerian_short(state, dtheta, cfg["theta_end"], record)


def _run_eulerian(cfg, outdir):
    from .fields import apriori_bounds_check, effective_radius, save_field_state

    radius = cfg["radius"]
    if cfg["theta_end"] is None:
        cfg["theta_end"] = 0.3 * radius**2
    run = _circle_field_run(cfg)
    _write_csv(outdir / "series.csv", run.to_series())
    radii = np.array([effective_radius(s) for s in run.states])
    predicted = np.sqrt(np.maximum(radius**2 - 2 * np.asarray(run.thetas), 0.0))
    bounds = apriori_bounds_check(run.states)
    report = {
        "radius_max_rel_err": float(np.max(np.abs(radii - predicted) / predicted)),
        "div_max": float(run.div_max),
        "worst_mass_step": float(run.worst_mass_step),
        "mass0": float(run.masses[0]),
        "mass_final": float(run.masses[-1]),
        "bounds": {
            k: bool(bounds[k])
            for k in (
                "mass_bounded",
                "dissipation_bounded",
                "momentum_bounded",
                "modulus_bounded",
            )
        },
        "momentum_saturation": float(bounds["momentum_saturation"]),
    }
    _write_json(outdir / "report.json", report)
    files = ["series.csv", "report.json"]
    if cfg["save_final"]:
        save_field_state(run.states[-1], outdir / "final_state.tmpbase")
        for ext in (".bin", ".json"):
            os.replace(
                outdir / ("final_state.tmpbase" + ext), outdir / ("final_state" + ext)
            )
            files.append("final_state" + ext)
    return files, 0


def _run_certify(cfg, outdir):
    from .certify import certify, standard_trial_dictionary
    from .fields import FieldState

    radius = cfg["radius"]
    if cfg["theta_end"] is None:
        cfg["theta_end"] = 0.1 * radius**2
    run = _circle_field_run(cfg)
    states = run.states
    if cfg["corrupt"]:
        states = [states[0]] + [
            FieldState(1.05 * s.b, s.p, s.theta, s.rho_floor) for s in states[1:]
        ]
    trials = standard_trial_dictionary(2, cfg["n"], lam=cfg["lambda"])
    tolerance = cfg["tolerance_factor"] * run.masses[0]
    report = certify(states, trials, tolerance)
    _write_json(outdir / "report.json", report.to_dict())
    lines = ["trial," + ",".join(f"{t:.17g}" for t in report.thetas)]
    for name, row in zip(report.trial_names, report.margins):
        lines.append(name + "," + ",".join(f"{v:.17g}" for v in row))
    _atomic_bytes(outdir / "margins.csv", ("\n".join(lines) + "\n").encode())
    return ["report.json", "margins.csv"], 0 if report.passed else 4


def _run_weak_strong(cfg, outdir):
    from .certify import weak_strong_experiment
    from .fields import FieldState, leray_project

    n = cfg["n"]
    ax = np.arange(n) / n
    xg, yg = np.meshgrid(ax, ax, indexing="ij")
    rho0 = 1.0 + cfg["amplitude"] * np.cos(2 * np.pi * yg)
    b_ref = np.zeros((2, n, n))
    b_ref[0] = 1.0
    v_ref = np.zeros((2, n, n))
    start = np.stack([rho0, np.zeros_like(rho0)])
    if cfg["case"] == "misaligned":
        psi = cfg["perturbation"] * np.sin(2 * np.pi * xg) * np.sin(4 * np.pi * yg)
        psi /= 2 * np.pi
        start = leray_project(
            start
            + np.stack(
                [np.gradient(psi, 1 / n, axis=1), -np.gradient(psi, 1 / n, axis=0)]
            )
        )
    elif cfg["case"] == "wrong-velocity":
        v_ref[1] = 0.1
    report = weak_strong_experiment(
        (b_ref, v_ref),
        FieldState(start, None, 0.0),
        cfg["horizon"],
        tolerance=cfg["tolerance"],
        record_every=cfg["record_every"],
    )
    _write_csv(
        outdir / "series.csv",
        {
            "theta": report.thetas,
            "eta": report.eta_series,
            "momentum_defect": report.defect_series,
        },
    )
    _write_json(outdir / "report.json", report.to_dict())
    return ["series.csv", "report.json"], 0


EXECUTORS = {
    "ode-compare": _run_ode_compare,
    "gas-heat": _run_gas_heat,
    "string-vs-curve": _run_string_vs_curve,
    "curve-run": _run_curve_run,
    "eulerian-run": _run_eulerian,
    "certify": _run_certify,
    "weak-strong": _run_weak_strong,
}


def _resolve_outdir(cfg):
    if cfg["out"] is not None:
        return Path(cfg["out"])
    root = os.environ.get("QUADTIME_OUT", "runs")
    return Path(root) / cfg["kind"]


def run_experiment(cfg):
    """Execute a validated config; returns (manifest dict, exit code)."""
    outdir = _resolve_outdir(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    files, code = EXECUTORS[cfg["kind"]](cfg, outdir)
    entries = []
    for name in sorted(files):
        payload = (outdir / name).read_bytes()
        entries.append(
            {
                "name": name,
                "bytes": len(payload),
                "sha256": hashlib.sha256(payload).hexdigest(),
            }
        )
    echo = dict(cfg)
    echo["out"] = str(outdir)
    manifest = {
        "tool": "quadtime",
        "version": TOOL_VERSION,
        "config": echo,
        "wall_clock_s": time.time() - started,
        "files": entries,
    }
    _write_json(outdir / "manifest.json", manifest)
    return manifest, code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="quadtime", description="experiment runner for the quadtime package"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML or JSON config file")
        if name == "run":
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--threads", type=int, default=None)
    sub.add_parser("list")
    args = parser.parse_args(argv)

    if args.command == "list":
        for kind, blurb in KINDS.items():
            print(f"{kind:18s} {blurb}")
        return 0

    try:
        raw = load_raw_config(args.config)
        overrides = {}
        if args.command == "run":
            overrides = {"out": args.out, "seed": args.seed, "threads": args.threads}
        cfg = validate_config(raw, overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"ok: valid {cfg['kind']} config")
        return 0

    try:
        manifest, code = run_experiment(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except QuadtimeError as err:
        print(f"run failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 3
    if code == 4:
        print("certification failed: margins exceed tolerance", file=sys.stderr)
    return code
