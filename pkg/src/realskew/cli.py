"""Command-line interface.

    realskew constants --kernel min
    realskew simulate --config scenario.yaml --output run/
    realskew times --config scenario.yaml --output times.csv
    realskew noise --config scenario.yaml --input latent.csv --output ticks.csv
    realskew estimate --input ticks.csv --delta-n 1e-4 --theta 1 --output est.json
    realskew limits --config scenario.yaml --path-csv run/path.csv --jumps-csv run/jumps.csv --output draws.csv
    realskew experiment --config experiment.yaml --output report
    realskew counterexample --a 1 --n-max 10 --output cn.csv

Exit codes: 0 success, 1 failed check, 2 configuration error.
Outputs are written to a temporary file and renamed into place.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys

import jsonschema
import numpy as np
import yaml

from . import estimators as est
from . import limitlaw as ll
from .errors import RealSkewError
from .harness import CHECKS, DEFAULT_THRESHOLDS, ExperimentConfig, Scenario, _atomic_write, run_experiment
from .kernels import kernel_by_name, kernel_constants
from .simkit import (
    CIRVol, ConstantVol, Drift, GSpec, JumpModel, ModelSpec, NoiseModel, PathRecord,
    SamplingScheme, apply_noise, default_euler_step, generate_times, simulate_observations,
)

log = logging.getLogger("realskew")

CONFIG_VERSION = 1
WORKERS_ENV = "REALSKEW_WORKERS"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


CONFIG_SCHEMA = _obj(
    {
        "version": {"const": CONFIG_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "model": _obj({
            "x0": _num,
            "horizon": _pos,
            "drift": _obj({"b0": _num, "b1": _num}),
            "vol": {"oneOf": [
                _obj({"kind": {"const": "constant"}, "sigma": {"type": "number", "minimum": 0}}, ["kind"]),
                _obj({"kind": {"const": "cir"}, "v0": _num, "kappa": _num, "vbar": _num,
                      "xi": _num, "rho": _num}, ["kind"]),
            ]},
            "jumps": _obj({
                "intensity": {"type": "number", "minimum": 0},
                "distribution": {"enum": ["point", "laplace", "gaussian"]},
                "size": _num, "scale": _num, "p_up": _num, "mean": _num, "sd": _num,
                "fixed": {"type": "array", "items": {"type": "array", "items": _num,
                                                     "minItems": 2, "maxItems": 2}},
            }),
        }),
        "sampling": _obj({
            "kind": {"enum": ["equidistant", "restricted", "poisson"]},
            "multiplier": {"enum": ["uniform", "exponential", "degenerate"]},
            "g": _obj({"kind": {"enum": ["constant", "sinusoid", "sigma"]}, "value": _num,
                       "amplitude": _num, "frequency": _num, "power": _num, "floor": _num}),
        }),
        "noise": _obj({
            "family": {"enum": ["gaussian", "two_point"]},
            "variance": {"enum": ["constant", "sinusoid", "coupled"]},
            "alpha": {"type": "number", "minimum": 0},
            "amplitude": _num, "frequency": _num,
            "c": {"type": "number", "minimum": 0},
        }),
        "estimation": _obj({
            "delta_n": _pos, "theta": _pos,
            "kernel": {"enum": ["min", "quadratic"]},
            "euler_step": {"oneOf": [_pos, {"type": "null"}]},
        }),
        "experiment": _obj({
            "delta_grid": {"type": "array", "items": _pos, "minItems": 1},
            "n_reps": {"type": "integer", "minimum": 0},
            "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
            "clt_delta": {"oneOf": [_pos, {"type": "null"}]},
            "workers": {"type": "integer", "minimum": 1},
            "thresholds": _obj({k: _num for k in DEFAULT_THRESHOLDS}),
            "counterexample": _obj({
                "a": {"oneOf": [_num, {"type": "null"}]},
                "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
                "reps": {"type": "integer", "minimum": 1},
            }),
        }),
    },
    required=["version"],
)


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads 1e-4 (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+$"),
    list("-+0123456789."),
)


class ConfigError(Exception):
    pass


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.load(fh, Loader=_Loader)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if cfg is None:
        cfg = {}
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def model_from_config(cfg):
    m = dict(cfg.get("model", {}))
    vol = dict(m.pop("vol", {"kind": "constant", "sigma": 1.0}))
    kind = vol.pop("kind")
    vol = ConstantVol(**vol) if kind == "constant" else CIRVol(**vol)
    jumps = dict(m.pop("jumps", {}))
    jumps["fixed"] = tuple(tuple(p) for p in jumps.get("fixed", ()))
    return ModelSpec(
        x0=m.get("x0", 0.0), horizon=m.get("horizon", 1.0),
        drift=Drift(**m.get("drift", {})), vol=vol, jumps=JumpModel(**jumps),
    )


def scheme_from_config(cfg):
    s = dict(cfg.get("sampling", {}))
    g = GSpec(**s.pop("g", {}))
    return SamplingScheme(g=g, **s)


def noise_from_config(cfg):
    n = cfg.get("noise")
    return None if n is None else NoiseModel(**n)


def scenario_from_config(cfg):
    e = cfg.get("estimation", {})
    return Scenario(model_from_config(cfg), scheme_from_config(cfg), noise_from_config(cfg), e.get("euler_step"))


def experiment_from_config(cfg, seed=None, workers=None):
    e = cfg.get("estimation", {})
    x = cfg.get("experiment", {})
    ce = x.get("counterexample", {})
    if workers is None:
        workers = x.get("workers", int(os.environ.get(WORKERS_ENV, "1")))
    return ExperimentConfig(
        scenario=scenario_from_config(cfg),
        delta_grid=tuple(x.get("delta_grid", [e.get("delta_n", 1e-3)])),
        theta=e.get("theta", 1.0),
        kernel=e.get("kernel", "min"),
        n_reps=x.get("n_reps", 100),
        seed=cfg.get("seed", 0) if seed is None else seed,
        checks=tuple(x.get("checks", ())),
        clt_delta=x.get("clt_delta"),
        workers=workers,
        thresholds=x.get("thresholds", {}),
        counterexample_a=ce.get("a"),
        counterexample_n=tuple(ce.get("n", (1, 2))),
        counterexample_reps=ce.get("reps", 5000),
    )


# ---------------------------------------------------------------------------
# output helpers


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        _atomic_write(output, text)


def read_series_csv(path):
    """Two-column (time, price) CSV with a mandatory header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ConfigError(f"{path}: need a header row and at least one data row")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row ({exc})") from exc
    return data[:, 0], data[:, 1]


# ---------------------------------------------------------------------------
# subcommands


def cmd_constants(args):
    c = kernel_constants(kernel_by_name(args.kernel), args.panels)
    _emit(json.dumps(c.as_dict(), indent=2) + "\n", args.output)
    return 0


def _delta(cfg, args):
    d = args.delta_n if getattr(args, "delta_n", None) is not None else cfg.get("estimation", {}).get("delta_n")
    if d is None:
        raise ConfigError("delta_n missing (config estimation.delta_n or --delta-n)")
    return d


def cmd_simulate(args):
    cfg = load_config(args.config)
    sc = scenario_from_config(cfg)
    seed = cfg.get("seed", 0) if args.seed is None else args.seed
    delta = _delta(cfg, args)
    ob = simulate_observations(sc.model, sc.scheme, delta, seed=seed, noise=sc.noise, euler_step=sc.euler_step)
    os.makedirs(args.output, exist_ok=True)
    p = ob.path
    _atomic_write(os.path.join(args.output, "path.csv"),
                  _csv_text(("time", "x", "xc", "sigma"), zip(p.grid, p.x, p.xc, p.sigma)))
    _atomic_write(os.path.join(args.output, "jumps.csv"),
                  _csv_text(("time", "size", "sigma_minus", "sigma_plus"),
                            zip(p.jump_times, p.jump_sizes, p.sigma_minus, p.sigma_plus)))
    _atomic_write(os.path.join(args.output, "latent.csv"),
                  _csv_text(("time", "price"), zip(ob.times.times, ob.latent)))
    _atomic_write(os.path.join(args.output, "observed.csv"),
                  _csv_text(("time", "price"), zip(ob.times.times, ob.observed)))
    oracles = {"qv": p.qv, "iq": p.iq, "cubic_jump_sum": p.cubic_jump_sum,
               "quartic_jump_sum": p.quartic_jump_sum, "abs_cubic_sigma": p.abs_cubic_sigma,
               "skew_estimand": p.cubic_jump_sum / p.qv ** 1.5 if p.qv > 0 else None,
               "n_count": ob.times.n_count, "delta_n": delta, "seed": seed}
    _atomic_write(os.path.join(args.output, "oracles.json"), json.dumps(oracles, indent=2) + "\n")
    return 0


def cmd_times(args):
    cfg = load_config(args.config)
    sc = scenario_from_config(cfg)
    if sc.scheme.kind == "restricted" and sc.scheme.g.needs_sigma:
        raise ConfigError("sigma-coupled sampling needs a path; use the simulate subcommand")
    seed = cfg.get("seed", 0) if args.seed is None else args.seed
    st = generate_times(sc.scheme, _delta(cfg, args), sc.model.horizon, seed)
    _emit(_csv_text(("time", "g"), zip(st.times, st.g_process)), args.output)
    return 0


def cmd_noise(args):
    cfg = load_config(args.config)
    noise = noise_from_config(cfg)
    if noise is None:
        raise ConfigError("config has no noise section")
    if noise.needs_sigma:
        raise ConfigError("sigma-coupled noise needs a path; use the simulate subcommand")
    seed = cfg.get("seed", 0) if args.seed is None else args.seed
    t, x = read_series_csv(args.input)
    y = apply_noise(x, t, noise, seed)
    _emit(_csv_text(("time", "price"), zip(t, y)), args.output)
    return 0


def cmd_estimate(args):
    t, y = read_series_csv(args.input)
    series = est.ObservedSeries.from_arrays(t, y, args.horizon, args.delta_n, is_noisy=True)
    kernel = kernel_by_name(args.kernel)
    e = est.estimate_all(series, args.delta_n, args.theta, kernel, horizon=args.horizon)
    _emit(json.dumps(e.as_dict(), indent=2) + "\n", args.output)
    return 0


def cmd_limits(args):
    cfg = load_config(args.config)
    sc = scenario_from_config(cfg)
    e = cfg.get("estimation", {})
    seed = cfg.get("seed", 0) if args.seed is None else args.seed
    path = PathRecord.from_csv(args.path_csv, args.jumps_csv)
    params = ll.params_from_path(path, sc.noise, sc.scheme)
    theta = e.get("theta", 1.0)
    c = kernel_constants(kernel_by_name(e.get("kernel", "min")))
    gam = ll.gamma_matrix(params, theta, c)
    gam_u = ll.gamma_matrix(params, theta, c, phi3_minus="unsquared")
    rows = [("gamma_c", gam.gamma_c), ("gbar11", gam.gbar11), ("gbar12", gam.gbar12),
            ("gbar22", gam.gbar22), ("gbar22_unsquared_phi3_minus", gam_u.gbar22),
            ("qv", params.qv), ("iq", params.iq), ("cubic_jump_sum", params.cubic_jump_sum)]
    if params.qv > 0:
        sv = ll.noisy_skew_variance(gam, params.qv, params.cubic_jump_sum)
        rows += [("noisy_skew_variance", sv.variance), ("noisy_skew_degenerate", int(sv.degenerate))]
    n = args.n_draws
    draws, aux = ll.thm2_limit_sample(params, lambda x: 3 * x ** 2, n, seed, return_aux=True)
    cols = {"rv_limit": draws[:, 0], "cubic_limit": draws[:, 1],
            "abs_cubic_limit": ll.abs_cubic_limit_sample(params, n, seed)}
    if params.qv > 0:
        cols["skew_limit"] = ll.skew_limit_sample(params, n, seed)
    noisy = ll.noisy_limit_sample(gam, n, seed + 1)
    cols["noisy_prv_limit"], cols["noisy_pcv_limit"] = noisy[:, 0], noisy[:, 1]
    _emit(_csv_text(tuple(cols), zip(*cols.values())), args.output)
    gamma_out = args.gamma_output or (None if args.output in (None, "-") else args.output + ".gamma.csv")
    if gamma_out:
        _atomic_write(gamma_out, _csv_text(("component", "value"), rows))
    return 0


def cmd_experiment(args):
    cfg = load_config(args.config)
    config = experiment_from_config(cfg, seed=args.seed, workers=args.workers)
    report = run_experiment(config)
    report.to_json(args.output + ".json")
    report.to_csv(args.output + ".csv")
    for name, c in report.checks.items():
        log.warning("%s: %s (value=%s)", name, "PASS" if c.passed else "FAIL", c.value)
    return 0 if report.passed else 1


def cmd_counterexample(args):
    rows = ll.counterexample_sequence(args.a, args.n_max, args.panels)
    _emit(_csv_text(("n", "delta_n", "c_n"), ((r.n, r.delta_n, r.c_n) for r in rows)), args.output)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="realskew", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")
    sub = p.add_subparsers(dest="subcommand")

    def common(sp, config=True, output=True):
        if config:
            sp.add_argument("--config", required=True)
        if output:
            sp.add_argument("--output", "-o", default="-")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("constants", help="kernel constants as JSON")
    sp.add_argument("--kernel", default="min")
    sp.add_argument("--panels", type=int, default=4096)
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("simulate", help="simulate one path; writes CSVs into a directory")
    sp.add_argument("--config", required=True)
    sp.add_argument("--output", "-o", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--delta-n", type=float, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("times", help="observation times CSV")
    common(sp)
    sp.add_argument("--delta-n", type=float, default=None)
    sp.set_defaults(func=cmd_times)

    sp = sub.add_parser("noise", help="add microstructure noise to a (time, price) CSV")
    common(sp)
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=cmd_noise)

    sp = sub.add_parser("estimate", help="estimators for a (time, price) CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--delta-n", type=float, required=True)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.add_argument("--kernel", default="min")
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("limits", help="Gamma components and limit draws for an exported path")
    common(sp)
    sp.add_argument("--path-csv", required=True)
    sp.add_argument("--jumps-csv", required=True)
    sp.add_argument("--n-draws", type=int, default=10000)
    sp.add_argument("--gamma-output", default=None)
    sp.set_defaults(func=cmd_limits)

    sp = sub.add_parser("experiment", help="Monte Carlo experiment; writes <output>.json and <output>.csv")
    sp.add_argument("--config", required=True)
    sp.add_argument("--output", "-o", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("counterexample", help="c_n sequence for g_a")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--panels", type=int, default=20000)
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=cmd_counterexample)
    return p


def dispatch(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose), format="%(message)s")
    if args.print_schema:
        sys.stdout.write(json.dumps(CONFIG_SCHEMA, indent=2) + "\n")
        return 0
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, RealSkewError, OSError) as exc:
        log.error("error: %s", exc)
        return 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
