"""Monte Carlo experiments comparing estimator errors with their limit laws.

Replication ``r`` at grid position ``j`` draws every random quantity from
streams keyed by ``(seed, r, j)``, so reports are identical whatever the
number of worker processes.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass
from statistics import NormalDist
from typing import Optional, Tuple

import numpy as np

from . import estimators as est
from . import limitlaw as ll
from .errors import ConfigurationError, DegenerateDenominatorError, DomainError
from .kernels import kernel_by_name, kernel_constants
from .rng import stream
from .simkit import ModelSpec, NoiseModel, SamplingScheme, simulate_observations

CHECKS = ("consistency", "rate", "clt_raw", "clt_noisy", "coverage", "counterexample")

DEFAULT_THRESHOLDS = {
    "ks": 0.05,
    "skew_variance_rtol": 0.15,
    "prv_variance_rtol": 0.15,
    "pcv_variance_rtol": 0.15,
    "pcv_mean_se": 3.0,
    "coverage_level": 0.95,
    "coverage_low": 0.92,
    "coverage_high": 0.98,
    "rate_band": 0.1,
    "counterexample_tol": 1e-9,
}


@dataclass(frozen=True)
class Scenario:
    model: ModelSpec = field(default_factory=ModelSpec)
    scheme: SamplingScheme = field(default_factory=SamplingScheme)
    noise: Optional[NoiseModel] = None
    euler_step: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    delta_grid: Tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    theta: float = 1.0
    kernel: str = "min"
    n_reps: int = 100
    seed: int = 0
    checks: Tuple[str, ...] = ()
    clt_delta: Optional[float] = None  # grid point used by distributional checks; default finest
    workers: int = 1
    thresholds: dict = field(default_factory=dict)
    counterexample_a: Optional[float] = None  # None: first hit of the scan
    counterexample_n: Tuple[int, int] = (1, 2)
    counterexample_reps: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "delta_grid", tuple(float(d) for d in self.delta_grid))
        object.__setattr__(self, "checks", tuple(self.checks))
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise ConfigurationError(f"unknown checks {sorted(bad)}")
        if any(d <= 0 for d in self.delta_grid):
            raise ConfigurationError("delta_grid entries must be positive")
        if list(self.delta_grid) != sorted(self.delta_grid, reverse=True):
            raise ConfigurationError("delta_grid must be sorted descending")
        if self.n_reps < 0:
            raise ConfigurationError("n_reps must be >= 0")
        distributional = {"clt_raw", "clt_noisy", "coverage"} & set(self.checks)
        if distributional and self.n_reps < 100:
            raise ConfigurationError("distributional checks need n_reps >= 100")
        if {"clt_noisy", "coverage"} & set(self.checks) and self.scenario.noise is None:
            raise ConfigurationError("noisy checks need a noise model")
        if "rate" in self.checks and len(self.delta_grid) < 3:
            raise ConfigurationError("rate check needs at least 3 grid points")
        if self.clt_delta is not None and self.clt_delta not in self.delta_grid:
            raise ConfigurationError("clt_delta must be one of delta_grid")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS)
        if unknown:
            raise ConfigurationError(f"unknown thresholds {sorted(unknown)}")

    def threshold(self, name):
        return self.thresholds.get(name, DEFAULT_THRESHOLDS[name])


# ---------------------------------------------------------------------------
# statistics


def ks_distance(sample_a, sample_b):
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise DomainError("KS distance needs two non-empty samples")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / len(a)
    fb = np.searchsorted(b, pts, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def coverage(errors, variances, level=0.95):
    """Fraction of |error| <= z_{(1+level)/2} sqrt(variance)."""
    e = np.asarray(errors, dtype=float)
    v = np.asarray(variances, dtype=float)
    if e.shape != v.shape:
        raise DomainError("errors and variances differ in length")
    if len(e) == 0:
        raise DomainError("empty input")
    if np.any(v <= 0):
        raise DomainError("variances must be positive")
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 * (1.0 + level))
    return float(np.mean(np.abs(e) <= z * np.sqrt(v)))


def rate_regression(delta_grid, rmse_per_delta):
    """Least-squares slope of log RMSE against log Delta_n."""
    d = np.asarray(delta_grid, dtype=float)
    r = np.asarray(rmse_per_delta, dtype=float)
    if len(d) < 3 or len(d) != len(r):
        raise DomainError("need >= 3 matching grid points")
    if np.any(d <= 0) or np.any(r <= 0):
        raise DomainError("log-log regression needs positive values")
    return float(np.polyfit(np.log(d), np.log(r), 1)[0])


# ---------------------------------------------------------------------------
# replications


def run_replication(config, j, rep, constants=None):
    """One replication at ``delta_grid[j]``; returns a flat record dict."""
    sc = config.scenario
    delta = config.delta_grid[j]
    kernel = kernel_by_name(config.kernel)
    constants = kernel_constants(kernel) if constants is None else constants
    obs = simulate_observations(
        sc.model, sc.scheme, delta, seed=config.seed, rep=rep, slot=j,
        noise=sc.noise, euler_step=sc.euler_step,
    )
    path = obs.path
    noisy = sc.noise is not None
    series = est.ObservedSeries(obs.times, obs.observed, is_noisy=noisy)
    e = est.estimate_all(series, delta, config.theta, kernel, constants, check=False)
    failures = list(e.failures)

    rec = {"delta_n": delta, "rep": rep, "n_jumps": int(len(path.jump_sizes)),
           "qv": path.qv, "iq": path.iq, "cubic_jump_sum": path.cubic_jump_sum}
    rec.update({k: v for k, v in e.as_dict().items() if k not in ("failures", "kernel")})
    estimand = path.cubic_jump_sum / path.qv ** 1.5 if path.qv > 0 else None
    rec["estimand"] = estimand
    rec["rv_err"] = e.rv - path.qv
    rec["cubic_err"] = e.cubic_pv - path.cubic_jump_sum
    rec["skew_err"] = None if e.rdskew_scaled is None or estimand is None else e.rdskew_scaled - estimand
    rec["prv_err"] = None if e.prv is None else e.prv - path.qv
    rec["pcv_err"] = None if e.pcv is None else e.pcv - path.cubic_jump_sum
    rec["noisy_skew_err"] = None if e.noisy_skew is None or estimand is None else e.noisy_skew - estimand

    params = ll.params_from_path(path, sc.noise, sc.scheme)
    lim_rng = stream(config.seed, "limit", rep, j)
    # conditional SDs of the non-noisy limits and one matched limit draw each
    v3 = ll.cubic_conditional_variance(params)
    rec["cubic_cond_var"] = v3
    rec["cubic_limit"] = float(ll.thm2_limit_sample(params, lambda x: 3 * x ** 2, 1, lim_rng)[0, 1])
    if path.qv > 0:
        rec["skew_cond_var"] = ll.skew_conditional_variance(params)
        rec["skew_limit"] = float(ll.skew_limit_sample(params, 1, lim_rng)[0])
    else:
        rec["skew_cond_var"] = rec["skew_limit"] = None
        failures.append("qv_zero")
    rec["rv_cond_var"] = ll.rv_conditional_variance(params)
    if noisy:
        gam = ll.gamma_matrix(params, config.theta, constants)
        rec.update(gamma_c=gam.gamma_c, gbar11=gam.gbar11, gbar12=gam.gbar12, gbar22=gam.gbar22)
        if path.qv > 0:
            sv = ll.noisy_skew_variance(gam, path.qv, path.cubic_jump_sum)
            rec["noisy_skew_var"] = sv.variance
            if sv.degenerate:
                failures.append("noisy_skew_variance_degenerate")
        else:
            rec["noisy_skew_var"] = None
    rec["failures"] = ";".join(failures)
    return rec


def _run_chunk(args):
    config, tasks, constants = args
    return [run_replication(config, j, r, constants) for j, r in tasks]


def _collect(config):
    tasks = [(j, r) for j in range(len(config.delta_grid)) for r in range(config.n_reps)]
    if not tasks:
        return []
    constants = kernel_constants(kernel_by_name(config.kernel))
    workers = max(1, int(config.workers))
    if workers == 1:
        return _run_chunk((config, tasks, constants))
    size = math.ceil(len(tasks) / (4 * workers))
    chunks = [tasks[i:i + size] for i in range(0, len(tasks), size)]
    with ProcessPoolExecutor(workers) as ex:
        parts = list(ex.map(_run_chunk, [(config, c, constants) for c in chunks]))
    return [rec for part in parts for rec in part]


# ---------------------------------------------------------------------------
# report


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: object
    threshold: object
    detail: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    config: dict
    records: list
    summaries: dict
    checks: dict

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def to_dict(self):
        return {
            "config": self.config,
            "summaries": self.summaries,
            "checks": {k: asdict(v) for k, v in self.checks.items()},
            "passed": self.passed,
            "records": self.records,
        }

    def to_json(self, path):
        _atomic_write(path, json.dumps(_jsonable(self.to_dict()), indent=2, allow_nan=True))

    def to_csv(self, path):
        """Long form: one row per (delta_n, rep, quantity)."""
        rows = [("delta_n", "rep", "quantity", "value")]
        for rec in self.records:
            for k, v in rec.items():
                if k in ("delta_n", "rep"):
                    continue
                rows.append((rec["delta_n"], rec["rep"], k, "" if v is None else v))
        import io

        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        _atomic_write(path, buf.getvalue())


def _atomic_write(path, text):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(obj):
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _values(records, key, delta=None):
    out = []
    for r in records:
        if delta is not None and r["delta_n"] != delta:
            continue
        v = r.get(key)
        if v is not None:
            out.append(v)
    return np.asarray(out, dtype=float)


def _rmse(x):
    return float(np.sqrt(np.mean(x ** 2))) if len(x) else float("nan")


def summarize(config, records):
    out = {}
    for d in config.delta_grid:
        rs = [r for r in records if r["delta_n"] == d]
        s = {"n": len(rs), "failures": {}}
        for r in rs:
            for f in filter(None, r["failures"].split(";")):
                s["failures"][f] = s["failures"].get(f, 0) + 1
        for key in ("rv_err", "cubic_err", "skew_err", "prv_err", "pcv_err", "noisy_skew_err"):
            x = _values(rs, key)
            s[f"rmse_{key}"] = _rmse(x)
            s[f"n_{key}"] = len(x)
        out[repr(d)] = s
    return out


def _clt_delta(config):
    return config.clt_delta if config.clt_delta is not None else config.delta_grid[-1]


def _check_consistency(config, records):
    key = "noisy_skew_err" if config.scenario.noise is not None else "skew_err"
    rmse = [_rmse(_values(records, key, d)) for d in config.delta_grid]
    ok = all(b < a for a, b in zip(rmse, rmse[1:]))
    return CheckResult("consistency", ok, rmse, "strictly decreasing", {"statistic": key})


def _check_rate(config, records):
    noisy = config.scenario.noise is not None
    key, target = ("prv_err", 0.25) if noisy else ("rv_err", 0.5)
    rmse = [_rmse(_values(records, key, d)) for d in config.delta_grid]
    slope = rate_regression(config.delta_grid, rmse)
    band = config.threshold("rate_band")
    return CheckResult("rate", abs(slope - target) <= band, slope, [target - band, target + band],
                       {"rmse": rmse, "statistic": key})


def _check_clt_raw(config, records):
    d = _clt_delta(config)
    rs = [r for r in records if r["delta_n"] == d and r["cubic_cond_var"] > 0]
    if not rs:
        return CheckResult("clt_raw", False, None, config.threshold("ks"), {"reason": "no replication with jumps"})
    sd = np.sqrt([r["cubic_cond_var"] for r in rs])
    z = np.array([r["cubic_err"] for r in rs]) / math.sqrt(d) / sd
    zl = np.array([r["cubic_limit"] for r in rs]) / sd
    ks = ks_distance(z, zl)
    ref = stream(config.seed, "reference").standard_normal(len(z))
    ks_normal = ks_distance(z, ref)
    rs2 = [r for r in rs if r["skew_err"] is not None and r["skew_limit"] is not None]
    err = np.array([r["skew_err"] for r in rs2]) / math.sqrt(d)
    lim = np.array([r["skew_limit"] for r in rs2])
    var_ratio = float(np.var(err, ddof=1) / np.var(lim, ddof=1)) if len(rs2) > 1 else float("nan")
    tol = config.threshold("skew_variance_rtol")
    ok = ks < config.threshold("ks") and abs(var_ratio - 1.0) <= tol
    return CheckResult("clt_raw", bool(ok), {"ks": ks, "skew_variance_ratio": var_ratio},
                       {"ks": config.threshold("ks"), "skew_variance_rtol": tol},
                       {"ks_vs_standard_normal": ks_normal, "n": len(z), "delta_n": d})


def _check_clt_noisy(config, records):
    d = _clt_delta(config)
    rs = [r for r in records if r["delta_n"] == d and r["prv_err"] is not None]
    scale = d ** -0.25
    prv_err = np.array([r["prv_err"] for r in rs]) * scale
    g11 = np.array([r["gamma_c"] + r["gbar11"] for r in rs])
    prv_ratio = float(np.var(prv_err, ddof=1) / np.mean(g11))
    ok = abs(prv_ratio - 1.0) <= config.threshold("prv_variance_rtol")
    value = {"prv_variance_ratio": prv_ratio}
    detail = {"delta_n": d, "n": len(rs), "prv_err_var": float(np.var(prv_err, ddof=1)),
              "gamma11_mean": float(np.mean(g11))}
    g22 = np.array([r["gbar22"] for r in rs])
    pcv_err = np.array([r["pcv_err"] for r in rs]) * scale
    if np.all(g22 == 0):
        # continuous case: the Delta^{-1/4} limit of PCV is degenerate at 0
        mean, se = float(np.mean(pcv_err)), float(np.std(pcv_err, ddof=1) / math.sqrt(len(pcv_err)))
        abs_means = [float(np.mean(np.abs(_values(records, "pcv_err", dd)))) * dd ** -0.25
                     for dd in config.delta_grid]
        ok_mean = abs(mean) <= config.threshold("pcv_mean_se") * se
        # shrinkage needs at least two grid points; a single point only tests the mean
        ok_shrink = abs_means[-1] < abs_means[0] if len(abs_means) > 1 else None
        ok = ok and ok_mean and ok_shrink is not False
        value.update(pcv_mean=mean, pcv_se=se, pcv_abs_means=abs_means, pcv_shrinks=ok_shrink)
    else:
        pcv_ratio = float(np.var(pcv_err, ddof=1) / np.mean(g22))
        ok = ok and abs(pcv_ratio - 1.0) <= config.threshold("pcv_variance_rtol")
        value["pcv_variance_ratio"] = pcv_ratio
    thr = {k: config.threshold(k) for k in ("prv_variance_rtol", "pcv_variance_rtol", "pcv_mean_se")}
    return CheckResult("clt_noisy", bool(ok), value, thr, detail)


def _check_coverage(config, records):
    d = _clt_delta(config)
    rs = [r for r in records if r["delta_n"] == d]
    usable = [r for r in rs if r["noisy_skew_err"] is not None and r.get("noisy_skew_var")]
    if not usable:
        return CheckResult("coverage", False, None, None, {"reason": "no usable replication"})
    err = np.array([r["noisy_skew_err"] for r in usable])
    var = np.array([r["noisy_skew_var"] for r in usable]) * math.sqrt(d)
    level = config.threshold("coverage_level")
    rate = coverage(err, var, level)
    lo, hi = config.threshold("coverage_low"), config.threshold("coverage_high")
    return CheckResult("coverage", lo <= rate <= hi, rate, [lo, hi],
                       {"n_used": len(usable), "n_excluded": len(rs) - len(usable), "delta_n": d, "level": level})


def counterexample_mc_mean(a, n, n_reps, seed, horizon=1.0, max_cells=4_000_000):
    """Mean and standard error of Delta^{-1/2} sum g_a(X^c increments), sigma = 1.

    Increments of X^c on the equidistant grid are i.i.d. N(0, Delta_n) for
    unit volatility, which is what is drawn here.
    """
    delta = math.exp(-n * math.pi / a)
    m = int(math.floor(horizon / delta + 1e-9))
    g = est.g_a(a)
    rng = stream(seed, "counterexample", 0, n)
    vals = np.empty(n_reps)
    rows = max(1, max_cells // m)
    for r0 in range(0, n_reps, rows):
        k = min(rows, n_reps - r0)
        inc = math.sqrt(delta) * rng.standard_normal((k, m))
        vals[r0:r0 + k] = g(inc).sum(axis=1) / math.sqrt(delta)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_reps)), delta


def _check_counterexample(config):
    a = config.counterexample_a
    if a is None:
        a = ll.find_nondegenerate_a()
    if a is None:
        return CheckResult("counterexample", False, None, None, {"reason": "no candidate a with B != 0"})
    rows = ll.counterexample_sequence(a, 20)
    c = np.array([r.c_n for r in rows])
    tol = config.threshold("counterexample_tol")
    alt = float(np.max(np.abs(c[1:] + c[:-1])))
    const = float(np.max(np.abs(np.abs(c) - abs(c[0]))))
    n1, n2 = config.counterexample_n
    m1 = counterexample_mc_mean(a, n1, config.counterexample_reps, config.seed, config.scenario.model.horizon)
    m2 = counterexample_mc_mean(a, n2, config.counterexample_reps, config.seed, config.scenario.model.horizon)
    ok = alt <= tol and const <= tol and np.sign(m1[0]) != np.sign(m2[0])
    return CheckResult("counterexample", bool(ok),
                       {"alternation": alt, "modulus_spread": const, "mc_means": [m1[0], m2[0]]},
                       tol, {"a": a, "c_n": c.tolist(), "mc_se": [m1[1], m2[1]], "deltas": [m1[2], m2[2]]})


_CHECKERS = {
    "consistency": _check_consistency,
    "rate": _check_rate,
    "clt_raw": _check_clt_raw,
    "clt_noisy": _check_clt_noisy,
    "coverage": _check_coverage,
}


def run_experiment(config):
    """Run all replications and the enabled checks."""
    records = _collect(config)
    summaries = summarize(config, records)
    checks = {}
    for name in config.checks:
        if name == "counterexample":
            checks[name] = _check_counterexample(config)
        elif records:
            checks[name] = _CHECKERS[name](config, records)
    return ExperimentReport(_jsonable(asdict(config)), records, summaries, checks)
