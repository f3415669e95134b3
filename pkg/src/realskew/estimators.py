"""Realized power variations, realized skewness and pre-averaged estimators."""

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConsistencyError, DegenerateDenominatorError, DomainError
from .kernels import eval_kernel, kernel_constants
from .simkit import SamplingTimes, _floor_ratio

RV_GUARD = 1e-12
PRV_GUARD = 1e-10
SBP_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ObservedSeries:
    times: SamplingTimes
    values: np.ndarray
    is_noisy: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if len(v) != len(self.times.times):
            raise DomainError("values and times differ in length")

    @classmethod
    def from_arrays(cls, t, y, horizon=None, delta_n=float("nan"), is_noisy=False):
        """Series from raw arrays; observations after ``horizon`` are dropped."""
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(t) != len(y):
            raise DomainError("time and value columns differ in length")
        if len(t) and (t[0] != 0.0 or np.any(np.diff(t) <= 0)):
            raise DomainError("times must start at 0 and increase strictly")
        T = float(t[-1]) if horizon is None else float(horizon)
        n = int(np.searchsorted(t, T, side="right"))
        nxt = float(t[n]) if n < len(t) else math.inf
        st = SamplingTimes(t[:n], nxt, T, delta_n, np.full(n, np.nan), "external")
        return cls(st, y[:n], is_noisy)

    @property
    def increments(self):
        return np.diff(self.values)


def g_a(a):
    """x -> |x|^3 sin(2 a log|x|), extended by 0 at x = 0."""

    def f(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = ax ** 3 * np.sin(2.0 * a * np.log(ax))
        return np.where(ax > 0, out, 0.0)

    return f


_POWER_FNS = {
    "square": lambda d: d * d,
    "cube": lambda d: d * d * d,
    "abs-cube": lambda d: np.abs(d) ** 3,
}


def power_variation(series, g_fn="square"):
    """sum_i g(Y_{t_i} - Y_{t_{i-1}}) over increments with t_i <= T.

    ``g_fn`` is "square", "cube", "abs-cube" or any vectorized callable
    (e.g. ``g_a(1.0)``).
    """
    if len(series.values) < 2:
        raise DomainError("need at least two observations")
    f = _POWER_FNS[g_fn] if isinstance(g_fn, str) else g_fn
    return float(np.sum(f(series.increments)))


def realized_skewness(series, delta_n, horizon=None, variant="floor"):
    """(RDSkew, RDSkew / m) with m = floor(T / delta_n).

    ``variant="count"`` uses the observed number of increments N_T as the
    multiplier instead, which is the natural choice for irregular times.
    """
    T = series.times.horizon if horizon is None else horizon
    rv = power_variation(series, "square")
    if rv <= RV_GUARD:
        raise DegenerateDenominatorError(f"realized volatility {rv:.3e} below guard")
    cube = power_variation(series, "cube")
    m = _floor_ratio(T, delta_n) if variant == "floor" else series.times.n_count
    # rv * sqrt(rv) rather than rv ** 1.5: sqrt is correctly rounded, pow is not,
    # and only the former keeps power-of-two rescaling exact
    scaled = cube / (rv * math.sqrt(rv))
    return m * scaled, scaled


def choose_kn(theta, delta_n):
    """k_n = max(2, round(theta / sqrt(delta_n)))."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    return max(2, int(round(theta * delta_n ** -0.5)))


def _weights(kernel, k_n):
    return eval_kernel(kernel, np.arange(1, k_n) / k_n)


def preaverage(series, k_n, kernel, check=True):
    """Pre-averaged increments V_i = sum_{p=1}^{k_n-1} g(p/k_n) (V_{t_{i+p}} - V_{t_{i+p-1}}).

    Returns the N - k_n + 2 values i = 0, ..., N - k_n + 1. With ``check``
    the summation-by-parts form -sum_{p=0}^{k_n-1} (g((p+1)/k_n) - g(p/k_n))
    (V_{t_{i+p}} - V_{t_i}) is evaluated as well and must agree to 1e-12
    relative.
    """
    v = series.values if isinstance(series, ObservedSeries) else np.asarray(series, dtype=float)
    k_n = int(k_n)
    if k_n < 2:
        raise DomainError("k_n must be >= 2")
    if k_n > len(v):
        raise DomainError(f"k_n = {k_n} exceeds series length {len(v)}")
    w = _weights(kernel, k_n)
    d = np.diff(v)
    bar = np.correlate(d, w, mode="valid") if len(w) else np.zeros(len(v) - k_n + 1)
    if check:
        direct_scale = np.correlate(np.abs(d), np.abs(w), mode="valid") if len(w) else np.zeros(len(bar))
        _check_sbp(v, kernel, k_n, bar, direct_scale)
    return bar


def _check_sbp(v, kernel, k_n, bar, direct_scale=None, chunk=4096):
    """Compare with the summation-by-parts form, relative to the size of the summed terms."""
    g = eval_kernel(kernel, np.arange(k_n + 1) / k_n)
    dg = np.diff(g)
    win = sliding_window_view(v, k_n)[: len(bar)]
    if direct_scale is None:
        direct_scale = np.zeros(len(bar))
    for r0 in range(0, len(bar), chunk):
        w = win[r0:r0 + chunk]
        rel = w - w[:, :1]
        alt = -(rel @ dg)
        scale = np.abs(rel) @ np.abs(dg) + direct_scale[r0:r0 + chunk]
        bad = np.abs(alt - bar[r0:r0 + chunk]) > SBP_RTOL * scale + 1e-300
        if np.any(bad):
            i = r0 + int(np.argmax(bad))
            raise ConsistencyError(f"summation-by-parts mismatch in window {i}")


def prv(series, k_n, kernel, constants=None, check=True):
    """Pre-averaged realized volatility (bias-corrected; may be negative).

    PRV = sum_i Ybar_i^2 / (psi2 k_n) - psi1 / (2 psi2 k_n^2) sum_i (Y_{t_i} - Y_{t_{i-1}})^2.

    The correction carries k_n^2: each Ybar_i holds noise of variance about
    alpha psi1 / k_n, and there are about N windows.
    """
    c = kernel_constants(kernel) if constants is None else constants
    bar = preaverage(series, k_n, kernel, check)
    d = np.diff(series.values)
    return float(np.sum(bar * bar) / (c.psi2 * k_n) - c.psi1 / (2.0 * c.psi2 * k_n ** 2) * np.sum(d * d))


def pcv(series, k_n, kernel, constants=None, check=True):
    """Pre-averaged realized cubic power variation."""
    c = kernel_constants(kernel) if constants is None else constants
    bar = preaverage(series, k_n, kernel, check)
    return float(np.sum(bar * bar * bar) / (c.psi3 * k_n))


def noisy_skew(prv_value, pcv_value, guard=PRV_GUARD):
    if not prv_value > guard:
        raise DegenerateDenominatorError(f"PRV {prv_value:.3e} at or below guard")
    return pcv_value / (prv_value * math.sqrt(prv_value))


@dataclass(frozen=True)
class EstimateSet:
    rv: float
    cubic_pv: float
    abs_cubic_pv: float
    rdskew_raw: Optional[float]
    rdskew_scaled: Optional[float]
    rdskew_raw_count: Optional[float]
    prv: Optional[float]
    pcv: Optional[float]
    noisy_skew: Optional[float]
    delta_n: float
    theta: float
    k_n: Optional[int]
    kernel: str
    n_count: int
    failures: tuple = ()

    def as_dict(self):
        d = asdict(self)
        d["failures"] = list(self.failures)
        return d


def estimate_all(series, delta_n, theta=1.0, kernel=None, constants=None, horizon=None, check=True):
    """Every statistic for one series; degenerate ratios become ``None`` with a failure tag."""
    from .kernels import min_kernel

    kernel = min_kernel() if kernel is None else kernel
    failures = []
    rv = power_variation(series, "square")
    cube = power_variation(series, "cube")
    acube = power_variation(series, "abs-cube")
    try:
        raw, scaled = realized_skewness(series, delta_n, horizon)
        raw_count = scaled * series.times.n_count
    except DegenerateDenominatorError:
        raw = scaled = raw_count = None
        failures.append("rv_degenerate")
    k_n = choose_kn(theta, delta_n)
    p = q = s = None
    if k_n <= len(series.values):
        c = kernel_constants(kernel) if constants is None else constants
        p = prv(series, k_n, kernel, c, check)
        q = pcv(series, k_n, kernel, c, check=False)
        try:
            s = noisy_skew(p, q)
        except DegenerateDenominatorError:
            failures.append("prv_degenerate")
    else:
        failures.append("series_shorter_than_kn")
    return EstimateSet(
        rv=rv, cubic_pv=cube, abs_cubic_pv=acube,
        rdskew_raw=raw, rdskew_scaled=scaled, rdskew_raw_count=raw_count,
        prv=p, pcv=q, noisy_skew=s,
        delta_n=delta_n, theta=theta, k_n=k_n, kernel=kernel.name,
        n_count=series.times.n_count, failures=tuple(failures),
    )
