"""Simulation of jump-diffusion log-prices, observation times and noise.

The latent process is

    X_t = x0 + int_0^t b_s ds + int_0^t sigma_s dB_s + sum_{T_q <= t} dX_{T_q}

with constant or CIR-type variance and compound-Poisson jumps (plus optional
deterministic jumps). Paths live on a fine grid that contains every
observation time and every jump time, so sampling is an exact lookup and the
path oracles ([X,X]_T, IQ_T, jump sums) refer to the same realization the
estimators see.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ConfigurationError, ConsistencyError, DomainError, GenerationError
from .rng import stream

GRID_TOL = 1e-12  # relative to the horizon; closer points are merged


def _finite(name, *vals):
    for v in vals:
        if not math.isfinite(v):
            raise ConfigurationError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Drift:
    """b_t = b0 + b1 * sigma_t^2."""

    b0: float = 0.0
    b1: float = 0.0

    def __post_init__(self):
        _finite("drift", self.b0, self.b1)


@dataclass(frozen=True)
class ConstantVol:
    sigma: float = 1.0

    def __post_init__(self):
        _finite("sigma", self.sigma)
        if self.sigma < 0:
            raise ConfigurationError("sigma must be non-negative")

    xi = 0.0  # no vol-of-vol


@dataclass(frozen=True)
class CIRVol:
    """dv = kappa (vbar - v) dt + xi sqrt(v) dW, corr(dW, dB) = rho, sigma = sqrt(v).

    Simulated by Euler with full truncation, so the Feller condition
    ``2 kappa vbar >= xi^2`` is not required.
    """

    v0: float = 0.09
    kappa: float = 5.0
    vbar: float = 0.09
    xi: float = 0.3
    rho: float = -0.5

    def __post_init__(self):
        _finite("CIR parameters", self.v0, self.kappa, self.vbar, self.xi, self.rho)
        if self.v0 < 0 or self.vbar < 0 or self.kappa < 0 or self.xi < 0:
            raise ConfigurationError("CIR parameters v0, kappa, vbar, xi must be non-negative")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigurationError("rho must lie in [-1, 1]")

    @property
    def feller(self):
        return 2.0 * self.kappa * self.vbar >= self.xi ** 2


@dataclass(frozen=True)
class JumpModel:
    """Compound Poisson jumps plus optional deterministic ``fixed`` (time, size) jumps.

    ``distribution`` is "point" (all sizes ``size``), "laplace" (two-sided
    exponential, mean absolute size ``scale``, upward with probability
    ``p_up``) or "gaussian" (``mean``, ``sd``).
    """

    intensity: float = 0.0
    distribution: str = "point"
    size: float = 1.0
    scale: float = 0.1
    p_up: float = 0.5
    mean: float = 0.0
    sd: float = 0.1
    fixed: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        _finite("jump parameters", self.intensity, self.size, self.scale, self.p_up, self.mean, self.sd)
        if self.intensity < 0:
            raise ConfigurationError("jump intensity must be >= 0")
        if self.distribution not in ("point", "laplace", "gaussian"):
            raise ConfigurationError(f"unknown jump size distribution {self.distribution!r}")
        if self.scale < 0 or self.sd < 0 or not 0.0 <= self.p_up <= 1.0:
            raise ConfigurationError("invalid jump size parameters")
        object.__setattr__(self, "fixed", tuple((float(t), float(s)) for t, s in self.fixed))
        for t, s in self.fixed:
            _finite("fixed jump", t, s)

    def draw_sizes(self, rng, n):
        if self.distribution == "point":
            return np.full(n, float(self.size))
        if self.distribution == "laplace":
            mag = rng.exponential(self.scale, n)
            sign = np.where(rng.random(n) < self.p_up, 1.0, -1.0)
            return sign * mag
        return rng.normal(self.mean, self.sd, n)


@dataclass(frozen=True)
class ModelSpec:
    x0: float = 0.0
    drift: Drift = field(default_factory=Drift)
    vol: Union[ConstantVol, CIRVol] = field(default_factory=ConstantVol)
    jumps: JumpModel = field(default_factory=JumpModel)
    horizon: float = 1.0

    def __post_init__(self):
        _finite("x0/horizon", self.x0, self.horizon)
        if self.horizon <= 0:
            raise ConfigurationError("horizon must be positive")
        for t, _ in self.jumps.fixed:
            if not 0.0 < t <= self.horizon:
                raise ConfigurationError("fixed jump times must lie in (0, T]")


@dataclass(frozen=True, eq=False)
class PathRecord:
    """A simulated path on its fine grid together with its oracle functionals."""

    grid: np.ndarray
    x: np.ndarray
    xc: np.ndarray
    sigma: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    jump_index: np.ndarray
    x0: float
    horizon: float
    # oracles
    int_sigma2: float
    qv: float
    iq: float
    cubic_jump_sum: float
    quartic_jump_sum: float
    abs_cubic_sigma: float

    @property
    def squared_jump_sum(self):
        return float(np.sum(self.jump_sizes ** 2))

    @property
    def skew_estimand(self):
        if self.qv <= 0:
            from .errors import DegenerateDenominatorError

            raise DegenerateDenominatorError("[X,X]_T is zero")
        return self.cubic_jump_sum / self.qv ** 1.5

    def to_csv(self, path_csv, jumps_csv):
        """Write (time, x, xc, sigma) and (time, size, sigma_minus, sigma_plus) CSVs."""
        _write_csv(path_csv, ("time", "x", "xc", "sigma"), (self.grid, self.x, self.xc, self.sigma))
        _write_csv(
            jumps_csv,
            ("time", "size", "sigma_minus", "sigma_plus"),
            (self.jump_times, self.jump_sizes, self.sigma_minus, self.sigma_plus),
        )

    @classmethod
    def from_csv(cls, path_csv, jumps_csv):
        """Rebuild a record (oracles recomputed from the stored grid and ledger)."""
        g, x, xc, s = _read_csv(path_csv, 4)
        jt, js, sm, sp = _read_csv(jumps_csv, 4)
        idx = np.searchsorted(g, jt)
        return _assemble(g, x, xc, s, jt, js, sm, sp, idx, float(x[0]), float(g[-1]))


def _write_csv(path, header, cols):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def _read_csv(path, ncols):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path}: empty CSV (header row required)")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, ncols)
    return tuple(data[:, j].copy() for j in range(ncols))


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _sigma_integral(sigma, grid, power):
    """int |sigma|^power ds; exact product when sigma is constant on the grid."""
    if len(sigma) and np.all(sigma == sigma[0]):
        return float(abs(sigma[0]) ** power * (grid[-1] - grid[0]))
    return _trapezoid(np.abs(sigma) ** power, grid)


def _assemble(grid, x, xc, sigma, jt, js, sm, sp, idx, x0, horizon):
    int_s2 = _sigma_integral(sigma, grid, 2)
    return PathRecord(
        grid=grid, x=x, xc=xc, sigma=sigma,
        jump_times=jt, jump_sizes=js, sigma_minus=sm, sigma_plus=sp, jump_index=idx,
        x0=x0, horizon=horizon,
        int_sigma2=int_s2,
        qv=int_s2 + float(np.sum(js ** 2)),
        iq=_sigma_integral(sigma, grid, 4),
        cubic_jump_sum=float(np.sum(js ** 3)),
        quartic_jump_sum=float(np.sum(js ** 4)),
        abs_cubic_sigma=_sigma_integral(sigma, grid, 3),
    )


def _as_rng(seed, label):
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(seed, label)


def default_euler_step(delta_n, horizon=1.0):
    return max(delta_n / 10.0, 1e-5 * horizon)


def build_grid(horizon, euler_step, obs_times=None):
    """Uniform grid of step ``euler_step`` merged with observation times (which win ties)."""
    m = int(math.ceil(horizon / euler_step - 1e-9))
    uniform = np.linspace(0.0, horizon, m + 1)
    if obs_times is None or len(obs_times) == 0:
        return uniform
    obs = np.asarray(obs_times, dtype=float)
    obs = obs[obs <= horizon * (1 + GRID_TOL)]
    tol = GRID_TOL * horizon
    pos = np.searchsorted(obs, uniform)
    near = np.zeros(len(uniform), dtype=bool)
    for off in (-1, 0):
        p = np.clip(pos + off, 0, len(obs) - 1)
        near |= np.abs(obs[p] - uniform) <= tol
    grid = np.union1d(obs, uniform[~near])
    return grid


def _insert_jumps(grid, times, tol):
    """Insert jump times into the grid; a jump within ``tol`` of a grid point snaps to it."""
    snapped = np.empty_like(times)
    new = []
    for i, t in enumerate(times):
        p = np.searchsorted(grid, t)
        cand = [q for q in (p - 1, p) if 0 <= q < len(grid)]
        q = min(cand, key=lambda q: abs(grid[q] - t))
        if abs(grid[q] - t) <= tol and q > 0:
            snapped[i] = grid[q]
        else:
            snapped[i] = t
            new.append(t)
    if new:
        grid = np.union1d(grid, np.asarray(new))
    return grid, snapped


def simulate_path(model, euler_step=None, seed=0, obs_times=None):
    """Euler-Maruyama path of ``model`` on a grid containing ``obs_times`` and all jump times.

    Parameters
    ----------
    model : ModelSpec
    euler_step : float
        Uniform base step (``0 < euler_step <= T``).
    seed : int or numpy.random.Generator
        Integer seeds use the "path" stream.
    obs_times : array_like, optional
        Observation times to place exactly on the grid.

    Returns
    -------
    PathRecord
    """
    T = model.horizon
    if euler_step is None:
        raise DomainError("euler_step is required")
    if not math.isfinite(euler_step):
        raise ConfigurationError("euler_step must be finite")
    if euler_step <= 0 or euler_step > T:
        raise DomainError("euler_step must lie in (0, T]")
    rng = _as_rng(seed, "path")
    jm = model.jumps

    n_jumps = rng.poisson(jm.intensity * T) if jm.intensity > 0 else 0
    jt = np.sort(rng.uniform(0.0, T, n_jumps))
    js = jm.draw_sizes(rng, n_jumps)
    if jm.fixed:
        ft, fs = np.array(jm.fixed, dtype=float).T
        jt = np.concatenate([jt, ft])
        js = np.concatenate([js, fs])
        order = np.argsort(jt, kind="stable")
        jt, js = jt[order], js[order]

    grid = build_grid(T, euler_step, obs_times)
    grid, jt = _insert_jumps(grid, jt, GRID_TOL * T)
    dt = np.diff(grid)
    z = rng.standard_normal(len(dt))
    db = np.sqrt(dt) * z

    vol = model.vol
    if isinstance(vol, CIRVol):
        sigma = _cir_sigma(vol, dt, z, rng.standard_normal(len(dt)))
    else:
        sigma = np.full(len(grid), float(vol.sigma))

    xc = np.concatenate([[0.0], np.cumsum(sigma[:-1] * db)])
    b = model.drift.b0 + model.drift.b1 * sigma[:-1] ** 2
    drift = np.concatenate([[0.0], np.cumsum(b * dt)])
    idx = np.searchsorted(grid, jt)
    jumps_on_grid = np.zeros(len(grid))
    np.add.at(jumps_on_grid, idx, js)
    x = model.x0 + drift + xc + np.cumsum(jumps_on_grid)

    sm = sigma[idx - 1] if len(idx) else np.empty(0)
    sp = sigma[idx] if len(idx) else np.empty(0)
    return _assemble(grid, x, xc, sigma, jt, js, sm, sp, idx, float(model.x0), float(T))


def _cir_sigma(vol, dt, z_price, z_perp):
    """Full-truncation Euler for the variance, driven by dW = rho dB + sqrt(1 - rho^2) dW'."""
    rho = vol.rho
    zv = rho * z_price + math.sqrt(1.0 - rho * rho) * z_perp
    sq = np.sqrt(dt)
    v = np.empty(len(dt) + 1)
    v[0] = vol.v0
    kappa, vbar, xi = vol.kappa, vol.vbar, vol.xi
    cur = vol.v0
    for k in range(len(dt)):
        vp = cur if cur > 0.0 else 0.0
        cur = cur + kappa * (vbar - vp) * dt[k] + xi * math.sqrt(vp) * sq[k] * zv[k]
        v[k + 1] = cur
    return np.sqrt(np.maximum(v, 0.0))


# ---------------------------------------------------------------------------
# observation times


@dataclass(frozen=True)
class GSpec:
    """Intensity function G(t, sigma) > 0 of a restricted scheme.

    kind "constant": ``value``; "sinusoid": ``value * (1 + amplitude sin(2 pi frequency t))``;
    "sigma": ``value * max(sigma, floor) ** power``.
    """

    kind: str = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    frequency: float = 1.0
    power: float = 1.0
    floor: float = 1e-8

    def __post_init__(self):
        _finite("G parameters", self.value, self.amplitude, self.frequency, self.power, self.floor)
        if self.kind not in ("constant", "sinusoid", "sigma"):
            raise ConfigurationError(f"unknown G kind {self.kind!r}")
        if self.value <= 0 or (self.kind == "sinusoid" and abs(self.amplitude) >= 1):
            raise ConfigurationError("G must be strictly positive")

    @property
    def needs_sigma(self):
        return self.kind == "sigma"

    def __call__(self, t, sigma=None):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.value)
        if self.kind == "sinusoid":
            return self.value * (1.0 + self.amplitude * np.sin(2 * np.pi * self.frequency * t))
        if sigma is None:
            raise ConfigurationError("sigma-coupled G needs the volatility path")
        return self.value * np.maximum(np.abs(np.asarray(sigma, dtype=float)), self.floor) ** self.power


@dataclass(frozen=True)
class SamplingScheme:
    """kind: "equidistant", "restricted" (t_p = t_{p-1} + Delta_n G eps_p) or "poisson"."""

    kind: str = "equidistant"
    g: GSpec = field(default_factory=GSpec)
    multiplier: str = "uniform"

    def __post_init__(self):
        if self.kind not in ("equidistant", "restricted", "poisson"):
            raise ConfigurationError(f"unknown sampling scheme {self.kind!r}")
        if self.multiplier not in ("uniform", "exponential", "degenerate"):
            raise ConfigurationError(f"unknown multiplier law {self.multiplier!r}")

    def intensity(self, t, sigma=None):
        """G evaluated along (t, sigma); identically 1 unless restricted."""
        if self.kind == "restricted":
            return self.g(t, sigma)
        return np.ones_like(np.asarray(t, dtype=float))

    def draw_multipliers(self, rng, n):
        if self.multiplier == "uniform":
            return rng.uniform(0.5, 1.5, n)
        if self.multiplier == "exponential":
            return rng.exponential(1.0, n)
        return np.ones(n)


@dataclass(frozen=True, eq=False)
class SamplingTimes:
    times: np.ndarray  # all observation times <= horizon
    next_time: float  # first observation time > horizon
    horizon: float
    delta_n: float
    g_process: np.ndarray
    kind: str = "equidistant"

    @property
    def n_count(self):
        return len(self.times) - 1

    @property
    def mesh(self):
        return mesh_stats(self, self.horizon)[0]


def _floor_ratio(T, delta_n):
    return int(math.floor(T / delta_n + 1e-9))


def generate_times(scheme, delta_n, horizon, seed=0, path=None):
    """Observation times on [0, horizon] for ``scheme``.

    ``path`` is required only when G depends on sigma; the resulting times
    are then moved up to the next grid point of ``path`` so that the path can
    be sampled without interpolation.
    """
    if not delta_n > 0 or not math.isfinite(delta_n):
        raise DomainError("delta_n must be positive")
    T = float(horizon)
    rng = _as_rng(seed, "times")
    if scheme.kind == "equidistant":
        n = _floor_ratio(T, delta_n)
        times = np.arange(n + 1) * delta_n
        return SamplingTimes(times, (n + 1) * delta_n, T, delta_n, np.ones(n + 1), "equidistant")

    if scheme.kind == "poisson":
        ts = _renewal(lambda m: delta_n * rng.exponential(1.0, m), T, delta_n)
        return _finish(ts, T, delta_n, np.ones(len(ts) - 1), "poisson")

    g = scheme.g
    if g.kind == "constant":
        ts = _renewal(lambda m: delta_n * g.value * _positive(scheme.draw_multipliers(rng, m)), T, delta_n * g.value)
        return _finish(ts, T, delta_n, np.full(len(ts) - 1, g.value), "restricted")

    if g.needs_sigma and path is None:
        raise ConfigurationError("sigma-coupled sampling requires the simulated path")
    times, gvals = [0.0], []
    t = 0.0
    while True:
        if g.needs_sigma:
            k = np.searchsorted(path.grid, t, side="right") - 1
            gv = float(g(t, path.sigma[k]))
        else:
            gv = float(g(t))
        eps = float(_positive(scheme.draw_multipliers(rng, 1))[0])
        nxt = t + delta_n * gv * eps
        if g.needs_sigma and nxt <= T:
            k = np.searchsorted(path.grid, nxt, side="left")
            if k < len(path.grid):
                nxt = float(path.grid[k])
            if nxt <= t:
                raise GenerationError("snapped observation time did not advance")
        gvals.append(gv)
        if nxt > T:
            return SamplingTimes(np.array(times), nxt, T, delta_n, np.array(gvals), "restricted")
        times.append(nxt)
        t = nxt


def _positive(eps):
    if np.any(eps <= 0) or np.any(~np.isfinite(eps)):
        raise GenerationError("spacing multipliers must be positive and finite")
    return eps


def _renewal(draw, T, mean_gap):
    """Cumulative sums of positive gaps starting at 0, until one exceeds T."""
    chunks = [np.zeros(1)]
    last = 0.0
    m = int(1.1 * T / mean_gap) + 16
    while last <= T:
        gaps = draw(m)
        if np.any(gaps <= 0):
            raise GenerationError("non-increasing observation times")
        c = last + np.cumsum(gaps)
        chunks.append(c)
        last = c[-1]
        m = max(16, m // 4)
    ts = np.concatenate(chunks)
    if np.any(np.diff(ts) <= 0):
        raise GenerationError("non-increasing observation times")
    return ts


def _finish(ts, T, delta_n, gvals, kind):
    n = int(np.searchsorted(ts, T, side="right"))  # ts[:n] <= T
    return SamplingTimes(ts[:n].copy(), float(ts[n]), T, delta_n, gvals[:n].copy(), kind)


def mesh_stats(times, t):
    """(r_n(t), N_t) with r_n(t) = sup_i (t_i ^ t - t_{i-1} ^ t) and t_{-1} = 0.

    ``times`` is a ``SamplingTimes`` or a plain increasing array starting at 0.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    if isinstance(times, SamplingTimes):
        ts = np.append(times.times, times.next_time)
    else:
        ts = np.asarray(times, dtype=float)
    clipped = np.minimum(np.concatenate([[0.0], ts]), t)
    r = float(np.max(np.diff(clipped))) if len(ts) else 0.0
    n = int(np.searchsorted(ts, t, side="right")) - 1
    return r, n


def sample_process(path, times, which="x"):
    """Exact grid lookup of ``path.x`` (or ``path.xc``) at the observation times."""
    ts = times.times if isinstance(times, SamplingTimes) else np.asarray(times, dtype=float)
    idx = np.searchsorted(path.grid, ts)
    ok = (idx < len(path.grid))
    ok[ok] = path.grid[idx[ok]] == ts[ok]
    if not np.all(ok):
        raise ConsistencyError(f"{int(np.sum(~ok))} observation times are not on the path grid")
    return getattr(path, which)[idx]


# ---------------------------------------------------------------------------
# microstructure noise


@dataclass(frozen=True)
class NoiseModel:
    """Mean-zero noise with conditional variance alpha_t.

    family: "gaussian" or "two_point" (+-sqrt(alpha) with equal probability).
    variance: "constant" (alpha), "sinusoid" (alpha (1 + amplitude sin(2 pi frequency t)))
    or "coupled" (c * sigma_t^2).
    """

    family: str = "gaussian"
    variance: str = "constant"
    alpha: float = 0.0
    amplitude: float = 0.0
    frequency: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        _finite("noise parameters", self.alpha, self.amplitude, self.frequency, self.c)
        if self.family not in ("gaussian", "two_point"):
            raise ConfigurationError(f"unknown noise family {self.family!r}")
        if self.variance not in ("constant", "sinusoid", "coupled"):
            raise ConfigurationError(f"unknown noise variance kind {self.variance!r}")
        if self.alpha < 0 or self.c < 0 or abs(self.amplitude) > 1:
            raise ConfigurationError("noise variance must be non-negative")

    @property
    def needs_sigma(self):
        return self.variance == "coupled"

    def alpha_at(self, t, sigma=None):
        t = np.asarray(t, dtype=float)
        if self.variance == "constant":
            return np.full_like(t, self.alpha)
        if self.variance == "sinusoid":
            return self.alpha * (1.0 + self.amplitude * np.sin(2 * np.pi * self.frequency * t))
        if sigma is None:
            raise ConfigurationError("sigma-coupled noise needs sigma at the observation times")
        return self.c * np.asarray(sigma, dtype=float) ** 2


def apply_noise(latent, times, noise, seed=0, sigma=None):
    """Y_i = X_i + eps_i with independent mean-zero eps_i of variance alpha_{t_i}."""
    latent = np.asarray(latent, dtype=float)
    ts = times.times if isinstance(times, SamplingTimes) else np.asarray(times, dtype=float)
    if len(latent) != len(ts):
        raise DomainError("latent series and times differ in length")
    if noise is None:
        return latent.copy()
    alpha = noise.alpha_at(ts, sigma)
    if np.any(alpha < 0):
        raise ConfigurationError("negative noise variance")
    rng = _as_rng(seed, "noise")
    if noise.family == "gaussian":
        eps = rng.standard_normal(len(ts))
    else:
        eps = np.where(rng.random(len(ts)) < 0.5, 1.0, -1.0)
    return latent + np.sqrt(alpha) * eps


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Observation:
    path: PathRecord
    times: SamplingTimes
    latent: np.ndarray
    observed: np.ndarray
    sigma_at_times: np.ndarray


def simulate_observations(model, scheme, delta_n, seed=0, rep=0, slot=0, noise=None, euler_step=None):
    """Path, observation times, latent and noisy series for one replication.

    Streams "path", "times" and "noise" are drawn independently from
    ``(seed, rep, slot)``.
    """
    T = model.horizon
    h = default_euler_step(delta_n, T) if euler_step is None else euler_step
    rp, rt, rn = (stream(seed, lab, rep, slot) for lab in ("path", "times", "noise"))
    if scheme.kind == "restricted" and scheme.g.needs_sigma:
        path = simulate_path(model, h, rp)
        times = generate_times(scheme, delta_n, T, rt, path=path)
    else:
        times = generate_times(scheme, delta_n, T, rt)
        path = simulate_path(model, h, rp, obs_times=times.times)
    latent = sample_process(path, times)
    sig = sample_process(path, times, "sigma")
    observed = apply_noise(latent, times, noise, rn, sigma=sig) if noise is not None else latent.copy()
    return Observation(path, times, latent, observed, sig)
