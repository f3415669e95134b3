"""Asymptotic laws of the estimators.

Limit variables of the non-noisy CLTs are built from per-jump Gaussians

    R_q = sqrt(kappa_q) sigma_{T_q-} U_q + sqrt(1 - kappa_q) sigma_{T_q} U'_q,

shared by every component of one draw, and an independent U^0 for the
continuous part of the realized volatility. The noisy CLT is conditionally
Gaussian with covariance ``Gamma`` computed by ``gamma_matrix``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateDenominatorError, DomainError
from .rng import stream

ABS_CUBE_CONST = 2.0 * math.sqrt(2.0) / math.sqrt(math.pi)  # E|N(0,1)|^3


@dataclass(frozen=True)
class NoisyParams:
    """Path integrals and jump-time values entering Gamma."""

    int_s4g: float  # int sigma^4 G ds
    int_s2a: float  # int sigma^2 alpha ds
    int_a2g: float  # int alpha^2 / G ds
    alpha_minus: np.ndarray
    alpha_plus: np.ndarray
    g_minus: np.ndarray
    g_plus: np.ndarray
    g_min: float = 1.0  # smallest G on the grid


@dataclass(frozen=True)
class LimitLawParams:
    iq: float
    qv: float
    jump_sizes: np.ndarray
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    abs_cubic_sigma: float
    cubic_jump_sum: float
    noisy: Optional[NoisyParams] = None

    def __post_init__(self):
        for name in ("jump_sizes", "sigma_minus", "sigma_plus"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if not (len(self.jump_sizes) == len(self.sigma_minus) == len(self.sigma_plus)):
            raise DomainError("jump ledger columns differ in length")
        if not all(map(math.isfinite, (self.iq, self.qv, self.abs_cubic_sigma, self.cubic_jump_sum))):
            raise DomainError("limit-law inputs must be finite")
        if self.qv < 0 or self.iq < 0:
            raise DomainError("qv and iq must be non-negative")

    @property
    def n_jumps(self):
        return len(self.jump_sizes)


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def params_from_path(path, noise=None, scheme=None):
    """Collect oracle inputs from a ``PathRecord``.

    ``noise`` (a ``NoiseModel``) and ``scheme`` (a ``SamplingScheme``) add the
    quantities needed by ``gamma_matrix``; G is 1 for non-restricted schemes.
    """
    noisy = None
    if noise is not None or scheme is not None:
        grid, sig = path.grid, path.sigma
        G = scheme.intensity(grid, sig) if scheme is not None else np.ones_like(grid)
        a = noise.alpha_at(grid, sig) if noise is not None else np.zeros_like(grid)
        jt = path.jump_times
        if scheme is not None:
            gm, gp = scheme.intensity(jt, path.sigma_minus), scheme.intensity(jt, path.sigma_plus)
        else:
            gm = gp = np.ones_like(jt)
        if noise is not None:
            am, ap = noise.alpha_at(jt, path.sigma_minus), noise.alpha_at(jt, path.sigma_plus)
        else:
            am = ap = np.zeros_like(jt)
        g_min = float(min(np.min(G), np.min(gm, initial=np.inf), np.min(gp, initial=np.inf)))
        with np.errstate(divide="ignore"):
            noisy = NoisyParams(
                int_s4g=_trapezoid(sig ** 4 * G, grid),
                int_s2a=_trapezoid(sig ** 2 * a, grid),
                int_a2g=_trapezoid(a ** 2 / G, grid),
                alpha_minus=am, alpha_plus=ap, g_minus=gm, g_plus=gp, g_min=g_min,
            )
    return LimitLawParams(
        iq=path.iq, qv=path.qv, jump_sizes=path.jump_sizes,
        sigma_minus=path.sigma_minus, sigma_plus=path.sigma_plus,
        abs_cubic_sigma=path.abs_cubic_sigma, cubic_jump_sum=path.cubic_jump_sum,
        noisy=noisy,
    )


def oracle_targets(path):
    """([X,X]_T, sum of cubed jumps, skewness estimand)."""
    if path.qv <= 0:
        raise DegenerateDenominatorError("[X,X]_T is zero; skewness estimand undefined")
    return path.qv, path.cubic_jump_sum, path.cubic_jump_sum / path.qv ** 1.5


# ---------------------------------------------------------------------------
# non-noisy limits


@dataclass(frozen=True)
class AuxDraws:
    """Auxiliary variables of one batch: kappa, U, U' of shape (n_draws, n_jumps), U0 of (n_draws,)."""

    kappa: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    u0: np.ndarray


def draw_aux(n_jumps, n_draws, seed):
    """Draw (kappa, U, U', U0); ``seed`` may be an int ("limit" stream) or a Generator."""
    if n_draws < 1:
        raise DomainError("n_draws must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "limit")
    shape = (n_draws, n_jumps)
    return AuxDraws(
        kappa=rng.uniform(0.0, 1.0, shape),
        u=rng.standard_normal(shape),
        u_prime=rng.standard_normal(shape),
        u0=rng.standard_normal(n_draws),
    )


def jump_gaussians(params, aux):
    """R_q for every draw, shape (n_draws, n_jumps)."""
    k = aux.kappa
    return np.sqrt(k) * params.sigma_minus * aux.u + np.sqrt(1.0 - k) * params.sigma_plus * aux.u_prime


def rv_limit(params, aux, r=None):
    """sqrt(2 IQ) U0 + Z(X, 2) with Z(X, 2) = sum 2 dX_q R_q."""
    r = jump_gaussians(params, aux) if r is None else r
    return math.sqrt(2.0 * params.iq) * aux.u0 + r @ (2.0 * params.jump_sizes)


def vbar_limit(params, g_prime, aux, r=None):
    """sum g'(dX_q) R_q."""
    r = jump_gaussians(params, aux) if r is None else r
    return r @ np.asarray(g_prime(params.jump_sizes), dtype=float)


def thm2_limit_sample(params, g_prime, n_draws, seed, return_aux=False):
    """Draws of (sqrt(2 IQ) U0 + Z(X,2), sum g'(dX_q) R_q), shape (n_draws, 2).

    Both columns use the same R_q within a draw.
    """
    aux = draw_aux(params.n_jumps, n_draws, seed)
    r = jump_gaussians(params, aux)
    out = np.column_stack([rv_limit(params, aux, r), vbar_limit(params, g_prime, aux, r)])
    return (out, aux) if return_aux else out


def abs_cubic_limit_sample(params, n_draws, seed):
    """2 sqrt(2/pi) int |sigma|^3 + 3 sum sign(dX) dX^2 R_q (sign(0) = +1)."""
    aux = draw_aux(params.n_jumps, n_draws, seed)
    r = jump_gaussians(params, aux)
    dx = params.jump_sizes
    sign = np.where(dx >= 0, 1.0, -1.0)
    return ABS_CUBE_CONST * params.abs_cubic_sigma + r @ (3.0 * sign * dx ** 2)


def skew_limit_sample(params, n_draws, seed):
    """Draws of the realized-skewness limit G_T."""
    if params.qv <= 0:
        raise DegenerateDenominatorError("[X,X]_T is zero")
    aux = draw_aux(params.n_jumps, n_draws, seed)
    r = jump_gaussians(params, aux)
    dx = params.jump_sizes
    z3 = r @ (3.0 * dx ** 2)
    rv_part = rv_limit(params, aux, r)
    qv = params.qv
    num = qv ** 1.5 * z3 - 1.5 * math.sqrt(qv) * params.cubic_jump_sum * rv_part
    return num / qv ** 3


def cubic_conditional_variance(params):
    """Var(Z(X,3) | F) = sum 9 dX^4 (sigma_-^2 + sigma_+^2) / 2."""
    dx = params.jump_sizes
    return float(np.sum(9.0 * dx ** 4 * 0.5 * (params.sigma_minus ** 2 + params.sigma_plus ** 2)))


def rv_conditional_variance(params):
    """Var(sqrt(2 IQ) U0 + Z(X,2) | F)."""
    dx = params.jump_sizes
    return 2.0 * params.iq + float(np.sum(4.0 * dx ** 2 * 0.5 * (params.sigma_minus ** 2 + params.sigma_plus ** 2)))


def skew_conditional_variance(params):
    """Var(G_T | F) from the conditional covariance of (RV limit, Z(X,3))."""
    qv = params.qv
    if qv <= 0:
        raise DegenerateDenominatorError("[X,X]_T is zero")
    dx = params.jump_sizes
    er2 = 0.5 * (params.sigma_minus ** 2 + params.sigma_plus ** 2)
    var3 = float(np.sum(9.0 * dx ** 4 * er2))
    var2 = rv_conditional_variance(params)
    cov = float(np.sum(6.0 * dx ** 3 * er2))
    a = qv ** -1.5
    b = -1.5 * params.cubic_jump_sum * qv ** -2.5
    return a * a * var3 + 2 * a * b * cov + b * b * var2


# ---------------------------------------------------------------------------
# noisy limits


@dataclass(frozen=True)
class GammaMatrix:
    gamma_c: float
    gbar11: float
    gbar12: float
    gbar22: float

    @property
    def matrix(self):
        return np.array([[self.gamma_c + self.gbar11, self.gbar12], [self.gbar12, self.gbar22]])

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])


def gamma_matrix(params, theta, constants, phi3_minus="squared"):
    """Conditional covariance of Delta^{-1/4}(PRV - [X,X], PCV - sum dX^3).

    ``phi3_minus`` selects the squared (default) or "unsquared" version of
    the constant multiplying the left-limit part of the (2,2) block.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    npar = params.noisy
    if npar is None:
        raise DomainError("params lack the noise/sampling integrals (use params_from_path with noise or scheme)")
    if not npar.g_min > 0:
        raise DomainError("G must be strictly positive")
    c = constants
    p3m = c.phi3_minus if phi3_minus == "squared" else c.phi3_minus_unsquared
    gc = 4.0 / c.psi2 ** 2 * (
        c.phi22 * theta * npar.int_s4g
        + 2.0 * c.phi12 / theta * npar.int_s2a
        + c.phi11 / theta ** 3 * npar.int_a2g
    )
    dx = params.jump_sizes
    s2m, s2p = params.sigma_minus ** 2, params.sigma_plus ** 2
    gm, gp, am, ap = npar.g_minus, npar.g_plus, npar.alpha_minus, npar.alpha_plus
    g11 = 4.0 / c.psi2 ** 2 * np.sum(
        dx ** 2 * (c.phi22 * theta * (s2p * gp + s2m * gm) + c.phi12 / theta * (ap + am))
    )
    g12 = 6.0 / (c.psi2 * c.psi3) * np.sum(
        dx ** 3 * (
            theta * (c.phi23_plus * s2p * gp + c.phi23_minus * s2m * gm)
            + (c.phi23p_plus * ap + c.phi23p_minus * am) / theta
        )
    )
    g22 = 9.0 / c.psi3 ** 2 * np.sum(
        dx ** 4 * (
            theta * (c.phi3_plus * s2p * gp + p3m * s2m * gm)
            + (c.phi3p_plus * ap + c.phi3p_minus * am) / theta
        )
    )
    return GammaMatrix(float(gc), float(g11), float(g12), float(g22))


class SkewVariance(NamedTuple):
    variance: float
    degenerate: bool


def noisy_skew_variance(gamma, qv, cubic_jump_sum):
    """d' Gamma d with d = (-3/2 sum dX^3 / qv^{5/2}, qv^{-3/2}).

    ``degenerate`` is set when the variance is zero because the path has no
    cubic jump mass, in which case the Delta^{-1/4} limit is a point mass.
    """
    if not qv > 0:
        raise DegenerateDenominatorError("[X,X]_T must be positive")
    d1 = -1.5 * cubic_jump_sum / qv ** 2.5
    d2 = qv ** -1.5
    v = d1 * d1 * (gamma.gamma_c + gamma.gbar11) + 2 * d1 * d2 * gamma.gbar12 + d2 * d2 * gamma.gbar22
    return SkewVariance(float(v), bool(v == 0.0))


def noisy_limit_sample(gamma, n_draws, seed):
    """Draws of Gamma^{1/2} zeta, shape (n_draws, 2)."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "limit")
    m = gamma.matrix
    w, v = np.linalg.eigh(m)
    root = v @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ v.T
    return rng.standard_normal((n_draws, 2)) @ root.T


# ---------------------------------------------------------------------------
# counterexample with g_a(x) = |x|^3 sin(2 a log|x|)


X_LOW, X_HIGH = 1e-8, 12.0


def _log_quad(fn, panels):
    """int_{X_LOW}^{X_HIGH} fn(log x) N(x) x^3 dx via y = log x (Simpson in y)."""
    if panels % 2 or panels < 2:
        raise DomainError("panels must be even")
    y = np.linspace(math.log(X_LOW), math.log(X_HIGH), panels + 1)
    h = (y[-1] - y[0]) / panels
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    base = np.exp(4.0 * y - 0.5 * np.exp(2.0 * y)) / math.sqrt(2.0 * math.pi)
    return float(h / 3.0 * np.sum(w * base * fn(y)))


def counterexample_coefficients(a, panels=20000):
    """(A, B) = (int x^3 cos(2a log x) N(x) dx, int x^3 sin(2a log x) N(x) dx) over (0, inf)."""
    A = _log_quad(lambda y: np.cos(2.0 * a * y), panels)
    B = _log_quad(lambda y: np.sin(2.0 * a * y), panels)
    return A, B


def counterexample_cn(a, delta, panels=20000):
    """c(Delta) = int x^3 sin(2a log(sqrt(Delta) x)) N(x) dx, by direct quadrature."""
    shift = 0.5 * math.log(delta)
    return _log_quad(lambda y: np.sin(2.0 * a * (y + shift)), panels)


def find_nondegenerate_a(candidates=(0.5, 1.0, 2.0, 4.0), panels=20000, tol=1e-10):
    """First candidate a with |B(a)| > tol, or None."""
    for a in candidates:
        if abs(counterexample_coefficients(a, panels)[1]) > tol:
            return a
    return None


@dataclass(frozen=True)
class CounterexampleRow:
    n: int
    delta_n: float
    c_n: float


def counterexample_sequence(a, n_max, panels=20000):
    """[(n, Delta_n, c_n)] for Delta_n = exp(-n pi / a), n = 1..n_max.

    Raises
    ------
    DegenerateDenominatorError
        If |B(a)| < 1e-10, i.e. the sequence does not oscillate for this a.
    """
    if a == 0:
        raise DomainError("a must be nonzero")
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    _, B = counterexample_coefficients(a, panels)
    if abs(B) < 1e-10:
        raise DegenerateDenominatorError(f"B(a={a}) = {B:.3e}: degenerate counterexample")
    rows = []
    for n in range(1, n_max + 1):
        delta = math.exp(-n * math.pi / a)
        rows.append(CounterexampleRow(n, delta, counterexample_cn(a, delta, panels)))
    return rows
