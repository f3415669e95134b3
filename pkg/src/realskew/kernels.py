"""Pre-averaging weight functions and their quadrature constants.

A weight function ``g`` on ``[0, 1]`` is stored piecewise: sorted knots
``0 = k_0 < ... < k_m = 1`` and one polynomial (ascending coefficients) per
piece, or a pair of callables for ad-hoc checks. All integrals are composite
Simpson rules whose panels are split at every knot of every factor, so each
panel sees a smooth integrand.

The cross-correlation functions are

    phi_{u,v}(y) = int_y^1 u(x - y) v(x) dx,     u, v in {g, g', g^2},

and the constants are integrals over ``y`` of products of these.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, KernelValidityError

DEFAULT_PANELS = 4096
PSI3_THRESHOLD = 1e-12

# which factor of the kernel a phi argument refers to
FUNCTION_IDS = ("g", "dg", "g2")

# (u, v) pairs needed by the Phi constants
_PAIRS = (
    ("g", "g"),
    ("dg", "dg"),
    ("g", "g2"),
    ("g2", "g"),
    ("dg", "g2"),
    ("g2", "dg"),
    ("dg", "g"),
    ("g", "dg"),
)


@dataclass(frozen=True)
class KernelSpec:
    """Piecewise weight function on [0, 1].

    Either ``coeffs`` (one ascending-power polynomial per piece) or ``func``
    and ``deriv`` callables must be given. Callables are evaluated on whole
    arrays and treated as smooth between ``knots``.
    """

    name: str
    knots: tuple
    coeffs: Optional[tuple] = None
    func: Optional[Callable] = field(default=None, compare=False)
    deriv: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or len(k) < 2 or k[0] != 0.0 or k[-1] != 1.0 or np.any(np.diff(k) <= 0):
            raise KernelValidityError("knots must increase strictly from 0 to 1")
        if self.coeffs is None:
            if self.func is None or self.deriv is None:
                raise KernelValidityError("need polynomial coefficients or func/deriv callables")
        elif len(self.coeffs) != len(k) - 1:
            raise KernelValidityError("one coefficient vector per piece required")

    def __hash__(self):
        return hash((self.name, self.knots, self.coeffs, id(self.func), id(self.deriv)))

    @property
    def n_pieces(self):
        return len(self.knots) - 1

    def piece_index(self, x):
        """Index of the piece containing ``x`` (right-limit convention at knots)."""
        k = np.asarray(self.knots)
        j = np.searchsorted(k, x, side="right") - 1
        return np.clip(j, 0, self.n_pieces - 1)

    def eval_piece(self, j, x, deriv=False):
        """Evaluate piece ``j`` (or its derivative) at ``x``, ignoring the piece bounds."""
        x = np.asarray(x, dtype=float)
        if self.coeffs is None:
            return (self.deriv if deriv else self.func)(x)
        c = np.asarray(self.coeffs[j], dtype=float)
        if deriv:
            c = c[1:] * np.arange(1, len(c))
            if len(c) == 0:
                return np.zeros_like(x)
        out = np.full_like(x, c[-1])
        for a in c[-2::-1]:
            out = out * x + a
        return out

    def scaled(self, c):
        """Return the kernel ``c * g``."""
        if self.coeffs is not None:
            coeffs = tuple(tuple(c * a for a in p) for p in self.coeffs)
            return KernelSpec(f"{c}*{self.name}", self.knots, coeffs=coeffs)
        f, d = self.func, self.deriv
        return KernelSpec(
            f"{c}*{self.name}", self.knots, func=lambda x: c * f(x), deriv=lambda x: c * d(x)
        )


def min_kernel():
    """g(x) = min(x, 1 - x)."""
    return KernelSpec("min", (0.0, 0.5, 1.0), coeffs=((0.0, 1.0), (1.0, -1.0)))


def piecewise_polynomial(breakpoints, coeffs, name="piecewise"):
    """Kernel from sorted breakpoints (including 0 and 1) and ascending coefficients."""
    return KernelSpec(
        name,
        tuple(float(b) for b in breakpoints),
        coeffs=tuple(tuple(float(a) for a in p) for p in coeffs),
    )


def callable_kernel(func, deriv, knots=(0.0, 1.0), name="callable"):
    return KernelSpec(name, tuple(float(k) for k in knots), func=func, deriv=deriv)


def kernel_by_name(name):
    """Registry used by the CLI and configs."""
    if name == "min":
        return min_kernel()
    if name == "quadratic":
        # g(x) = x(1 - x)
        return piecewise_polynomial((0.0, 1.0), ((0.0, 1.0, -1.0),), name="quadratic")
    raise DomainError(f"unknown kernel {name!r}")


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0) or np.any(~np.isfinite(x)):
        raise DomainError("kernel argument outside [0, 1]")
    return x


def eval_kernel(spec, x):
    x = _check_unit(x)
    j = spec.piece_index(x)
    if spec.coeffs is None:
        return spec.eval_piece(0, x)
    out = np.empty_like(x)
    for p in range(spec.n_pieces):
        m = j == p
        out[m] = spec.eval_piece(p, x[m])
    return out if out.ndim else float(out)


def eval_kernel_deriv(spec, x):
    x = _check_unit(x)
    j = spec.piece_index(x)
    if spec.coeffs is None:
        return spec.eval_piece(0, x, deriv=True)
    out = np.empty_like(x)
    for p in range(spec.n_pieces):
        m = j == p
        out[m] = spec.eval_piece(p, x[m], deriv=True)
    return out if out.ndim else float(out)


def _eval_factor(spec, fid, j, x):
    if fid == "g":
        return spec.eval_piece(j, x)
    if fid == "dg":
        return spec.eval_piece(j, x, deriv=True)
    if fid == "g2":
        return spec.eval_piece(j, x) ** 2
    raise DomainError(f"unknown function id {fid!r}")


def _even_panels(panels, length):
    n = int(np.ceil(panels * length))
    n += n % 2
    return max(2, n)


def _simpson_nodes(n):
    s = np.linspace(0.0, 1.0, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return s, w / (3.0 * n)


def _check_panels(panels, minimum=2):
    if int(panels) != panels or panels < minimum or panels % 2:
        raise DomainError(f"panels must be an even integer >= {minimum}")
    return int(panels)


def _inner_intervals(spec, y_ref):
    """Cut structure of [y, 1] for y near ``y_ref``.

    Returns tuples ``(lo, hi, ju, jv)`` where ``lo`` and ``hi`` are
    ``(offset, slope)`` pairs meaning ``offset + slope * y``, and ``ju``/``jv``
    are the pieces of ``u(x - y)`` and ``v(x)`` on the interval.
    """
    knots = np.asarray(spec.knots)
    cuts = [(k, 1.0) for k in knots if y_ref + k <= 1.0]  # x = y + k
    cuts += [(k, 0.0) for k in knots if k >= y_ref]  # x = k
    vals = np.array([a + b * y_ref for a, b in cuts])
    order = np.argsort(vals, kind="stable")
    out = []
    for i0, i1 in zip(order[:-1], order[1:]):
        lo_v, hi_v = vals[i0], vals[i1]
        if hi_v - lo_v <= 1e-14:
            continue
        mid = 0.5 * (lo_v + hi_v)
        ju = int(spec.piece_index(mid - y_ref))
        jv = int(spec.piece_index(mid))
        out.append((cuts[i0], cuts[i1], ju, jv))
    return out


def _phi_block(spec, ys, y_ref, pairs, panels, max_cells=2_000_000):
    """phi_{u,v}(y) for all ``pairs`` at every y in ``ys`` (one fixed cut structure)."""
    ys = np.asarray(ys, dtype=float)
    res = {p: np.zeros(len(ys)) for p in pairs}
    need_u = {p[0] for p in pairs}
    need_v = {p[1] for p in pairs}
    for (la, lb), (ha, hb), ju, jv in _inner_intervals(spec, y_ref):
        lo = la + lb * ys
        hi = ha + hb * ys
        length = np.maximum(hi - lo, 0.0)
        n = _even_panels(panels, float(length.max()))
        s, w = _simpson_nodes(n)
        rows = max(1, max_cells // (n + 1))
        for r0 in range(0, len(ys), rows):
            sl = slice(r0, r0 + rows)
            x = lo[sl, None] + length[sl, None] * s[None, :]
            xu = x - ys[sl, None]
            fu = {fid: _eval_factor(spec, fid, ju, xu) for fid in need_u}
            fv = {fid: _eval_factor(spec, fid, jv, x) for fid in need_v}
            for p in pairs:
                res[p][sl] += length[sl] * ((fu[p[0]] * fv[p[1]]) @ w)
    return res


def phi_uv(spec, u, v, y, panels=DEFAULT_PANELS):
    """phi_{u,v}(y) = int_y^1 u(x - y) v(x) dx with u, v in {"g", "dg", "g2"}."""
    if u not in FUNCTION_IDS or v not in FUNCTION_IDS:
        raise DomainError(f"function ids must be in {FUNCTION_IDS}")
    panels = _check_panels(panels)
    y_arr = np.atleast_1d(_check_unit(y))
    out = np.empty(len(y_arr))
    for i, yi in enumerate(y_arr):
        out[i] = _phi_block(spec, [yi], yi, [(u, v)], panels)[(u, v)][0]
    return out if np.ndim(y) else float(out[0])


def _outer_breakpoints(spec):
    k = np.asarray(spec.knots)
    d = (k[None, :] - k[:, None]).ravel()
    d = d[(d >= 0.0) & (d <= 1.0)]
    return np.unique(np.concatenate([d, [0.0, 1.0]]))


def _integrate_unit(spec, fn, panels):
    """int_0^1 fn(piece, x) dx, Simpson per piece."""
    knots = spec.knots
    total = 0.0
    for j in range(spec.n_pieces):
        a, b = knots[j], knots[j + 1]
        n = _even_panels(panels, b - a)
        s, w = _simpson_nodes(n)
        total += (b - a) * float(fn(j, a + (b - a) * s) @ w)
    return total


def psi_constants(spec, panels=DEFAULT_PANELS):
    """(psi1, psi2, psi3) = (int g'^2, int g^2, int g^3)."""
    panels = _check_panels(panels)
    psi1 = _integrate_unit(spec, lambda j, x: spec.eval_piece(j, x, deriv=True) ** 2, panels)
    psi2 = _integrate_unit(spec, lambda j, x: spec.eval_piece(j, x) ** 2, panels)
    psi3 = _integrate_unit(spec, lambda j, x: spec.eval_piece(j, x) ** 3, panels)
    return psi1, psi2, psi3


@dataclass(frozen=True)
class KernelConstants:
    psi1: float
    psi2: float
    psi3: float
    phi22: float
    phi12: float
    phi11: float
    phi3_plus: float
    phi3_minus: float
    phi3p_plus: float
    phi3p_minus: float
    phi23_plus: float
    phi23_minus: float
    phi23p_plus: float
    phi23p_minus: float
    quad_panels: int
    # unsquared int phi_{g^2,g}, kept for comparison with the squared phi3_minus
    phi3_minus_unsquared: float = float("nan")

    NAMES = (
        "psi1", "psi2", "psi3", "phi22", "phi12", "phi11",
        "phi3_plus", "phi3_minus", "phi3p_plus", "phi3p_minus",
        "phi23_plus", "phi23_minus", "phi23p_plus", "phi23p_minus",
    )

    def as_dict(self):
        d = {k: getattr(self, k) for k in self.NAMES}
        d["phi3_minus_unsquared"] = self.phi3_minus_unsquared
        d["quad_panels"] = self.quad_panels
        return d


def _phi_integrals(spec, panels, inner_panels):
    """Outer Simpson over y of all needed products of phi functions."""
    bps = _outer_breakpoints(spec)
    products = {
        "phi22": (("g", "g"), ("g", "g")),
        "phi12": (("g", "g"), ("dg", "dg")),
        "phi11": (("dg", "dg"), ("dg", "dg")),
        "phi3_plus": (("g", "g2"), ("g", "g2")),
        "phi3_minus": (("g2", "g"), ("g2", "g")),
        "phi3p_plus": (("dg", "g2"), ("dg", "g2")),
        "phi3p_minus": (("g2", "dg"), ("g2", "dg")),
        "phi23_plus": (("g", "g"), ("g", "g2")),
        "phi23_minus": (("g", "g"), ("g2", "g")),
        "phi23p_plus": (("dg", "g"), ("dg", "g2")),
        "phi23p_minus": (("g", "dg"), ("g2", "dg")),
        "phi3_minus_unsquared": (("g2", "g"), None),
    }
    acc = dict.fromkeys(products, 0.0)
    for ya, yb in zip(bps[:-1], bps[1:]):
        n = _even_panels(panels, yb - ya)
        s, w = _simpson_nodes(n)
        ys = ya + (yb - ya) * s
        phis = _phi_block(spec, ys, 0.5 * (ya + yb), _PAIRS, inner_panels)
        for name, (p, q) in products.items():
            f = phis[p] if q is None else phis[p] * phis[q]
            acc[name] += (yb - ya) * float(f @ w)
    return acc


@lru_cache(maxsize=32)
def kernel_constants(spec, panels=DEFAULT_PANELS, inner_panels=None):
    """All psi and Phi constants of ``spec`` by nested composite Simpson.

    Parameters
    ----------
    spec : KernelSpec
    panels : int
        Outer panel count over [0, 1] (even, >= 64). Panels are distributed
        over the knot-free pieces proportionally to their length.
    inner_panels : int, optional
        Panel density of the inner phi integrals; defaults to ``panels``.

    Raises
    ------
    KernelValidityError
        If ``|psi3|`` is below ``PSI3_THRESHOLD``.
    """
    panels = _check_panels(panels, minimum=64)
    inner_panels = panels if inner_panels is None else _check_panels(inner_panels, minimum=64)
    psi1, psi2, psi3 = psi_constants(spec, panels)
    if abs(psi3) <= PSI3_THRESHOLD:
        raise KernelValidityError(f"int g^3 = {psi3:.3e} is numerically zero")
    acc = _phi_integrals(spec, panels, inner_panels)
    return KernelConstants(
        psi1=psi1, psi2=psi2, psi3=psi3, quad_panels=panels,
        **{k: float(v) for k, v in acc.items()},
    )


@dataclass(frozen=True)
class KernelReport:
    boundary_zeros: bool
    piecewise_c1: bool
    psi3_nonzero: bool
    psi3: float

    @property
    def valid(self):
        return self.boundary_zeros and self.piecewise_c1 and self.psi3_nonzero


def validate_kernel(spec, panels=DEFAULT_PANELS):
    """Check g(0) = g(1) = 0, continuity across knots and int g^3 != 0."""
    tol = 1e-14
    g0 = spec.eval_piece(0, np.array(0.0))
    g1 = spec.eval_piece(spec.n_pieces - 1, np.array(1.0))
    boundary = bool(abs(g0) <= tol and abs(g1) <= tol)
    # polynomial/callable pieces are C^1 inside; g itself must not jump at a knot
    cont = True
    for j in range(1, spec.n_pieces):
        k = spec.knots[j]
        left = spec.eval_piece(j - 1, np.array(k))
        right = spec.eval_piece(j, np.array(k))
        derivs = spec.eval_piece(j - 1, np.array(k), True), spec.eval_piece(j, np.array(k), True)
        if not (np.isfinite(left) and np.isfinite(right) and np.all(np.isfinite(derivs))):
            cont = False
        elif abs(left - right) > 1e-12 * max(1.0, abs(left)):
            cont = False
    psi3 = psi_constants(spec, _check_panels(panels))[2]
    return KernelReport(boundary, cont, bool(abs(psi3) > PSI3_THRESHOLD), psi3)
