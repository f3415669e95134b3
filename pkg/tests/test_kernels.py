import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from realskew.errors import DomainError, KernelValidityError
from realskew.kernels import (
    callable_kernel, eval_kernel, eval_kernel_deriv, kernel_by_name, kernel_constants,
    min_kernel, phi_uv, piecewise_polynomial, psi_constants, validate_kernel,
)

x, y = sp.symbols("x y", real=True)


# --- independent symbolic oracle for g(x) = min(x, 1 - x) -------------------
# pieces: L(x) = x on [0, 1/2], R(x) = 1 - x on [1/2, 1]

def _min_factor(fid, side, arg):
    g = arg if side == "L" else 1 - arg
    if fid == "g":
        return g
    if fid == "g2":
        return g ** 2
    return sp.Integer(1) if side == "L" else sp.Integer(-1)


def sym_phi(u, v):
    """(phi on y in [0,1/2], phi on y in [1/2,1]) for the min kernel, exact."""
    half = sp.Rational(1, 2)
    # y < 1/2: y < 1/2 < y + 1/2 < 1
    lo = (
        sp.integrate(_min_factor(u, "L", x - y) * _min_factor(v, "L", x), (x, y, half))
        + sp.integrate(_min_factor(u, "L", x - y) * _min_factor(v, "R", x), (x, half, y + half))
        + sp.integrate(_min_factor(u, "R", x - y) * _min_factor(v, "R", x), (x, y + half, 1))
    )
    hi = sp.integrate(_min_factor(u, "L", x - y) * _min_factor(v, "R", x), (x, y, 1))
    return sp.expand(lo), sp.expand(hi)


def sym_int(f_pair):
    lo, hi = f_pair
    half = sp.Rational(1, 2)
    return sp.integrate(lo, (y, 0, half)) + sp.integrate(hi, (y, half, 1))


def _prod(p, q):
    return (p[0] * q[0], p[1] * q[1])


@pytest.fixture(scope="module")
def sym_constants():
    P = {pair: sym_phi(*pair) for pair in [("g", "g"), ("dg", "dg"), ("g", "g2"), ("g2", "g"),
                                           ("dg", "g2"), ("g2", "dg"), ("dg", "g"), ("g", "dg")]}
    half = sp.Rational(1, 2)
    return {
        "psi1": sp.Integer(1),
        "psi2": sp.integrate(x ** 2, (x, 0, half)) * 2,
        "psi3": sp.integrate(x ** 3, (x, 0, half)) * 2,
        "phi22": sym_int(_prod(P["g", "g"], P["g", "g"])),
        "phi12": sym_int(_prod(P["g", "g"], P["dg", "dg"])),
        "phi11": sym_int(_prod(P["dg", "dg"], P["dg", "dg"])),
        "phi3_plus": sym_int(_prod(P["g", "g2"], P["g", "g2"])),
        "phi3_minus": sym_int(_prod(P["g2", "g"], P["g2", "g"])),
        "phi3p_plus": sym_int(_prod(P["dg", "g2"], P["dg", "g2"])),
        "phi3p_minus": sym_int(_prod(P["g2", "dg"], P["g2", "dg"])),
        "phi23_plus": sym_int(_prod(P["g", "g"], P["g", "g2"])),
        "phi23_minus": sym_int(_prod(P["g", "g"], P["g2", "g"])),
        "phi23p_plus": sym_int(_prod(P["dg", "g"], P["dg", "g2"])),
        "phi23p_minus": sym_int(_prod(P["g", "dg"], P["g2", "dg"])),
        "phi3_minus_unsquared": sym_int(P["g2", "g"]),
        "_phi": P,
    }


# --- evaluation ---------------------------------------------------------------

def test_min_kernel_values():
    g = min_kernel()
    assert eval_kernel(g, 0.5) == 0.5
    assert eval_kernel(g, 0.0) == 0.0 and eval_kernel(g, 1.0) == 0.0
    assert eval_kernel_deriv(g, 0.25) == 1.0
    assert eval_kernel_deriv(g, 0.75) == -1.0
    # right-limit convention at the knot
    assert eval_kernel_deriv(g, 0.5) == -1.0


@pytest.mark.parametrize("bad", [-1e-9, 1.0 + 1e-9, float("nan")])
def test_eval_outside_unit_interval(bad):
    with pytest.raises(DomainError):
        eval_kernel(min_kernel(), bad)
    with pytest.raises(DomainError):
        eval_kernel_deriv(min_kernel(), [0.2, bad])


def test_vectorized_eval_matches_scalar():
    g = min_kernel()
    xs = np.linspace(0, 1, 101)
    assert np.array_equal(eval_kernel(g, xs), np.minimum(xs, 1 - xs))


# --- phi ------------------------------------------------------------------------

def test_phi_endpoints():
    g = min_kernel()
    assert phi_uv(g, "g", "g", 1.0) == 0.0
    psi1, psi2, psi3 = psi_constants(g)
    assert abs(phi_uv(g, "g", "g", 0.0) - psi2) < 1e-10
    assert abs(phi_uv(g, "dg", "dg", 0.0) - psi1) < 1e-10
    assert abs(phi_uv(g, "g", "g2", 0.0) - psi3) < 1e-10


@pytest.mark.parametrize("pair", [("g", "g"), ("dg", "dg"), ("g", "g2"), ("g2", "dg"), ("dg", "g")])
@pytest.mark.parametrize("yv", [0.1, 0.5, 0.73])
def test_phi_matches_symbolic(sym_constants, pair, yv):
    lo, hi = sym_constants["_phi"][pair]
    exact = float((lo if yv < 0.5 else hi).subs(y, yv))
    assert abs(phi_uv(min_kernel(), *pair, yv) - exact) < 1e-10


def test_phi_dg_dg_linear_on_first_half():
    # phi_{g',g'}(y) = 1 - 3y on [0, 1/2] for the min kernel
    ys = np.array([0.0, 0.1, 0.3, 0.45])
    assert np.allclose(phi_uv(min_kernel(), "dg", "dg", ys), 1 - 3 * ys, atol=1e-12)


def test_phi_rejects_bad_ids():
    with pytest.raises(DomainError):
        phi_uv(min_kernel(), "h", "g", 0.2)
    with pytest.raises(DomainError):
        phi_uv(min_kernel(), "g", "g", 0.2, panels=7)


# --- constants ------------------------------------------------------------------

def test_constants_match_symbolic(sym_constants):
    c = kernel_constants(min_kernel())
    d = c.as_dict()
    for name, val in sym_constants.items():
        if name.startswith("_"):
            continue
        assert abs(d[name] - float(val)) < 1e-10 * max(1.0, abs(float(val))), name


def test_known_closed_forms(sym_constants):
    assert sym_constants["phi22"] == sp.Rational(151, 80640)
    assert sym_constants["phi12"] == sp.Rational(1, 96)
    assert sym_constants["phi11"] == sp.Rational(1, 6)
    c = kernel_constants(min_kernel())
    assert abs(c.psi2 - 1 / 12) < 1e-14 and abs(c.psi3 - 1 / 32) < 1e-14


def test_quadratic_kernel_psi():
    c = kernel_constants(kernel_by_name("quadratic"))
    assert abs(c.psi1 - 1 / 3) < 1e-12
    assert abs(c.psi2 - 1 / 30) < 1e-12
    assert abs(c.psi3 - 1 / 140) < 1e-12
    # symmetric kernel: plus and minus variants coincide
    assert abs(c.phi3_plus - c.phi3_minus) < 1e-12


def test_panel_doubling_stability():
    a = kernel_constants(min_kernel(), 1024).as_dict()
    b = kernel_constants(min_kernel(), 2048).as_dict()
    for k in a:
        if k != "quad_panels":
            assert abs(a[k] - b[k]) <= 1e-9 * abs(b[k]), k


def test_constants_panel_validation():
    with pytest.raises(DomainError):
        kernel_constants(min_kernel(), 32)
    with pytest.raises(DomainError):
        kernel_constants(min_kernel(), 101)


def test_squares_nonnegative():
    c = kernel_constants(kernel_by_name("quadratic"), 256)
    for name in ("phi22", "phi11", "phi3_plus", "phi3_minus", "phi3p_plus", "phi3p_minus"):
        assert getattr(c, name) >= 0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 10.0))
def test_homogeneity(cval):
    base = kernel_constants(min_kernel(), 128)
    sc = kernel_constants(min_kernel().scaled(cval), 128)
    for name, p in [("psi1", 2), ("psi2", 2), ("psi3", 3), ("phi22", 4), ("phi12", 4), ("phi11", 4),
                    ("phi3_plus", 6), ("phi23_plus", 5)]:
        assert math.isclose(getattr(sc, name), getattr(base, name) * cval ** p, rel_tol=1e-12), name


@settings(max_examples=20, deadline=None)
@given(st.floats(0.15, 0.85))
def test_asymmetric_tent_phi_at_zero(peak):
    # tent with apex at ``peak``: phi_{u,v}(0) reduces to psi integrals
    g = piecewise_polynomial((0.0, peak, 1.0), ((0.0, 1 / peak), (1 / (1 - peak), -1 / (1 - peak))))
    psi1, psi2, psi3 = psi_constants(g, 512)
    assert math.isclose(psi2, 1 / 3, rel_tol=1e-12)
    assert math.isclose(psi1, 1 / peak + 1 / (1 - peak), rel_tol=1e-12)
    assert abs(phi_uv(g, "g", "g", 0.0, 512) - psi2) < 1e-10
    assert abs(phi_uv(g, "g", "g2", 0.0, 512) - psi3) < 1e-10
    assert abs(phi_uv(g, "dg", "dg", 0.0, 512) - psi1) < 1e-10


# --- validation -----------------------------------------------------------------

def test_validate_min_kernel():
    assert validate_kernel(min_kernel()).valid


def test_validate_sine_fails_psi3():
    g = callable_kernel(lambda t: np.sin(2 * np.pi * t), lambda t: 2 * np.pi * np.cos(2 * np.pi * t),
                        knots=(0.0, 0.5, 1.0), name="sin")
    rep = validate_kernel(g)
    assert rep.boundary_zeros and not rep.psi3_nonzero and abs(rep.psi3) < 1e-12
    with pytest.raises(KernelValidityError):
        kernel_constants(g, 64)


def test_validate_identity_fails_boundary():
    rep = validate_kernel(piecewise_polynomial((0.0, 1.0), ((0.0, 1.0),), name="id"))
    assert not rep.boundary_zeros and not rep.valid


def test_validate_discontinuous_fails_c1():
    g = piecewise_polynomial((0.0, 0.5, 1.0), ((0.0, 1.0), (0.0, 0.0)))
    assert not validate_kernel(g).piecewise_c1


def test_kernel_spec_rejects_bad_knots():
    with pytest.raises(KernelValidityError):
        piecewise_polynomial((0.0, 0.7, 0.5, 1.0), ((0,), (0,), (0,)))
    with pytest.raises(KernelValidityError):
        piecewise_polynomial((0.0, 1.0), ((0,), (1,)))
