import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from realskew import limitlaw as ll
from realskew.errors import DegenerateDenominatorError, DomainError
from realskew.kernels import kernel_constants, min_kernel
from realskew.simkit import ConstantVol, JumpModel, ModelSpec, NoiseModel, SamplingScheme, simulate_path

C = kernel_constants(min_kernel())
N = 1_000_000


def params(jumps=(), sm=(), sp=(), iq=1.0, qv=None, abs3=1.0, noisy=None):
    jumps = np.asarray(jumps, dtype=float)
    if qv is None:
        qv = iq + float(np.sum(jumps ** 2))
    return ll.LimitLawParams(iq=iq, qv=qv, jump_sizes=jumps, sigma_minus=np.asarray(sm, float),
                             sigma_plus=np.asarray(sp, float), abs_cubic_sigma=abs3,
                             cubic_jump_sum=float(np.sum(jumps ** 3)), noisy=noisy)


def noisy_params(int_s4g=1.0, int_s2a=0.0, int_a2g=0.0, n=0, am=None, ap=None, gm=None, gp=None):
    z = np.zeros(n)
    return ll.NoisyParams(int_s4g, int_s2a, int_a2g,
                          z if am is None else np.asarray(am, float), z if ap is None else np.asarray(ap, float),
                          np.ones(n) if gm is None else np.asarray(gm, float),
                          np.ones(n) if gp is None else np.asarray(gp, float))


# --- oracle targets ---------------------------------------------------------------

def test_oracle_targets():
    p = simulate_path(ModelSpec(vol=ConstantVol(0.0), jumps=JumpModel(fixed=((0.5, 1.0),))), 0.01, seed=0)
    assert ll.oracle_targets(p) == (1.0, 1.0, 1.0)
    p = simulate_path(ModelSpec(vol=ConstantVol(1.0)), 0.01, seed=0)
    assert ll.oracle_targets(p) == (1.0, 0.0, 0.0)
    p = simulate_path(ModelSpec(vol=ConstantVol(0.3), jumps=JumpModel(intensity=3.0, distribution="laplace")),
                      1e-3, seed=4)
    qv = 0.09 + sum(s * s for s in p.jump_sizes)
    c3 = sum(s ** 3 for s in p.jump_sizes)
    q, c, k = ll.oracle_targets(p)
    assert math.isclose(q, qv, rel_tol=1e-13) and math.isclose(c, c3, rel_tol=1e-12, abs_tol=1e-300)
    assert math.isclose(k, c3 / qv ** 1.5, rel_tol=1e-12, abs_tol=1e-300)


def test_oracle_targets_degenerate():
    p = simulate_path(ModelSpec(vol=ConstantVol(0.0)), 0.01, seed=0)
    with pytest.raises(DegenerateDenominatorError):
        ll.oracle_targets(p)


# --- joint (RV, V(g)) limit sampler ------------------------------------------------

def test_no_jumps_joint_limit():
    d = ll.thm2_limit_sample(params(iq=0.5), lambda x: 3 * x ** 2, 200_000, seed=1)
    assert np.all(d[:, 1] == 0.0)
    assert abs(np.var(d[:, 0]) - 1.0) < 0.01


def test_one_jump_constant_sigma():
    p = params([0.8], [0.4], [0.4])
    d = ll.thm2_limit_sample(p, lambda x: 3 * x ** 2, N, seed=2)
    target = 9 * 0.8 ** 4 * 0.16
    assert abs(np.var(d[:, 1]) / target - 1) < 0.01


def test_two_jumps_covariance():
    p = params([0.5, -0.3], [0.2, 0.5], [0.4, 0.1], iq=0.02)
    d = ll.thm2_limit_sample(p, lambda x: 3 * x ** 2, N, seed=3)
    er2 = 0.5 * (p.sigma_minus ** 2 + p.sigma_plus ** 2)
    cov = float(np.sum(3 * p.jump_sizes ** 2 * 2 * p.jump_sizes * er2))
    emp = float(np.cov(d.T)[0, 1])
    se = math.sqrt(np.var(d[:, 0]) * np.var(d[:, 1]) / N)
    assert abs(emp - cov) < 5 * se
    assert abs(np.var(d[:, 1]) / ll.cubic_conditional_variance(p) - 1) < 0.01
    assert abs(np.var(d[:, 0]) / ll.rv_conditional_variance(p) - 1) < 0.01


def test_r_second_moment():
    p = params([1.0], [0.2], [0.6])
    aux = ll.draw_aux(1, N, seed=4)
    r = ll.jump_gaussians(p, aux)[:, 0]
    assert abs(np.mean(r ** 2) / (0.5 * (0.04 + 0.36)) - 1) < 0.01


def test_shared_r_regeneration():
    p = params([0.5, -0.3], [0.2, 0.5], [0.4, 0.1])
    d, aux = ll.thm2_limit_sample(p, lambda x: 3 * x ** 2, 1000, seed=5, return_aux=True)
    again = ll.vbar_limit(p, lambda x: 3 * x ** 2, aux)
    assert np.array_equal(again, d[:, 1])
    assert np.array_equal(ll.rv_limit(p, aux), d[:, 0])


def test_draw_count_validated():
    with pytest.raises(DomainError):
        ll.draw_aux(1, 0, 0)


# --- abs-cubic corollary ------------------------------------------------------------

def test_abs_cubic_no_jumps_constant():
    d = ll.abs_cubic_limit_sample(params(abs3=1.0), 100, seed=0)
    assert np.allclose(d, 2 * math.sqrt(2) / math.sqrt(math.pi), rtol=0, atol=1e-15)
    assert abs(d[0] - 1.5957691) < 1e-7


def test_abs_cubic_sign_antisymmetry():
    a = ll.abs_cubic_limit_sample(params([0.7, -0.2], [0.3, 0.3], [0.3, 0.3], abs3=0.0), 1000, seed=6)
    b = ll.abs_cubic_limit_sample(params([-0.7, 0.2], [0.3, 0.3], [0.3, 0.3], abs3=0.0), 1000, seed=6)
    assert np.allclose(a, -b, rtol=1e-15, atol=0)


def test_abs_cubic_variance():
    d = ll.abs_cubic_limit_sample(params([0.9], [0.3], [0.3]), N, seed=7)
    assert abs(np.var(d) / (9 * 0.9 ** 4 * 0.09) - 1) < 0.01


# --- skewness limit G_T -------------------------------------------------------------

def test_skew_no_jumps_zero():
    d = ll.skew_limit_sample(params(iq=1.0, qv=1.0), 100, seed=0)
    assert np.all(d == 0.0)


def test_skew_one_jump_formula_and_mean():
    sig = 0.3
    p = params([1.0], [sig], [sig], iq=sig ** 4, qv=1.0 + sig ** 2)
    d = ll.skew_limit_sample(p, 200_000, seed=8)
    aux = ll.draw_aux(1, 200_000, seed=8)
    r = ll.jump_gaussians(p, aux)[:, 0]
    qv, iq = p.qv, p.iq
    ref = (qv ** 1.5 * 3 * r - 1.5 * qv ** 0.5 * (math.sqrt(2 * iq) * aux.u0 + 2 * r)) / qv ** 3
    assert np.allclose(d, ref, rtol=1e-12, atol=1e-15)
    assert abs(d.mean()) < 4 * d.std() / math.sqrt(len(d))
    assert abs(np.var(d) / ll.skew_conditional_variance(p) - 1) < 0.02


def test_skew_homogeneity():
    c = 1.7
    base = params([0.5, -0.2], [0.3, 0.2], [0.25, 0.4], iq=0.01, qv=0.4)
    scl = params(c * base.jump_sizes, c * base.sigma_minus, c * base.sigma_plus, iq=c ** 4 * 0.01, qv=c * c * 0.4)
    a = ll.skew_limit_sample(base, 1000, seed=9)
    b = ll.skew_limit_sample(scl, 1000, seed=9)
    # R scales by c, so numerator and denominator both scale by c^6
    assert np.allclose(b, a, rtol=1e-12, atol=1e-15)


def test_skew_zero_qv():
    with pytest.raises(DegenerateDenominatorError):
        ll.skew_limit_sample(params(iq=0.0, qv=0.0), 10, 0)


# --- Gamma ---------------------------------------------------------------------------

def test_gamma_continuous_blocks_zero():
    g = ll.gamma_matrix(params(noisy=noisy_params(1.0, 1e-4, 1e-8)), 1.0, C)
    assert g.gbar11 == g.gbar12 == g.gbar22 == 0.0
    assert np.array_equal(g.matrix, np.diag([g.gamma_c, 0.0]))


def test_gamma_c_values():
    g = ll.gamma_matrix(params(noisy=noisy_params(1.0)), 1.0, C)
    assert math.isclose(g.gamma_c, 4 * C.phi22 / C.psi2 ** 2, rel_tol=1e-15)
    g = ll.gamma_matrix(params(noisy=noisy_params(1.0, 1e-4, 1e-8)), 1.0, C)
    ref = 4 / C.psi2 ** 2 * (C.phi22 + 2 * C.phi12 * 1e-4 + C.phi11 * 1e-8)
    assert math.isclose(g.gamma_c, ref, rel_tol=1e-14)
    # closed form for the min kernel: 4 * 144 * 151 / 80640
    assert abs(4 * 144 * (151 / 80640) - ll.gamma_matrix(params(noisy=noisy_params(1.0)), 1.0, C).gamma_c) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=4),
       st.floats(0.1, 3.0), st.floats(0.2, 5.0))
def test_gamma_psd_and_homogeneity(jumps, theta, c):
    n = len(jumps)
    rng = np.random.default_rng(n)
    sm, sp = rng.uniform(0.1, 0.6, n), rng.uniform(0.1, 0.6, n)
    npar = noisy_params(0.1, 1e-4, 1e-8, n, am=np.full(n, 1e-4), ap=np.full(n, 2e-4),
                        gm=rng.uniform(0.5, 2, n), gp=rng.uniform(0.5, 2, n))
    base = ll.gamma_matrix(params(jumps, sm, sp, noisy=npar), theta, C)
    m = base.matrix
    assert np.array_equal(m, m.T)
    assert base.min_eigenvalue >= -1e-10 * max(1.0, abs(m).max())
    scl = ll.gamma_matrix(params(c * np.asarray(jumps), sm, sp, noisy=npar), theta, C)
    assert math.isclose(scl.gbar11, base.gbar11 * c ** 2, rel_tol=1e-12)
    assert math.isclose(scl.gbar12, base.gbar12 * c ** 3, rel_tol=1e-12, abs_tol=1e-300)
    assert math.isclose(scl.gbar22, base.gbar22 * c ** 4, rel_tol=1e-12)


def test_gamma_phi3_variants():
    npar = noisy_params(0.09, 0.0, 0.0, 1)
    p = params([1.0], [0.3], [0.3], noisy=npar)
    sq = ll.gamma_matrix(p, 1.0, C)
    un = ll.gamma_matrix(p, 1.0, C, phi3_minus="unsquared")
    assert un.gbar22 > sq.gbar22 and sq.gamma_c == un.gamma_c


def test_gamma_requires_positive_g():
    npar = ll.NoisyParams(1.0, 0.0, 0.0, np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), g_min=0.0)
    with pytest.raises(DomainError):
        ll.gamma_matrix(params(noisy=npar), 1.0, C)
    with pytest.raises(DomainError):
        ll.gamma_matrix(params(noisy=noisy_params()), 0.0, C)
    with pytest.raises(DomainError):
        ll.gamma_matrix(params(), 1.0, C)


def test_params_from_path_noise():
    m = ModelSpec(vol=ConstantVol(0.5), jumps=JumpModel(fixed=((0.3, 0.2),)))
    p = simulate_path(m, 1e-3, seed=0)
    lp = ll.params_from_path(p, NoiseModel(alpha=1e-4), SamplingScheme())
    assert math.isclose(lp.noisy.int_s4g, 0.0625, rel_tol=1e-12)
    assert math.isclose(lp.noisy.int_s2a, 0.25e-4, rel_tol=1e-12)
    assert math.isclose(lp.noisy.int_a2g, 1e-8, rel_tol=1e-12)
    assert np.array_equal(lp.noisy.alpha_minus, [1e-4])


# --- delta method ---------------------------------------------------------------------

def test_noisy_skew_variance_examples():
    # d = (-1.5, 1); the all-ones matrix gives 2.25 - 3 + 1, the identity 2.25 + 1
    ones = ll.GammaMatrix(gamma_c=1.0, gbar11=0.0, gbar12=1.0, gbar22=1.0)
    assert ll.noisy_skew_variance(ones, 1.0, 1.0).variance == 0.25
    eye = ll.GammaMatrix(gamma_c=1.0, gbar11=0.0, gbar12=0.0, gbar22=1.0)
    assert ll.noisy_skew_variance(eye, 1.0, 1.0).variance == 3.25
    cont = ll.gamma_matrix(params(noisy=noisy_params(1.0, 1e-4, 1e-8)), 1.0, C)
    sv = ll.noisy_skew_variance(cont, 1.0, 0.0)
    assert sv.variance == 0.0 and sv.degenerate
    with pytest.raises(DegenerateDenominatorError):
        ll.noisy_skew_variance(cont, 0.0, 0.0)


def test_noisy_skew_variance_sampling_oracle():
    npar = noisy_params(0.0081, 0.09 * 1e-4, 1e-8, 1, am=[1e-4], ap=[1e-4])
    p = params([1.0], [0.3], [0.3], iq=0.0081, qv=1.09, noisy=npar)
    g = ll.gamma_matrix(p, 1.0, C)
    z = ll.noisy_limit_sample(g, N, seed=10)
    d1 = -1.5 * p.cubic_jump_sum / p.qv ** 2.5
    d2 = p.qv ** -1.5
    mapped = d1 * z[:, 0] + d2 * z[:, 1]
    sv = ll.noisy_skew_variance(g, p.qv, p.cubic_jump_sum)
    assert abs(np.var(mapped) / sv.variance - 1) < 0.01
    assert abs(np.cov(z.T)[0, 1] / g.gbar12 - 1) < 0.02


# --- counterexample -------------------------------------------------------------------

def test_counterexample_alternates():
    a = ll.find_nondegenerate_a()
    assert a == 0.5
    rows = ll.counterexample_sequence(a, 20)
    c = np.array([r.c_n for r in rows])
    assert np.max(np.abs(c[1:] + c[:-1])) < 1e-9
    assert np.max(np.abs(np.abs(c) - abs(c[0]))) < 1e-9
    _, B = ll.counterexample_coefficients(a)
    assert np.allclose(c, B * (-1.0) ** np.arange(1, 21), atol=1e-9, rtol=0)


def test_counterexample_identity_random_deltas():
    rng = np.random.default_rng(11)
    for a in (0.5, 1.0):
        A, B = ll.counterexample_coefficients(a)
        for delta in 10.0 ** rng.uniform(-8, -1, 5):
            direct = ll.counterexample_cn(a, delta)
            ident = math.sin(a * math.log(delta)) * A + math.cos(a * math.log(delta)) * B
            assert abs(direct - ident) < 1e-10


def test_counterexample_quadrature_vs_mpmath():
    import mpmath as mp

    a = 0.5
    f = lambda t: t ** 3 * mp.sin(2 * a * mp.log(t)) * mp.exp(-t * t / 2) / mp.sqrt(2 * mp.pi)
    ref = float(mp.quad(f, [0, 1e-4, 0.1, 1, 4, 12, mp.inf]))
    assert abs(ll.counterexample_coefficients(a)[1] - ref) < 1e-10


def test_counterexample_errors():
    with pytest.raises(DomainError):
        ll.counterexample_sequence(0.0, 5)
    with pytest.raises(DomainError):
        ll.counterexample_sequence(1.0, 0)
