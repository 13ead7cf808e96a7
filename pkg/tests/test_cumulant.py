import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad, tplquad

from effgibbs.bohr import bohr_decompose
from effgibbs.cumulant import (
    compositions,
    cumulant_combine,
    effective_hamiltonian_perturbative,
    f,
    f1,
    g_k,
    h_n,
    moment_explicit,
    moment_quadrature,
    moment_series,
    second_order_beta_derivative,
    second_order_term,
)
from effgibbs.exact import effective_hamiltonian_exact
from effgibbs.operators import maxabs, random_hermitian
from effgibbs.pinching import spectral_decompose
from oracles import g3_printed, simplex_integral

mpmath.mp.dps = 40


def mp_f(x):
    x = mpmath.mpf(x)
    if x == 0:
        return mpmath.mpf(1)
    return 2 * (x + mpmath.exp(-x) - 1) / x**2


def mp_f1(x):
    return mpmath.diff(lambda t: t * mp_f(t), mpmath.mpf(x))


@pytest.mark.parametrize("x", [0.0, 1e-9, -1e-6, 0.3, -0.49, 0.5, 0.51, 2.0, -3.0, 25.0, -30.0, 300.0])
def test_f_and_f1_against_high_precision(x):
    assert abs(float(f(x)) - float(mp_f(x))) <= 1e-14 * float(mp_f(x))
    ref = float(mp_f1(x))
    assert abs(float(f1(x)) - ref) <= 1e-13 * max(1.0, abs(ref))


def test_f_positive_and_vectorized():
    xs = np.linspace(-40, 40, 2001)
    assert np.all(f(xs) > 0) and np.all(f1(xs) > 0)
    assert f(xs).shape == xs.shape


@pytest.mark.parametrize("beta,ws", [(1.3, [0.7, -1.9]), (0.6, [2.0, 0.5]), (2.0, [-0.4, 1e-8])])
def test_h3_against_tplquad(beta, ws):
    ws3 = ws + [0.8]

    def integrand(b3, b2, b1):
        return math.exp(-(b1 * ws3[0] + b2 * ws3[1] + b3 * ws3[2]))

    ref, _ = tplquad(integrand, 0, beta, lambda b1: 0, lambda b1: b1, lambda b1, b2: 0, lambda b1, b2: b2, epsabs=1e-13, epsrel=1e-12)
    assert abs(h_n(beta, ws3) - ref) <= 1e-10 * abs(ref)


@pytest.mark.parametrize("beta,w", [(0.9, 1.4), (2.5, -0.7), (1.0, 0.01)])
def test_h2_against_dblquad(beta, w):
    ref, _ = dblquad(lambda b2, b1: math.exp(-(b1 * w - b2 * w)), 0, beta, lambda b1: 0, lambda b1: b1, epsabs=1e-14, epsrel=1e-13)
    assert abs(h_n(beta, [w, -w]) - ref) <= 1e-11 * abs(ref)
    assert abs(g_k(beta, [w]) - ref) <= 1e-11 * abs(ref)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.05, 5.0),
    st.floats(-3.0, 3.0),
    st.floats(-3.0, 3.0),
)
def test_g3_against_simplex_quadrature(beta, w1, w2):
    ref = simplex_integral(beta, [w1, w2])
    assert abs(g_k(beta, [w1, w2]) - ref) <= 1e-9 * max(1.0, abs(ref))


@pytest.mark.parametrize("beta,w1,w2", [(1.0, 0.7, 1.1), (2.0, -0.5, 1.6), (0.4, 2.0, -3.5)])
def test_g3_matches_printed_form_for_generic_frequencies(beta, w1, w2):
    assert abs(g_k(beta, [w1, w2]) - g3_printed(beta, w1, w2)) <= 1e-12 * max(1.0, abs(g3_printed(beta, w1, w2)))


@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9, 0.0])
def test_confluent_limits_are_continuous(eps):
    beta = 1.7
    near = g_k(beta, [1.0, eps])
    exact = simplex_integral(beta, [1.0, 0.0])
    assert abs(near - exact) <= 0.5 * eps + 1e-12
    assert abs(g_k(beta, [eps]) - beta**2 / 2 * (1 - beta * eps / 3)) <= beta**4 * eps**2


def test_g4_against_simplex_quadrature():
    beta, ws = 1.2, [0.6, -1.3, 0.9]
    ref = simplex_integral(beta, ws, n=24)
    assert abs(g_k(beta, ws) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_compositions():
    assert list(compositions(3)) == [(1, 1, 1), (1, 2), (2, 1), (3,)]
    assert sum(1 for _ in compositions(6)) == 2**5


def test_cumulant_combine_matches_matrix_log():
    rng = np.random.default_rng(0)
    ms = [0.3 * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))) for _ in range(4)]
    lam = 1e-2
    from scipy.linalg import logm

    series = np.eye(3) + sum(lam ** (k + 1) * m for k, m in enumerate(ms))
    cs = cumulant_combine(ms, 4)
    approx = sum(lam ** (k + 1) * c for k, c in enumerate(cs))
    assert maxabs(logm(series) - approx) < 1e-9


def test_cumulant_combine_rejects_missing_moments():
    with pytest.raises(ValueError):
        cumulant_combine([np.eye(2)], 2)


def random_model(seed, dim=4):
    rng = np.random.default_rng(seed)
    h0 = random_hermitian(dim, int(rng.integers(2**32)))
    hi = random_hermitian(dim, int(rng.integers(2**32)))
    sd = spectral_decompose(h0)
    return h0, hi, sd, bohr_decompose(hi, sd)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_moment_explicit_vs_quadrature(k):
    h0, hi, sd, bd = random_model(5)
    a = moment_explicit(k, 1.1, bd)
    q = moment_quadrature(k, 1.1, h0, hi, sd, n_grid=20)
    assert maxabs(a - q) <= 1e-8 * max(1.0, maxabs(q))


def test_moment_explicit_degenerate_h0():
    h0 = np.diag([0.0, 1.0, 1.0, 2.0])
    hi = random_hermitian(4, 3)
    sd = spectral_decompose(h0)
    bd = bohr_decompose(hi, sd)
    for k in (2, 3):
        q = moment_quadrature(k, 0.8, h0, hi, sd, n_grid=20)
        assert maxabs(moment_explicit(k, 0.8, bd) - q) <= 1e-8 * max(1.0, maxabs(q))


def test_low_order_structure():
    h0, hi, sd, bd = random_model(7)
    beta = 1.4
    ms = moment_series(beta, bd, 3)
    m1, m2, m3 = ms.moments
    assert maxabs(m1 + beta * bd.d0) == 0
    c1, c2, c3 = cumulant_combine(ms, 3)
    assert maxabs(c2 - (m2 - 0.5 * m1 @ m1)) < 1e-12
    d0 = bd.d0
    second = sum(g_k(beta, [w]) * d @ d.conj().T for w, d in bd.nonzero())
    assert maxabs(c2 - second) < 1e-10
    # third cumulant in terms of the eigenoperators, with coefficients from the simplex oracle
    third = np.zeros_like(d0)
    for w1, d1 in bd:
        for w2, d2 in bd:
            d3 = bd.get(-(w1 + w2))
            if d3 is not None:
                third -= simplex_integral(beta, [w1, w2]) * d1 @ d2 @ d3
    pair = sum(g_k(beta, [w]) * d @ d.conj().T for w, d in bd)
    third += 0.5 * beta * (pair @ d0 + d0 @ pair) - beta**3 / 3 * d0 @ d0 @ d0
    assert maxabs(c3 - third) <= 1e-9 * max(1.0, maxabs(third))


def test_second_order_term_and_derivative():
    h0, hi, sd, bd = random_model(9)
    beta = 0.9
    exp = effective_hamiltonian_perturbative(h0, hi, 0.1, beta, 2, sd=sd, bd=bd, check=True)
    assert maxabs(exp.terms[1] - bd.d0) < 1e-12
    assert maxabs(exp.terms[2] - second_order_term(bd, beta)) < 1e-10
    h = 1e-4
    fd = (second_order_term(bd, beta + h) - second_order_term(bd, beta - h)) / (2 * h)
    ref = second_order_beta_derivative(bd, beta)
    assert maxabs(fd - ref) < 1e-7 * maxabs(ref)


@pytest.mark.parametrize("seed", range(5))
def test_second_order_term_is_negative(seed):
    h0, hi, sd, bd = random_model(seed, dim=5)
    for beta in (0.2, 1.0, 10.0):
        # entries grow like exp(beta |w|); negativity is checked relative to that scale
        h2 = second_order_term(bd, beta)
        dh2 = second_order_beta_derivative(bd, beta)
        assert np.linalg.eigvalsh(h2).max() <= 1e-12 * max(1.0, maxabs(h2))
        assert np.linalg.eigvalsh(dh2).max() <= 1e-12 * max(1.0, maxabs(dh2))


def test_expansion_converges_to_exact():
    h0, hi, sd, bd = random_model(2)
    beta = 1.0
    errs = []
    for lam in (0.02, 0.01):
        exact = effective_hamiltonian_exact(h0 + lam * hi, sd, beta)
        exp = effective_hamiltonian_perturbative(h0, hi, lam, beta, 4, sd=sd, bd=bd)
        errs.append([np.linalg.norm(exact - exp.truncated(n), 2) for n in range(5)])
    errs = np.array(errs)
    for n in (1, 2, 3):
        ratio = errs[0, n] / errs[1, n]
        assert 2 ** (n + 1) / 1.5 < ratio < 2 ** (n + 1) * 1.5, (n, ratio)


def test_expansion_validation():
    h0, hi, sd, bd = random_model(1)
    with pytest.raises(ValueError):
        effective_hamiltonian_perturbative(h0, hi, 0.1, 1.0, 5)
    with pytest.raises(ValueError):
        effective_hamiltonian_perturbative(h0, hi, 0.1, -1.0, 2)
    with pytest.raises(ValueError):
        moment_quadrature(5, 1.0, h0, hi, sd)
