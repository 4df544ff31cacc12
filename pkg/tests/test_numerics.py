import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fbrnet.numerics import (
    ConvergenceError,
    DomainError,
    IntegrationSpec,
    composite_gauss_legendre,
    gauss_2f1_nonpos,
    gauss_2f1_series,
    gauss_legendre,
    gil_pelaez_cdf,
    hermite2d_rule,
    integrate,
    integrate_hermite2d,
    q_function,
    q_inverse,
    reg_inc_beta,
)

# ---------------------------------------------------------------------------
#  Q function
# ---------------------------------------------------------------------------

# mpmath erfc(x / sqrt 2) / 2 at 30 digits
Q_ORACLE = [(-1.0, 0.84134474606854295), (0.5, 0.3085375387259869),
            (3.0, 0.0013498980316300945), (10.0, 7.6198530241605261e-24)]


@pytest.mark.parametrize("x, expected", Q_ORACLE)
def test_q_function_matches_mpmath(x, expected):
    assert q_function(x) == pytest.approx(expected, rel=1e-13)


@given(st.floats(1e-300, 0.5 - 1e-12))
def test_q_inverse_roundtrip(p):
    assert q_function(q_inverse(p)) == pytest.approx(p, rel=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_q_inverse_domain(p):
    with pytest.raises(DomainError):
        q_inverse(p)


def test_q_function_vectorised():
    x = np.array([-1.0, 0.5, 3.0])
    assert np.allclose(q_function(x), [v for _, v in Q_ORACLE[:3]], rtol=1e-13)


# ---------------------------------------------------------------------------
#  Gauss hypergeometric function
# ---------------------------------------------------------------------------

# mpmath.hyp2f1 at 30 digits
F21_ORACLE = [
    (1.0, 0.5, 1.5, -0.3, 0.91486648924557189),
    (1.0, 0.5, 1.5, -50.0, 0.20227590274856034),
    (1.0, 1.0 / 3.0, 4.0 / 3.0, -7.5, 0.5543659718671355),
    (2.5, 0.7, 3.1, -1e4, 0.0019643152124913782),
]


@pytest.mark.parametrize("a, b, c, z, expected", F21_ORACLE)
def test_2f1_matches_mpmath(a, b, c, z, expected):
    assert gauss_2f1_nonpos(a, b, c, z) == pytest.approx(expected, rel=1e-12)


def test_2f1_complex_argument_matches_mpmath():
    val = gauss_2f1_nonpos(1.0, 0.5, 1.5, -2.0 + 3.0j)
    assert val == pytest.approx(0.56923906291357125 + 0.18198149962930429j, rel=1e-12)


def test_2f1_zero_argument_is_one():
    assert gauss_2f1_nonpos(1.0, 0.5, 1.5, 0.0) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(-0.95, 0.0), st.floats(0.1, 0.9))
@settings(max_examples=50)
def test_2f1_agrees_with_series_inside_unit_disc(z, b):
    assert gauss_2f1_nonpos(1.0, b, b + 1.0, z) == pytest.approx(gauss_2f1_series(1.0, b, b + 1.0, z), rel=1e-11)


def test_2f1_arctan_identity():
    # 2F1(1, 1/2; 3/2; -x^2) = atan(x)/x
    x = np.geomspace(1e-3, 1e3, 40)
    assert np.allclose(gauss_2f1_nonpos(1.0, 0.5, 1.5, -x * x), np.arctan(x) / x, rtol=1e-12)


@pytest.mark.parametrize("z", [0.5, np.inf, np.nan])
def test_2f1_domain(z):
    with pytest.raises(DomainError):
        gauss_2f1_nonpos(1.0, 0.5, 1.5, z)


def test_2f1_parameter_domain():
    with pytest.raises(DomainError):
        gauss_2f1_nonpos(1.0, 1.5, 1.0, -1.0)


# ---------------------------------------------------------------------------
#  Incomplete beta, quadrature
# ---------------------------------------------------------------------------

def test_reg_inc_beta_against_beta_cdf():
    z = np.linspace(0, 1, 11)
    assert np.allclose(reg_inc_beta(z, 2.5, 0.7), stats.beta.cdf(z, 2.5, 0.7), atol=1e-14)


def test_reg_inc_beta_domain():
    with pytest.raises(DomainError):
        reg_inc_beta(1.2, 1.0, 1.0)
    with pytest.raises(DomainError):
        reg_inc_beta(0.5, 0.0, 1.0)


def test_gauss_legendre_on_unit_interval():
    x, w = gauss_legendre(8)
    assert np.all((x > 0) & (x < 1))
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.dot(w, x ** 15) == pytest.approx(1 / 16, rel=1e-14)


def test_integrate_semi_infinite():
    quad = IntegrationSpec.semi_infinite(0.0, rel_tol=1e-12, abs_tol=1e-14)
    assert integrate(lambda t: math.exp(-t) * t, quad) == pytest.approx(1.0, rel=1e-11)


def test_integrate_reports_failure():
    quad = IntegrationSpec.finite(0.0, 1.0, rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=2)
    with pytest.raises(ConvergenceError) as info:
        integrate(lambda t: math.sin(1.0 / max(t, 1e-300)), quad)
    assert info.value.estimate is not None


def test_composite_gauss_legendre():
    edges = np.linspace(0, math.pi, 5)
    assert composite_gauss_legendre(np.sin, edges) == pytest.approx(2.0, rel=1e-14)


def test_hermite_rule_moments():
    rule = hermite2d_rule(20)
    # int exp(-|t|^2) t1^2 t2^4 = (sqrt(pi)/2)(3 sqrt(pi)/4)
    val = integrate_hermite2d(lambda t: t[:, 0] ** 2 * t[:, 1] ** 4, rule)
    assert val == pytest.approx(math.pi * 3 / 8, rel=1e-13)
    assert integrate_hermite2d(lambda t: np.ones(len(t)), rule) == pytest.approx(math.pi, rel=1e-13)


def test_hermite_pruning_keeps_accuracy():
    full = hermite2d_rule(60)
    pruned = hermite2d_rule(60, prune=1e-25)
    assert len(pruned.weights) < len(full.weights)
    g = lambda t: np.log1p(np.exp(-3.0 - 2.0 * t[:, 0]))
    assert integrate_hermite2d(g, pruned) == pytest.approx(integrate_hermite2d(g, full), rel=1e-12)


# ---------------------------------------------------------------------------
#  Gil-Pelaez inversion
# ---------------------------------------------------------------------------

def test_gil_pelaez_gamma_law():
    k, theta = 2.5, 0.8
    charfn = lambda t: (1.0 - 1j * theta * t) ** (-k)
    x = np.array([0.3, 1.0, 2.0, 5.0])
    cdf = gil_pelaez_cdf(charfn, x, t_start=1.0 / (k * theta))
    assert np.allclose(cdf, stats.gamma.cdf(x, k, scale=theta), atol=1e-7)


def test_gil_pelaez_normal_law():
    charfn = lambda t: np.exp(1j * 0.5 * t - 0.5 * (2.0 * t) ** 2)
    x = np.linspace(-4, 5, 7)
    assert np.allclose(gil_pelaez_cdf(charfn, x), stats.norm.cdf(x, 0.5, 2.0), atol=1e-7)
