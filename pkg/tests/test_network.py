import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from fbrnet.network import (
    ConstellationMoments,
    LinkGeometry,
    NetworkConfig,
    TruncationError,
    b_moments,
    gamma_fit,
    interference_cdf,
    interference_exponent,
    laplace_b_gaussian,
    laplace_b_series,
    serving_distance,
    sinr_cdf_gamma,
    sinr_pdf_gamma,
)
from fbrnet.numerics import DomainError
from fbrnet.simulator import SimPlan, sample_links


@pytest.fixture
def cfg():
    return NetworkConfig.from_snr_db(0.0, 1.0)


# ---------------------------------------------------------------------------
#  Configuration and units
# ---------------------------------------------------------------------------

def test_snr_reference_is_one_km(cfg):
    assert cfg.noise == pytest.approx(1e-12)
    assert cfg.snr_db() == pytest.approx(0.0)
    # average SNR at 250 m is 40 log10(4) dB above the 1 km value
    assert 10 * math.log10(cfg.link(250.0).avg_snr) == pytest.approx(40 * math.log10(4.0))


def test_density_in_per_square_metre(cfg):
    assert cfg.density == pytest.approx(1e-6)
    assert cfg.lambda_per_km2 == pytest.approx(1.0)


def test_noise_free_link_has_infinite_snr():
    cfg = NetworkConfig(1e-6)
    assert math.isinf(cfg.link(100.0).avg_snr)
    assert math.isinf(cfg.snr_db())


@pytest.mark.parametrize("kw", [dict(density=0.0), dict(density=1e-6, eta=2.0),
                                dict(density=1e-6, power=-1.0), dict(density=1e-6, noise=-1.0)])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        NetworkConfig(**kw)


def test_geometry_validation(cfg):
    with pytest.raises(DomainError):
        LinkGeometry.from_config(cfg, 0.0)


# ---------------------------------------------------------------------------
#  Laplace transform
# ---------------------------------------------------------------------------

def test_exponent_eta4_closed_form():
    x = np.geomspace(1e-4, 1e6, 100)
    assert np.allclose(interference_exponent(x, 4.0), np.sqrt(x) * np.arctan(np.sqrt(x)), rtol=1e-10)


# direct integral int_1^inf 2 t x t^-3 / (1 + x t^-3) dt by mpmath at 30 digits
H3_ORACLE = [(0.1, 0.19526713743792607), (1.0, 1.6712976965294421),
             (10.0, 10.262883117519118), (1000.0, 240.84031498141072)]


@pytest.mark.parametrize("x, expected", H3_ORACLE)
def test_exponent_eta3_matches_direct_integral(x, expected):
    assert interference_exponent(x, 3.0) == pytest.approx(expected, rel=1e-11)


def test_exponent_small_argument_slope():
    # h(x) ~ 2x/(eta-2) as x -> 0, matching E[B]
    for eta in (3.0, 4.0, 5.5):
        assert interference_exponent(1e-9, eta) == pytest.approx(2e-9 / (eta - 2.0), rel=1e-6)


def test_laplace_is_completely_monotone(cfg):
    u = np.geomspace(1e6, 1e14, 50)
    L = laplace_b_gaussian(u, cfg, 200.0)
    assert L[0] < 1 and np.all(np.diff(L) < 0) and np.all(L > 0)
    assert laplace_b_gaussian(0.0, cfg, 200.0) == 1.0


def test_laplace_derivative_gives_mean(cfg):
    r0 = 200.0
    mean = b_moments(cfg, r0)[0]
    u = 1e-4 / mean
    slope = -math.log(laplace_b_gaussian(u, cfg, r0)) / u
    assert slope == pytest.approx(mean, rel=1e-4)


def test_laplace_against_simulation(cfg):
    # E exp(-u B) from simulated interference at r0 = 250 m
    r0 = 250.0
    links = sample_links(cfg, SimPlan(40_000, r0=r0, seed=3))
    b = links.b_norm * cfg.power / r0 ** cfg.eta
    for k in (0.3, 1.0, 3.0):
        u = k / b_moments(cfg, r0)[0]
        emp = np.mean(np.exp(-u * b))
        assert emp == pytest.approx(laplace_b_gaussian(u, cfg, r0), abs=4 * np.std(np.exp(-u * b)) / 200)


def test_series_agrees_for_gaussian_moments(cfg):
    r0 = 200.0
    u = 0.2 * r0 ** 4 / cfg.power
    res = laplace_b_series(u, cfg, r0, ConstellationMoments.gaussian(30), tol=1e-10)
    assert res.value == pytest.approx(laplace_b_gaussian(u, cfg, r0), rel=1e-9)


def test_series_raises_outside_convergence(cfg):
    r0 = 200.0
    with pytest.raises(TruncationError) as info:
        laplace_b_series(3.0 * r0 ** 4, cfg, r0, ConstellationMoments.gaussian(10))
    assert info.value.estimate is not None


def test_constellation_moments_of_constant_modulus():
    m = ConstellationMoments.from_symbols(np.exp(1j * np.pi / 2 * np.arange(4)), K=5)
    assert np.allclose(m.even_moments, 1.0)


# ---------------------------------------------------------------------------
#  Moments and Gamma fit
# ---------------------------------------------------------------------------

@given(st.floats(2.5, 6.0), st.floats(50.0, 600.0))
@settings(max_examples=20)
def test_mean_matches_campbell(eta, r0):
    cfg = NetworkConfig(1e-6, eta=eta)
    m1 = 2 * math.pi * cfg.density * integrate.quad(lambda r: r ** (1 - eta), r0, np.inf)[0]
    assert b_moments(cfg, r0)[0] == pytest.approx(m1, rel=1e-8)


@given(st.floats(2.5, 6.0), st.floats(50.0, 600.0))
@settings(max_examples=20)
def test_variance_is_half_the_laplace_cumulant(eta, r0):
    # the closed-form variance (and hence the Gamma shape and scale) is
    # pi lam r0^(2-2 eta) P^2/(eta-1); the second cumulant of the Laplace
    # transform, 2 pi lam E|h|^4 int r^(1-2 eta) dr, is twice that
    cfg = NetworkConfig(1e-6, eta=eta)
    k2 = 2 * math.pi * cfg.density * 2 * integrate.quad(lambda r: r ** (1 - 2 * eta), r0, np.inf)[0]
    mean, second = b_moments(cfg, r0)
    assert second - mean ** 2 == pytest.approx(math.pi * cfg.density * r0 ** (2 - 2 * eta) / (eta - 1), rel=1e-12)
    assert second - mean ** 2 == pytest.approx(k2 / 2, rel=1e-8)


def test_laplace_second_cumulant():
    # -log L(u) = k1 u - k2 u^2/2 + ..., checked by a symmetric difference
    cfg = NetworkConfig(1e-6)
    r0 = 200.0
    mean, second = b_moments(cfg, r0)
    u = 2e-3 / mean
    f = lambda v: -math.log(laplace_b_gaussian(v, cfg, r0))
    k2 = -(f(2 * u) - 2 * f(u)) / u ** 2
    assert k2 == pytest.approx(2 * (second - mean ** 2), rel=1e-2)


def test_gamma_fit_matches_moments(cfg):
    for r0 in (150.0, 250.0):
        g = gamma_fit(cfg, r0)
        mean, second = b_moments(cfg, r0)
        assert g.mean == pytest.approx(mean, rel=1e-12)
        assert g.shape * g.scale ** 2 == pytest.approx(second - mean ** 2, rel=1e-12)


def test_interference_cdf_exact_against_simulation(cfg):
    r0 = 150.0
    links = sample_links(cfg, SimPlan(100_000, r0=r0, seed=11))
    b = links.b_norm * cfg.power / r0 ** cfg.eta
    x = np.quantile(b, [0.1, 0.3, 0.5, 0.7, 0.9])
    emp = np.array([np.mean(b <= xi) for xi in x])
    # DKW band at level 1e-6
    assert np.max(np.abs(interference_cdf(x, cfg, r0) - emp)) < math.sqrt(math.log(2e6) / (2 * b.size))


def test_interference_cdf_gamma_is_gamma(cfg):
    g = gamma_fit(cfg, 250.0)
    x = np.array([0.5, 1.0, 2.0]) * g.mean
    assert np.allclose(interference_cdf(x, cfg, 250.0, method="gamma"),
                       stats.gamma.cdf(x, g.shape, scale=g.scale), atol=1e-14)


def test_interference_cdf_rejects_bad_method(cfg):
    with pytest.raises(DomainError):
        interference_cdf(1.0, cfg, 250.0, method="nope")


def test_sinr_pdf_integrates_to_cdf(cfg):
    r0 = 250.0
    v = np.geomspace(1e-3, 1e4, 2000)
    pdf = sinr_pdf_gamma(v, cfg, r0)
    cdf = sinr_cdf_gamma(v, cfg, r0)
    inc = integrate.trapezoid(pdf, v)
    assert inc == pytest.approx(cdf[-1] - cdf[0], rel=1e-4)
    assert np.all(np.diff(cdf) >= 0)


# ---------------------------------------------------------------------------
#  Serving distance
# ---------------------------------------------------------------------------

def test_serving_distance_law(cfg):
    law = serving_distance(cfg)
    assert integrate.quad(law.pdf, 0, np.inf)[0] == pytest.approx(1.0, rel=1e-10)
    assert law.cdf(law.median) == pytest.approx(0.5)
    assert law.mode == pytest.approx(1 / math.sqrt(2 * math.pi * 1e-6))
    r = law.sample(np.random.default_rng(0), 50_000)
    assert stats.kstest(r, law.cdf).pvalue > 1e-3
