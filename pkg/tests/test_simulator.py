import math

import numpy as np
import pytest
from scipy import stats

from fbrnet.network import NetworkConfig, b_moments, serving_distance
from fbrnet.numerics import DomainError
from fbrnet.qam import make_qam
from fbrnet.rates import CodingConfig, avg_rate_fixed_r0
from fbrnet.simulator import (
    SimPlan,
    batch_means,
    empirical_avg_rate,
    empirical_meta,
    sample_links,
    sample_realization,
    substream,
)


@pytest.fixture
def cfg():
    return NetworkConfig.from_snr_db(0.0, 1.0)


# ---------------------------------------------------------------------------
#  Plans and streams
# ---------------------------------------------------------------------------

def test_plan_validation(cfg):
    with pytest.raises(DomainError):
        SimPlan(0)
    with pytest.raises(DomainError):
        SimPlan(10, batches=1)
    with pytest.raises(DomainError):
        SimPlan(10, r0=-1.0)
    with pytest.raises(DomainError):
        SimPlan(10, region_scale=2.0).region_radius(cfg)


def test_substreams_are_distinct_and_reproducible():
    a = substream(5, 1, 0).random(4)
    assert np.array_equal(a, substream(5, 1, 0).random(4))
    assert not np.array_equal(a, substream(5, 1, 1).random(4))
    assert not np.array_equal(a, substream(5, 2, 0).random(4))


def test_results_do_not_depend_on_threads(cfg):
    one = sample_links(cfg, SimPlan(20_000, seed=3, chunk=1000))
    four = sample_links(cfg, SimPlan(20_000, seed=3, chunk=1000, workers=4))
    assert np.array_equal(one.b_norm, four.b_norm) and np.array_equal(one.r0, four.r0)


def test_seed_changes_the_draw(cfg):
    a = sample_links(cfg, SimPlan(1000, seed=1)).b_norm
    b = sample_links(cfg, SimPlan(1000, seed=2)).b_norm
    assert not np.array_equal(a, b)


# ---------------------------------------------------------------------------
#  Link statistics
# ---------------------------------------------------------------------------

def test_interference_mean(cfg):
    r0 = 200.0
    plan = SimPlan(100_000, r0=r0, seed=5)
    links = sample_links(cfg, plan)
    R = plan.region_radius(cfg)
    # the disc of radius R removes the fraction (r0/R)^(eta-2) of the mean
    mean = b_moments(cfg, r0)[0] * r0 ** 4 / cfg.power * (1 - (r0 / R) ** 2)
    est = batch_means(links.b_norm)
    assert est.ci_low <= mean <= est.ci_high


def test_serving_distance_samples(cfg):
    r0 = sample_links(cfg, SimPlan(20_000, seed=6)).r0
    assert stats.kstest(r0, serving_distance(cfg).cdf).pvalue > 1e-3


def test_serving_fading_is_exponential(cfg):
    g0 = sample_links(cfg, SimPlan(20_000, seed=7)).g0
    assert stats.kstest(g0, "expon").pvalue > 1e-3


def test_realization_geometry(cfg):
    plan = SimPlan(1, r0=150.0, seed=1)
    real = sample_realization(cfg, plan, np.random.default_rng(0))
    assert real.r0 == 150.0
    assert np.all(real.distances > 150.0) and np.all(np.diff(real.distances) >= 0)
    assert np.all(real.distances <= plan.region_radius(cfg))


# ---------------------------------------------------------------------------
#  Estimators
# ---------------------------------------------------------------------------

def test_batch_means_coverage():
    rng = np.random.default_rng(0)
    hits = sum(batch_means(rng.standard_normal(4000), 40, 0.99).contains(0.0) for _ in range(400))
    # binomial(400, 0.99): below 388 has probability < 1e-3
    assert hits >= 388


def test_batch_means_needs_two_samples():
    with pytest.raises(DomainError):
        batch_means([1.0])


def test_average_rate_matches_analysis(cfg):
    coding = CodingConfig(128, 1e-2)
    r0 = 250.0
    est = empirical_avg_rate(cfg, coding, SimPlan(100_000, r0=r0, seed=8))
    assert est.contains(avg_rate_fixed_r0(cfg.link(r0), cfg, coding).rate)


def test_common_random_numbers_across_constellations(cfg):
    plan = SimPlan(5000, r0=150.0, seed=9)
    links = sample_links(cfg, plan)
    coding = CodingConfig(128, 1e-2)
    a = empirical_avg_rate(cfg, coding, plan, make_qam(2), links=links)
    b = empirical_avg_rate(cfg, coding, plan, make_qam(4), links=links)
    assert a.mean < b.mean


def test_meta_fading_modes_agree(cfg):
    coding = CodingConfig(128, 1e-2)
    plan = SimPlan(20, seed=10, fading_draws=20_000)
    mc = empirical_meta(cfg, 150.0, 1.0, coding, plan)
    an = empirical_meta(cfg, 150.0, 1.0, coding, plan, fading="analytic")
    assert np.allclose(mc.approx, an.approx)
    assert np.max(np.abs(mc.exact - an.exact)) < 0.01
