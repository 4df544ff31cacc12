import math

import numpy as np
import pytest
from scipy import integrate

from fbrnet.network import NetworkConfig, sinr_pdf_gamma
from fbrnet.numerics import DomainError, hermite2d_rule
from fbrnet.qam import (
    Constellation,
    avg_rate_qam_fixed_r0,
    cond_dispersion,
    cond_mi,
    cond_rate_pair,
    cond_rate_table,
    make_qam,
)
from fbrnet.rates import CodingConfig

# ---------------------------------------------------------------------------
#  Constellations
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("M", [2, 4, 8, 16])
def test_unit_power_and_gray_neighbours(M):
    c = make_qam(M)
    assert c.order == M and c.bits == int(math.log2(M))
    assert np.mean(np.abs(c.symbols) ** 2) == pytest.approx(1.0)
    d = np.abs(c.symbols[:, None] - c.symbols[None, :])
    dmin = np.min(d[d > 1e-12])
    bits = c.bit_matrix()
    for i, j in zip(*np.nonzero(np.abs(d - dmin) < 1e-9)):
        assert np.sum(bits[i] != bits[j]) == 1


def test_by_label_inverts_labels():
    c = make_qam(16)
    assert np.allclose(c.by_label()[c.labels], c.symbols)


@pytest.mark.parametrize("M", [3, 32])
def test_unsupported_order(M):
    with pytest.raises(DomainError):
        make_qam(M)


def test_constellation_validation():
    with pytest.raises(DomainError):
        Constellation("bad", np.array([1.0, 2.0]), np.arange(2))
    with pytest.raises(DomainError):
        Constellation("bad", np.array([1.0, -1.0]), np.array([0, 0]))


# ---------------------------------------------------------------------------
#  Conditional mutual information and dispersion
# ---------------------------------------------------------------------------

# mpmath: BPSK by 1-D quadrature over the noise, 16-QAM by 2-D quadrature
# of each symbol's conditional moments (symbol-averaged conditional variance)
BPSK_ORACLE = [(0.1, 0.13141608235284721, 0.31641800871040862),
               (1.0, 0.72145159079038813, 0.53327194047856348),
               (5.0, 0.99675632799002967, 0.010320066823314289)]
QAM16_ORACLE = [(1.0, 0.98974137213025245, 1.4829573749534511),
                (10.0, 3.1639431880506882, 1.4551562192330048)]


@pytest.mark.parametrize("v, mi, disp", BPSK_ORACLE)
def test_bpsk_oracle(v, mi, disp):
    p = cond_rate_pair(make_qam(2), v)
    assert p.mi == pytest.approx(mi, abs=1e-9)
    assert p.disp == pytest.approx(disp, rel=1e-6)


@pytest.mark.parametrize("v, mi, disp", QAM16_ORACLE)
def test_16qam_oracle(v, mi, disp):
    p = cond_rate_pair(make_qam(16), v)
    assert p.mi == pytest.approx(mi, abs=1e-9)
    assert p.disp == pytest.approx(disp, rel=1e-6)


def test_bpsk_dispersion_against_information_density_samples():
    # i(x; y) = 1 - log2(1 + exp(-2 sqrt(2v) x y')) for BPSK over real noise of variance 1/2
    v = 1.0
    rng = np.random.default_rng(7)
    z = rng.standard_normal(1_000_000)
    y = math.sqrt(2 * v) + z                     # x = +1 by symmetry
    dens = 1.0 - np.logaddexp(0.0, -2.0 * math.sqrt(2 * v) * y) / math.log(2)
    se = np.std((dens - dens.mean()) ** 2) / math.sqrt(z.size)
    assert cond_dispersion(make_qam(2), v) == pytest.approx(np.var(dens), abs=3 * se)
    assert cond_mi(make_qam(2), v) == pytest.approx(dens.mean(), abs=3 * np.std(dens) / 1000)


@pytest.mark.parametrize("v", [0.3, 2.0, 12.0])
def test_qpsk_is_two_bpsk(v):
    q = cond_rate_pair(make_qam(4), v)
    b = cond_rate_pair(make_qam(2), v / 2)
    assert q.mi == pytest.approx(2 * b.mi, abs=1e-9)
    assert q.disp == pytest.approx(2 * b.disp, rel=1e-6)


@pytest.mark.parametrize("M", [2, 8, 16])
def test_rule_doubling_invariant(M):
    c = make_qam(M)
    fine = hermite2d_rule(480, prune=1e-25)
    for v in (0.5, 8.0, 100.0):
        a, b = cond_rate_pair(c, v), cond_rate_pair(c, v, fine)
        assert abs(a.mi - b.mi) < 1e-7 and abs(a.disp - b.disp) < 1e-7


def test_limits_and_monotonicity():
    for M in (2, 4, 16):
        c = make_qam(M)
        v = np.geomspace(1e-3, 1e3, 13)
        mi = np.array([cond_mi(c, x) for x in v])
        # strictly increasing until saturation at log2 M
        assert np.all(np.diff(mi) >= 0) and np.all(np.diff(mi[:6]) > 0)
        assert mi[0] < 1e-2 and mi[-1] == pytest.approx(c.bits, abs=1e-6)
        assert cond_mi(c, 0.0) == 0.0 and cond_dispersion(c, 0.0) == 0.0


def test_negative_sinr_rejected():
    with pytest.raises(DomainError):
        cond_mi(make_qam(2), -1.0)


def test_table_matches_direct_evaluation():
    c = make_qam(16)
    tab = cond_rate_table(c)
    v = np.array([0.037, 0.9, 7.7, 310.0])
    mi, sd = tab(v)
    for x, m, s in zip(v, mi, sd):
        p = cond_rate_pair(c, x)
        assert m == pytest.approx(p.mi, abs=1e-6)
        assert s == pytest.approx(math.sqrt(p.disp), abs=1e-5)


# ---------------------------------------------------------------------------
#  Averages
# ---------------------------------------------------------------------------

def test_bpsk_average_against_quad():
    # independent 1-D evaluation of BPSK mi(v) and disp(v), averaged with scipy quad
    t, w = np.polynomial.hermite.hermgauss(200)
    w = w / math.sqrt(math.pi)

    def pair(v):
        # y = sqrt(2v) + z with z ~ N(0, 1/2) written as z = t
        g = np.logaddexp(0.0, -4.0 * math.sqrt(v) * t - 4.0 * v) / math.log(2)
        return 1.0 - w @ g, w @ g ** 2 - (w @ g) ** 2

    cfg = NetworkConfig.from_snr_db(0.0, 1.0)
    r0 = 250.0
    f = lambda v, k: pair(v)[0] if k == 0 else math.sqrt(max(pair(v)[1], 0.0))
    pdf = lambda v: float(sinr_pdf_gamma(v, cfg, r0))
    cap = integrate.quad(lambda v: f(v, 0) * pdf(v), 0, np.inf, limit=400, epsabs=1e-11)[0]
    sd = integrate.quad(lambda v: f(v, 1) * pdf(v), 0, np.inf, limit=400, epsabs=1e-11)[0]
    coding = CodingConfig(128, 1e-2)
    r = avg_rate_qam_fixed_r0(make_qam(2), cfg.link(r0), cfg, coding)
    assert r.capacity_term == pytest.approx(cap, abs=1e-6)
    assert r.dispersion_term == pytest.approx(sd * coding.backoff, abs=1e-6)


def test_average_rate_grows_with_order():
    cfg = NetworkConfig.from_snr_db(10.0, 1.0)
    coding = CodingConfig(512, 1e-2)
    caps = [avg_rate_qam_fixed_r0(make_qam(M), cfg.link(150.0), cfg, coding).capacity_term for M in (2, 4, 16)]
    assert caps[0] < caps[1] < caps[2] < 4
