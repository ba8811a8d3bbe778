import math

import numpy as np
import pytest
from scipy.stats import kstest

from sinegap import (GapEstimate, btw_slope_check, bulk_rescale,
                     empirical_gap_prob, known_kappa, sample_tridiagonal_beta,
                     semicircle_cdf, sine_kernel_gap, sturm_count,
                     zeta_prime_minus1)
from sinegap.errors import ConfigurationError, DomainError, NumericalError
from sinegap.oracles import tridiagonal_entries

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# tridiagonal sampler
# ---------------------------------------------------------------------------

def test_trace_identity():
    s = sample_tridiagonal_beta(200, 2.0, seed=1)
    d, _ = tridiagonal_entries(200, 2.0, seed=1)
    assert s.eigenvalues.sum() == pytest.approx(d.sum(), rel=1e-10)
    assert np.all(np.diff(s.eigenvalues) >= 0)
    assert len(s.eigenvalues) == 200


def test_sturm_count_cross_check():
    d, e = tridiagonal_entries(150, 2.0, seed=2)
    eigs = sample_tridiagonal_beta(150, 2.0, seed=2).eigenvalues
    for x in (-10.0, 0.0, 3.7, 25.0):
        assert sturm_count(d, e, x) == int(np.sum(eigs < x))


def test_sampler_determinism():
    a = sample_tridiagonal_beta(50, 2.0, seed=3).eigenvalues
    b = sample_tridiagonal_beta(50, 2.0, seed=3).eigenvalues
    assert np.array_equal(a, b)


def test_sampler_validation():
    with pytest.raises(ConfigurationError):
        sample_tridiagonal_beta(1, 2.0, seed=1)
    with pytest.raises(ConfigurationError):
        sample_tridiagonal_beta(10, -1.0, seed=1)
    with pytest.raises(ConfigurationError):
        sample_tridiagonal_beta(10**7, 2.0, seed=1)


def test_semicircle_limit():
    # KS distance of eigenvalues/sqrt(n) to the semicircle law, averaged
    # over samples, is small at n = 1000
    dists = []
    for sid in range(20):
        s = sample_tridiagonal_beta(1000, 2.0, seed=4, stream_id=sid)
        scaled = s.eigenvalues / math.sqrt(1000)
        res = kstest(scaled, lambda x: np.asarray(semicircle_cdf(x)))
        dists.append(res.statistic)
    assert float(np.mean(dists)) < 0.05


def test_two_by_two_gap_law_brute_force():
    # joint density ~ |l1 - l2|^beta exp(-beta (l1^2 + l2^2) / 4); the gap
    # CDF is computed by midpoint integration on a 2-d grid and compared
    # with sampled gaps by a one-sample KS test
    beta = 2.0
    L, m = 7.0, 801
    grid = np.linspace(-L, L, m)
    l1, l2 = np.meshgrid(grid, grid, indexing="ij")
    dens = np.abs(l1 - l2) ** beta * np.exp(-beta * (l1**2 + l2**2) / 4.0)
    gaps_grid = np.abs(l1 - l2).ravel()
    weights = dens.ravel()
    order = np.argsort(gaps_grid)
    cdf_x = gaps_grid[order]
    cdf_y = np.cumsum(weights[order])
    cdf_y /= cdf_y[-1]

    samples = np.array([
        np.abs(np.diff(sample_tridiagonal_beta(2, beta, seed=5, stream_id=i)
                       .eigenvalues))[0]
        for i in range(4000)
    ])
    res = kstest(samples, lambda s: np.interp(s, cdf_x, cdf_y))
    assert res.pvalue > 1e-3


def test_bulk_rescale_window_and_affine():
    s = sample_tridiagonal_beta(400, 2.0, seed=6)
    rescaled = bulk_rescale(s, 0.0)
    assert np.all(np.diff(rescaled) >= 0)  # affine rescaling keeps order
    assert rescaled == pytest.approx(math.sqrt(1600) * s.eigenvalues)
    with pytest.raises(DomainError):
        bulk_rescale(s, 2.0 * math.sqrt(400))


def test_bulk_mean_count():
    counts = []
    for sid in range(400):
        s = sample_tridiagonal_beta(400, 2.0, seed=7, stream_id=sid)
        pts = bulk_rescale(s, 0.0)
        counts.append(np.count_nonzero((pts >= 0) & (pts <= TWO_PI)))
    counts = np.array(counts)
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - 1.0) < 3 * se


def test_count_variance_suppression():
    # number variance in [0, 20 pi] far below Poisson
    L = 20 * math.pi
    counts = []
    for sid in range(300):
        s = sample_tridiagonal_beta(400, 2.0, seed=8, stream_id=sid)
        pts = bulk_rescale(s, 0.0)
        counts.append(np.count_nonzero((pts >= 0) & (pts <= L)))
    var = np.var(counts, ddof=1)
    assert var < 0.5 * L / TWO_PI


def test_empirical_gap_prob():
    sets = [np.array([0.5 + i * 0.1]) for i in range(150)]
    est = empirical_gap_prob(sets, 0.0, 0, seed=0)
    assert est.value == 1.0 and est.method == "oracle-matrix"
    with pytest.raises(ConfigurationError):
        empirical_gap_prob(sets[:50], 1.0, 0)
    with pytest.raises(DomainError):
        empirical_gap_prob(sets, 1.0, -2)


def test_count_distribution_nearly_exhaustive():
    sets = []
    for sid in range(300):
        s = sample_tridiagonal_beta(400, 2.0, seed=9, stream_id=sid)
        sets.append(bulk_rescale(s, 0.0))
    total = sum(empirical_gap_prob(sets, 2.0, k).value for k in range(11))
    assert total >= 0.999


# ---------------------------------------------------------------------------
# Fredholm determinant
# ---------------------------------------------------------------------------

def test_fredholm_trivial_and_small_lambda():
    assert sine_kernel_gap(0.0) == 1.0
    lam = 0.01
    val = sine_kernel_gap(lam)
    assert abs(val - (1.0 - lam / TWO_PI)) < 1e-5


def test_fredholm_order_stability():
    a = sine_kernel_gap(6.0, quad_order=40)
    b = sine_kernel_gap(6.0, quad_order=80)
    assert a == pytest.approx(b, rel=1e-10)


def test_fredholm_monotone_log_concave():
    lams = np.linspace(0.2, 8.0, 30)
    vals = np.array([sine_kernel_gap(l) for l in lams])
    assert np.all(np.diff(vals) < 0)
    logs = np.log(vals)
    assert np.all(np.diff(logs, 2) < 1e-10)


def test_fredholm_validation():
    with pytest.raises(DomainError):
        sine_kernel_gap(-1.0)
    with pytest.raises(DomainError):
        sine_kernel_gap(2.0, k=1)
    with pytest.raises(ConfigurationError):
        sine_kernel_gap(2.0, quad_order=10)


# ---------------------------------------------------------------------------
# closed-form constants
# ---------------------------------------------------------------------------

def test_zeta_prime_minus_one():
    assert zeta_prime_minus1() == pytest.approx(-0.1654211437004509, abs=1e-12)


def test_known_kappa_values():
    # reference digits from a 30-digit evaluation of zeta'(-1)
    assert known_kappa(2.0) == pytest.approx(0.91217121044609782, abs=1e-12)
    assert known_kappa(1.0) == pytest.approx(1.13578382495048510, abs=1e-12)
    assert known_kappa(4.0) == pytest.approx(0.36823234743215185, abs=1e-12)
    # zeta' factors cancel in the ratio
    assert known_kappa(1.0) / known_kappa(4.0) == pytest.approx(
        2 ** (13 / 24 + 13 / 12), rel=1e-12)
    with pytest.raises(DomainError):
        known_kappa(3.0)


# ---------------------------------------------------------------------------
# k-gap slope fit
# ---------------------------------------------------------------------------

def _synthetic_estimates(lams, slope, logc, const):
    e0, e1 = [], []
    for lam in lams:
        v0 = math.exp(-0.1 * lam)
        v1 = v0 * math.exp(slope * lam + logc * math.log(lam) + const)
        e0.append(GapEstimate(v0, 1e-6 * v0, 10, "direct", 0, lam=lam, k=0))
        e1.append(GapEstimate(v1, 1e-6 * v1, 10, "direct", 0, lam=lam, k=1))
    return e0, e1


def test_btw_fit_exact_recovery():
    lams = [4.0, 6.0, 8.0, 10.0]
    e0, e1 = _synthetic_estimates(lams, 0.5, -0.5, -1.3)
    fit = btw_slope_check(lams, e0, e1)
    assert fit.lambda_coefficient == pytest.approx(0.5, abs=1e-8)
    assert fit.log_coefficient == pytest.approx(-0.5, abs=1e-8)
    assert fit.intercept == pytest.approx(-1.3, abs=1e-8)


def test_btw_fit_declines_noisy_or_singular():
    lams = [4.0, 6.0, 8.0, 10.0]
    e0, e1 = _synthetic_estimates(lams, 0.5, -0.5, -1.3)
    noisy = [GapEstimate(e.value, 0.5 * e.value, 10, "direct", 0, lam=e.lam, k=0)
             for e in e0]
    with pytest.raises(ConfigurationError):
        btw_slope_check(lams, noisy, e1)
    same = [4.0, 4.0 + 1e-13, 4.0 + 2e-13]
    e0s, e1s = _synthetic_estimates(same, 0.5, -0.5, -1.3)
    with pytest.raises(NumericalError):
        btw_slope_check(same, e0s, e1s)
