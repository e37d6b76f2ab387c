"""CUSUM, change-point PMFs, and entropic barycenters."""

import numpy as np
import pytest

from phaseident.changepoint import (ChangePointPMF, barycenter, cusum,
                                    estimate, pmf_from_cusum)
from phaseident.evolve import ErrorSequencePair


def cusum_oracle(errors, m0):
    """Direct-formula route: per-m prefix/suffix means."""
    e = np.asarray(errors, dtype=float)
    M = e.size - 1
    out = []
    for m in range(max(m0, 1), M - m0 + 1):
        A = e[:m].mean()
        B = e[m:].mean()
        out.append(m * (1 - m / (M + 1)) * (A - B) ** 2)
    return np.asarray(out)


def test_cusum_matches_direct_formula():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = rng.integers(12, 120)
        m0 = int(rng.integers(0, n // 3))
        e = rng.normal(size=n) ** 2
        lib = cusum(e, m0)
        oracle = cusum_oracle(e, m0)
        np.testing.assert_allclose(lib, oracle, rtol=1e-12, atol=1e-14)


def test_cusum_peaks_at_mean_shift():
    e = np.concatenate([np.full(40, 0.1), np.full(60, 2.0)])
    c = cusum(e, 5)
    m = np.arange(5, 96)
    assert m[np.argmax(c)] == 40


def test_cusum_short_sequence_raises():
    with pytest.raises(ValueError):
        cusum(np.ones(6), 3)


def test_pmf_normalized():
    c = np.array([0.0, 1.0, 3.0, 1.0])
    pmf = pmf_from_cusum(c, dt=0.01, m0=2)
    assert pmf.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(pmf.support, [2, 3, 4, 5])
    assert not pmf.degenerate


def test_pmf_degenerate_on_flat_zero():
    pmf = pmf_from_cusum(np.zeros(5), dt=0.01, m0=1)
    assert pmf.degenerate
    np.testing.assert_allclose(pmf.probabilities, 0.2)


def _point_mass(index, size, origin="left"):
    p = np.zeros(size)
    p[index] = 1.0
    return ChangePointPMF(np.arange(size), p, origin, False)


def _random_pmf(rng, size, origin="left"):
    p = rng.uniform(0.01, 1.0, size=size)
    return ChangePointPMF(np.arange(size), p / p.sum(), origin, False)


def test_barycenter_fixed_point_on_identical_pmfs():
    rng = np.random.default_rng(9)
    for _ in range(10):
        p = _random_pmf(rng, 40)
        bary = barycenter(p, p)
        tv = 0.5 * np.abs(bary.probabilities - p.probabilities).sum()
        assert tv < 1e-6


def test_barycenter_midpoint_of_point_masses():
    left = _point_mass(10, 31)
    right = _point_mass(20, 31)
    bary = barycenter(left, right)
    mode = bary.support[np.argmax(bary.probabilities)]
    assert abs(mode - 15) <= 1


def test_barycenter_unit_mass_100_random_pairs():
    rng = np.random.default_rng(10)
    for _ in range(100):
        size = int(rng.integers(5, 60))
        a = _random_pmf(rng, size)
        b = _random_pmf(rng, size)
        bary = barycenter(a, b)
        assert bary.probabilities.sum() == pytest.approx(1.0, abs=1e-8)
        assert np.all(bary.probabilities >= -1e-12)


def test_estimate_localizes_shift():
    # Both error directions shift at step 50 of 100.
    e_left = np.concatenate([np.full(50, 0.05), np.full(50, 1.0)])
    e_right = np.concatenate([np.full(50, 1.0), np.full(50, 0.05)])
    times = 0.01 * np.arange(100)
    pair = ErrorSequencePair(x=0.3, times=times, e_left=e_left,
                             e_right=e_right)
    est = estimate(pair, m0=5)
    assert est.x == 0.3
    assert est.gamma_hat == pytest.approx(0.5, abs=0.05)
    assert 0.8 in est.epsilon
    assert not est.degenerate
