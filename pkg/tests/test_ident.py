"""Sparse identification: Subspace Pursuit, trimming, CEE.

The SP and CEE checks run against independent oracle routes (exhaustive
subset search, direct least-squares re-fits) kept separate from the library
implementation on purpose.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseident.features import FeatureSystem
from phaseident.ident import cee, identify, least_squares, subspace_pursuit, trim


def make_system(rng, n_rows=40, n_cols=8, support=None, coeffs=None,
                noise=0.0):
    F = rng.normal(size=(n_rows, n_cols))
    y = np.zeros(n_rows)
    if support is not None:
        y = F[:, list(support)] @ np.asarray(coeffs, dtype=float)
    if noise:
        y = y + noise * rng.normal(size=n_rows)
    idx = np.column_stack([np.zeros(n_rows, dtype=int), np.arange(n_rows)])
    return FeatureSystem(F, y, idx)


def exhaustive_best(system, k):
    """Oracle: brute-force minimum-residual support of size k."""
    best, best_res = None, np.inf
    for support in itertools.combinations(range(system.matrix.shape[1]), k):
        A = system.matrix[:, list(support)]
        coef, *_ = np.linalg.lstsq(A, system.response, rcond=None)
        res = np.linalg.norm(system.response - A @ coef)
        if res < best_res:
            best, best_res = support, res
    return best


def cee_oracle(system, support):
    """Independent CEE route: raw-column half fits and cross errors."""
    even = system.point_index[:, 1] % 2 == 0
    total = 0.0
    for train, test in ((even, ~even), (~even, even)):
        A = system.matrix[np.ix_(train, list(support))]
        coef, *_ = np.linalg.lstsq(A, system.response[train], rcond=None)
        B = system.matrix[np.ix_(test, list(support))]
        total += float(np.sum((system.response[test] - B @ coef) ** 2))
    return total


def test_sp_matches_exhaustive_on_200_systems():
    rng = np.random.default_rng(0)
    agree = 0
    for _ in range(200):
        support = tuple(sorted(rng.choice(8, size=2, replace=False)))
        coeffs = rng.uniform(1.0, 3.0, size=2) * rng.choice([-1, 1], size=2)
        system = make_system(rng, support=support, coeffs=coeffs)
        sp = subspace_pursuit(system, 2)
        oracle = exhaustive_best(system, 2)
        assert oracle == support
        agree += sp.support == oracle
    assert agree == 200


def test_cee_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        support = tuple(sorted(rng.choice(8, size=3, replace=False)))
        system = make_system(rng, n_rows=60, support=support,
                             coeffs=[2.0, -1.0, 0.5], noise=0.1)
        for trial_support in ((0, 1), support, (2,), tuple(range(8))):
            lib = cee(system, trial_support).value
            oracle = cee_oracle(system, trial_support)
            assert lib == pytest.approx(oracle, rel=1e-10, abs=1e-12)


def test_least_squares_recovers_coefficients(rng):
    system = make_system(rng, support=(1, 4), coeffs=[3.0, -2.0])
    out = least_squares(system, (1, 4))
    np.testing.assert_allclose(out.coefficients, [3.0, -2.0], rtol=1e-10)
    assert not out.degenerate


def test_trim_drops_negligible_term(rng):
    system = make_system(rng, support=(0, 3), coeffs=[5.0, -4.0], noise=0.01)
    bloated = subspace_pursuit(system, 4)
    trimmed = trim(system, bloated, 0.2)
    assert set(trimmed.support) <= set(bloated.support)
    assert trimmed.support == (0, 3)


def test_trim_keeps_balanced_support(rng):
    system = make_system(rng, support=(2, 5), coeffs=[1.0, 1.0])
    model = subspace_pursuit(system, 2)
    trimmed = trim(system, model, 0.3)
    assert trimmed.support == (2, 5)


@given(k=st.integers(1, 5))
@settings(max_examples=20, deadline=None)
def test_sp_support_size(k):
    rng = np.random.default_rng(k)
    system = make_system(rng, n_rows=50, support=(0, 1), coeffs=[1.0, -1.0],
                         noise=0.5)
    model = subspace_pursuit(system, k)
    assert len(model.support) == k
    assert all(0 <= i < 8 for i in model.support)


def test_identify_selects_true_sparsity(rng):
    system = make_system(rng, n_rows=80, support=(1, 6), coeffs=[2.5, -1.5],
                         noise=0.05)
    model, report = identify(system, k_max=6, trim_threshold=0.1)
    assert model.support == (1, 6)
    np.testing.assert_allclose(model.coefficients, [2.5, -1.5], atol=0.1)
    assert report.value >= 0


def test_identify_zero_response(rng):
    system = make_system(rng)
    model, report = identify(system)
    assert model.support == ()
    assert report.value == 0.0


def test_cee_nonnegative_random(rng):
    for _ in range(20):
        system = make_system(rng, n_rows=30, support=(0,), coeffs=[1.0],
                             noise=1.0)
        assert cee(system, (0, 1, 2)).value >= 0.0
