"""Feature dictionary assembly."""

import numpy as np
import pytest

from phaseident.features import (FEATURE_NAMES, N_FEATURES, EmptyRegionError,
                                 assemble, column_norms, feature_planes)
from phaseident.numdiff import build_derivative_stack


def test_dictionary_order():
    assert N_FEATURES == 15
    assert FEATURE_NAMES[0] == "1"
    assert FEATURE_NAMES[1] == "u"
    assert FEATURE_NAMES[2] == "u_x"
    assert FEATURE_NAMES[6] == "u*u_x"


def test_assemble_rows_match_region(decay_stack):
    region = np.zeros_like(decay_stack.valid_mask)
    region[50:80, 20:60] = True
    system = assemble(decay_stack, region)
    expected = (region & decay_stack.valid_mask).sum()
    assert system.n_rows == expected
    assert system.matrix.shape == (expected, N_FEATURES)
    # Every row's grid index lies in the requested region.
    for j, n in system.point_index[:25]:
        assert region[j, n] and decay_stack.valid_mask[j, n]


def test_assemble_feature_values(decay_stack):
    region = np.zeros_like(decay_stack.valid_mask)
    region[90:110, 40:45] = True
    system = assemble(decay_stack, region)
    j, n = system.point_index[0]
    row = system.matrix[0]
    u = decay_stack.d0[j, n]
    ux = decay_stack.d1[j, n]
    assert row[0] == 1.0
    assert row[1] == pytest.approx(u)
    assert row[5] == pytest.approx(u * u)
    assert row[6] == pytest.approx(u * ux)
    assert row[9] == pytest.approx(ux * ux)


def test_decay_field_satisfies_u_t_equals_minus_u(decay_stack):
    region = decay_stack.valid_mask.copy()
    system = assemble(decay_stack, region)
    resid = system.response - (-1.0) * system.matrix[:, 1]
    assert np.max(np.abs(resid)) < 0.02


def test_empty_region_raises(decay_stack):
    with pytest.raises(EmptyRegionError):
        assemble(decay_stack, np.zeros_like(decay_stack.valid_mask))


def test_column_norms(decay_stack):
    region = decay_stack.valid_mask.copy()
    system = assemble(decay_stack, region)
    norms = column_norms(system)
    np.testing.assert_allclose(norms, np.linalg.norm(system.matrix, axis=0))
