"""Supplementary: the parity learning gap between the parametrizations at depth 20."""

import pytest

from dlgn.init import InitScheme
from test_acceptance import _parity_run


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_deep_parity_iwp_residual_learns_op_gaussian_stalls(seed):
    assert _parity_run("iwp", InitScheme.residual(), seed, layers=20) is not None
    assert _parity_run("op", InitScheme.gaussian(1.0), seed, layers=20) is None
