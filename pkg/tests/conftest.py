import numpy as np
import pytest

from satlab.cnf import CnfFormula


@pytest.fixture
def worked_formula() -> CnfFormula:
    """(x1 v -x2 v x4) & (x2 v x3) & (-x3 v x4): the small satisfiable
    instance threaded through the encoder and solver tests."""
    return CnfFormula(num_vars=4, clauses=((1, -2, 4), (2, 3), (-3, 4)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260816)
