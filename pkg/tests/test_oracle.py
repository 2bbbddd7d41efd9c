"""Tests for the exact satisfiability oracles.

brute_force_sat is the ground truth here; dpll_sat must agree with it
everywhere, and both must return verifiable models on SAT instances.
"""

import numpy as np
import pytest

from satlab.cnf import CnfFormula, all_assignments, evaluate, generate_random_3sat
from satlab.oracle import (
    SAT,
    UNSAT,
    SolverBudgetExceeded,
    brute_force_sat,
    dpll_sat,
)


def pigeonhole(pigeons: int, holes: int) -> CnfFormula:
    """PHP(p, h): p pigeons into h holes; unsatisfiable whenever p > h.

    Variable (i, j) -> (i - 1) * holes + j says pigeon i sits in hole j.
    """
    var = lambda i, j: (i - 1) * holes + j
    clauses = []
    for i in range(1, pigeons + 1):
        clauses.append(tuple(var(i, j) for j in range(1, holes + 1)))
    for j in range(1, holes + 1):
        for i1 in range(1, pigeons + 1):
            for i2 in range(i1 + 1, pigeons + 1):
                clauses.append((-var(i1, j), -var(i2, j)))
    return CnfFormula(num_vars=pigeons * holes, clauses=tuple(clauses))


class TestBruteForce:
    def test_unit_chain_forces_all_true(self):
        # (x1) and (~x1 | x2) and (~x2 | x3): propagation pins every variable.
        f = CnfFormula(num_vars=3, clauses=((1,), (-1, 2), (-2, 3)))
        result = brute_force_sat(f)
        assert result.status == SAT
        assert result.model == (True, True, True)

    def test_empty_formula_sat_all_false(self):
        result = brute_force_sat(CnfFormula(num_vars=3))
        assert result.status == SAT
        assert result.model == (False, False, False)

    def test_empty_clause_unsat(self):
        result = brute_force_sat(CnfFormula(num_vars=2, clauses=((),)))
        assert result.status == UNSAT
        assert result.model is None

    def test_contradiction_unsat(self):
        f = CnfFormula(num_vars=1, clauses=((1,), (-1,)))
        assert brute_force_sat(f).status == UNSAT

    def test_model_is_lexicographically_first(self, rng):
        # The returned model must be the first satisfying assignment with
        # False < True and x1 as the most significant position.
        for _ in range(25):
            n = int(rng.integers(3, 8))
            f = generate_random_3sat(n, int(rng.integers(2, 12)), int(rng.integers(1 << 32)))
            result = brute_force_sat(f)
            scan = next((a for a in all_assignments(n) if evaluate(f, a)), None)
            if scan is None:
                assert result.status == UNSAT
            else:
                assert result.status == SAT
                assert result.model == scan

    def test_var_limit_enforced(self):
        f = CnfFormula(num_vars=30, clauses=((1, 2, 3),))
        with pytest.raises(ValueError):
            brute_force_sat(f)

    def test_chunked_scan_handles_many_vars(self):
        # 18 variables exceeds one vectorized chunk; the satisfying
        # assignment needs the last variable true.
        f = CnfFormula(num_vars=18, clauses=tuple((-v,) for v in range(1, 18)) + ((18,),))
        result = brute_force_sat(f)
        assert result.status == SAT
        assert result.model == tuple([False] * 17 + [True])


class TestDpll:
    def test_unit_chain(self):
        f = CnfFormula(num_vars=3, clauses=((1,), (-1, 2), (-2, 3)))
        result = dpll_sat(f)
        assert result.status == SAT
        assert result.model == (True, True, True)

    def test_pigeonhole_unsat(self):
        # 3 pigeons, 2 holes: 6 variables, no satisfying assignment exists.
        f = pigeonhole(3, 2)
        assert f.num_vars == 6
        assert dpll_sat(f).status == UNSAT

    def test_empty_formula(self):
        assert dpll_sat(CnfFormula(num_vars=2)).status == SAT

    def test_empty_clause(self):
        assert dpll_sat(CnfFormula(num_vars=2, clauses=((),))).status == UNSAT

    def test_tautological_clause_ignored(self):
        # (x1 | ~x1) constrains nothing; the rest decides the answer.
        f = CnfFormula(num_vars=2, clauses=((1, -1), (2,)))
        result = dpll_sat(f)
        assert result.status == SAT
        assert result.model is not None
        assert evaluate(f, result.model)

    def test_model_satisfies_formula(self, rng):
        for _ in range(60):
            n = int(rng.integers(3, 16))
            m = int(rng.integers(1, int(5 * n)))
            f = generate_random_3sat(n, m, int(rng.integers(1 << 32)))
            result = dpll_sat(f)
            if result.status == SAT:
                assert evaluate(f, result.model)
            else:
                assert result.model is None

    def test_agrees_with_brute_force(self, rng):
        # The core soundness check: run both oracles across the ratio range
        # that matters (under-, near-, and over-constrained).
        disagreements = 0
        for _ in range(150):
            n = int(rng.integers(3, 13))
            ratio = float(rng.choice([3.0, 4.4, 6.6, 10.0]))
            m = round(ratio * n)
            f = generate_random_3sat(n, m, int(rng.integers(1 << 32)))
            if dpll_sat(f).status != brute_force_sat(f).status:
                disagreements += 1
        assert disagreements == 0

    def test_deterministic(self):
        f = generate_random_3sat(15, 64, seed=2024)
        assert dpll_sat(f) == dpll_sat(f)

    def test_decision_budget_raises(self):
        # PHP(5, 4) resists unit propagation and pure literals, so a
        # one-decision budget cannot complete.
        f = pigeonhole(5, 4)
        with pytest.raises(SolverBudgetExceeded):
            dpll_sat(f, max_decisions=1)

    def test_budget_generous_enough_succeeds(self):
        f = pigeonhole(3, 2)
        assert dpll_sat(f, max_decisions=10_000).status == UNSAT
