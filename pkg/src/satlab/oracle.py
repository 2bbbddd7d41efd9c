"""Exact satisfiability oracles: exhaustive enumeration and DPLL.

These label training data and serve as ground truth for everything else in
the package, so both solvers are deterministic and never report a wrong
answer; resource exhaustion raises instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cnf import CnfFormula, evaluate

SAT = "SAT"
UNSAT = "UNSAT"

BRUTE_FORCE_VAR_LIMIT = 24
_CHUNK_BITS = 16


class SolverBudgetExceeded(RuntimeError):
    """DPLL ran out of its decision budget before reaching an answer."""


@dataclass(frozen=True)
class SatResult:
    """Outcome of an exact solver: status plus a model when satisfiable."""

    status: str
    model: tuple[bool, ...] | None = None

    @property
    def is_sat(self) -> bool:
        return self.status == SAT


def brute_force_sat(formula: CnfFormula, limit: int = BRUTE_FORCE_VAR_LIMIT) -> SatResult:
    """Decide satisfiability by exhaustive enumeration.

    Returns the first satisfying assignment in lexicographic order
    (False < True, variable 1 most significant). Assignments are checked in
    vectorized chunks so the default limit of 24 variables stays tractable.
    """
    n = formula.num_vars
    if n > limit:
        raise ValueError(f"brute force limited to {limit} variables, got {n}")
    if not formula.clauses:
        return SatResult(SAT, tuple([False] * n))

    bit_shift = n - 1 - np.arange(n)
    chunk = 1 << min(n, _CHUNK_BITS)
    for start in range(0, 1 << n, chunk):
        indices = np.arange(start, start + chunk, dtype=np.int64)
        assigns = ((indices[:, None] >> bit_shift) & 1).astype(bool)
        sat = np.ones(chunk, dtype=bool)
        for clause in formula.clauses:
            clause_sat = np.zeros(chunk, dtype=bool)
            for lit in clause:
                clause_sat |= assigns[:, abs(lit) - 1] == (lit > 0)
            sat &= clause_sat
            if not sat.any():
                break
        if sat.any():
            first = int(np.argmax(sat))
            return SatResult(SAT, tuple(bool(b) for b in assigns[first]))
    return SatResult(UNSAT)


class _DpllState:
    """Counter-based clause state with a trail for O(1) backtracking."""

    def __init__(self, formula: CnfFormula):
        self.n = formula.num_vars
        # Normalize: drop duplicate literals and tautological clauses so each
        # clause mentions each variable at most once (counters rely on this).
        self.clauses = []
        for cl in formula.clauses:
            lits = set(cl)
            if any(-lit in lits for lit in lits):
                continue
            self.clauses.append(sorted(lits, key=abs))
        self.values = [0] * (self.n + 1)  # 0 unassigned, +1 true, -1 false
        self.pos_occ: list[list[int]] = [[] for _ in range(self.n + 1)]
        self.neg_occ: list[list[int]] = [[] for _ in range(self.n + 1)]
        for ci, clause in enumerate(self.clauses):
            for lit in clause:
                (self.pos_occ if lit > 0 else self.neg_occ)[abs(lit)].append(ci)
        self.sat_count = [0] * len(self.clauses)
        self.unassigned = [len(cl) for cl in self.clauses]
        self.trail: list[int] = []

    def assign(self, var: int, value: bool) -> bool:
        """Set a variable; returns False on conflict (an active clause emptied)."""
        self.values[var] = 1 if value else -1
        self.trail.append(var)
        sat_occ = self.pos_occ[var] if value else self.neg_occ[var]
        for ci in sat_occ:
            self.sat_count[ci] += 1
        conflict = False
        for ci in self.pos_occ[var] + self.neg_occ[var]:
            self.unassigned[ci] -= 1
            if self.sat_count[ci] == 0 and self.unassigned[ci] == 0:
                conflict = True
        return not conflict

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            var = self.trail.pop()
            value = self.values[var] > 0
            self.values[var] = 0
            sat_occ = self.pos_occ[var] if value else self.neg_occ[var]
            for ci in sat_occ:
                self.sat_count[ci] -= 1
            for ci in self.pos_occ[var] + self.neg_occ[var]:
                self.unassigned[ci] += 1

    def find_unit(self) -> int | None:
        for ci, clause in enumerate(self.clauses):
            if self.sat_count[ci] == 0 and self.unassigned[ci] == 1:
                for lit in clause:
                    if self.values[abs(lit)] == 0:
                        return lit
        return None

    def propagate(self) -> bool:
        """Unit propagation plus pure-literal elimination to a fixpoint."""
        while True:
            lit = self.find_unit()
            if lit is not None:
                if not self.assign(abs(lit), lit > 0):
                    return False
                continue
            pure = self._find_pure()
            if pure is None:
                return True
            if not self.assign(abs(pure), pure > 0):
                return False

    def _find_pure(self) -> int | None:
        seen_pos = [False] * (self.n + 1)
        seen_neg = [False] * (self.n + 1)
        for ci, clause in enumerate(self.clauses):
            if self.sat_count[ci] > 0:
                continue
            for lit in clause:
                if self.values[abs(lit)] == 0:
                    (seen_pos if lit > 0 else seen_neg)[abs(lit)] = True
        for var in range(1, self.n + 1):
            if self.values[var] == 0 and (seen_pos[var] != seen_neg[var]):
                return var if seen_pos[var] else -var
        return None

    def all_satisfied(self) -> bool:
        return all(c > 0 for c in self.sat_count)

    def pick_branch_var(self) -> int | None:
        """Most frequent unassigned variable among unresolved clauses, lowest index on ties."""
        counts = [0] * (self.n + 1)
        for ci, clause in enumerate(self.clauses):
            if self.sat_count[ci] > 0:
                continue
            for lit in clause:
                if self.values[abs(lit)] == 0:
                    counts[abs(lit)] += 1
        best, best_count = None, 0
        for var in range(1, self.n + 1):
            if counts[var] > best_count:
                best, best_count = var, counts[var]
        return best

    def model(self) -> tuple[bool, ...]:
        # Unconstrained variables default to False.
        return tuple(self.values[v] > 0 for v in range(1, self.n + 1))


def dpll_sat(formula: CnfFormula, max_decisions: int | None = None) -> SatResult:
    """DPLL with unit propagation and pure-literal elimination.

    Branches on the most frequent unassigned variable over unresolved
    clauses (ties broken toward the lowest index), trying True before
    False. Fully deterministic. ``max_decisions``, when given, bounds the
    number of branching decisions; exceeding it raises
    :class:`SolverBudgetExceeded` rather than returning a wrong answer.
    """
    if any(len(cl) == 0 for cl in formula.clauses):
        return SatResult(UNSAT)
    state = _DpllState(formula)
    decisions = 0
    # Each stack frame: (trail mark before the decision, variable, next value to try).
    stack: list[tuple[int, int, bool | None]] = []

    ok = state.propagate()
    while True:
        if ok:
            if state.all_satisfied():
                return SatResult(SAT, state.model())
            var = state.pick_branch_var()
            if var is None:
                # No active clause mentions an unassigned variable.
                return SatResult(SAT, state.model())
            if max_decisions is not None and decisions >= max_decisions:
                raise SolverBudgetExceeded(
                    f"exceeded {max_decisions} decisions on {formula.num_vars} vars"
                )
            decisions += 1
            stack.append((len(state.trail), var, False))
            ok = state.assign(var, True) and state.propagate()
        else:
            while stack:
                mark, var, next_value = stack.pop()
                state.undo_to(mark)
                if next_value is not None:
                    stack.append((mark, var, None))
                    ok = state.assign(var, next_value) and state.propagate()
                    break
            else:
                return SatResult(UNSAT)
