"""CNF formulas: representation, DIMACS I/O, evaluation, random 3-SAT generation.

Literals use the DIMACS convention throughout: a literal is a nonzero signed
integer, ``+v`` for variable ``v`` and ``-v`` for its negation. Variables are
1-indexed in every public interface.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Clause = tuple[int, ...]
Assignment = Sequence[bool]


class DimacsError(ValueError):
    """Raised when a DIMACS CNF stream violates the format."""


class DimacsWarning(UserWarning):
    """Non-fatal oddity in a parsed DIMACS file (e.g. duplicate variable in a clause)."""


@dataclass(frozen=True)
class CnfFormula:
    """A CNF formula: a conjunction of clauses over ``num_vars`` variables.

    Immutable after construction. Clauses are tuples of signed literals;
    every literal's variable must lie in [1, num_vars]. Duplicate variables
    inside a clause are tolerated (real DIMACS files contain them) but the
    generator never produces them.
    """

    num_vars: int
    clauses: tuple[Clause, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.num_vars < 0:
            raise ValueError(f"num_vars must be non-negative, got {self.num_vars}")
        object.__setattr__(self, "clauses", tuple(tuple(cl) for cl in self.clauses))
        for clause in self.clauses:
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(
                        f"literal {lit} out of range for {self.num_vars} variables"
                    )

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


def parse_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF text into a :class:`CnfFormula`.

    Accepts ``c`` comment lines, one ``p cnf <vars> <clauses>`` header, and
    zero-terminated clauses (which may span lines). The clause count must
    match the header. Duplicate variables within a clause trigger a
    :class:`DimacsWarning` but are kept.
    """
    header: tuple[int, int] | None = None
    tokens: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("p"):
            if header is not None:
                raise DimacsError(f"line {lineno}: duplicate problem header")
            fields = stripped.split()
            if len(fields) != 4 or fields[0] != "p" or fields[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {stripped!r}")
            try:
                nv, nc = int(fields[2]), int(fields[3])
            except ValueError as exc:
                raise DimacsError(f"line {lineno}: malformed header {stripped!r}") from exc
            if nv < 0 or nc < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            header = (nv, nc)
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause data before 'p cnf' header")
        try:
            tokens.extend(int(tok) for tok in stripped.split())
        except ValueError as exc:
            raise DimacsError(f"line {lineno}: non-integer token") from exc

    if header is None:
        raise DimacsError("empty input: no 'p cnf' header found")
    num_vars, declared_clauses = header

    clauses: list[Clause] = []
    current: list[int] = []
    for lit in tokens:
        if lit == 0:
            clauses.append(tuple(current))
            current = []
            continue
        if abs(lit) > num_vars:
            raise DimacsError(
                f"literal {lit} exceeds declared variable count {num_vars}"
            )
        current.append(lit)
    if current:
        raise DimacsError("last clause is missing its terminating 0")
    if len(clauses) != declared_clauses:
        raise DimacsError(
            f"header declares {declared_clauses} clauses but {len(clauses)} were found"
        )

    for i, clause in enumerate(clauses):
        seen = {abs(lit) for lit in clause}
        if len(seen) != len(clause):
            warnings.warn(
                f"clause {i + 1} repeats a variable: {clause}", DimacsWarning, stacklevel=2
            )

    return CnfFormula(num_vars=num_vars, clauses=tuple(clauses))


def write_dimacs(formula: CnfFormula) -> str:
    """Serialize a formula as canonical DIMACS CNF (LF line endings).

    ``parse_dimacs`` is a left inverse of this function.
    """
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    for clause in formula.clauses:
        lines.append(" ".join(str(lit) for lit in clause) + " 0")
    return "\n".join(lines) + "\n"


def evaluate(formula: CnfFormula, assignment: Assignment) -> bool:
    """True iff every clause has at least one literal made true by ``assignment``.

    The empty formula is vacuously true; an empty clause is unsatisfiable.
    ``assignment[v-1]`` is the value of variable ``v``.
    """
    if len(assignment) != formula.num_vars:
        raise ValueError(
            f"assignment length {len(assignment)} != num_vars {formula.num_vars}"
        )
    for clause in formula.clauses:
        for lit in clause:
            if assignment[abs(lit) - 1] == (lit > 0):
                break
        else:
            return False
    return True


def generate_random_3sat(num_vars: int, num_clauses: int, seed: int) -> CnfFormula:
    """Generate a uniform random 3-SAT instance.

    Each clause draws 3 distinct variables uniformly without replacement and
    negates each independently with probability 1/2. Deterministic given
    ``seed``; the stream is numpy's PCG64 (``np.random.default_rng``), so
    instances are bit-reproducible across platforms.
    """
    if num_vars < 3:
        raise ValueError(f"need at least 3 variables for 3-SAT, got {num_vars}")
    if num_clauses < 0:
        raise ValueError(f"num_clauses must be non-negative, got {num_clauses}")
    rng = np.random.default_rng(seed)
    clauses = []
    for _ in range(num_clauses):
        variables = rng.choice(num_vars, size=3, replace=False) + 1
        signs = rng.integers(0, 2, size=3)
        clauses.append(tuple(int(v) if s else -int(v) for v, s in zip(variables, signs)))
    return CnfFormula(num_vars=num_vars, clauses=tuple(clauses))


def all_assignments(num_vars: int) -> Iterable[tuple[bool, ...]]:
    """All 2^n assignments in lexicographic order (False < True, x1 most significant)."""
    for index in range(1 << num_vars):
        yield tuple(
            bool((index >> (num_vars - 1 - j)) & 1) for j in range(num_vars)
        )
