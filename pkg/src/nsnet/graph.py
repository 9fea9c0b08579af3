"""Bipartite factor-graph encoding of CNF formulas.

Each variable contributes two assignment nodes (value 0 and value 1), each
clause one node. A literal occurrence is an *incidence*; every incidence
carries two value slots, of which exactly one is *satisfying* (the value
that agrees with the literal's polarity). Messages and edge embeddings are
stored as flat arrays indexed by (incidence, value), one array per
direction, so belief propagation and the neural model share the indexing.

Incidences are ordered clause by clause, literals in clause order, which
makes the layout deterministic and lets equivariance tests compare permuted
runs slot by slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cnf import CnfFormula

DEFAULT_FACTOR_ENUM_CAP = 10


@dataclass(frozen=True)
class EnumPlan:
    """Flat index arrays enumerating the satisfying assignments per clause.

    Row r is one satisfying assignment of one clause. Flat element f says
    that slot ``(flat_slot[f], flat_value[f])`` participates in row
    ``flat_row[f]``, so a per-row sum is one scatter-add over the flat
    arrays.
    """

    num_rows: int
    row_clause: np.ndarray  # (R,)  clause index of each row
    row_start: np.ndarray  # (m+1,) rows of clause a are row_start[a]:row_start[a+1]
    flat_row: np.ndarray  # (F,)
    flat_slot: np.ndarray  # (F,)  incidence index
    flat_value: np.ndarray  # (F,)  value of that variable in the row


@dataclass(frozen=True)
class FactorGraph:
    """Flat incidence arrays plus per-variable and per-clause adjacency."""

    num_vars: int
    num_clauses: int
    inc_var: np.ndarray  # (E,) 0-based variable index per incidence
    inc_clause: np.ndarray  # (E,) 0-based clause index per incidence
    sat_value: np.ndarray  # (E,) value in {0,1} that satisfies the clause
    clause_start: np.ndarray  # (m+1,) incidences of clause a are start[a]:start[a+1]
    var_incidences: tuple[np.ndarray, ...]  # per variable, its incidence ids
    _enum_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_incidences(self) -> int:
        return len(self.inc_var)

    @property
    def unsat_value(self) -> np.ndarray:
        return 1 - self.sat_value

    @property
    def clause_len(self) -> np.ndarray:
        return np.diff(self.clause_start)

    @property
    def var_degree(self) -> np.ndarray:
        return np.bincount(self.inc_var, minlength=self.num_vars)

    def satisfying_enumeration(self, cap: int = DEFAULT_FACTOR_ENUM_CAP) -> EnumPlan:
        """Enumeration plan over satisfying clause assignments.

        For a clause of length L the 2^L - 1 satisfying assignments are
        listed in increasing order of the value code (bit j = value of the
        clause's j-th literal position), skipping the one all-dissatisfying
        code. Raises on clauses longer than ``cap`` (2^L blowup guard).
        """
        if cap in self._enum_cache:
            return self._enum_cache[cap]
        lens = self.clause_len
        if len(lens) and int(lens.max()) > cap:
            raise ValueError(
                f"clause length {int(lens.max())} exceeds enumeration cap {cap}"
            )
        row_clause: list[int] = []
        flat_row: list[int] = []
        flat_slot: list[int] = []
        flat_value: list[int] = []
        row_start = [0]
        r = 0
        for a in range(self.num_clauses):
            lo, hi = int(self.clause_start[a]), int(self.clause_start[a + 1])
            slots = range(lo, hi)
            length = hi - lo
            unsat_code = 0
            for j, e in enumerate(slots):
                unsat_code |= int(1 - self.sat_value[e]) << j
            for code in range(1 << length):
                if code == unsat_code:
                    continue
                row_clause.append(a)
                for j, e in enumerate(slots):
                    flat_row.append(r)
                    flat_slot.append(e)
                    flat_value.append((code >> j) & 1)
                r += 1
            row_start.append(r)
        plan = EnumPlan(
            num_rows=r,
            row_clause=np.asarray(row_clause, dtype=np.int64),
            row_start=np.asarray(row_start, dtype=np.int64),
            flat_row=np.asarray(flat_row, dtype=np.int64),
            flat_slot=np.asarray(flat_slot, dtype=np.int64),
            flat_value=np.asarray(flat_value, dtype=np.int64),
        )
        self._enum_cache[cap] = plan
        return plan

    def dump_edges(self) -> str:
        """Debug text dump, one line per value slot: `var value clause sat|unsat`.

        Variables and clauses are 1-based here, matching DIMACS numbering.
        """
        lines = []
        for e in range(self.num_incidences):
            for value in (0, 1):
                tag = "sat" if value == self.sat_value[e] else "unsat"
                lines.append(
                    f"{self.inc_var[e] + 1} {value} {self.inc_clause[e] + 1} {tag}"
                )
        return "\n".join(lines) + ("\n" if lines else "")


def build_factor_graph(formula: CnfFormula) -> FactorGraph:
    """Build the bipartite encoding; the formula must be normalized.

    Raises on duplicate variable occurrences within a clause, tautological
    clauses, and empty clauses (no factor-graph semantics for those).
    """
    inc_var: list[int] = []
    inc_clause: list[int] = []
    sat_value: list[int] = []
    clause_start = [0]
    for a, clause in enumerate(formula.clauses):
        if len(clause) == 0:
            raise ValueError("cannot build a factor graph from an empty clause")
        seen = set()
        for lit in clause:
            v = abs(lit)
            if v in seen:
                raise ValueError(
                    f"clause {a + 1} mentions variable {v} twice; normalize first"
                )
            seen.add(v)
            inc_var.append(v - 1)
            inc_clause.append(a)
            sat_value.append(1 if lit > 0 else 0)
        clause_start.append(len(inc_var))

    inc_var_arr = np.asarray(inc_var, dtype=np.int64)
    by_var = np.argsort(inc_var_arr, kind="stable")
    counts = np.bincount(inc_var_arr, minlength=formula.num_vars)
    var_incidences = tuple(np.split(by_var, np.cumsum(counts)[:-1]))
    return FactorGraph(
        num_vars=formula.num_vars,
        num_clauses=formula.num_clauses,
        inc_var=inc_var_arr,
        inc_clause=np.asarray(inc_clause, dtype=np.int64),
        sat_value=np.asarray(sat_value, dtype=np.int64),
        clause_start=np.asarray(clause_start, dtype=np.int64),
        var_incidences=var_incidences,
    )
