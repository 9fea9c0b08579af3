"""Shared test utilities: random formula builders, brute-force references,
and formula transformations for the equivariance suites.

The brute-force functions here are deliberately written as direct
enumerations, independent of the library's factorized implementations, so
they can serve as oracles for them.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from nsnet.cnf import CnfFormula

# the running example: (x1 or not x2) and (x1 or x3) and (not x1 or x2 or x3)
F0 = CnfFormula(3, ((1, -2), (1, 3), (-1, 2, 3)))


def random_formula(rng, n, m, min_len=1, max_len=4):
    """Random CNF with distinct variables per clause. Not necessarily SAT."""
    clauses = []
    for _ in range(m):
        k = int(rng.integers(min_len, min(max_len, n) + 1))
        variables = rng.choice(n, size=k, replace=False) + 1
        signs = rng.integers(0, 2, size=k)
        clauses.append(tuple(int(v) if s else -int(v) for v, s in zip(variables, signs)))
    return CnfFormula(n, tuple(clauses))


def random_tree_formula(rng, n, unit_prob=0.15, max_len=3):
    """Forest-structured CNF: every clause introduces fresh variables and
    touches at most one variable already in the structure, so the factor
    graph is acyclic. Unit clauses only ever constrain fresh variables,
    which keeps the formula satisfiable."""
    clauses = []
    used = [1]
    fresh = list(range(2, n + 1))
    while fresh:
        if rng.random() < unit_prob:
            v = fresh.pop(0)
            used.append(v)
            clauses.append((int(v) if rng.random() < 0.5 else -int(v),))
            continue
        k = int(rng.integers(2, max_len + 1))
        take = min(k - 1, len(fresh))
        vs = [used[int(rng.integers(len(used)))]] + [fresh.pop(0) for _ in range(take)]
        used.extend(vs[1:])
        signs = rng.integers(0, 2, size=len(vs))
        clauses.append(tuple(int(v) if s else -int(v) for v, s in zip(vs, signs)))
    return CnfFormula(n, tuple(clauses))


def brute_model_count(formula: CnfFormula) -> int:
    """Model count by raw truth-table enumeration (itertools, no numpy)."""
    count = 0
    for bits in itertools.product((0, 1), repeat=formula.num_vars):
        ok = True
        for clause in formula.clauses:
            if not any(bits[abs(l) - 1] == (1 if l > 0 else 0) for l in clause):
                ok = False
                break
        if ok:
            count += 1
    return count


def permute_formula(formula, var_perm=None, clause_perm=None):
    """Apply a variable relabeling and/or clause reordering.

    ``var_perm[i]`` is the new 0-based index of old variable i+1;
    ``clause_perm[a]`` is the old index of the clause placed at position a.
    """
    clauses = list(formula.clauses)
    if var_perm is not None:
        clauses = [
            tuple(
                int(np.sign(l)) * (var_perm[abs(l) - 1] + 1) for l in clause
            )
            for clause in clauses
        ]
    if clause_perm is not None:
        clauses = [clauses[a] for a in clause_perm]
    return CnfFormula(formula.num_vars, tuple(clauses))


def shuffle_within_clauses(formula, rng):
    """Permute literal order inside every clause."""
    clauses = []
    for clause in formula.clauses:
        order = rng.permutation(len(clause))
        clauses.append(tuple(clause[j] for j in order))
    return CnfFormula(formula.num_vars, tuple(clauses))


def negate_variable(formula, var):
    """Flip the polarity of every occurrence of one variable."""
    return CnfFormula(
        formula.num_vars,
        tuple(
            tuple(-l if abs(l) == var else l for l in clause)
            for clause in formula.clauses
        ),
    )


def brute_clause_message(others, satisfying: bool) -> float:
    """Scalar BP clause message by enumerating satisfying completions.

    ``others`` holds (log_sat, log_unsat) pairs for the other variables of
    the clause. Returns -inf when no satisfying completion exists.
    """
    terms = []
    for values in itertools.product((0, 1), repeat=len(others)):
        # value 1 means "this literal satisfies the clause"
        if satisfying or any(values):
            total = sum(
                pair[0] if v else pair[1] for pair, v in zip(others, values)
            )
            terms.append(total)
    if not terms:
        return -math.inf
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


def brute_satisfying_lse(graph, v2c, e_target, value):
    """Eq.-style clause aggregation for one slot by explicit enumeration.

    Coordinatewise LSE of sum_j v2c[e_j, x_j] over all assignments of the
    clause's other variables such that the clause is satisfied when the
    target variable takes ``value``. Returns None when the completion set
    is empty (dissatisfying branch of a unit clause).
    """
    a = int(graph.inc_clause[e_target])
    lo, hi = int(graph.clause_start[a]), int(graph.clause_start[a + 1])
    others = [e for e in range(lo, hi) if e != e_target]
    target_sat = value == graph.sat_value[e_target]
    rows = []
    for values in itertools.product((0, 1), repeat=len(others)):
        if not (target_sat or any(
            values[j] == graph.sat_value[e] for j, e in enumerate(others)
        )):
            continue
        total = np.zeros(v2c.shape[2])
        for j, e in enumerate(others):
            total = total + v2c[e, values[j]]
        rows.append(total)
    if not rows:
        return None
    stacked = np.stack(rows)
    top = stacked.max(axis=0)
    return top + np.log(np.exp(stacked - top).sum(axis=0))
