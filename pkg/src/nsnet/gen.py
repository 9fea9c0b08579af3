"""Reproducible synthetic SAT instance generators.

Three distributions at desk scale: random 3-SAT at the phase-transition
clause ratio, an SR-style incremental pair construction (satisfiable member
kept), and a community-attachment (CA) pseudo-industrial generator.

Randomness comes from numpy's counter-based Philox generator keyed directly
by the instance seed, so every formula is a pure function of (config, seed).
Per-instance seeds for a corpus are derived from the master seed by the
documented mixing rule in :func:`derive_seed`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from . import oracle
from .cnf import Clause, CnfFormula

log = logging.getLogger(__name__)

DISTRIBUTIONS = ("random3sat", "sr", "ca")

# golden-ratio increment, the splitmix64 stream constant
_SEED_MIX = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, index: int) -> int:
    """Per-instance seed: master + (index+1) * golden-ratio constant, mod 2^64."""
    return (master_seed + (index + 1) * _SEED_MIX) & _MASK64


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


@dataclass(frozen=True)
class GenConfig:
    """Generator settings; ranges are inclusive (lo, hi) pairs."""

    distribution: str = "random3sat"
    num_vars: int | tuple[int, int] = 20
    seed: int = 0
    ca_communities: tuple[int, int] = (3, 10)
    ca_modularity: tuple[float, float] = (0.7, 0.9)
    sr_max_clause_len: int = 4

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        lo, hi = self.var_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad num_vars range ({lo}, {hi})")
        clo, chi = self.ca_communities
        if clo < 1 or chi < clo:
            raise ValueError(f"bad community range ({clo}, {chi})")
        qlo, qhi = self.ca_modularity
        if not (0.0 < qlo <= qhi <= 1.0):
            raise ValueError(f"bad modularity range ({qlo}, {qhi})")
        if self.sr_max_clause_len < 1:
            raise ValueError("sr_max_clause_len must be >= 1")

    @property
    def var_range(self) -> tuple[int, int]:
        if isinstance(self.num_vars, int):
            return (self.num_vars, self.num_vars)
        return self.num_vars


def clause_count_3sat(n: int) -> int:
    """Phase-transition clause count 4.258*n + 58.26*n^(-2/3), rounded.

    Round-to-nearest with ties away from zero (the value is always positive,
    so ties round up).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return int(math.floor(4.258 * n + 58.26 * n ** (-2.0 / 3.0) + 0.5))


def _random_clause(rng: np.random.Generator, n: int, k: int) -> Clause:
    """k distinct variables drawn uniformly, each negated with prob 1/2."""
    variables = rng.choice(n, size=k, replace=False) + 1
    signs = rng.integers(0, 2, size=k)
    return tuple(int(v) if s else -int(v) for v, s in zip(variables, signs))


def gen_random_3sat(n: int, seed: int) -> CnfFormula:
    """Random 3-SAT at the phase-transition ratio; not filtered for SAT."""
    if n < 3:
        raise ValueError("random 3-SAT needs n >= 3")
    rng = make_rng(seed)
    m = clause_count_3sat(n)
    return CnfFormula(n, tuple(_random_clause(rng, n, 3) for _ in range(m)))


def gen_sr(n: int, seed: int, max_clause_len: int = 4) -> CnfFormula:
    """SR-style construction: add random clauses until the formula becomes
    unsatisfiable, then return it without the final clause.

    Clause length is 1 + Bernoulli(0.7) + a geometric tail (p=0.4, counting
    failures, so the tail starts at 0), truncated to ``max_clause_len`` and
    to n. The result is always satisfiable: it is the satisfiable member of
    the SR pair, the unsatisfiable completion being discarded.
    """
    if n < 2:
        raise ValueError("SR generation needs n >= 2")
    rng = make_rng(seed)
    clauses: list[Clause] = []
    # generous cap so a pathological stream cannot loop forever
    for _ in range(50 * n + 1000):
        k = 1 + int(rng.random() < 0.7) + int(rng.geometric(0.4)) - 1
        k = min(k, max_clause_len, n)
        clause = _random_clause(rng, n, k)
        candidate = CnfFormula(n, tuple(clauses) + (clause,))
        if not oracle.satisfiable(candidate):
            break
        clauses.append(clause)
    return CnfFormula(n, tuple(clauses))


def gen_ca(n: int, seed: int, config: GenConfig | None = None) -> CnfFormula:
    """Community-attachment 3-SAT: clauses are intra-community with
    probability Q, otherwise spread across three distinct communities.

    Variables are partitioned into near-equal contiguous communities. The
    community count is drawn from the configured range, capped at n // 3 so
    every community can host a 3-variable clause; Q is drawn uniformly from
    the configured modularity range.
    """
    config = config or GenConfig(distribution="ca")
    rng = make_rng(seed)
    clo, chi = config.ca_communities
    chi = min(chi, n // 3)
    if chi < clo:
        raise ValueError(
            f"fewer variables than communities support: n={n} cannot host "
            f">= {clo} communities of size 3"
        )
    c = int(rng.integers(clo, chi + 1))
    qlo, qhi = config.ca_modularity
    q = qlo + (qhi - qlo) * float(rng.random())

    bounds = np.linspace(0, n, c + 1).astype(int)
    communities = [np.arange(bounds[j], bounds[j + 1]) + 1 for j in range(c)]

    clauses: list[Clause] = []
    for _ in range(clause_count_3sat(n)):
        if rng.random() < q:
            members = communities[int(rng.integers(c))]
            variables = rng.choice(members, size=3, replace=False)
        else:
            picked = rng.choice(c, size=3, replace=False)
            variables = np.array(
                [communities[j][int(rng.integers(len(communities[j])))] for j in picked]
            )
        signs = rng.integers(0, 2, size=3)
        clauses.append(
            tuple(int(v) if s else -int(v) for v, s in zip(variables, signs))
        )
    return CnfFormula(n, tuple(clauses))


def generate(config: GenConfig, index: int) -> CnfFormula:
    """Instance ``index`` of the corpus described by ``config``."""
    seed = derive_seed(config.seed, index)
    lo, hi = config.var_range
    if lo == hi:
        n = lo
    else:
        n = lo + int(make_rng(seed ^ _SEED_MIX).integers(hi - lo + 1))
    if config.distribution == "random3sat":
        return gen_random_3sat(n, seed)
    if config.distribution == "sr":
        return gen_sr(n, seed, config.sr_max_clause_len)
    return gen_ca(n, seed, config)


def filter_satisfiable(
    formulas: Iterable[CnfFormula],
    checker: Callable[[CnfFormula], bool] = oracle.satisfiable,
) -> Iterator[CnfFormula]:
    """Pass through only satisfiable instances, preserving order.

    ``checker`` must be a complete decision procedure. An instance on which
    the checker exhausts its budget is dropped with a warning.
    """
    for i, formula in enumerate(formulas):
        try:
            if checker(formula):
                yield formula
        except oracle.BudgetExceededError as exc:
            log.warning("dropping instance %d: %s", i, exc)
