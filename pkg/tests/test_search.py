import numpy as np
import pytest

import helpers
from nsnet import oracle
from nsnet.cnf import CnfFormula, evaluate
from nsnet.gen import gen_random_3sat
from nsnet.search import SlsConfig, SlsResult, decimate, round_marginals, sls_solve


class TestRounding:
    def test_oracle_marginals_of_running_example(self):
        assignment = round_marginals(oracle.exact_marginals(helpers.F0))
        assert assignment == (1, 1, 1)
        assert evaluate(helpers.F0, assignment)

    def test_backbone(self):
        assert round_marginals(np.array([1.0])) == (1,)
        assert round_marginals(np.array([0.0])) == (0,)

    def test_half_rounds_up(self):
        assert round_marginals(np.array([0.5, 0.5])) == (1, 1)


class TestSls:
    def test_guided_init_solves_with_zero_flips(self):
        result = sls_solve(helpers.F0, SlsConfig(seed=0), initial=(1, 1, 1))
        assert result.solved
        assert result.flips_total == 0
        assert result.tries_used == 1
        assert result.assignment == (1, 1, 1)

    def test_two_unit_clauses_need_exactly_two_flips(self):
        formula = CnfFormula(2, ((1,), (2,)))
        result = sls_solve(formula, SlsConfig(seed=5), initial=(0, 0))
        assert result.solved
        assert result.flips_total == 2

    def test_unsatisfiable_returns_unsolved(self):
        formula = CnfFormula(1, ((1,), (-1,)))
        result = sls_solve(formula, SlsConfig(max_tries=3, max_flips=50, seed=1))
        assert not result.solved
        assert result.assignment is None
        assert result.tries_used == 3

    def test_empty_clause_set_trivially_solved(self):
        result = sls_solve(CnfFormula(3, ()), SlsConfig(seed=0))
        assert result.solved and result.flips_total == 0

    def test_unsat_marker_is_unsolvable(self):
        result = sls_solve(CnfFormula(1, ((),)), SlsConfig(seed=0))
        assert not result.solved

    def test_solved_results_verify(self):
        rng = np.random.default_rng(3)
        solved = 0
        for seed in range(25):
            formula = gen_random_3sat(12, seed=seed)
            result = sls_solve(formula, SlsConfig(max_tries=20, seed=seed))
            if result.solved:
                assert evaluate(formula, result.assignment)
                solved += 1
        assert solved > 0

    def test_deterministic(self):
        formula = gen_random_3sat(15, seed=2)
        a = sls_solve(formula, SlsConfig(seed=7))
        b = sls_solve(formula, SlsConfig(seed=7))
        assert a == b

    def test_monotone_budget(self):
        # raising the budgets never converts solved to unsolved
        for seed in range(15):
            formula = gen_random_3sat(10, seed=seed)
            small = sls_solve(formula, SlsConfig(max_tries=5, max_flips=200, seed=seed))
            big = sls_solve(formula, SlsConfig(max_tries=10, max_flips=400, seed=seed))
            if small.solved:
                assert big.solved

    def test_flip_counters_consistent(self):
        formula = gen_random_3sat(10, seed=4)
        result = sls_solve(formula, SlsConfig(max_tries=50, seed=11))
        assert result.flips_last_try <= result.flips_total


class TestDecimate:
    def test_running_example_trace(self):
        # ties at |b1 - b0| = 0.5 for x1 and x3 break to x1; the residual
        # (x2 or x3) gives 2/3 each, fixing x2; x3 is then free and the tie
        # rule sends it to 1
        assignment = decimate(helpers.F0, oracle.exact_marginals)
        assert assignment == (1, 1, 1)
        assert evaluate(helpers.F0, assignment)

    def test_unit_clause_fixed_first(self):
        formula = CnfFormula(2, ((1,), (1, 2)))
        assignment = decimate(formula, oracle.exact_marginals)
        assert assignment[0] == 1

    def test_oracle_provider_always_succeeds(self):
        rng = np.random.default_rng(9)
        count = 0
        while count < 40:
            n = int(rng.integers(3, 14))
            formula = helpers.random_formula(rng, n, int(rng.integers(2, 3 * n)))
            if not oracle.satisfiable(formula):
                continue
            count += 1
            assignment = decimate(formula, oracle.exact_marginals)
            assert assignment is not None
            assert evaluate(formula, assignment)

    def test_unit_propagation_variant(self):
        rng = np.random.default_rng(10)
        count = 0
        while count < 15:
            n = int(rng.integers(3, 12))
            formula = helpers.random_formula(rng, n, int(rng.integers(2, 3 * n)))
            if not oracle.satisfiable(formula):
                continue
            count += 1
            assignment = decimate(formula, oracle.exact_marginals, unit_propagate=True)
            assert assignment is not None
            assert evaluate(formula, assignment)

    def test_provider_failure_yields_none(self):
        def broken(formula):
            raise RuntimeError("no marginals here")

        assert decimate(helpers.F0, broken) is None

    def test_unsat_input_yields_none(self):
        formula = CnfFormula(2, ((1,), (-1,)))
        # the oracle provider raises on the unsatisfiable residual
        assert decimate(formula, oracle.exact_marginals) is None
