import numpy as np
import pytest

from ccsaa.certificate import ScenarioBudget
from ccsaa.lp import lp_solve
from ccsaa.saa import (ChanceProgramSpec, ScenarioSet, build_saa_lp, certify,
                       evaluate_outcomes)

from oracles import vertex_enumeration_lp


def toy_scenarios(rng, n_scen=10, n_assets=3):
    return ScenarioSet(rng.uniform(0.8, 1.3, size=(n_scen, n_assets)),
                       provenance="test")


class TestTypes:
    def test_scenario_set_validation(self):
        with pytest.raises(ValueError):
            ScenarioSet(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            ScenarioSet(np.array([[1.0, np.inf]]))
        s = ScenarioSet(np.ones((4, 2)))
        assert s.n_scenarios == 4 and s.n_assets == 2
        with pytest.raises(ValueError):
            s.returns[0, 0] = 2.0   # frozen storage

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ChanceProgramSpec(alpha=1.2, objective=[1.0, 1.0], cash_index=1)
        with pytest.raises(ValueError):
            ChanceProgramSpec(alpha=0.9, objective=[1.0, 1.0], cash_index=5)
        spec = ChanceProgramSpec(alpha=0.9, objective=[1.05, 1.0], cash_index=1)
        assert spec.n_assets == 2


class TestBuildSaaLp:
    def test_empty_subset_is_relaxed(self):
        rng = np.random.default_rng(0)
        sc = toy_scenarios(rng)
        spec = ChanceProgramSpec(0.9, [1.1, 1.05, 1.0], cash_index=2)
        m = build_saa_lp(sc, spec, subset=[])
        assert m.n_rows == 1
        sol = lp_solve(m)
        assert sol.objective_value == pytest.approx(1.1, abs=1e-9)

    def test_single_scenario_slack(self):
        sc = ScenarioSet(np.ones((1, 3)))
        spec = ChanceProgramSpec(0.9, [1.0, 1.0, 1.0])
        m = build_saa_lp(sc, spec)
        sol = lp_solve(m)
        assert sol.slack(1) == pytest.approx(-0.1, abs=1e-9)  # r.x - alpha = 0.1 over

    def test_three_scenario_optimum_matches_oracle(self):
        rng = np.random.default_rng(5)
        returns = rng.uniform(0.85, 1.25, size=(3, 3))
        sc = ScenarioSet(returns)
        spec = ChanceProgramSpec(0.95, returns.mean(axis=0))
        m = build_saa_lp(sc, spec)
        sol = lp_solve(m)
        rows = np.vstack([np.ones(3), returns])
        rels = ["="] + [">="] * 3
        rhs = np.array([1.0, 0.95, 0.95, 0.95])
        want, _ = vertex_enumeration_lp(spec.objective, rows, rels, rhs,
                                        np.zeros(3), np.full(3, np.inf))
        assert sol.objective_value == pytest.approx(want, abs=1e-8)

    def test_full_model_optimum_has_zero_violations(self):
        rng = np.random.default_rng(9)
        risky = rng.uniform(0.8, 1.3, size=(40, 3))
        sc = ScenarioSet(np.column_stack([risky, np.ones(40)]))  # cash column
        spec = ChanceProgramSpec(0.95, np.append(risky.mean(axis=0), 1.0),
                                 cash_index=3)
        sol = lp_solve(build_saa_lp(sc, spec))
        assert sol.status == "optimal"
        out = evaluate_outcomes(sol.x, sc, spec)
        assert out.violation_count == 0

    def test_dimension_mismatch(self):
        sc = ScenarioSet(np.ones((2, 3)))
        with pytest.raises(ValueError):
            build_saa_lp(sc, ChanceProgramSpec(0.9, [1.0, 1.0]))


class TestOutcomes:
    def test_all_cash(self):
        sc = ScenarioSet(np.column_stack([np.random.default_rng(1).uniform(0.5, 1.5, 20),
                                          np.ones(20)]))
        spec = ChanceProgramSpec(0.95, [1.1, 1.0], cash_index=1)
        out = evaluate_outcomes(np.array([0.0, 1.0]), sc, spec)
        assert np.allclose(out.values, -0.05)
        assert out.violation_count == 0

    def test_alpha_above_everything(self):
        rng = np.random.default_rng(2)
        sc = toy_scenarios(rng, n_scen=15)
        spec = ChanceProgramSpec(2.0, sc.returns.mean(axis=0))
        out = evaluate_outcomes(np.array([0.5, 0.25, 0.25]), sc, spec)
        assert out.violation_count == sc.n_scenarios

    def test_matches_double_loop(self):
        rng = np.random.default_rng(3)
        sc = toy_scenarios(rng, n_scen=25, n_assets=4)
        spec = ChanceProgramSpec(0.97, sc.returns.mean(axis=0))
        x = rng.dirichlet(np.ones(4))
        out = evaluate_outcomes(x, sc, spec)
        count = 0
        for i in range(sc.n_scenarios):
            o = spec.alpha - sum(sc.returns[i, j] * x[j] for j in range(4))
            assert out.values[i] == pytest.approx(o, abs=1e-12)
            count += o > 0
        assert out.violation_count == count

    def test_linear_in_alpha(self):
        rng = np.random.default_rng(4)
        sc = toy_scenarios(rng)
        x = rng.dirichlet(np.ones(3))
        base = ChanceProgramSpec(0.9, sc.returns.mean(axis=0))
        shift = ChanceProgramSpec(0.9 + 0.07, sc.returns.mean(axis=0))
        a = evaluate_outcomes(x, sc, base).values
        b = evaluate_outcomes(x, sc, shift).values
        assert np.allclose(b, a + 0.07, atol=1e-12)

    def test_ranking_stable_and_consistent(self):
        values_returns = np.array([[1.0], [0.8], [0.8], [1.2], [0.5]])
        sc = ScenarioSet(values_returns)
        spec = ChanceProgramSpec(0.9, [1.0])
        out = evaluate_outcomes(np.array([1.0]), sc, spec)
        # violated: scenarios 1, 2 (O=0.1 each) and 4 (O=0.4); ties by index
        assert list(out.ranked) == [4, 1, 2]
        assert list(out.ranked_all[:3]) == [4, 1, 2]
        assert out.violation_count == 3

    def test_permutation_invariance(self):
        rng = np.random.default_rng(6)
        sc = toy_scenarios(rng, n_scen=30)
        spec = ChanceProgramSpec(1.0, sc.returns.mean(axis=0))
        x = rng.dirichlet(np.ones(3))
        perm = rng.permutation(30)
        out = evaluate_outcomes(x, sc, spec)
        out_p = evaluate_outcomes(x, ScenarioSet(sc.returns[perm]), spec)
        assert np.allclose(np.sort(out.values), np.sort(out_p.values))
        assert out.violation_count == out_p.violation_count
        # ranked indices map through the permutation
        assert np.array_equal(perm[out_p.ranked], out.ranked) or \
            np.allclose(out.values[out.ranked], out_p.values[out_p.ranked])

    def test_dimension_mismatch(self):
        sc = ScenarioSet(np.ones((2, 3)))
        spec = ChanceProgramSpec(0.9, [1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            evaluate_outcomes(np.array([0.5, 0.5]), sc, spec)


class TestCertify:
    def test_huge_allowance(self):
        rng = np.random.default_rng(7)
        sc = toy_scenarios(rng, n_scen=10)
        spec = ChanceProgramSpec(0.9, sc.returns.mean(axis=0))
        budget = ScenarioBudget(10, 9, 1e-6)
        x = np.array([1.0, 0.0, 0.0])
        out = evaluate_outcomes(x, sc, spec)
        assert out.violation_count <= 9
        assert certify(x, sc, budget, spec)

    def test_zero_allowance(self):
        sc = ScenarioSet(np.array([[0.5, 1.0], [1.2, 1.0]]))
        spec = ChanceProgramSpec(0.9, [1.1, 1.0], cash_index=1)
        budget = ScenarioBudget(2, 0, 1e-6)
        assert not certify(np.array([1.0, 0.0]), sc, budget, spec)
        assert certify(np.array([0.0, 1.0]), sc, budget, spec)
