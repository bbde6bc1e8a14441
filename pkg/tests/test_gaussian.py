import numpy as np
import pytest

from ccsaa._normal import norm_cdf
from ccsaa.errors import ConfigError, NotPositiveSemidefinite
from ccsaa.gaussian import (GaussianModel, cholesky, inv_norm_cdf,
                            sample_scenarios, solve_gaussian_exact)
from ccsaa.mip import SemiContinuousSpec

from oracles import normal_quantile_bisect


class TestInvNormCdf:
    def test_median(self):
        assert inv_norm_cdf(0.5) == 0.0

    def test_reference_value(self):
        assert inv_norm_cdf(0.95) == pytest.approx(1.6448536269514729, abs=1e-9)

    def test_symmetry(self):
        for p in (0.01, 0.2, 0.43, 0.77, 0.999):
            assert abs(inv_norm_cdf(p) + inv_norm_cdf(1 - p)) <= 1e-12

    def test_round_trip_accuracy(self):
        rng = np.random.default_rng(0)
        ps = np.concatenate([rng.uniform(1e-12, 1 - 1e-12, 2000),
                             [1e-10, 1e-6, 1e-3, 0.999999, 1 - 1e-9]])
        for p in ps:
            z = inv_norm_cdf(float(p))
            assert abs(norm_cdf(z) - p) <= 1e-9

    def test_against_bisection_oracle(self):
        for p in (0.001, 0.025, 0.3, 0.5, 0.75, 0.95, 0.9999):
            assert inv_norm_cdf(p) == pytest.approx(
                normal_quantile_bisect(p), abs=1e-9)

    def test_rejects_bad_input(self):
        for p in (0.0, 1.0, -0.5, 1.5, float("nan")):
            with pytest.raises(ValueError):
                inv_norm_cdf(p)


class TestCholesky:
    def test_identity(self):
        assert np.allclose(cholesky(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        d = np.diag([4.0, 9.0, 0.25])
        assert np.allclose(cholesky(d), np.diag([2.0, 3.0, 0.5]))

    def test_round_trip_random(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            A = rng.normal(size=(6, 6))
            cov = A @ A.T
            L = cholesky(cov)
            assert np.abs(L @ L.T - cov).max() <= 1e-10 * np.abs(cov).max()
            assert np.allclose(L, np.tril(L))

    def test_semidefinite_cash_column(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(3, 3))
        cov = np.zeros((4, 4))
        cov[:3, :3] = A @ A.T
        L = cholesky(cov)
        assert np.abs(L @ L.T - cov).max() <= 1e-10 * np.abs(cov).max()
        assert np.all(L[3] == 0.0) and np.all(L[:, 3] == 0.0)

    def test_indefinite_reports_pivot(self):
        cov = np.diag([1.0, -0.5, 2.0])
        with pytest.raises(NotPositiveSemidefinite) as exc:
            cholesky(cov)
        assert exc.value.pivot_index == 1

    def test_asymmetric_rejected(self):
        bad = np.array([[1.0, 0.2], [0.1, 1.0]])
        with pytest.raises(ValueError):
            cholesky(bad)


class TestSampling:
    def test_zero_covariance(self):
        m = GaussianModel([1.05, 1.0], np.zeros((2, 2)))
        sc = sample_scenarios(m, 50, seed=3)
        assert np.allclose(sc.returns, [1.05, 1.0])

    def test_determinism(self):
        rng = np.random.default_rng(4)
        A = rng.normal(size=(3, 3)) * 0.1
        m = GaussianModel([1.1, 1.05, 1.0], A @ A.T)
        a = sample_scenarios(m, 100, seed=7)
        b = sample_scenarios(m, 100, seed=7)
        assert np.array_equal(a.returns, b.returns)
        c = sample_scenarios(m, 100, seed=8)
        assert not np.array_equal(a.returns, c.returns)

    def test_law_of_large_numbers(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(2, 2)) * 0.2
        cov = A @ A.T
        m = GaussianModel([1.08, 1.02], cov)
        sc = sample_scenarios(m, 200_000, seed=11)
        assert np.abs(sc.returns.mean(axis=0) - m.mean).max() <= 0.01
        emp_cov = np.cov(sc.returns.T)
        assert np.abs(emp_cov - cov).max() <= 0.02


class TestExactBaseline:
    def one_risky(self, mu, sigma):
        cov = np.array([[sigma ** 2, 0.0], [0.0, 0.0]])
        return GaussianModel([mu, 1.0], cov)

    def test_vacuous_at_half(self):
        m = self.one_risky(1.2, 0.4)
        rep = solve_gaussian_exact(m, alpha=0.9, eps=0.5)
        assert rep.x[0] == pytest.approx(1.0, abs=1e-9)
        assert rep.objective == pytest.approx(1.2, abs=1e-9)

    def test_one_risky_closed_form(self):
        for mu, sigma, alpha, eps in [(1.10, 0.30, 0.95, 0.05),
                                      (1.05, 0.20, 0.90, 0.02),
                                      (1.15, 0.45, 0.97, 0.10)]:
            z = inv_norm_cdf(1 - eps)
            assert z * sigma > mu - 1.0   # cap regime
            x_star = min(1.0, (1.0 - alpha) / (z * sigma - mu + 1.0))
            want = 1.0 + x_star * (mu - 1.0)
            rep = solve_gaussian_exact(self.one_risky(mu, sigma), alpha, eps)
            assert rep.objective == pytest.approx(want, abs=1e-6)
            assert rep.x[0] == pytest.approx(x_star, abs=1e-6)

    def test_solution_satisfies_cone(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            A = rng.normal(size=(4, 4)) * 0.15
            cov = np.zeros((5, 5))
            cov[:4, :4] = A @ A.T
            mean = np.append(rng.uniform(1.02, 1.15, 4), 1.0)
            m = GaussianModel(mean, cov)
            rep = solve_gaussian_exact(m, alpha=0.95, eps=0.04)
            z = inv_norm_cdf(0.96)
            lhs = z * m.portfolio_std(rep.x)
            rhs = float(mean @ rep.x) - 0.95
            assert lhs <= rhs + 1e-8

    def test_matches_grid_oracle_two_assets(self):
        # two risky assets, no cash: optimum found by scanning the simplex edge
        rng = np.random.default_rng(7)
        for _ in range(3):
            vols = rng.uniform(0.05, 0.4, 2)
            rho = rng.uniform(-0.5, 0.5)
            cov = np.array([[vols[0] ** 2, rho * vols[0] * vols[1]],
                            [rho * vols[0] * vols[1], vols[1] ** 2]])
            mean = rng.uniform(1.02, 1.2, 2)
            alpha, eps = 0.9, 0.07
            m = GaussianModel(mean, cov)
            z = inv_norm_cdf(1 - eps)
            ts = np.linspace(0.0, 1.0, 200_001)
            xs = np.column_stack([ts, 1 - ts])
            sig = np.sqrt(np.einsum("ij,jk,ik->i", xs, cov, xs))
            objs = xs @ mean
            ok = z * sig <= objs - alpha
            want = objs[ok].max() if ok.any() else None
            rep = solve_gaussian_exact(m, alpha, eps)
            if want is None:
                assert rep.status != "ok" or rep.objective != rep.objective
            else:
                assert rep.objective == pytest.approx(want, abs=1e-6)

    def test_tighter_covariance_never_helps(self):
        rng = np.random.default_rng(8)
        A = rng.normal(size=(3, 3)) * 0.2
        cov = np.zeros((4, 4))
        cov[:3, :3] = A @ A.T
        mean = np.append(rng.uniform(1.05, 1.12, 3), 1.0)
        objs = []
        for t in (0.5, 1.0, 2.0, 4.0):
            m = GaussianModel(mean, cov * t * t)
            objs.append(solve_gaussian_exact(m, 0.95, 0.05).objective)
        assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))

    def test_semicontinuous_master(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(3, 3)) * 0.12
        cov = np.zeros((4, 4))
        cov[:3, :3] = A @ A.T
        mean = np.append(rng.uniform(1.04, 1.12, 3), 1.0)
        m = GaussianModel(mean, cov)
        band = SemiContinuousSpec(0.05, 0.30)
        rep = solve_gaussian_exact(m, 0.95, 0.05, semi=band, cash_index=3)
        plain = solve_gaussian_exact(m, 0.95, 0.05)
        assert rep.objective <= plain.objective + 1e-9
        for j in range(3):
            assert rep.x[j] <= 1e-6 or 0.05 - 1e-6 <= rep.x[j] <= 0.30 + 1e-6
        with pytest.raises(ConfigError):
            solve_gaussian_exact(m, 0.95, 0.05, semi=band)

    def test_violation_probability_helper(self):
        m = self.one_risky(1.1, 0.3)
        x = np.array([0.4, 0.6])
        p = m.violation_probability(x, alpha=0.95)
        # by hand: mean 1.04, std 0.12 -> P[r < 0.95] = Phi(-0.75)
        assert p == pytest.approx(norm_cdf(-0.75), abs=1e-12)
