import numpy as np
import pytest

from ccsaa.data import (PricePanel, default_instance, estimate_moments,
                        instance_from_dict, instance_to_dict, read_instance,
                        read_price_csv, returns_from_prices, write_instance)
from ccsaa.errors import ConfigError


def month_range(start_year, start_month, count):
    out = []
    y, m = start_year, start_month
    for _ in range(count):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return tuple(out)


class TestPricePanel:
    def test_validation(self):
        stamps = month_range(2019, 1, 3)
        with pytest.raises(ValueError):
            PricePanel(("a",), np.array([[1.0], [0.0], [2.0]]), stamps)
        with pytest.raises(ValueError):
            PricePanel(("a",), np.ones((3, 1)), ("2019-01", "2019-03", "2019-04"))
        panel = PricePanel(("a",), np.ones((3, 1)), stamps)
        assert panel.prices.shape == (3, 1)

    def test_year_rollover_ok(self):
        stamps = month_range(2019, 11, 4)   # crosses into 2020
        PricePanel(("a",), np.ones((4, 1)), stamps)


class TestReturns:
    def test_constant_prices(self):
        panel = PricePanel(("a", "b"), np.full((20, 2), 3.5), month_range(2019, 1, 20))
        r = returns_from_prices(panel, lag_months=12)
        assert r.shape == (8, 2)
        assert np.allclose(r, 1.0)

    def test_doubling(self):
        prices = np.array([[2.0 ** (t / 12.0)] for t in range(26)])
        panel = PricePanel(("a",), prices, month_range(2018, 1, 26))
        r = returns_from_prices(panel, lag_months=12)
        assert np.allclose(r, 2.0)

    def test_matches_reference_loop(self):
        rng = np.random.default_rng(0)
        prices = rng.uniform(10, 50, size=(30, 3))
        panel = PricePanel(("a", "b", "c"), prices, month_range(2015, 6, 30))
        lag = 7
        r = returns_from_prices(panel, lag_months=lag)
        for t in range(30 - lag):
            for i in range(3):
                assert r[t, i] == pytest.approx(prices[t + lag, i] / prices[t, i],
                                                abs=1e-15)

    def test_too_short(self):
        panel = PricePanel(("a",), np.ones((5, 1)), month_range(2019, 1, 5))
        with pytest.raises(ValueError):
            returns_from_prices(panel, lag_months=12)


class TestMoments:
    def test_identical_rows(self):
        mean, cov = estimate_moments(np.tile([1.1, 0.9], (2, 1)))
        assert np.allclose(mean, [1.1, 0.9])
        assert np.allclose(cov, 0.0)

    def test_hand_arithmetic(self):
        mean, cov = estimate_moments(np.array([[0.0, 0.0], [2.0, 2.0]]))
        assert np.allclose(mean, [1.0, 1.0])
        assert np.allclose(cov, [[2.0, 2.0], [2.0, 2.0]])

    def test_matches_textbook_formula(self):
        rng = np.random.default_rng(1)
        r = rng.normal(size=(40, 3))
        mean, cov = estimate_moments(r)
        m = r.mean(axis=0)
        want = np.zeros((3, 3))
        for row in r:
            want += np.outer(row - m, row - m)
        want /= 39
        assert np.abs(cov - want).max() <= 1e-12
        eig = np.linalg.eigvalsh(cov)
        assert eig.min() >= -1e-10

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(2)
        r = rng.normal(size=(25, 4))
        mean1, cov1 = estimate_moments(r)
        mean2, cov2 = estimate_moments(r[rng.permutation(25)])
        assert np.allclose(mean1, mean2, atol=1e-14)
        assert np.allclose(cov1, cov2, atol=1e-14)

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            estimate_moments(np.ones((1, 2)))


class TestPriceCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("date,a1,a2\n2020-01,10,20\n2020-02,11,21\n2020-03,12,19\n")
        panel = read_price_csv(path)
        assert panel.names == ("a1", "a2")
        assert panel.prices.shape == (3, 2)
        assert panel.timestamps[1] == "2020-02"

    def test_bad_header(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("day,a1\n2020-01,10\n")
        with pytest.raises(ConfigError):
            read_price_csv(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("date,a1\n2020-01,ten\n")
        with pytest.raises(ConfigError):
            read_price_csv(path)


class TestInstanceIo:
    def test_default_round_trip(self, tmp_path):
        inst = default_instance()
        path = tmp_path / "inst.json"
        write_instance(path, inst)
        back = read_instance(path)
        assert back.names == inst.names
        assert np.array_equal(back.model.mean, inst.model.mean)
        assert np.array_equal(back.model.covariance, inst.model.covariance)
        assert back.alpha == inst.alpha
        assert back.epsilon == inst.epsilon
        assert back.beta == inst.beta
        assert back.cash_index == inst.cash_index
        assert back.semicontinuous == inst.semicontinuous

    def test_missing_alpha_names_field(self, tmp_path):
        inst = default_instance()
        raw = instance_to_dict(inst)
        del raw["alpha"]
        with pytest.raises(ConfigError, match="alpha"):
            instance_from_dict(raw)

    def test_asymmetric_covariance_rejected(self):
        inst = default_instance()
        raw = instance_to_dict(inst)
        raw["covariance"][2][3] += 1e-6
        with pytest.raises(ConfigError, match="covariance"):
            instance_from_dict(raw)

    def test_bad_json_reported(self, tmp_path):
        path = tmp_path / "inst.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            read_instance(path)

    def test_default_instance_shape(self):
        inst = default_instance()
        assert inst.n_assets == 21
        assert inst.cash_index == 20
        assert inst.model.mean[20] == 1.0
        assert np.all(inst.model.covariance[20] == 0.0)
        assert np.all(inst.model.covariance[:, 20] == 0.0)
        vols = np.sqrt(np.diag(inst.model.covariance)[:20])
        assert vols.min() >= 0.05 - 1e-12 and vols.max() <= 0.35 + 1e-12
        assert inst.model.mean[:20].min() >= 1.02
        assert inst.model.mean[:20].max() <= 1.15
        assert inst.risk_spec.n_dims == 20

    def test_default_instance_deterministic(self):
        a, b = default_instance(), default_instance()
        assert np.array_equal(a.model.covariance, b.model.covariance)
        assert np.array_equal(a.model.mean, b.model.mean)
