import numpy as np
import pytest

from strongwalk.errors import ConfigError, NumericalGuardError
from strongwalk.hedging import delta_gap_path
from strongwalk.market import MarketParams, asset_path, build_level
from strongwalk.study import RateFit, StudyConfig, fit_rate, run_study
from strongwalk.walk import NestedWalks, sup_distance


@pytest.fixture
def params():
    return MarketParams(mu=0.05, sigma=0.2, r=0.05, s0=100.0, horizon=1)


@pytest.fixture
def small_config(params):
    return StudyConfig(params=params, m_lo=4, m_hi=7, m_ref=9,
                       seeds=(1, 2, 3, 4, 5))


class TestFitRate:
    def test_exact_geometric(self):
        fit = fit_rate([(m, 2.0 ** -m) for m in range(4, 10)])
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.residual <= 1e-12

    def test_half_rate(self):
        fit = fit_rate([(m, 2.0 ** (-m / 2.0)) for m in range(4, 10)])
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)

    def test_jittered_data_recovers_slope(self):
        rng = np.random.default_rng(3)
        points = [(m, 2.0 ** (-0.7 * m) * math_exp(rng))
                  for m in range(4, 12)]
        fit = fit_rate(points)
        assert fit.slope == pytest.approx(-0.7, abs=0.1)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_rate([(4, 0.1), (5, 0.05), (6, 0.02)])

    def test_nonpositive_error(self):
        with pytest.raises(NumericalGuardError):
            fit_rate([(4, 0.1), (5, 0.0), (6, 0.02), (7, 0.01)])


def math_exp(rng):
    # multiplicative jitter within a factor of 2^0.1
    return 2.0 ** rng.uniform(-0.1, 0.1)


class TestConfig:
    def test_validation_errors(self, params):
        with pytest.raises(ConfigError):
            StudyConfig(params=params, seeds=()).validate()
        with pytest.raises(ConfigError):
            StudyConfig(params=params, m_lo=6, m_hi=5).validate()
        with pytest.raises(ConfigError):
            StudyConfig(params=params, m_hi=13, m_ref=14).validate()
        with pytest.raises(ConfigError):
            StudyConfig(params=params, m_hi=8, m_ref=8).validate()
        with pytest.raises(ConfigError):
            StudyConfig(params=params, claim_kind="straddle").validate()

    def test_threshold_guard(self):
        params = MarketParams(mu=0.8, sigma=0.2, r=0.05, s0=100.0,
                              horizon=1)
        cfg = StudyConfig(params=params, m_lo=1, m_hi=5, m_ref=8)
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_from_dict_round_trip(self):
        cfg = StudyConfig.from_dict({
            "market": {"mu": 0.05, "sigma": 0.2, "r": 0.05, "s0": 100.0,
                       "horizon": 1},
            "claim": {"kind": "put", "strike": 90.0},
            "m_lo": 4, "m_hi": 7, "m_ref": 9, "seeds": [1, 2, 3],
        })
        assert cfg.claim_kind == "put"
        assert cfg.strike == 90.0
        assert cfg.seeds == (1, 2, 3)

    def test_from_dict_unknown_field(self):
        with pytest.raises(ConfigError):
            StudyConfig.from_dict({
                "market": {"mu": 0, "sigma": 0.2, "r": 0.05, "s0": 100,
                           "horizon": 1},
                "bogus": 1,
            })

    def test_from_dict_missing_market(self):
        with pytest.raises(ConfigError):
            StudyConfig.from_dict({"m_lo": 4})


class TestRunStudy:
    def test_all_slopes_negative(self, small_config):
        report = run_study(small_config)
        assert set(report.fits) == {"walk_sup", "asset_sup", "delta_gap",
                                    "price_gap", "fk_residual"}
        for metric, fit in report.fits.items():
            assert isinstance(fit, RateFit)
            assert fit.slope < 0.0, metric

    def test_deterministic_output(self, small_config):
        a = run_study(small_config).to_csv()
        b = run_study(small_config).to_csv()
        assert a == b
        ja = run_study(small_config).to_json()
        assert ja == run_study(small_config).to_json()

    def test_single_level_reports_without_fit(self, params):
        cfg = StudyConfig(params=params, m_lo=5, m_hi=5, m_ref=8,
                          seeds=(1, 2))
        report = run_study(cfg)
        assert all(fit is None for fit in report.fits.values())
        assert any(r["metric"] == "walk_sup" for r in report.rows)

    def test_rows_are_reproducible_from_owning_modules(self, params):
        cfg = StudyConfig(params=params, m_lo=4, m_hi=5, m_ref=7,
                          seeds=(3,), grid_points=5)
        report = run_study(cfg)
        by_key = {(r["metric"], r["m"], r["seed"]): r["value"]
                  for r in report.rows}
        family = NestedWalks(3)
        ref = family.path(7, 1)
        path = family.path(4, 1)
        assert by_key[("walk_sup", 4, 3)] == sup_distance(ref, path, 1.0)
        level = build_level(params, 4)
        asset = asset_path(level, path)
        t_grid = np.linspace(0.0, 0.9, 5)
        assert by_key[("delta_gap", 4, 3)] == delta_gap_path(
            level, cfg.claim, asset, t_grid)

    def test_invalid_config_rejected(self, params):
        cfg = StudyConfig(params=params, m_lo=4, m_hi=3, m_ref=9)
        with pytest.raises(ConfigError):
            run_study(cfg)
