import numpy as np
import pytest
from hypothesis import assume, given, settings as hyp_settings
import hypothesis.strategies as st

from anfis import AnfisConfig
from bel_core import BelConfig
from dataset import assign_splits, make_patterns, normalize, synth_series
from error_handlers import ContractViolationError, UndefinedCorrelationError
from evaluate import (
    compare,
    correlation,
    evaluate_model,
    fingerprint,
    mae,
    rank_models,
    rmse,
    selection_score,
    split_metrics,
)
from mlp import MlpConfig
from models import EvalReport, ModelEvaluation, SplitMetrics


class LookupModel:
    """Returns fixed outputs for the whole pattern matrix."""

    kind = "lookup"

    def __init__(self, outputs, input_dim):
        self.outputs = np.asarray(outputs, dtype=float)
        self._input_dim = input_dim

    @property
    def input_dim(self):
        return self._input_dim

    def predict(self, X):
        assert len(X) == len(self.outputs)
        return self.outputs.copy()


def prepared(series, lag=4):
    return normalize(assign_splits(make_patterns(series, lag), seed=7))


def configs(input_dim, **overrides):
    return {
        "bel": BelConfig(input_dim=input_dim, **overrides.get("bel", {})),
        "anfis": AnfisConfig(input_dim=input_dim, **overrides.get("anfis", {})),
        "mlp": MlpConfig(input_dim=input_dim, **overrides.get("mlp", {})),
    }


class TestCorrelation:
    def test_perfect(self):
        assert correlation([1.0, 3.0, 2.0], [1.0, 3.0, 2.0]) == pytest.approx(1.0)

    def test_anti(self):
        assert correlation([1.0, 3.0, 2.0], [-1.0, -3.0, -2.0]) == pytest.approx(-1.0)

    def test_direct_formula(self):
        """[1,2,3] against [1,2,4]."""
        assert correlation([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-5)

    def test_constant_is_undefined(self):
        """Either list constant raises instead of returning 0."""
        with pytest.raises(UndefinedCorrelationError):
            correlation([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(UndefinedCorrelationError):
            correlation([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_length_rules(self):
        with pytest.raises(ContractViolationError):
            correlation([1.0], [1.0])
        with pytest.raises(ContractViolationError):
            correlation([1.0, 2.0], [1.0, 2.0, 3.0])

    @given(st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=40),
           st.floats(min_value=0.1, max_value=10.0), st.floats(min_value=-10.0, max_value=10.0),
           st.integers(min_value=0, max_value=2 ** 16))
    @hyp_settings(max_examples=200, deadline=None)
    def test_positive_affine_invariance(self, xs, a, b, seed):
        """COR(a x + b, y) == COR(x, y) to 1e-12 for a > 0."""
        x = np.asarray(xs, dtype=float)
        assume(np.std(x) >= 1.0)
        y = x + np.random.default_rng(seed).normal(scale=5.0, size=len(x))
        assert abs(correlation(a * x + b, y) - correlation(x, y)) <= 1e-12

    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=30),
           st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=30))
    @hyp_settings(max_examples=200, deadline=None)
    def test_rmse_at_least_mae(self, p, a):
        n = min(len(p), len(a))
        assert rmse(p[:n], a[:n]) >= mae(p[:n], a[:n]) - 1e-9


class TestSelectionScore:
    def test_defined_cor_beats_undefined(self):
        """A constant prediction ranks below any defined COR."""
        actual = [0.1, 0.5, 0.9]
        assert selection_score([0.2, 0.4, 0.6], actual) > selection_score([0.5, 0.5, 0.5], actual)

    def test_tie_goes_to_lower_error(self):
        """Equal COR: the smaller MSE wins."""
        actual = np.array([0.1, 0.5, 0.9])
        assert selection_score(actual + 0.01, actual) > selection_score(actual + 0.5, actual)


class TestSplitMetrics:
    def test_empty_split(self):
        metrics = split_metrics([], [])
        assert metrics.count == 0 and metrics.cor is None

    def test_constant_prediction_reports_error(self):
        metrics = split_metrics([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        assert metrics.cor is None
        assert metrics.error.startswith("undefined-correlation")
        assert metrics.rmse == pytest.approx(np.sqrt(5 / 3))


class TestEvaluateModel:
    def setup_method(self):
        self.patterns = prepared(synth_series("seasonal_ar", 300, seed=3, noise_level=0.05))

    def test_perfect_oracle(self):
        """Predicting the targets exactly: COR 1 and RMSE 0 on every split."""
        _, t = self.patterns.arrays()
        evaluation = evaluate_model(LookupModel(t, 4), self.patterns)
        for metrics in evaluation.splits.values():
            assert metrics.cor == pytest.approx(1.0)
            assert metrics.rmse == pytest.approx(0.0, abs=1e-9)

    def test_constant_model(self):
        """Constant output gives an undefined-correlation note per split."""
        evaluation = evaluate_model(LookupModel(np.full(len(self.patterns), 0.5), 4), self.patterns)
        for metrics in evaluation.splits.values():
            assert metrics.error.startswith("undefined-correlation")

    def test_metrics_in_original_units(self):
        """Records carry denormalized targets."""
        _, t = self.patterns.arrays()
        evaluation = evaluate_model(LookupModel(t, 4), self.patterns)
        targets = [r.target for r in evaluation.predictions]
        assert min(targets) > 200.0
        assert len(evaluation.predictions) == len(self.patterns)

    def test_counts_match_splits(self):
        _, t = self.patterns.arrays()
        evaluation = evaluate_model(LookupModel(t, 4), self.patterns)
        assert {k: v.count for k, v in evaluation.splits.items()} == self.patterns.split_counts()

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolationError):
            evaluate_model(LookupModel(np.zeros(len(self.patterns)), 3), self.patterns)

    def test_idempotent(self):
        _, t = self.patterns.arrays()
        model = LookupModel(t * 0.9 + 0.01, 4)
        assert evaluate_model(model, self.patterns) == evaluate_model(model, self.patterns)


class TestCompare:
    def test_constant_data_flags_every_model(self, series_factory):
        """Constant series: every model has an undefined test COR and nothing is ranked."""
        patterns = prepared(series_factory([250.0] * 60))
        report = compare(configs(4, bel={"epochs": 3}, anfis={"epochs": 3}, mlp={"epochs": 3}), patterns)
        assert report.ranking == []
        for evaluation in report.models:
            assert evaluation.splits["test"].error.startswith("undefined-correlation")

    def test_noiseless_sine_all_models(self, sine_series):
        """All three models reach test COR >= 0.95 and are ranked."""
        report = compare(configs(4), prepared(sine_series))
        assert sorted(report.ranking) == ["anfis", "bel", "mlp"]
        for evaluation in report.models:
            assert evaluation.test_cor() >= 0.95

    def test_noisy_seasonal_profile(self):
        """4205 noisy seasonal days, lag 4, default configs: every model reaches test COR >= 0.80."""
        series = synth_series("seasonal_ar", 4205, seed=7, noise_level=0.05)
        report = compare(configs(4), prepared(series))
        for evaluation in report.models:
            assert not evaluation.failed
            assert evaluation.test_cor() >= 0.80

    def test_report_round_trip(self, sine_series):
        report = compare(configs(4, bel={"epochs": 2}, anfis={"epochs": 2}, mlp={"epochs": 2}),
                         prepared(sine_series), run_fingerprint="abc")
        assert EvalReport.model_validate_json(report.model_dump_json()) == report

    def test_deterministic_and_parallel_matches_sequential(self, sine_series):
        patterns = prepared(sine_series)
        cfg = configs(4, bel={"epochs": 3}, anfis={"epochs": 5}, mlp={"epochs": 2})
        first = compare(cfg, patterns).model_dump_json()
        assert compare(cfg, patterns).model_dump_json() == first
        assert compare(cfg, patterns, parallel=False).model_dump_json() == first

    def test_failed_model_is_flagged(self, sine_series):
        """A config that does not match the patterns fails alone."""
        cfg = configs(4, bel={"epochs": 2}, anfis={"epochs": 2})
        cfg["mlp"] = MlpConfig(input_dim=3, epochs=2)
        report = compare(cfg, prepared(sine_series))
        mlp = report.evaluation("mlp")
        assert mlp.failed and mlp.error.startswith("contract-violation")
        assert "mlp" not in report.ranking
        assert not report.evaluation("bel").failed


class TestRanking:
    def test_sorted_by_test_cor(self):
        def evaluation(kind, cor):
            return ModelEvaluation(kind=kind, config_fingerprint="x",
                                   splits={"test": SplitMetrics(count=5, cor=cor, rmse=0.1, mae=0.1)})

        ranked = rank_models([evaluation("bel", 0.8), evaluation("anfis", 0.9), evaluation("mlp", None)])
        assert ranked == ["anfis", "bel"]

    def test_fingerprint_is_canonical(self):
        assert fingerprint({"b": 1, "a": 2}) == fingerprint({"a": 2, "b": 1})
        assert fingerprint(BelConfig(input_dim=4)) != fingerprint(BelConfig(input_dim=5))
