from datetime import date, timedelta
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
import hypothesis.strategies as st

from dataset import (
    MG_OFFSET,
    MG_SCALE,
    O3_AMPLITUDE,
    O3_BASE,
    SEASON_DAYS,
    SYNTH_EPOCH,
    TSR_AMPLITUDE,
    TSR_BASE,
    TSR_PHASE,
    UV_AMPLITUDE,
    UV_BASE,
    UV_PHASE,
    assign_splits,
    denormalize_targets,
    load_csv,
    make_patterns,
    mackey_glass,
    normalize,
    split_counts,
    synth_series,
    write_csv,
)
from error_handlers import (
    ConfigurationError,
    GapError,
    InsufficientDataError,
    MissingChannelError,
    OrderingError,
    ParseError,
)


class TestLoadCsv:
    def test_well_formed(self, csv_file):
        """Three rows parse into a length-3 series."""
        path = csv_file("date,o3\n2000-01-01,300.5\n2000-01-02,301\n2000-01-03,299.25\n")
        series = load_csv(path)
        assert len(series) == 3
        assert series.o3 == [300.5, 301.0, 299.25]
        assert not series.has_sensors

    def test_sensor_columns(self, csv_file):
        path = csv_file("date,o3,uv,tsr\n2000-01-01,300,5,20\n2000-01-02,301,6,21\n")
        series = load_csv(path)
        assert series.has_sensors and series.uv == [5.0, 6.0] and series.tsr == [20.0, 21.0]

    def test_duplicate_date(self, csv_file):
        """A repeated date is an ordering error at its line."""
        path = csv_file("date,o3\n2000-01-01,300\n2000-01-01,301\n")
        with pytest.raises(OrderingError) as excinfo:
            load_csv(path)
        assert excinfo.value.line == 3

    def test_nan_value(self, csv_file):
        """o3 = NaN is a parse error naming the column."""
        path = csv_file("date,o3\n2000-01-01,300\n2000-01-02,NaN\n")
        with pytest.raises(ParseError) as excinfo:
            load_csv(path)
        assert excinfo.value.column == "o3"
        assert excinfo.value.line == 3

    def test_bad_date(self, csv_file):
        path = csv_file("date,o3\n01/02/2000,300\n")
        with pytest.raises(ParseError) as excinfo:
            load_csv(path)
        assert excinfo.value.column == "date"

    def test_gap(self, csv_file):
        """A missing day names the first missing date."""
        path = csv_file("date,o3\n2000-01-01,300\n2000-01-02,301\n2000-01-05,302\n")
        with pytest.raises(GapError) as excinfo:
            load_csv(path)
        assert excinfo.value.first_missing == date(2000, 1, 3)

    def test_blank_line_is_reported_at_its_line(self, csv_file):
        """Blank rows are not skipped; the physical line number is reported."""
        path = csv_file("date,o3\n2000-01-01,300\n\n2000-01-02,301\n2000-01-02,302\n")
        with pytest.raises(ParseError) as excinfo:
            load_csv(path)
        assert excinfo.value.line == 3

    def test_trailing_blank_lines_ignored(self, csv_file):
        series = load_csv(csv_file("date,o3\n2000-01-01,300\n2000-01-02,301\n\n\n"))
        assert series.o3 == [300.0, 301.0]

    def test_missing_column(self, csv_file):
        with pytest.raises(ParseError):
            load_csv(csv_file("date,uv\n2000-01-01,3\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_csv(tmp_path / "nope.csv")

    def test_write_then_load(self, tmp_path, sine_series):
        """Written CSV loads back to six decimals."""
        path = tmp_path / "out.csv"
        write_csv(sine_series, path)
        loaded = load_csv(path)
        assert loaded.dates == sine_series.dates
        assert np.allclose(loaded.o3, sine_series.o3, atol=5e-7)
        assert np.allclose(loaded.uv, sine_series.uv, atol=5e-7)


class TestMakePatterns:
    def test_lagged_example(self, series_factory):
        """o3 = 1..6 with lag 4 gives two patterns."""
        patterns = make_patterns(series_factory([1, 2, 3, 4, 5, 6]), 4)
        assert patterns.inputs == [[1, 2, 3, 4], [2, 3, 4, 5]]
        assert patterns.targets == [5, 6]
        assert patterns.dates == [date(2000, 1, 5), date(2000, 1, 6)]

    def test_sensor_mode_length_two(self, series_factory):
        """Two days in sensors mode give one pattern."""
        patterns = make_patterns(series_factory([300, 310], uv=[4, 5], tsr=[20, 21]), mode="sensors")
        assert patterns.inputs == [[4, 20, 300]]
        assert patterns.targets == [310]
        assert patterns.input_channels == ["uv", "tsr", "o3"]

    def test_sensor_mode_needs_channels(self, series_factory):
        with pytest.raises(MissingChannelError):
            make_patterns(series_factory([1, 2, 3]), mode="sensors")

    def test_too_short(self, series_factory):
        with pytest.raises(InsufficientDataError):
            make_patterns(series_factory([1, 2, 3, 4]), 4)

    def test_counts_for_every_length(self, series_factory):
        """Lag 4 yields N - 4 patterns for N in 5..200."""
        for n in range(5, 201):
            assert len(make_patterns(series_factory(np.arange(n, dtype=float)), 4)) == n - 4

    def test_no_target_leakage(self, series_factory):
        """Every input value precedes its target in time."""
        o3 = np.arange(40, dtype=float)
        patterns = make_patterns(series_factory(o3), 4)
        for inputs, target in zip(patterns.inputs, patterns.targets):
            assert max(inputs) < target


class TestAssignSplits:
    def test_hundred(self):
        assert split_counts(100, (0.7, 0.15, 0.15)) == (70, 15, 15)

    def test_ten(self):
        """Remainder goes to train."""
        assert split_counts(10, (0.7, 0.15, 0.15)) == (8, 1, 1)

    def test_within_one_sample_for_every_size(self, pattern_factory):
        """Counts are within one sample of their share for N in 5..200, and labels partition."""
        fractions = (0.7, 0.15, 0.15)
        for n in range(5, 201):
            patterns = assign_splits(pattern_factory(np.zeros(n), np.zeros(n)), fractions, seed=n)
            counts = patterns.split_counts()
            assert sum(counts.values()) == n
            for label, fraction in zip(("train", "validation", "test"), fractions):
                assert abs(counts[label] - fraction * n) <= 1 + 1e-9
            assert sorted(np.concatenate([patterns.indices(s) for s in counts]).tolist()) == list(range(n))

    def test_same_seed_same_labels(self, pattern_factory):
        patterns = pattern_factory(np.zeros(50), np.zeros(50))
        assert assign_splits(patterns, seed=3).split_labels == assign_splits(patterns, seed=3).split_labels

    def test_too_few_patterns(self, pattern_factory):
        with pytest.raises(InsufficientDataError):
            assign_splits(pattern_factory(np.zeros(2), np.zeros(2)))

    def test_fractions_must_sum_to_one(self, pattern_factory):
        with pytest.raises(ConfigurationError):
            assign_splits(pattern_factory(np.zeros(20), np.zeros(20)), (0.5, 0.2, 0.2))

    @given(st.integers(min_value=3, max_value=5000),
           st.floats(min_value=0.05, max_value=0.9), st.floats(min_value=0.0, max_value=1.0))
    @hyp_settings(max_examples=300, deadline=None)
    def test_split_counts_property(self, n, train, share):
        """Any valid fractions: counts sum to N and stay within one sample."""
        rest = 1.0 - train
        fractions = (train, rest * share, 1.0 - train - rest * share)
        counts = split_counts(n, fractions)
        assert sum(counts) == n
        assert all(abs(c - f * n) <= 1 + 1e-6 for c, f in zip(counts, fractions))


class TestNormalize:
    def test_train_range_maps_to_unit(self, pattern_factory):
        """Train values over [10, 20]: 15 maps to 0.5."""
        labels = ["train", "train", "train", "test"]
        patterns = normalize(pattern_factory([10.0, 20.0, 15.0, 30.0], [15.0, 12.0, 18.0, 40.0], labels=labels))
        assert patterns.inputs[2] == [pytest.approx(0.5)]
        assert patterns.targets[0] == pytest.approx(0.5)
        assert patterns.inputs[3] == [pytest.approx(2.0)]

    def test_parameters_from_train_only(self, sine_series):
        """Stored min/max equal those of the train split."""
        raw = assign_splits(make_patterns(sine_series, 4), seed=7)
        scale = normalize(raw).normalization.channels["o3"]
        X, t = raw.arrays("train")
        values = np.concatenate([X.ravel(), t])
        assert scale.minimum == values.min() and scale.maximum == values.max()

    def test_constant_channel(self, pattern_factory):
        """A constant channel maps to 0 and is flagged."""
        patterns = normalize(pattern_factory([7.0] * 5, [7.0] * 5))
        assert patterns.normalization.channels["o3"].fallback
        assert patterns.inputs == [[0.0]] * 5 and patterns.targets == [0.0] * 5

    def test_inverse_round_trip(self, sine_series):
        """Inverting the target scaling restores the original values."""
        raw = assign_splits(make_patterns(sine_series, 4), seed=7)
        restored = denormalize_targets(normalize(raw).targets, normalize(raw))
        assert np.allclose(restored, raw.targets, rtol=0, atol=1e-12 * O3_BASE)


class TestSynthSeries:
    def test_noiseless_formula(self):
        """noise_level = 0 reproduces the closed-form seasonal profile."""
        series = synth_series("seasonal_ar", 730, seed=1, noise_level=0.0)
        days = np.arange(730)
        expected = O3_BASE + O3_AMPLITUDE * np.sin(2 * np.pi * days / SEASON_DAYS)
        assert np.allclose(series.o3, expected, rtol=0, atol=1e-9)
        assert np.allclose(series.uv, UV_BASE + UV_AMPLITUDE * np.sin(2 * np.pi * days / SEASON_DAYS + UV_PHASE))
        assert np.allclose(series.tsr, TSR_BASE + TSR_AMPLITUDE * np.sin(2 * np.pi * days / SEASON_DAYS + TSR_PHASE))

    def test_same_seed(self):
        a = synth_series("seasonal_ar", 300, seed=4, noise_level=0.1)
        assert a == synth_series("seasonal_ar", 300, seed=4, noise_level=0.1)
        assert a != synth_series("seasonal_ar", 300, seed=5, noise_level=0.1)

    def test_length_and_start(self):
        series = synth_series("seasonal_ar", 500, seed=7)
        assert len(series) == 500
        assert series.dates[0] == SYNTH_EPOCH
        assert series.dates[-1] == SYNTH_EPOCH + timedelta(days=499)

    def test_full_span_ends_mid_2011(self):
        """4205 days from 2000-01-01 end on 2011-07-06."""
        series = synth_series("seasonal_ar", 4205, seed=7, noise_level=0.05)
        assert series.dates[-1] == date(2011, 7, 6)

    def test_minimum_length(self):
        with pytest.raises(InsufficientDataError):
            synth_series("seasonal_ar", 50, seed=7)

    def test_negative_noise(self):
        with pytest.raises(ConfigurationError):
            synth_series("seasonal_ar", 200, seed=7, noise_level=-0.1)

    def test_mackey_glass_mapping(self):
        """Mackey-Glass o3 is 200 + 100 x with x in its usual band."""
        x = mackey_glass(400)
        series = synth_series("mackey_glass", 400, seed=7)
        assert np.allclose(series.o3, MG_OFFSET + MG_SCALE * x)
        assert 0.2 < x.min() and x.max() < 1.5
        assert not series.has_sensors
        assert not math.isclose(float(np.std(x)), 0.0)
