from datetime import date, timedelta

import numpy as np
import pytest

from dataset import synth_series
from models import PatternSet, Series

EPOCH = date(2000, 1, 1)


def _dates(n: int):
    return [EPOCH + timedelta(days=i) for i in range(n)]


@pytest.fixture
def pattern_factory():
    """Build a PatternSet from raw inputs/targets; labels default to all train."""

    def build(inputs, targets, labels=None, normalization=None):
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        n = len(targets)
        return PatternSet(
            inputs=inputs.tolist(),
            targets=[float(t) for t in targets],
            split_labels=labels or ["train"] * n,
            dates=_dates(n),
            mode="lagged_o3",
            lag=inputs.shape[1],
            input_channels=["o3"] * inputs.shape[1],
            normalization=normalization,
        )

    return build


@pytest.fixture
def series_factory():
    """Series from a list of o3 values starting at 2000-01-01."""

    def build(o3, uv=None, tsr=None):
        return Series(dates=_dates(len(o3)), o3=list(o3), uv=uv, tsr=tsr)

    return build


@pytest.fixture
def sine_series():
    return synth_series("seasonal_ar", 1000, seed=7, noise_level=0.0)


@pytest.fixture
def csv_file(tmp_path):
    """Write text to a CSV file and return its path."""

    def write(text: str, name: str = "data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
