"""Threshold policy on predicted O3 and the day-by-day replay driver."""
from datetime import date, timedelta
from pathlib import Path
from typing import Iterator, Optional, Union
import json
import logging

import numpy as np
from pydantic import ValidationError

from bel_core import bel_train_step
from dataset import scale_inputs
from error_handlers import (
    ContractViolationError,
    InsufficientDataError,
    MissingChannelError,
    PolicyError,
    UnsupportedFlagError,
    UsageError,
)
from models import AlarmBand, AlarmEvent, AlarmPolicy, PipelineSpec, Predictor, ReplayRecord, Series
from validators import require_finite_scalar

logger = logging.getLogger(__name__)

TEMPLATE_FIELDS = ("value", "bound", "severity", "date")


def triggered_band(prediction: float, policy: AlarmPolicy) -> Optional[AlarmBand]:
    """Most severe band the prediction reaches; bounds are inclusive on the dangerous side."""
    value = require_finite_scalar(prediction, "prediction")
    low = policy.direction == "low_is_dangerous"
    hit = None
    for band in policy.ranked_bands():
        if (value <= band.bound) if low else (value >= band.bound):
            hit = band
    return hit


def classify(prediction: float, policy: AlarmPolicy) -> Optional[str]:
    band = triggered_band(prediction, policy)
    return None if band is None else band.severity


def render_message(band: AlarmBand, prediction: float, day: date) -> str:
    return band.message.format(value=round(prediction, 2), bound=f"{band.bound:g}",
                               severity=band.severity, date=day.isoformat())


def load_policy(path: Union[str, Path]) -> AlarmPolicy:
    """Read and validate a JSON policy file."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"policy file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise PolicyError(f"{path} is not valid JSON: {e}") from None
    try:
        policy = AlarmPolicy.model_validate(raw)
    except ValidationError as e:
        raise PolicyError(f"invalid policy {path}: {e}") from None
    for band in policy.bands:
        try:
            render_message(band, band.bound, date(2000, 1, 1))
        except (KeyError, IndexError, ValueError) as e:
            raise PolicyError(
                f"message of band {band.severity!r} uses an unknown placeholder {e}; "
                f"allowed: {', '.join(TEMPLATE_FIELDS)}") from None
    logger.info(f"Loaded policy with {len(policy.bands)} band(s) from {path}")
    return policy


class SeriesHistory:
    """Read access to a Series by day index.

    Replay reads every value through `window` and `value`, so a subclass can record which
    days were touched.
    """

    def __init__(self, series: Series):
        self.series = series
        self._channels = {"o3": series.channel("o3")}
        if series.has_sensors:
            self._channels["uv"] = series.channel("uv")
            self._channels["tsr"] = series.channel("tsr")

    def __len__(self) -> int:
        return len(self.series)

    @property
    def has_sensors(self) -> bool:
        return self.series.has_sensors

    def date(self, index: int) -> date:
        return self.series.dates[index]

    def value(self, index: int, channel: str = "o3") -> float:
        return float(self._channels[channel][index])

    def window(self, end: int, pipeline: PipelineSpec) -> np.ndarray:
        """Raw input vector built from days up to and including `end`."""
        if pipeline.mode == "lagged_o3":
            return np.array([self.value(i) for i in range(end - pipeline.lag + 1, end + 1)])
        return np.array([self.value(end, name) for name in pipeline.input_channels])


def _first_target(pipeline: PipelineSpec) -> int:
    return pipeline.lag if pipeline.mode == "lagged_o3" else 1


def replay(series: Union[Series, SeriesHistory], model: Predictor, policy: Optional[AlarmPolicy],
           pipeline: PipelineSpec, *, adapt: bool = False,
           include_next_day: bool = False) -> Iterator[ReplayRecord]:
    """Walk forward one day at a time, predicting each day from the days before it.

    With `adapt`, a BEL model takes one learning step per day once that day's value is read.
    With `include_next_day`, a final record forecasts the day after the last observation.
    Without a policy no events are raised.
    """
    history = series if isinstance(series, SeriesHistory) else SeriesHistory(series)
    if pipeline.mode == "sensors" and not history.has_sensors:
        raise MissingChannelError("sensors mode needs uv and tsr channels")
    if model.input_dim != len(pipeline.input_channels):
        raise ContractViolationError(
            f"model expects inputs of length {model.input_dim}, pipeline builds {len(pipeline.input_channels)}")
    if adapt and model.kind != "bel":
        raise UnsupportedFlagError(f"online adaptation is only available for bel models, not {model.kind}")

    first = _first_target(pipeline)
    n = len(history)
    if n < first + (0 if include_next_day else 1):
        raise InsufficientDataError(f"series of length {n} is too short for one prediction")
    return _replay(history, model, policy, pipeline, first, adapt, include_next_day)


def _replay(history: SeriesHistory, model, policy: Optional[AlarmPolicy], pipeline: PipelineSpec, first: int,
            adapt: bool, include_next_day: bool) -> Iterator[ReplayRecord]:
    n = len(history)
    norm = pipeline.normalization
    target_scale = None if norm is None else norm.channels["o3"]
    for j in range(min(first, n)):
        logger.info(f"Skipping {history.date(j).isoformat()}: insufficient history")

    previous: Optional[str] = None
    last = n + 1 if include_next_day else n
    for j in range(first, last):
        x = scale_inputs(history.window(j - 1, pipeline)[None, :], pipeline.input_channels, norm)
        raw = float(np.asarray(model.predict(x), dtype=float)[0])
        prediction = require_finite_scalar(raw if target_scale is None else float(target_scale.invert(raw)), "prediction")
        day = history.date(j) if j < n else history.date(n - 1) + timedelta(days=1)

        band = None if policy is None else triggered_band(prediction, policy)
        severity = None if band is None else band.severity
        event = None
        if band is not None and (policy.repeat_while_active or severity != previous):
            event = AlarmEvent(date=day, predicted_o3=prediction, severity=band.severity, bound=band.bound,
                               message=render_message(band, prediction, day))
        previous = severity

        actual = history.value(j) if j < n else None
        if adapt and actual is not None:
            target = actual if target_scale is None else float(target_scale.apply(actual))
            model = bel_train_step(model, x[0], target)
        yield ReplayRecord(date=day, prediction=prediction, actual=actual, event=event)
