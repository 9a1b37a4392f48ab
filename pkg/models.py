import datetime as dt
from typing import Dict, List, Literal, Optional, Protocol, Tuple, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, FiniteFloat, model_validator

from validators import DateValidator, PolicyValidator

Channel = Literal["o3", "uv", "tsr"]
PatternMode = Literal["lagged_o3", "sensors"]
SplitLabel = Literal["train", "validation", "test"]
SPLIT_LABELS: Tuple[SplitLabel, ...] = ("train", "validation", "test")
Direction = Literal["low_is_dangerous", "high_is_dangerous"]


@runtime_checkable
class Predictor(Protocol):
    """Anything that maps a (n, input_dim) matrix of normalized patterns to n predictions."""

    kind: str

    @property
    def input_dim(self) -> int: ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


class Series(BaseModel):
    """Daily sensor sequence: total ozone plus optional UV and total solar radiation."""

    model_config = ConfigDict(frozen=True)

    dates: List[dt.date]
    o3: List[FiniteFloat]
    uv: Optional[List[FiniteFloat]] = None
    tsr: Optional[List[FiniteFloat]] = None

    @model_validator(mode="after")
    def check_channels(self):
        n = len(self.dates)
        for name in ("o3", "uv", "tsr"):
            values = getattr(self, name)
            if values is not None and len(values) != n:
                raise ValueError(f"channel {name} has {len(values)} values for {n} dates")
        ok, message, _ = DateValidator.validate_increasing(self.dates)
        if not ok:
            raise ValueError(message)
        return self

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def has_sensors(self) -> bool:
        return self.uv is not None and self.tsr is not None

    def channel(self, name: str) -> np.ndarray:
        values = getattr(self, name)
        if values is None:
            raise KeyError(name)
        return np.asarray(values, dtype=float)


class ChannelScale(BaseModel):
    """Min-max scaling of one channel; `fallback` marks a degenerate (constant) channel."""

    minimum: float
    maximum: float
    fallback: bool = False

    @property
    def span(self) -> float:
        return 1.0 if self.fallback else self.maximum - self.minimum

    def apply(self, values):
        return (np.asarray(values, dtype=float) - self.minimum) / self.span

    def invert(self, values):
        return np.asarray(values, dtype=float) * self.span + self.minimum


class Normalization(BaseModel):
    channels: Dict[str, ChannelScale]


class PatternSet(BaseModel):
    """Supervised (input vector, target) pairs with split labels, one target date per pair."""

    model_config = ConfigDict(frozen=True)

    inputs: List[List[float]]
    targets: List[float]
    split_labels: List[SplitLabel]
    dates: List[dt.date]
    mode: PatternMode
    lag: int = Field(ge=1)
    input_channels: List[Channel]
    target_channel: Channel = "o3"
    normalization: Optional[Normalization] = None

    @model_validator(mode="after")
    def check_lengths(self):
        n = len(self.inputs)
        if not (len(self.targets) == len(self.split_labels) == len(self.dates) == n):
            raise ValueError("inputs, targets, split_labels and dates must have equal length")
        width = len(self.input_channels)
        if any(len(row) != width for row in self.inputs):
            raise ValueError(f"every input vector must have length {width}")
        return self

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def input_dim(self) -> int:
        return len(self.input_channels)

    def indices(self, split: Optional[SplitLabel] = None) -> np.ndarray:
        labels = np.asarray(self.split_labels)
        if split is None:
            return np.arange(len(labels))
        return np.flatnonzero(labels == split)

    def arrays(self, split: Optional[SplitLabel] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Return (X, t) as float arrays, optionally restricted to one split."""
        X = np.asarray(self.inputs, dtype=float).reshape(len(self.inputs), self.input_dim)
        t = np.asarray(self.targets, dtype=float)
        if split is None:
            return X, t
        idx = self.indices(split)
        return X[idx], t[idx]

    def split_counts(self) -> Dict[str, int]:
        return {label: int(len(self.indices(label))) for label in SPLIT_LABELS}


class PipelineSpec(BaseModel):
    """What a trained model needs to turn raw series values into its inputs."""

    lag: int = Field(ge=1)
    mode: PatternMode
    input_channels: List[Channel]
    normalization: Optional[Normalization] = None


class AlarmBand(BaseModel):
    bound: FiniteFloat
    severity: str
    message: str = "O3 predicted {value} crosses {bound} ({severity})"


class AlarmPolicy(BaseModel):
    """Expert threshold bands on predicted O3."""

    direction: Direction
    bands: List[AlarmBand]
    repeat_while_active: bool = False

    @model_validator(mode="after")
    def check_bands(self):
        ok, message = PolicyValidator.validate_bounds([b.bound for b in self.bands])
        if not ok:
            raise ValueError(message)
        ok, message = PolicyValidator.validate_labels([b.severity for b in self.bands])
        if not ok:
            raise ValueError(message)
        return self

    def ranked_bands(self) -> List[AlarmBand]:
        """Bands from least to most severe."""
        low = self.direction == "low_is_dangerous"
        return sorted(self.bands, key=lambda b: -b.bound if low else b.bound)

    def rank(self, severity: Optional[str]) -> int:
        """0 for no alarm, 1 for the mildest band, up to len(bands)."""
        if severity is None:
            return 0
        return 1 + [b.severity for b in self.ranked_bands()].index(severity)


class AlarmEvent(BaseModel):
    date: dt.date
    predicted_o3: FiniteFloat
    severity: str
    bound: float
    message: str


class ReplayRecord(BaseModel):
    """One streamed line: a day's prediction, the observed value if known, and any alarm."""

    date: dt.date
    prediction: float
    actual: Optional[float] = None
    event: Optional[AlarmEvent] = None


class SplitMetrics(BaseModel):
    count: int = Field(ge=0)
    cor: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    rmse: Optional[float] = Field(default=None, ge=0.0)
    mae: Optional[float] = Field(default=None, ge=0.0)
    error: Optional[str] = None


class PredictionRecord(BaseModel):
    date: dt.date
    split: SplitLabel
    target: float
    predicted: float


class ModelEvaluation(BaseModel):
    kind: str
    config_fingerprint: str
    splits: Dict[str, SplitMetrics] = Field(default_factory=dict)
    failed: bool = False
    error: Optional[str] = None
    predictions: List[PredictionRecord] = Field(default_factory=list)

    def test_cor(self) -> Optional[float]:
        test = self.splits.get("test")
        return None if test is None else test.cor


class EvalReport(BaseModel):
    run_fingerprint: str
    split_counts: Dict[str, int]
    models: List[ModelEvaluation]
    ranking: List[str] = Field(default_factory=list)

    def evaluation(self, kind: str) -> ModelEvaluation:
        for evaluation in self.models:
            if evaluation.kind == kind:
                return evaluation
        raise KeyError(kind)
