"""Series ingestion, sliding-window patterns, random splits, train-only scaling and synthetic series."""
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, TextIO, Tuple, Union
import logging
import math
import re

import numpy as np
import pandas as pd

from error_handlers import (
    ConfigurationError,
    ContractViolationError,
    GapError,
    InsufficientDataError,
    MissingChannelError,
    OrderingError,
    ParseError,
)
from models import ChannelScale, Normalization, PatternMode, PatternSet, Series
from validators import SplitValidator

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("date", "o3")
SENSOR_COLUMNS = ("uv", "tsr")
DATE_FORMAT = "%Y-%m-%d"
DEFAULT_LAG = 4
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)
MIN_SYNTH_LENGTH = 100

SYNTH_EPOCH = date(2000, 1, 1)
SEASON_DAYS = 365.0
O3_BASE = 300.0
O3_AMPLITUDE = 30.0
O3_PHASE = 0.0
AR_COEFF = 0.8
UV_BASE = 6.0
UV_AMPLITUDE = 4.0
UV_PHASE = 0.35
TSR_BASE = 20.0
TSR_AMPLITUDE = 8.0
TSR_PHASE = 0.25

MG_TAU = 17.0
MG_BETA = 0.2
MG_GAMMA = 0.1
MG_EXPONENT = 10
MG_DT = 0.1
MG_HISTORY = 1.2
MG_WARMUP = 300
MG_OFFSET = 200.0
MG_SCALE = 100.0

PathLike = Union[str, Path]


def _parse_float(cell, line: int, column: str) -> float:
    if cell is None or (isinstance(cell, float) and math.isnan(cell)) or str(cell).strip() == "":
        raise ParseError("missing value", line, column)
    try:
        value = float(str(cell).strip())
    except ValueError:
        raise ParseError(f"not a number: {cell!r}", line, column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {cell!r}", line, column)
    return value


def _parse_date(cell, line: int) -> date:
    try:
        return datetime.strptime(str(cell).strip(), DATE_FORMAT).date()
    except ValueError:
        raise ParseError(f"date {cell!r} is not YYYY-MM-DD", line, "date") from None


def load_csv(path: PathLike) -> Series:
    """Read `date,o3[,uv,tsr]`; reject malformed rows, unordered dates and calendar gaps."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False,
                            skip_blank_lines=False, skipinitialspace=True, encoding="utf-8")
    except FileNotFoundError:
        raise ConfigurationError(f"data file not found: {path}") from None
    except pd.errors.EmptyDataError:
        raise InsufficientDataError(f"{path} is empty") from None
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ParseError(f"malformed row ({e})", int(match.group(1)) if match else 0) from None

    frame.columns = [c.strip().lower() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"header lacks column(s) {', '.join(missing)}", 1)
    extra = [c for c in frame.columns if c not in REQUIRED_COLUMNS + SENSOR_COLUMNS]
    if extra:
        logger.warning(f"Ignoring unknown column(s) in {path.name}: {', '.join(extra)}")
    blank = _blank_rows(frame)
    while len(frame) and blank.iloc[len(frame) - 1]:
        frame, blank = frame.iloc[:-1], blank.iloc[:-1]
    if frame.empty:
        raise InsufficientDataError(f"{path} has a header but no data rows")

    sensors = [c for c in SENSOR_COLUMNS if c in frame.columns]
    dates: List[date] = []
    channels: Dict[str, List[float]] = {c: [] for c in ("o3", *sensors)}
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + 2
        if blank.iloc[offset]:
            raise ParseError("blank line inside the data", line)
        record = row._asdict()
        day = _parse_date(record["date"], line)
        if dates and day <= dates[-1]:
            raise OrderingError(f"date {day.isoformat()} does not follow {dates[-1].isoformat()}", line)
        if dates and day - dates[-1] > timedelta(days=1):
            raise GapError(dates[-1] + timedelta(days=1), line)
        dates.append(day)
        for column in channels:
            channels[column].append(_parse_float(record[column], line, column))

    logger.info(f"Loaded {len(dates)} days from {path}")
    return Series(dates=dates, **channels)


def _blank_rows(frame: pd.DataFrame) -> pd.Series:
    """True where every cell of a row is missing or whitespace; row offset + 2 is its physical line."""
    empty = frame.apply(lambda column: column.isna() | (column.fillna("").astype(str).str.strip() == ""))
    return empty.all(axis=1)


def write_csv(series: Series, target: Union[PathLike, TextIO]) -> None:
    """Write the `date,o3[,uv,tsr]` format with six decimals to a path or an open text stream."""
    columns = {"date": [d.strftime(DATE_FORMAT) for d in series.dates], "o3": series.o3}
    if series.has_sensors:
        columns["uv"] = series.uv
        columns["tsr"] = series.tsr
    frame = pd.DataFrame(columns)
    if isinstance(target, (str, Path)):
        target = Path(target)
        target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False, float_format="%.6f", lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {len(series)} days to {target if isinstance(target, Path) else 'stream'}")


def make_patterns(series: Series, lag: int = DEFAULT_LAG, mode: PatternMode = "lagged_o3") -> PatternSet:
    """Sliding-window patterns predicting tomorrow's o3; every input index precedes its target."""
    if lag < 1:
        raise ConfigurationError(f"lag must be >= 1, got {lag}")
    o3 = list(series.o3)
    if mode == "lagged_o3":
        if len(o3) < lag + 1:
            raise InsufficientDataError(f"series of length {len(o3)} is shorter than lag + 1 = {lag + 1}")
        inputs = [o3[i:i + lag] for i in range(len(o3) - lag)]
        targets = o3[lag:]
        dates = list(series.dates[lag:])
        channels = ["o3"] * lag
    elif mode == "sensors":
        if not series.has_sensors:
            raise MissingChannelError("sensors mode needs uv and tsr channels")
        if len(o3) < 2:
            raise InsufficientDataError("sensors mode needs at least two days")
        if lag != 1:
            logger.info(f"sensors mode uses one day of uv, tsr, o3; ignoring lag={lag}")
        inputs = [[u, s, o] for u, s, o in zip(series.uv[:-1], series.tsr[:-1], o3[:-1])]
        targets = o3[1:]
        dates = list(series.dates[1:])
        channels = ["uv", "tsr", "o3"]
        lag = 1
    else:
        raise ConfigurationError(f"unknown pattern mode {mode!r}")
    return PatternSet(inputs=inputs, targets=targets, split_labels=["train"] * len(targets), dates=dates,
                      mode=mode, lag=lag, input_channels=channels)


def split_counts(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    """Held-out counts are floored, train takes the remainder but stays within one sample of its share."""
    held_out = [math.floor(fractions[j] * n + 1e-9) for j in (1, 2)]
    counts = [n - sum(held_out), *held_out]
    if counts[0] - fractions[0] * n > 1:
        deficit = [fractions[j] * n - counts[j] for j in (1, 2)]
        j = 1 if deficit[0] >= deficit[1] else 2
        counts[0] -= 1
        counts[j] += 1
    return counts[0], counts[1], counts[2]


def assign_splits(patterns: PatternSet, fractions: Sequence[float] = DEFAULT_FRACTIONS, seed: int = 7) -> PatternSet:
    """Seeded random permutation partitioned into train / validation / test."""
    ok, message = SplitValidator.validate_fractions(fractions)
    if not ok:
        raise ConfigurationError(message)
    n = len(patterns)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 patterns to split, got {n}")
    n_train, n_val, _ = split_counts(n, fractions)
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=object)
    labels[order[:n_train]] = "train"
    labels[order[n_train:n_train + n_val]] = "validation"
    labels[order[n_train + n_val:]] = "test"
    return patterns.model_copy(update={"split_labels": labels.tolist()})


def normalize(patterns: PatternSet) -> PatternSet:
    """Min-max scale every channel to [0, 1] with parameters taken from the train split only."""
    if patterns.normalization is not None:
        raise ContractViolationError("pattern set is already normalized")
    X, t = patterns.arrays("train")
    if len(t) == 0:
        raise ConfigurationError("cannot normalize without training patterns")
    channels = np.asarray(patterns.input_channels)
    scales: Dict[str, ChannelScale] = {}
    for name in dict.fromkeys([*patterns.input_channels, patterns.target_channel]):
        values = [X[:, channels == name].ravel()]
        if name == patterns.target_channel:
            values.append(t)
        values = np.concatenate(values)
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            logger.warning(f"Channel {name} is constant on the train split; using unit range")
        scales[name] = ChannelScale(minimum=lo, maximum=hi, fallback=hi <= lo)

    norm = Normalization(channels=scales)
    X_all, t_all = patterns.arrays()
    return patterns.model_copy(update={
        "inputs": scale_inputs(X_all, patterns.input_channels, norm).tolist(),
        "targets": scales[patterns.target_channel].apply(t_all).tolist(),
        "normalization": norm,
    })


def scale_inputs(X: np.ndarray, input_channels: Sequence[str], normalization: Optional[Normalization]) -> np.ndarray:
    """Apply per-channel scaling column by column; identity when `normalization` is None."""
    X = np.asarray(X, dtype=float)
    if normalization is None:
        return X.copy()
    out = np.empty_like(X)
    for j, name in enumerate(input_channels):
        out[..., j] = normalization.channels[name].apply(X[..., j])
    return out


def denormalize_targets(values, patterns: PatternSet) -> np.ndarray:
    if patterns.normalization is None:
        return np.asarray(values, dtype=float)
    return patterns.normalization.channels[patterns.target_channel].invert(values)


def synth_series(kind: Literal["seasonal_ar", "mackey_glass"], length: int, seed: int,
                 noise_level: float = 0.0, start: date = SYNTH_EPOCH) -> Series:
    """Synthetic daily series standing in for field data."""
    if length < MIN_SYNTH_LENGTH:
        raise InsufficientDataError(f"synthetic series need length >= {MIN_SYNTH_LENGTH}, got {length}")
    if noise_level < 0 or not math.isfinite(noise_level):
        raise ConfigurationError(f"noise_level must be finite and >= 0, got {noise_level}")
    rng = np.random.default_rng(seed)
    dates = [start + timedelta(days=i) for i in range(length)]
    if kind == "seasonal_ar":
        return Series(dates=dates, **_seasonal_ar(length, rng, noise_level))
    if kind == "mackey_glass":
        x = mackey_glass(length)
        o3 = MG_OFFSET + MG_SCALE * x
        if noise_level > 0:
            o3 = o3 + noise_level * float(np.std(o3)) * rng.standard_normal(length)
        return Series(dates=dates, o3=o3.tolist())
    raise ConfigurationError(f"unknown synthetic kind {kind!r}")


def _seasonal_ar(length: int, rng: np.random.Generator, noise_level: float) -> Dict[str, List[float]]:
    days = np.arange(length, dtype=float)
    innovations = rng.standard_normal(length)
    uv_noise = rng.standard_normal(length)
    tsr_noise = rng.standard_normal(length)

    ar = np.zeros(length)
    previous = 0.0
    for i in range(length):
        previous = AR_COEFF * previous + noise_level * O3_AMPLITUDE * innovations[i]
        ar[i] = previous

    season = np.sin(2.0 * np.pi * days / SEASON_DAYS + O3_PHASE)
    o3 = O3_BASE + O3_AMPLITUDE * season + ar
    uv = UV_BASE + UV_AMPLITUDE * np.sin(2.0 * np.pi * days / SEASON_DAYS + UV_PHASE) + noise_level * UV_AMPLITUDE * uv_noise
    tsr = TSR_BASE + TSR_AMPLITUDE * np.sin(2.0 * np.pi * days / SEASON_DAYS + TSR_PHASE) + noise_level * TSR_AMPLITUDE * tsr_noise
    return {"o3": o3.tolist(), "uv": uv.tolist(), "tsr": tsr.tolist()}


def mackey_glass(length: int, warmup: int = MG_WARMUP) -> np.ndarray:
    """Delay-17 Mackey-Glass series sampled once per time unit (RK4, constant history)."""
    per_sample = int(round(1.0 / MG_DT))
    delay = int(round(MG_TAU / MG_DT))
    steps = (warmup + length) * per_sample
    x = np.empty(delay + steps + 1)
    x[:delay + 1] = MG_HISTORY

    def rate(current: float, delayed: float) -> float:
        return MG_BETA * delayed / (1.0 + delayed ** MG_EXPONENT) - MG_GAMMA * current

    for n in range(delay, delay + steps):
        lagged0, lagged1 = x[n - delay], x[n - delay + 1]
        lagged_mid = 0.5 * (lagged0 + lagged1)
        k1 = rate(x[n], lagged0)
        k2 = rate(x[n] + 0.5 * MG_DT * k1, lagged_mid)
        k3 = rate(x[n] + 0.5 * MG_DT * k2, lagged_mid)
        k4 = rate(x[n] + MG_DT * k3, lagged1)
        x[n + 1] = x[n] + MG_DT / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    samples = x[delay::per_sample]
    return samples[warmup:warmup + length]
