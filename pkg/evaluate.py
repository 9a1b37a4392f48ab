"""Metrics, per-split evaluation and the three-model comparison harness."""
from typing import Any, Callable, Dict, Mapping, Sequence, Tuple
import hashlib
import json
import logging

import numpy as np
from pydantic import BaseModel

from dataset import denormalize_targets
from error_handlers import (
    ContractViolationError,
    ErrorHandler,
    RejectedInputError,
    UndefinedCorrelationError,
)
from models import (
    SPLIT_LABELS,
    EvalReport,
    ModelEvaluation,
    PatternSet,
    PredictionRecord,
    Predictor,
    SplitMetrics,
)

logger = logging.getLogger(__name__)

MODEL_KINDS = ("bel", "anfis", "mlp")


def _pair(predicted: Sequence[float], actual: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.ndim != 1 or p.shape != a.shape:
        raise ContractViolationError(f"length mismatch: {p.shape} vs {a.shape}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise RejectedInputError("metric inputs must be finite")
    return p, a


def correlation(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Pearson product-moment correlation (COR)."""
    p, a = _pair(predicted, actual)
    if len(p) < 2:
        raise ContractViolationError("correlation needs at least two samples")
    if np.ptp(p) == 0 or np.ptp(a) == 0:
        which = "predicted" if np.ptp(p) == 0 else "actual"
        raise UndefinedCorrelationError(f"{which} values are constant")
    pc = p - p.mean()
    ac = a - a.mean()
    denom = np.sqrt((pc @ pc) * (ac @ ac))
    if not np.isfinite(denom) or denom == 0:
        raise UndefinedCorrelationError("zero variance after centering")
    return float(np.clip((pc @ ac) / denom, -1.0, 1.0))


def rmse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    p, a = _pair(predicted, actual)
    return float(np.sqrt(np.mean((p - a) ** 2))) if len(p) else 0.0


def mae(predicted: Sequence[float], actual: Sequence[float]) -> float:
    p, a = _pair(predicted, actual)
    return float(np.mean(np.abs(p - a))) if len(p) else 0.0


SELECTION_COR_DECIMALS = 4


def selection_score(predicted: Sequence[float], actual: Sequence[float]) -> Tuple[int, float, float]:
    """Model-selection key, higher is better.

    (1, COR, -MSE) when COR is defined, else (0, 0, -MSE). COR is compared at
    SELECTION_COR_DECIMALS resolution so near-ties go to the lower error.
    """
    p, a = _pair(predicted, actual)
    neg_mse = -float(np.mean((p - a) ** 2)) if len(p) else 0.0
    try:
        return 1, round(correlation(p, a), SELECTION_COR_DECIMALS), neg_mse
    except (UndefinedCorrelationError, ContractViolationError):
        return 0, 0.0, neg_mse


def split_metrics(predicted: Sequence[float], actual: Sequence[float]) -> SplitMetrics:
    p, a = _pair(predicted, actual)
    if len(p) == 0:
        return SplitMetrics(count=0, error="empty split")
    metrics = {"count": len(p), "rmse": rmse(p, a), "mae": mae(p, a)}
    try:
        metrics["cor"] = correlation(p, a)
    except (UndefinedCorrelationError, ContractViolationError) as e:
        metrics["error"] = ErrorHandler.describe(e)
    return SplitMetrics(**metrics)


def fingerprint(config: Any) -> str:
    """sha256 of the canonical JSON form of a config."""
    if isinstance(config, BaseModel):
        config = config.model_dump(mode="json")
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def evaluate_model(model: Predictor, patterns: PatternSet) -> ModelEvaluation:
    """Per-split COR/RMSE/MAE in the original units of the target channel."""
    if model.input_dim != patterns.input_dim:
        raise ContractViolationError(
            f"model expects inputs of length {model.input_dim}, patterns have {patterns.input_dim}")
    X, t = patterns.arrays()
    predicted = np.asarray(model.predict(X), dtype=float)
    predicted, t = denormalize_targets(predicted, patterns), denormalize_targets(t, patterns)

    labels = np.asarray(patterns.split_labels)
    splits = {label: split_metrics(predicted[labels == label], t[labels == label]) for label in SPLIT_LABELS}
    records = [
        PredictionRecord(date=d, split=s, target=float(target), predicted=float(pred))
        for d, s, target, pred in zip(patterns.dates, patterns.split_labels, t, predicted)
    ]
    config = getattr(model, "config", {"kind": model.kind})
    return ModelEvaluation(kind=model.kind, config_fingerprint=fingerprint(config), splits=splits,
                           predictions=records)


def fit_model(kind: str, patterns: PatternSet, config: BaseModel) -> Predictor:
    """Dispatch to the trainer for `kind`."""
    from anfis import anfis_fit
    from bel_core import bel_fit
    from mlp import mlp_fit

    fitters: Dict[str, Callable[[PatternSet, Any], Predictor]] = {
        "bel": bel_fit,
        "anfis": anfis_fit,
        "mlp": mlp_fit,
    }
    if kind not in fitters:
        raise ContractViolationError(f"unknown model kind {kind!r}")
    return fitters[kind](patterns, config)


def rank_models(evaluations: Sequence[ModelEvaluation]) -> list:
    """Kinds ordered by test-split COR, best first; models without a test COR are left out."""
    scored = [e for e in evaluations if not e.failed and e.test_cor() is not None]
    return [e.kind for e in sorted(scored, key=lambda e: -e.test_cor())]


def compare(configs: Mapping[str, BaseModel], patterns: PatternSet, *, run_fingerprint: str = "",
            parallel: bool = True) -> EvalReport:
    """Train every configured model on the same splits and rank them by test COR."""
    from async_handlers import run_training_jobs

    jobs = {
        kind: (lambda kind=kind: ErrorHandler.safe_train(kind, lambda: fit_model(kind, patterns, configs[kind])))
        for kind in configs
    }
    if parallel:
        results = run_training_jobs(jobs)
    else:
        results = {kind: job() for kind, job in jobs.items()}

    evaluations = []
    for kind in configs:
        model, error = results[kind]
        if model is None:
            evaluations.append(ModelEvaluation(kind=kind, config_fingerprint=fingerprint(configs[kind]),
                                               failed=True, error=error))
            continue
        try:
            evaluations.append(evaluate_model(model, patterns))
        except Exception as e:
            logger.error(f"Evaluating {kind} failed: {e}")
            evaluations.append(ModelEvaluation(kind=kind, config_fingerprint=fingerprint(configs[kind]),
                                               failed=True, error=ErrorHandler.describe(e)))

    ranking = rank_models(evaluations)
    if not ranking:
        logger.warning("No model has a defined test COR; ranking is empty")
    return EvalReport(run_fingerprint=run_fingerprint, split_counts=patterns.split_counts(),
                      models=evaluations, ranking=ranking)

