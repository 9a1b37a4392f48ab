"""Supervised brain emotional learning (BEL) predictor.

Amygdala output      E_a = sum_j v_j p_j + v_{m+1} max_j p_j
Orbitofrontal output E_o = sum_j w_j p_j
Prediction           E   = E_a - E_o

Learning, with k the step index:
    v_j <- (1 - gamma) v_j + alpha max(t - E_a, 0) p_j      (threshold unit uses max_j p_j)
    w_j <- w_j + beta (E - t) p_j
"""
from typing import List, Literal, NamedTuple, Optional, Tuple
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from error_handlers import ConfigurationError, ContractViolationError, DivergedTrainingError
from evaluate import selection_score
from models import PatternSet
from validators import require_finite_scalar, require_vector

logger = logging.getLogger(__name__)


class BelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_dim: int = Field(ge=1)
    alpha: float = Field(default=0.2, gt=0)
    beta: float = Field(default=0.1, gt=0)
    gamma: float = Field(default=0.001, ge=0, lt=1)
    epochs: int = Field(default=100, ge=0)
    seed: int = 7


class BelModel(BaseModel):
    """Amygdala weights `v` (last entry on max(p)) and orbitofrontal weights `w`."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["bel"] = "bel"
    v: List[float]
    w: List[float]
    config: BelConfig
    trained_epochs: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_weights(self):
        m = self.config.input_dim
        if len(self.v) != m + 1 or len(self.w) != m:
            raise ValueError(f"expected len(v) == {m + 1} and len(w) == {m}")
        if not (np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.w))):
            raise ValueError("BEL weights must be finite")
        return self

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    def predict(self, X: np.ndarray) -> np.ndarray:
        return bel_predict_batch(self, X)


class BelOutput(NamedTuple):
    E: float
    E_a: float
    E_o: float


def bel_init(config: BelConfig) -> BelModel:
    """Zero-initialized model."""
    m = config.input_dim
    return BelModel(v=[0.0] * (m + 1), w=[0.0] * m, config=config)


def _amygdala_input(p: np.ndarray) -> np.ndarray:
    return np.append(p, p.max())


def _forward(v: np.ndarray, w: np.ndarray, p: np.ndarray) -> BelOutput:
    e_a = float(v @ _amygdala_input(p))
    e_o = float(w @ p)
    return BelOutput(E=e_a - e_o, E_a=e_a, E_o=e_o)


def _step(v: np.ndarray, w: np.ndarray, p: np.ndarray, t: float,
          alpha: float, beta: float, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    # E_a and E come from the pre-update weights
    pa = _amygdala_input(p)
    e_a = v @ pa
    e = e_a - w @ p
    v_new = (1.0 - gamma) * v + alpha * max(t - e_a, 0.0) * pa
    w_new = w + beta * (e - t) * p
    return v_new, w_new


def bel_forward(model: BelModel, p) -> BelOutput:
    """Prediction E for one input vector, with the amygdala and orbitofrontal parts."""
    x = require_vector(p, model.input_dim)
    return _forward(np.asarray(model.v), np.asarray(model.w), x)


def bel_train_step(model: BelModel, p, t: float, *, alpha: Optional[float] = None,
                   beta: Optional[float] = None, gamma: Optional[float] = None) -> BelModel:
    """One application of both learning rules; returns a new model.

    The keyword rates override the model's config (any value >= 0, gamma < 1), which allows
    frozen-pathway runs such as pure decay.
    """
    x = require_vector(p, model.input_dim)
    target = require_finite_scalar(t, "target")
    cfg = model.config
    a = cfg.alpha if alpha is None else alpha
    b = cfg.beta if beta is None else beta
    g = cfg.gamma if gamma is None else gamma
    if a < 0 or b < 0 or not 0 <= g < 1:
        raise ConfigurationError(f"invalid rates alpha={a}, beta={b}, gamma={g}")
    v, w = _step(np.asarray(model.v), np.asarray(model.w), x, target, a, b, g)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise DivergedTrainingError("bel", model.trained_epochs)
    return model.model_copy(update={"v": v.tolist(), "w": w.tolist()})


def bel_predict_batch(model: BelModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ContractViolationError(f"expected patterns of length {model.input_dim}, got shape {X.shape}")
    if len(X) == 0:
        return np.zeros(0)
    Xa = np.hstack([X, X.max(axis=1, keepdims=True)])
    return Xa @ np.asarray(model.v) - X @ np.asarray(model.w)


def bel_fit(patterns: PatternSet, config: BelConfig) -> BelModel:
    """Train on the train split; keep the epoch snapshot with the best validation score."""
    if patterns.input_dim != config.input_dim:
        raise ContractViolationError(
            f"patterns have length {patterns.input_dim}, config expects {config.input_dim}")
    X, t = patterns.arrays("train")
    if len(t) == 0:
        raise ConfigurationError("BEL training split is empty")
    Xs, ts = patterns.arrays("validation")
    if len(ts) == 0:
        logger.info("Validation split empty; selecting the BEL snapshot on the training split")
        Xs, ts = X, t

    model = bel_init(config)
    if config.epochs == 0:
        return model

    rng = np.random.default_rng(config.seed)
    v, w = np.asarray(model.v), np.asarray(model.w)
    best = None
    for epoch in range(1, config.epochs + 1):
        for i in rng.permutation(len(t)):
            v, w = _step(v, w, X[i], t[i], config.alpha, config.beta, config.gamma)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise DivergedTrainingError("bel", epoch)
        candidate = model.model_copy(update={"v": v.tolist(), "w": w.tolist(), "trained_epochs": epoch})
        score = selection_score(bel_predict_batch(candidate, Xs), ts)
        logger.debug(f"BEL epoch {epoch}: selection score {score}")
        if best is None or score > best[0]:
            best = (score, candidate)

    logger.info(f"BEL selected epoch {best[1].trained_epochs} of {config.epochs} (score {best[0]})")
    return best[1]
