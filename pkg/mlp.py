"""Single-hidden-layer perceptron (m-h-1), tanh hidden units and a linear output, trained by backprop."""
from typing import List, Literal, NamedTuple, Optional, Tuple
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from error_handlers import ConfigurationError, ContractViolationError, DivergedTrainingError
from evaluate import selection_score
from models import PatternSet
from validators import require_vector

logger = logging.getLogger(__name__)


class MlpConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_dim: int = Field(ge=1)
    hidden: int = Field(default=2, ge=1)
    learning_rate: float = Field(default=0.05, gt=0)
    epochs: int = Field(default=100, ge=0)
    seed: int = 7


class MlpModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["mlp"] = "mlp"
    W1: List[List[float]]
    b1: List[float]
    W2: List[float]
    b2: float
    config: MlpConfig
    trained_epochs: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_shapes(self):
        h, m = self.config.hidden, self.config.input_dim
        if len(self.W1) != h or any(len(row) != m for row in self.W1):
            raise ValueError(f"W1 must be {h} x {m}")
        if len(self.b1) != h or len(self.W2) != h:
            raise ValueError(f"b1 and W2 must have length {h}")
        return self

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    def predict(self, X: np.ndarray) -> np.ndarray:
        return mlp_predict_batch(self, X)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        return np.asarray(self.W1, dtype=float), np.asarray(self.b1, dtype=float), np.asarray(self.W2, dtype=float), float(self.b2)


class MlpGradient(NamedTuple):
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float


def _build(W1, b1, W2, b2, config: MlpConfig, epochs: int = 0) -> MlpModel:
    return MlpModel(W1=W1.tolist(), b1=b1.tolist(), W2=W2.tolist(), b2=float(b2), config=config,
                    trained_epochs=epochs)


def mlp_init(config: MlpConfig, rng: Optional[np.random.Generator] = None) -> MlpModel:
    """Uniform weights in +-1/sqrt(fan_in) per layer."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    bound1 = 1.0 / math.sqrt(config.input_dim)
    bound2 = 1.0 / math.sqrt(config.hidden)
    W1 = rng.uniform(-bound1, bound1, size=(config.hidden, config.input_dim))
    b1 = rng.uniform(-bound1, bound1, size=config.hidden)
    W2 = rng.uniform(-bound2, bound2, size=config.hidden)
    b2 = rng.uniform(-bound2, bound2)
    return _build(W1, b1, W2, b2, config)


def _check_inputs(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ContractViolationError(f"expected patterns of length {model.input_dim}, got shape {X.shape}")
    return X


def mlp_forward(model: MlpModel, x) -> float:
    p = require_vector(x, model.input_dim)
    W1, b1, W2, b2 = model.arrays()
    return float(W2 @ np.tanh(W1 @ p + b1) + b2)


def mlp_predict_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = _check_inputs(model, X)
    W1, b1, W2, b2 = model.arrays()
    return np.tanh(X @ W1.T + b1) @ W2 + b2


def mlp_loss_and_gradient(model: MlpModel, X: np.ndarray, t: np.ndarray) -> Tuple[float, MlpGradient]:
    """Half mean squared error and its backpropagated gradient."""
    X = _check_inputs(model, X)
    t = np.asarray(t, dtype=float)
    W1, b1, W2, b2 = model.arrays()
    H = np.tanh(X @ W1.T + b1)
    resid = H @ W2 + b2 - t
    n = len(t)
    e = resid / n
    dH = e[:, None] * W2[None, :] * (1.0 - H ** 2)
    grad = MlpGradient(W1=dH.T @ X, b1=dH.sum(axis=0), W2=H.T @ e, b2=float(e.sum()))
    return 0.5 * float(np.mean(resid ** 2)), grad


def mlp_fit(patterns: PatternSet, config: MlpConfig) -> MlpModel:
    """Per-sample SGD with a seeded shuffle each epoch; keeps the best validation snapshot."""
    if patterns.input_dim != config.input_dim:
        raise ContractViolationError(
            f"patterns have length {patterns.input_dim}, config expects {config.input_dim}")
    X, t = patterns.arrays("train")
    if len(t) == 0:
        raise ConfigurationError("MLP training split is empty")
    Xs, ts = patterns.arrays("validation")
    if len(ts) == 0:
        Xs, ts = X, t

    rng = np.random.default_rng(config.seed)
    model = mlp_init(config, rng)
    if config.epochs == 0:
        return model

    W1, b1, W2, b2 = model.arrays()
    lr = config.learning_rate
    best = None
    for epoch in range(1, config.epochs + 1):
        for i in rng.permutation(len(t)):
            x = X[i]
            h = np.tanh(W1 @ x + b1)
            err = W2 @ h + b2 - t[i]
            g_hidden = err * W2 * (1.0 - h * h)
            W2 = W2 - lr * err * h
            b2 = b2 - lr * err
            W1 = W1 - lr * np.outer(g_hidden, x)
            b1 = b1 - lr * g_hidden
        train_mse = float(np.mean((np.tanh(X @ W1.T + b1) @ W2 + b2 - t) ** 2))
        if not np.isfinite(train_mse):
            raise DivergedTrainingError("mlp", epoch)
        candidate = _build(W1, b1, W2, b2, config, epoch)
        score = selection_score(mlp_predict_batch(candidate, Xs), ts)
        logger.debug(f"MLP epoch {epoch}: train MSE {train_mse}, selection score {score}")
        if best is None or score > best[0]:
            best = (score, candidate)

    logger.info(f"MLP selected epoch {best[1].trained_epochs} of {config.epochs} (score {best[0]})")
    return best[1]
