"""First-order Sugeno ANFIS with Gaussian membership functions, trained by gradient descent.

Layers: fuzzifier (membership degrees), production (rule firing strengths), normalized
(strength shares), defuzzy (share times affine rule output) and output (sum).
"""
from itertools import product
from typing import List, Literal, NamedTuple, Tuple
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import settings
from error_handlers import (
    ConfigurationError,
    ContractViolationError,
    DegenerateActivationError,
    DivergedTrainingError,
)
from models import PatternSet
from validators import require_vector

logger = logging.getLogger(__name__)


class AnfisConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_dim: int = Field(ge=1)
    mfs_per_input: int = Field(default=2, ge=1)
    learning_rate: float = Field(default=0.1, gt=0)
    epochs: int = Field(default=300, ge=0)
    seed: int = 7
    consequent_order: Literal[0, 1] = 1
    rule_cap: int = Field(default_factory=lambda: settings.anfis_rule_cap, ge=1)

    @model_validator(mode="after")
    def check_rule_count(self):
        if self.mfs_per_input ** self.input_dim > self.rule_cap:
            raise ValueError(
                f"{self.mfs_per_input}^{self.input_dim} rules exceed the cap of {self.rule_cap}")
        return self

    @property
    def n_rules(self) -> int:
        return self.mfs_per_input ** self.input_dim


class MembershipFunction(BaseModel):
    center: float
    width: float = Field(gt=0)


class AnfisModel(BaseModel):
    """Premise: per input, per MF a Gaussian. Consequent: per rule [a_1..a_m, bias]."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["anfis"] = "anfis"
    premise: List[List[MembershipFunction]]
    consequent: List[List[float]]
    config: AnfisConfig

    @model_validator(mode="after")
    def check_shapes(self):
        cfg = self.config
        if len(self.premise) != cfg.input_dim or any(len(mfs) != cfg.mfs_per_input for mfs in self.premise):
            raise ValueError(f"premise must be {cfg.input_dim} x {cfg.mfs_per_input}")
        if len(self.consequent) != cfg.n_rules or any(len(row) != cfg.input_dim + 1 for row in self.consequent):
            raise ValueError(f"consequent must be {cfg.n_rules} x {cfg.input_dim + 1}")
        return self

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    def predict(self, X: np.ndarray) -> np.ndarray:
        return anfis_predict_batch(self, X)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(centers, widths, consequent) as float arrays."""
        centers = np.array([[mf.center for mf in mfs] for mfs in self.premise], dtype=float)
        widths = np.array([[mf.width for mf in mfs] for mfs in self.premise], dtype=float)
        return centers, widths, np.asarray(self.consequent, dtype=float)


class AnfisLayers(NamedTuple):
    membership: np.ndarray   # (n, input_dim, mfs)
    firing: np.ndarray       # (n, rules)
    normalized: np.ndarray   # (n, rules)
    rule_outputs: np.ndarray  # (n, rules)
    output: np.ndarray       # (n,)
    floored: np.ndarray      # (n,) bool, firing sum hit the underflow floor


class AnfisGradient(NamedTuple):
    centers: np.ndarray
    widths: np.ndarray
    consequent: np.ndarray


class AnfisTrainingTrace(NamedTuple):
    mse: List[float]
    underflow_count: int


def rule_table(input_dim: int, mfs_per_input: int) -> np.ndarray:
    """Row r lists the MF index each input uses in rule r; the first input varies slowest."""
    return np.array(list(product(range(mfs_per_input), repeat=input_dim)), dtype=int).reshape(-1, input_dim)


def from_arrays(centers: np.ndarray, widths: np.ndarray, consequent: np.ndarray, config: AnfisConfig) -> AnfisModel:
    premise = [
        [MembershipFunction(center=float(c), width=float(s)) for c, s in zip(row_c, row_s)]
        for row_c, row_s in zip(centers, widths)
    ]
    return AnfisModel(premise=premise, consequent=consequent.tolist(), config=config)


def _layers(centers, widths, theta, X, rules, floor: float) -> AnfisLayers:
    d = X.shape[1]
    diff = X[:, :, None] - centers[None]
    log_mu = -(diff ** 2) / (2.0 * widths[None] ** 2)
    log_w = log_mu[:, np.arange(d)[None, :], rules].sum(axis=2)
    w = np.exp(log_w)
    total = w.sum(axis=1)
    floored = total < floor
    wbar = w / np.maximum(total, floor)[:, None]
    z = np.hstack([X, np.ones((len(X), 1))]) @ theta.T
    y = (wbar * z).sum(axis=1)
    return AnfisLayers(np.exp(log_mu), w, wbar, z, y, floored)


def _loss_and_gradient(centers, widths, theta, X, t, rules, order: int, floor: float):
    layers = _layers(centers, widths, theta, X, rules, floor)
    n = len(t)
    resid = layers.output - t
    loss = 0.5 * float(np.mean(resid ** 2))
    e = resid / n

    X1 = np.hstack([X, np.ones((n, 1))])
    d_theta = (e[:, None] * layers.normalized).T @ X1
    if order == 0:
        d_theta[:, :-1] = 0.0

    # dy/dw_r = (z_r - y) / S and dw_r/dc = w_r (x - c) / sigma^2
    G = e[:, None] * (layers.rule_outputs - layers.output[:, None]) * layers.normalized
    d_c = np.zeros_like(centers)
    d_s = np.zeros_like(widths)
    for i in range(centers.shape[0]):
        for k in range(centers.shape[1]):
            g_ik = G[:, rules[:, i] == k].sum(axis=1)
            delta = X[:, i] - centers[i, k]
            d_c[i, k] = g_ik @ delta / widths[i, k] ** 2
            d_s[i, k] = g_ik @ delta ** 2 / widths[i, k] ** 3
    return loss, AnfisGradient(d_c, d_s, d_theta), int(layers.floored.sum())


def _check_inputs(model: AnfisModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ContractViolationError(f"expected patterns of length {model.input_dim}, got shape {X.shape}")
    return X


def anfis_layers(model: AnfisModel, X: np.ndarray) -> AnfisLayers:
    """All five layer outputs for a batch; no underflow error is raised here."""
    X = _check_inputs(model, X)
    centers, widths, theta = model.arrays()
    rules = rule_table(model.input_dim, model.config.mfs_per_input)
    return _layers(centers, widths, theta, X, rules, settings.anfis_underflow_floor)


def anfis_forward(model: AnfisModel, x) -> float:
    """Output for one input vector."""
    p = require_vector(x, model.input_dim)
    layers = anfis_layers(model, p[None, :])
    if layers.floored[0]:
        raise DegenerateActivationError(f"every rule firing strength underflows at input {p.tolist()}")
    return float(layers.output[0])


def anfis_predict_batch(model: AnfisModel, X: np.ndarray) -> np.ndarray:
    X = _check_inputs(model, X)
    if len(X) == 0:
        return np.zeros(0)
    layers = anfis_layers(model, X)
    if layers.floored.any():
        logger.warning(f"{int(layers.floored.sum())} ANFIS predictions hit the firing-strength floor")
    return layers.output


def anfis_loss_and_gradient(model: AnfisModel, X: np.ndarray, t: np.ndarray) -> Tuple[float, AnfisGradient]:
    """Half mean squared error and its gradient with respect to every parameter."""
    X = _check_inputs(model, X)
    centers, widths, theta = model.arrays()
    rules = rule_table(model.input_dim, model.config.mfs_per_input)
    loss, grad, _ = _loss_and_gradient(centers, widths, theta, X, np.asarray(t, dtype=float), rules,
                                       model.config.consequent_order, settings.anfis_underflow_floor)
    return loss, grad


def anfis_init_grid(patterns: PatternSet, config: AnfisConfig) -> AnfisModel:
    """Evenly spaced centers over each input's training range, sigma = spacing / sqrt(2)."""
    X, _ = patterns.arrays("train")
    if len(X) == 0:
        raise ConfigurationError("ANFIS training split is empty")
    if X.shape[1] != config.input_dim:
        raise ContractViolationError(f"patterns have length {X.shape[1]}, config expects {config.input_dim}")
    k = config.mfs_per_input
    centers = np.zeros((config.input_dim, k))
    widths = np.ones((config.input_dim, k))
    for i, (lo, hi) in enumerate(zip(X.min(axis=0), X.max(axis=0))):
        if hi > lo:
            centers[i] = np.linspace(lo, hi, k) if k > 1 else (lo + hi) / 2.0
            spacing = (hi - lo) / (k - 1) if k > 1 else hi - lo
            widths[i] = spacing / math.sqrt(2.0)
        else:
            logger.info(f"ANFIS input {i} is constant; using width 1.0")
            centers[i] = lo
    consequent = np.zeros((config.n_rules, config.input_dim + 1))
    return from_arrays(centers, widths, consequent, config)


def anfis_fit_with_trace(patterns: PatternSet, config: AnfisConfig) -> Tuple[AnfisModel, AnfisTrainingTrace]:
    """Full-batch gradient descent; the trace holds the training MSE before each epoch and at the end."""
    model = anfis_init_grid(patterns, config)
    if config.epochs == 0:
        return model, AnfisTrainingTrace([], 0)

    X, t = patterns.arrays("train")
    centers, widths, theta = model.arrays()
    rules = rule_table(config.input_dim, config.mfs_per_input)
    floor, sigma_floor, lr = settings.anfis_underflow_floor, settings.anfis_sigma_floor, config.learning_rate
    trace: List[float] = []
    underflows = 0

    for epoch in range(1, config.epochs + 1):
        loss, grad, floored = _loss_and_gradient(centers, widths, theta, X, t, rules,
                                                 config.consequent_order, floor)
        underflows += floored
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grad):
            raise DivergedTrainingError("anfis", epoch)
        trace.append(2.0 * loss)
        centers = centers - lr * grad.centers
        widths = np.maximum(widths - lr * grad.widths, sigma_floor)
        theta = theta - lr * grad.consequent
        logger.debug(f"ANFIS epoch {epoch}: train MSE {2.0 * loss}")

    final = _layers(centers, widths, theta, X, rules, floor).output
    trace.append(float(np.mean((final - t) ** 2)))
    if not np.isfinite(trace[-1]):
        raise DivergedTrainingError("anfis", config.epochs)
    if underflows:
        logger.warning(f"ANFIS firing-strength floor used for {underflows} sample evaluations")
    logger.info(f"ANFIS trained {config.epochs} epochs, train MSE {trace[0]} -> {trace[-1]}")
    return from_arrays(centers, widths, theta, config), AnfisTrainingTrace(trace, underflows)


def anfis_fit(patterns: PatternSet, config: AnfisConfig) -> AnfisModel:
    return anfis_fit_with_trace(patterns, config)[0]
