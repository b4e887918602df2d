"""Classification losses and the learned-temperature wrapper.

All losses take logits at the boundary and return analytic gradients with
respect to those logits, so the temperature chain rule stays in one place:
the wrapper divides logits by tau, evaluates the base loss on the rescaled
softmax, and produces d(loss)/d(tau) alongside the logit gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOSS_NAMES = ("ce", "brier", "focal", "label_smooth", "dual_focal",
              "focal_calibration")

_P_FLOOR = 1e-300  # keeps logs finite when softmax underflows


@dataclass(frozen=True)
class LossKind:
    """One of the supported base losses plus its hyperparameters."""

    name: str
    gamma: float = 0.0        # focal family exponent
    alpha: float = 0.0        # label-smoothing mass
    weight: float = 0.0       # probability-distance multiplier (focal_calibration)

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.name!r}; expected one of {LOSS_NAMES}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must be in [0, 1)")
        if self.weight < 0:
            raise ValueError("weight must be >= 0")


def cross_entropy() -> LossKind:
    return LossKind("ce")


def brier_score() -> LossKind:
    return LossKind("brier")


def focal(gamma: float = 3.0) -> LossKind:
    return LossKind("focal", gamma=gamma)


def label_smoothing(alpha: float = 0.05) -> LossKind:
    return LossKind("label_smooth", alpha=alpha)


def dual_focal(gamma: float = 2.0) -> LossKind:
    return LossKind("dual_focal", gamma=gamma)


def focal_calibration(gamma: float = 3.0, weight: float = 1.0) -> LossKind:
    return LossKind("focal_calibration", gamma=gamma, weight=weight)


_DEFAULTS = {
    "ce": cross_entropy,
    "brier": brier_score,
    "focal": focal,
    "label_smooth": label_smoothing,
    "dual_focal": dual_focal,
    "focal_calibration": focal_calibration,
}


def default_loss(name: str) -> LossKind:
    """The named loss with its default hyperparameters."""
    if name not in _DEFAULTS:
        raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")
    return _DEFAULTS[name]()


@dataclass
class TemperatureState:
    """Scalar temperature with its bounds and step size."""

    tau: float
    tau_min: float = 0.05
    tau_max: float = 10.0
    lr_tau: float = 1e-3

    def __post_init__(self):
        if self.tau_min <= 0:
            raise ValueError("tau_min must be > 0")
        if not self.tau_min <= self.tau <= self.tau_max:
            raise ValueError(
                f"tau={self.tau} outside [{self.tau_min}, {self.tau_max}]"
            )


@dataclass
class LossOutput:
    value: float
    grad_logits: np.ndarray
    grad_tau: float


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def scale_logits(logits: np.ndarray, tau: float) -> np.ndarray:
    """Divide logits by a positive temperature; row argmax is unchanged."""
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    return np.asarray(logits, dtype=np.float64) / tau


def _check_labels(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-D integer vector")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels outside [0, {k})")
    return labels.astype(np.intp)


def _prob_grad(kind: LossKind, probs: np.ndarray, labels: np.ndarray):
    """Per-sample loss values and d(loss)/d(probs); both unreduced."""
    n, k = probs.shape
    rows = np.arange(n)
    onehot = np.zeros_like(probs)
    onehot[rows, labels] = 1.0
    p_safe = np.maximum(probs, _P_FLOOR)
    g = np.zeros_like(probs)

    if kind.name == "ce":
        values = -np.log(p_safe[rows, labels])
        g[rows, labels] = -1.0 / p_safe[rows, labels]
    elif kind.name == "brier":
        diff = probs - onehot
        values = (diff ** 2).sum(axis=1)
        g = 2.0 * diff
    elif kind.name == "focal":
        p_y = p_safe[rows, labels]
        miss = 1.0 - probs[rows, labels]
        values = -(miss ** kind.gamma) * np.log(p_y)
        g[rows, labels] = (kind.gamma * miss ** (kind.gamma - 1.0) * np.log(p_y)
                           - miss ** kind.gamma / p_y) if kind.gamma > 0 else -1.0 / p_y
    elif kind.name == "label_smooth":
        targets = (1.0 - kind.alpha) * onehot + kind.alpha / k
        values = -(targets * np.log(p_safe)).sum(axis=1)
        g = -targets / p_safe
    elif kind.name == "dual_focal":
        p_y = p_safe[rows, labels]
        masked = probs.copy()
        masked[rows, labels] = -np.inf
        runner = masked.argmax(axis=1)
        margin = 1.0 - probs[rows, labels] + probs[rows, runner]
        values = -(margin ** kind.gamma) * np.log(p_y)
        if kind.gamma > 0:
            common = kind.gamma * margin ** (kind.gamma - 1.0) * np.log(p_y)
            g[rows, labels] = common - margin ** kind.gamma / p_y
            g[rows, runner] += -common
        else:
            g[rows, labels] = -1.0 / p_y
    elif kind.name == "focal_calibration":
        fv, fg = _prob_grad(LossKind("focal", gamma=kind.gamma), probs, labels)
        diff = probs - onehot
        values = fv + kind.weight * (diff ** 2).sum(axis=1)
        g = fg + 2.0 * kind.weight * diff
    else:  # pragma: no cover - guarded by LossKind validation
        raise ValueError(f"unknown loss {kind.name!r}")
    return values, g


def base_loss(kind: LossKind, probs: np.ndarray, labels: np.ndarray):
    """Batch-mean loss and its gradient w.r.t. the logits behind ``probs``.

    ``probs`` must be softmax output; the softmax Jacobian is applied
    analytically, so the returned gradient is with respect to the
    pre-softmax scores.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError("probs must be (batch, classes)")
    labels = _check_labels(labels, probs.shape[1])
    values, dp = _prob_grad(kind, probs, labels)
    # dL/dz_j = p_j * (dL/dp_j - sum_k p_k dL/dp_k)
    inner = (probs * dp).sum(axis=1, keepdims=True)
    dz = probs * (dp - inner)
    n = probs.shape[0]
    return float(values.mean()), dz / n


def tsl(kind: LossKind, logits: np.ndarray, labels: np.ndarray,
        temp: TemperatureState) -> LossOutput:
    """Base loss on temperature-rescaled logits, with gradients for both.

    grad_tau is the exact derivative of the batch-mean loss in tau; for
    cross entropy on one sample it reduces to (g_y - sum_j p_j g_j) / tau^2.
    """
    if not temp.tau_min <= temp.tau <= temp.tau_max:
        raise ValueError(f"tau={temp.tau} outside [{temp.tau_min}, {temp.tau_max}]")
    logits = np.asarray(logits, dtype=np.float64)
    scaled = scale_logits(logits, temp.tau)
    value, grad_scaled = base_loss(kind, softmax(scaled), labels)
    grad_tau = -float((grad_scaled * scaled).sum()) / temp.tau
    return LossOutput(value=value, grad_logits=grad_scaled / temp.tau,
                      grad_tau=grad_tau)
