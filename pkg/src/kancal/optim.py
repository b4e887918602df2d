"""Adam, temperature projection, and the joint training loop.

Model parameters follow Adam; the temperature follows plain projected
gradient descent with its own step size (keeping it out of Adam avoids
coupling its trajectory to moment buffers).  Shuffling uses a
counter-based generator keyed on (seed, epoch), so histories are
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationReport, EvalSet, evaluate
from .datasets import Dataset
from .losses import LossKind, TemperatureState, cross_entropy, tsl
from .network import Model, backward, forward, params_view, predict_logits

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes NaN or infinite."""


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    lr: float = 1e-3
    lr_after_decay: float = 1e-4
    decay_epoch: int = 10          # epochs from this index on use lr_after_decay
    lr_tau: float | None = None    # defaults to lr
    tau0: float = 1.0
    tau_min: float = 0.05
    tau_max: float = 10.0
    seed: int = 0
    loss: LossKind = field(default_factory=cross_entropy)
    tsl_enabled: bool = False
    eval_bins: int = 15

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.tau_min <= self.tau0 <= self.tau_max:
            raise ValueError(
                f"need 0 < tau_min <= tau0 <= tau_max, got "
                f"({self.tau_min}, {self.tau0}, {self.tau_max})"
            )

    @property
    def effective_lr_tau(self) -> float:
        return self.lr if self.lr_tau is None else self.lr_tau


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_accuracy: float
    tau: float
    report: CalibrationReport

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "test_accuracy": self.test_accuracy,
            "tau": self.tau,
            "report": self.report.to_dict(),
        }


@dataclass
class TrainResult:
    model: Model
    tau: float
    history: list            # one EpochRecord per epoch


@dataclass
class AdamState:
    """First/second moment buffers mirroring the model parameters."""

    m: list
    v: list
    step: int = 0

    @classmethod
    def init_like(cls, model: Model) -> "AdamState":
        view = params_view(model)
        return cls(
            m=[{k: np.zeros_like(a) for k, a in layer.items()} for layer in view],
            v=[{k: np.zeros_like(a) for k, a in layer.items()} for layer in view],
        )


def adam_step(state: AdamState, params: list, grads: list, lr: float) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    c1 = 1.0 - ADAM_BETA1 ** state.step
    c2 = 1.0 - ADAM_BETA2 ** state.step
    for layer, g_layer, m_layer, v_layer in zip(params, grads, state.m, state.v):
        for key, p in layer.items():
            g = g_layer[key]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != param {p.shape}")
            m = m_layer[key]
            v = v_layer[key]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def project_tau(tau: float, tau_min: float, tau_max: float) -> float:
    """Clamp the temperature into its bounds."""
    return min(max(tau, tau_min), tau_max)


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    key = np.array([seed, epoch], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).permutation(n)


def evaluate_model(model: Model, data: Dataset, tau: float = 1.0,
                   bins: int = 15) -> CalibrationReport:
    """Metric suite for a model's temperature-scaled predictions on a dataset."""
    logits = predict_logits(model, data.features)
    return evaluate(EvalSet.from_logits(logits, data.labels, tau=tau), m=bins)


def train(model: Model, train_data: Dataset, eval_data: Dataset,
          config: TrainConfig, step_callback=None) -> TrainResult:
    """Run the joint parameter/temperature loop for the configured epochs.

    Per minibatch: forward, rescale logits by the current temperature,
    evaluate the base loss, backpropagate, Adam-update the parameters,
    then (when enabled) gradient-step and project the temperature.  The
    evaluation set is scored after every epoch at the current temperature.
    ``step_callback(step, loss_value, tau)`` is invoked after each step.
    """
    if train_data.n == 0:
        raise ValueError("empty training dataset")
    if train_data.class_count != model.class_count:
        raise ValueError("dataset class count does not match model")

    temp = TemperatureState(tau=config.tau0, tau_min=config.tau_min,
                            tau_max=config.tau_max,
                            lr_tau=config.effective_lr_tau)
    adam = AdamState.init_like(model)
    view = params_view(model)
    history = []
    step = 0
    for epoch in range(config.epochs):
        lr = config.lr if epoch < config.decay_epoch else config.lr_after_decay
        order = _epoch_permutation(config.seed, epoch, train_data.n)
        loss_sum = 0.0
        for start in range(0, train_data.n, config.batch_size):
            batch = order[start:start + config.batch_size]
            xb = train_data.features[batch]
            yb = train_data.labels[batch]
            logits, caches = forward(model, xb)
            out = tsl(config.loss, logits, yb, temp)
            if not np.isfinite(out.value):
                raise TrainingDiverged(
                    f"non-finite loss {out.value} at epoch {epoch + 1}, "
                    f"step {step + 1}"
                )
            grads = backward(model, caches, out.grad_logits)
            adam_step(adam, view, grads, lr)
            if config.tsl_enabled:
                temp.tau = project_tau(temp.tau - temp.lr_tau * out.grad_tau,
                                       temp.tau_min, temp.tau_max)
            loss_sum += out.value * len(batch)
            step += 1
            if step_callback is not None:
                step_callback(step, out.value, temp.tau)
        report = evaluate_model(model, eval_data, tau=temp.tau,
                                bins=config.eval_bins)
        history.append(EpochRecord(
            epoch=epoch + 1,
            train_loss=loss_sum / train_data.n,
            test_accuracy=report.accuracy,
            tau=temp.tau,
            report=report,
        ))
    return TrainResult(model=model, tau=temp.tau, history=history)
