"""Spline-edge networks, temperature-scaled training, and calibration metrics."""

from .calibration import (
    BinStats,
    CalibrationReport,
    EvalSet,
    ada_ece,
    bin_stats,
    brier,
    classwise_ece,
    ece,
    evaluate,
    fit_posthoc_temperature,
    mce,
    nll,
    per_bin_tau_oracle,
    smece,
    tau_sweep,
)
from .datasets import Dataset, SplitSpec, load_csv, load_idx, split, synth_classification
from .losses import (
    LossKind,
    LossOutput,
    TemperatureState,
    base_loss,
    brier_score,
    cross_entropy,
    default_loss,
    dual_focal,
    focal,
    focal_calibration,
    label_smoothing,
    scale_logits,
    softmax,
    tsl,
)
from .network import (
    KanLayerParams,
    MlpLayerParams,
    Model,
    backward,
    forward,
    init_kan_model,
    init_mlp_model,
    kan_layer_backward,
    kan_layer_forward,
    load_checkpoint,
    mlp_layer_backward,
    mlp_layer_forward,
    param_count,
    predict_logits,
    save_checkpoint,
)
from .optim import (
    AdamState,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    adam_step,
    evaluate_model,
    project_tau,
    train,
)
from .splines import (
    SplineSpec,
    basis_eval,
    basis_grad,
    basis_grad_matrix,
    basis_matrix,
    build_knots,
    spline_eval,
)

__version__ = "0.1.0"
