"""Experiment runner: single runs, hyperparameter sweeps, and post-hoc tools.

Configs are JSON with model/train/data/eval sections; command-line flags
override file fields, which override defaults.  Every run directory gets
the fully resolved config it actually used, so re-running that snapshot
with the same seed reproduces metrics.jsonl byte for byte.

Exit codes: 0 success, 2 invalid config, 3 missing/unreadable data,
4 training diverged.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import os
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import datasets
from .calibration import (
    CalibrationReport,
    EvalSet,
    bin_stats,
    evaluate,
    fit_posthoc_temperature,
    tau_sweep,
    write_reliability_csv,
)
from .losses import LOSS_NAMES, LossKind, default_loss
from .network import (
    Model,
    init_kan_model,
    init_mlp_model,
    load_checkpoint,
    param_count,
    predict_logits,
    save_checkpoint,
)
from .optim import TrainConfig, TrainingDiverged, train
from .splines import SplineSpec

DATA_DIR_ENV = "KANCAL_DATA_DIR"
SUMMARY_SCHEMA_VERSION = 1

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4


class ConfigError(ValueError):
    """Experiment configuration failed validation."""


class DataMissing(RuntimeError):
    """A configured dataset could not be found or read."""


DEFAULT_CONFIG = {
    "model": {
        "kind": "kan",
        "widths": [8],
        "grid_size": 5,
        "degree": 3,
        "grid_range": [-1.0, 1.0],
        "shortcut": "silu",
        "activation": "relu",
    },
    "train": {
        "epochs": 20,
        "batch_size": 128,
        "lr": 1e-3,
        "lr_after_decay": 1e-4,
        "decay_epoch": 10,
        "lr_tau": None,
        "tau0": 1.0,
        "tau_min": 0.05,
        "tau_max": 10.0,
        "seed": 0,
        "loss": "ce",
        "loss_gamma": None,
        "loss_alpha": None,
        "loss_weight": None,
        "tsl": False,
    },
    "data": {
        "source": "synthetic",
        "seed": None,             # defaults to train.seed
        "split": [0.7, 0.1, 0.2],
        # synthetic
        "n": 500,
        "features": 20,
        "classes": 3,
        "imbalance": [0.5, 0.3, 0.2],
        "separation": 2.0,
        # idx
        "images": None,
        "labels": None,
        "test_images": None,
        "test_labels": None,
        "val_fraction": 0.1,
        "limit": None,
        # csv
        "path": None,
        "label_column": None,
    },
    "eval": {
        "bins": 15,
        "smece_bandwidth": None,
        "tau_curve": False,
        "tau_grid": [0.5, 5.0, 46],
        "hist_bins": 50,
    },
    "output_dir": "runs/run",
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def resolve_config(raw: dict, overrides: dict | None = None) -> dict:
    """Merge defaults <- file <- flag overrides and fill derived fields."""
    cfg = _merge(DEFAULT_CONFIG, raw)
    if overrides:
        cfg = _merge(cfg, overrides)
    if cfg["data"]["seed"] is None:
        cfg["data"]["seed"] = cfg["train"]["seed"]
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    model = cfg["model"]
    if model["kind"] not in ("kan", "mlp"):
        raise ConfigError(f"model.kind must be kan or mlp, got {model['kind']!r}")
    if not isinstance(model["widths"], list) or not model["widths"] \
            or any(not isinstance(w, int) or w < 1 for w in model["widths"]):
        raise ConfigError("model.widths must be a nonempty list of positive ints")
    if model["kind"] == "kan":
        try:
            SplineSpec(model["grid_range"][0], model["grid_range"][1],
                       model["grid_size"], model["degree"])
        except (ValueError, TypeError, IndexError) as exc:
            raise ConfigError(f"invalid spline settings: {exc}") from None
        if model["shortcut"] not in ("none", "identity", "silu"):
            raise ConfigError(f"unknown shortcut {model['shortcut']!r}")
    else:
        if model["activation"] not in ("relu", "gelu", "none"):
            raise ConfigError(f"unknown activation {model['activation']!r}")
    try:
        build_train_config(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid train section: {exc}") from None

    data = cfg["data"]
    if data["source"] not in ("synthetic", "idx", "csv"):
        raise ConfigError(f"unknown data source {data['source']!r}")
    if data["source"] == "idx" and not (data["images"] and data["labels"]):
        raise ConfigError("idx source needs data.images and data.labels paths")
    if data["source"] == "csv" and not (data["path"] and data["label_column"]):
        raise ConfigError("csv source needs data.path and data.label_column")
    fracs = data["split"]
    if not (isinstance(fracs, list) and len(fracs) == 3):
        raise ConfigError("data.split must be [train, val, test] fractions")
    if cfg["eval"]["bins"] < 1:
        raise ConfigError("eval.bins must be >= 1")


def build_loss(train_cfg: dict) -> LossKind:
    name = train_cfg["loss"]
    if name not in LOSS_NAMES:
        raise ConfigError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")
    kind = default_loss(name)
    updates = {}
    if train_cfg.get("loss_gamma") is not None:
        updates["gamma"] = float(train_cfg["loss_gamma"])
    if train_cfg.get("loss_alpha") is not None:
        updates["alpha"] = float(train_cfg["loss_alpha"])
    if train_cfg.get("loss_weight") is not None:
        updates["weight"] = float(train_cfg["loss_weight"])
    if updates:
        kind = LossKind(name, gamma=updates.get("gamma", kind.gamma),
                        alpha=updates.get("alpha", kind.alpha),
                        weight=updates.get("weight", kind.weight))
    return kind


def build_train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"],
        lr_after_decay=t["lr_after_decay"], decay_epoch=t["decay_epoch"],
        lr_tau=t["lr_tau"], tau0=t["tau0"], tau_min=t["tau_min"],
        tau_max=t["tau_max"], seed=t["seed"], loss=build_loss(t),
        tsl_enabled=bool(t["tsl"]), eval_bins=cfg["eval"]["bins"],
    )


def _data_path(path_str: str) -> Path:
    path = Path(path_str)
    if not path.is_absolute():
        base = os.environ.get(DATA_DIR_ENV)
        if base:
            path = Path(base) / path
    return path


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise DataMissing(f"dataset file not found: {path}")
    return path


def build_datasets(cfg: dict):
    """Load/generate and split per the data section; returns (train, val, test)."""
    data = cfg["data"]
    grid_range = tuple(cfg["model"]["grid_range"]) if cfg["model"]["kind"] == "kan" \
        else (-1.0, 1.0)
    seed = data["seed"]
    fracs = data["split"]
    spec = datasets.SplitSpec(fracs[0], fracs[1], fracs[2], seed=seed)

    try:
        if data["source"] == "synthetic":
            ds = datasets.synth_classification(
                n=data["n"], dim=data["features"], classes=data["classes"],
                imbalance=tuple(data["imbalance"]),
                separation=data["separation"], seed=seed,
            )
            ds = datasets.normalize_features(ds, grid_range)
            return datasets.split(ds, spec)
        if data["source"] == "csv":
            ds = datasets.load_csv(_require_file(_data_path(data["path"])),
                                   data["label_column"], feature_range=grid_range)
            return datasets.split(ds, spec)
        # idx
        train_ds = datasets.load_idx(
            _require_file(_data_path(data["images"])),
            _require_file(_data_path(data["labels"])),
            feature_range=grid_range, name="idx-train",
        )
        if data["limit"]:
            train_ds = train_ds.take(np.arange(min(data["limit"], train_ds.n)))
        if data["test_images"]:
            test_ds = datasets.load_idx(
                _require_file(_data_path(data["test_images"])),
                _require_file(_data_path(data["test_labels"])),
                feature_range=grid_range, name="idx-test",
            )
            order = np.random.default_rng(seed).permutation(train_ds.n)
            n_val = max(1, int(round(data["val_fraction"] * train_ds.n)))
            val_part = train_ds.take(order[:n_val], name="idx-val")
            train_part = train_ds.take(order[n_val:], name="idx-train")
            for part, part_name in ((train_part, "train"), (val_part, "val")):
                if len(np.unique(part.labels)) < 2:
                    raise ValueError(f"{part_name} split has fewer than 2 classes")
            return train_part, val_part, test_ds
        return datasets.split(train_ds, spec)
    except (OSError, ValueError) as exc:
        raise DataMissing(str(exc)) from None


def build_model(cfg: dict, in_dim: int, class_count: int) -> Model:
    model_cfg = cfg["model"]
    dims = [in_dim] + list(model_cfg["widths"]) + [class_count]
    rng = np.random.default_rng(cfg["train"]["seed"])
    if model_cfg["kind"] == "kan":
        spec = SplineSpec(model_cfg["grid_range"][0], model_cfg["grid_range"][1],
                          model_cfg["grid_size"], model_cfg["degree"])
        return init_kan_model(dims, spec, model_cfg["shortcut"], rng)
    return init_mlp_model(dims, model_cfg["activation"], rng)


def param_count_from_config(cfg: dict, in_dim: int, class_count: int) -> int:
    return param_count(build_model(cfg, in_dim, class_count))


def _peek_dims(cfg: dict):
    """Input dim and class count without loading full data (for budget checks)."""
    data = cfg["data"]
    if data["source"] == "synthetic":
        return data["features"], data["classes"]
    try:
        if data["source"] == "csv":
            path = _require_file(_data_path(data["path"]))
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                idx = header.index(data["label_column"])
                labels = {row[idx].strip() for row in reader}
            return len(header) - 1, len(labels)
        path = _require_file(_data_path(data["images"]))
        with open(path, "rb") as fh:
            _, _, rows, cols = struct.unpack(">IIII", fh.read(16))
        lab = _require_file(_data_path(data["labels"]))
        with open(lab, "rb") as fh:
            fh.read(8)
            payload = fh.read()
        return rows * cols, int(max(payload)) + 1
    except (OSError, ValueError, StopIteration, struct.error) as exc:
        raise DataMissing(f"cannot inspect dataset: {exc}") from None


def write_logit_histogram(logits: np.ndarray, bins: int, path) -> None:
    """Histogram of all logit entries; edges carried by the rows themselves."""
    values = np.asarray(logits).ravel()
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lower", "bin_upper", "count"])
        for b in range(bins):
            writer.writerow([f"{edges[b]:.10g}", f"{edges[b + 1]:.10g}",
                             int(counts[b])])


def run_experiment(cfg: dict, output_dir: Path) -> dict:
    """Train one configured model and write all artifacts into output_dir."""
    train_ds, val_ds, test_ds = build_datasets(cfg)
    model = build_model(cfg, train_ds.dim, train_ds.class_count)
    n_params = param_count(model)
    train_cfg = build_train_config(cfg)

    output_dir.mkdir(parents=True, exist_ok=True)
    with open(output_dir / "config.json", "w") as fh:
        json.dump(cfg, fh, indent=2)
        fh.write("\n")

    result = train(model, train_ds, test_ds, train_cfg)

    with open(output_dir / "metrics.jsonl", "w") as fh:
        for record in result.history:
            fh.write(json.dumps(record.to_dict()) + "\n")

    test_logits = predict_logits(result.model, test_ds.features)
    final_eval = EvalSet.from_logits(test_logits, test_ds.labels, tau=result.tau)
    write_reliability_csv(bin_stats(final_eval, cfg["eval"]["bins"]),
                          output_dir / "reliability.csv")
    write_logit_histogram(test_logits, cfg["eval"]["hist_bins"],
                          output_dir / "logit_hist.csv")

    if cfg["eval"]["tau_curve"]:
        lo, hi, count = cfg["eval"]["tau_grid"]
        val_logits = predict_logits(result.model, val_ds.features)
        sweep_result = tau_sweep(val_logits, val_ds.labels,
                                 np.linspace(lo, hi, int(count)),
                                 m=cfg["eval"]["bins"])
        with open(output_dir / "tau_curve.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", "ece"])
            for t, e in zip(sweep_result.taus, sweep_result.eces):
                writer.writerow([f"{t:.10g}", f"{e:.10g}"])

    save_checkpoint(output_dir / "model.ckpt", result.model, tau=result.tau)

    final = result.history[-1]
    return {
        "param_count": n_params,
        "final_accuracy": final.test_accuracy,
        "best_accuracy": max(r.test_accuracy for r in result.history),
        "final_ece": final.report.ece,
        "min_ece": min(r.report.ece for r in result.history),
        "final_ada_ece": final.report.ada_ece,
        "final_classwise_ece": final.report.classwise_ece,
        "final_mce": final.report.mce,
        "final_smece": final.report.smece,
        "final_nll": final.report.nll,
        "final_brier": final.report.brier,
        "final_tau": final.tau,
    }


def _set_dotted(cfg: dict, dotted: str, value) -> None:
    """Set a dotted path, validated against the config schema, creating
    intermediate sections as needed (sweep bases may be sparse)."""
    keys = dotted.split(".")
    schema = DEFAULT_CONFIG
    for key in keys[:-1]:
        if not isinstance(schema, dict) or key not in schema:
            raise ConfigError(f"unknown sweep axis {dotted!r}")
        schema = schema[key]
    if not isinstance(schema, dict) or keys[-1] not in schema:
        raise ConfigError(f"unknown sweep axis {dotted!r}")
    node = cfg
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def _sweep_child(args):
    """Worker entry for one sweep cell; returns (index, metrics or error)."""
    index, cfg, run_dir = args
    try:
        metrics = run_experiment(cfg, Path(run_dir))
        return index, {"status": "ok", **metrics}
    except DataMissing as exc:
        return index, {"status": "failed", "error": f"data: {exc}"}
    except TrainingDiverged as exc:
        return index, {"status": "failed", "error": f"diverged: {exc}"}
    except Exception as exc:  # noqa: BLE001 - sweep must keep going
        return index, {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}


SUMMARY_METRIC_COLUMNS = [
    "param_count", "final_accuracy", "best_accuracy", "final_ece", "min_ece",
    "final_ada_ece", "final_classwise_ece", "final_mce", "final_smece",
    "final_nll", "final_brier", "final_tau",
]


def run_sweep(grid_cfg: dict, output_dir: Path, workers: int = 1,
              budget: int | None = None) -> Path:
    """Cartesian-product runs plus a summary.csv; child failures don't stop it."""
    if "base" not in grid_cfg or "grid" not in grid_cfg:
        raise ConfigError("sweep config needs 'base' and 'grid' sections")
    axes = grid_cfg["grid"]
    if not isinstance(axes, dict) or not axes:
        raise ConfigError("'grid' must map dotted config paths to value lists")
    for key, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {key!r} must be a nonempty list")
    budget = budget if budget is not None else grid_cfg.get("budget")

    axis_names = list(axes.keys())
    combos = list(itertools.product(*(axes[a] for a in axis_names)))
    base_seed = grid_cfg["base"].get("train", {}).get("seed", 0)
    seed_is_axis = "train.seed" in axis_names

    jobs = []
    rows = []
    for index, combo in enumerate(combos):
        cfg_raw = copy.deepcopy(grid_cfg["base"])
        run_dir = output_dir / f"run_{index:04d}"
        row = {"run_id": index, "run_dir": str(run_dir), "error": ""}
        for name, value in zip(axis_names, combo):
            row[name] = value
        try:
            for name, value in zip(axis_names, combo):
                _set_dotted(cfg_raw, name, value)
            if not seed_is_axis:
                cfg_raw.setdefault("train", {})["seed"] = base_seed + index
            cfg = resolve_config(cfg_raw)
            if budget is not None:
                in_dim, k = _peek_dims(cfg)
                n_params = param_count_from_config(cfg, in_dim, k)
                if n_params > budget:
                    row.update(status="skipped_budget", param_count=n_params)
                    rows.append(row)
                    continue
            jobs.append((index, cfg, str(run_dir)))
            rows.append(row)
        except (ConfigError, DataMissing) as exc:
            row.update(status="failed", error=str(exc))
            rows.append(row)

    results = {}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, outcome in pool.map(_sweep_child, jobs):
                results[index] = outcome
    else:
        for job in jobs:
            index, outcome = _sweep_child(job)
            results[index] = outcome

    for row in rows:
        outcome = results.get(row["run_id"])
        if outcome is not None:
            row.update(outcome)

    output_dir.mkdir(parents=True, exist_ok=True)
    summary_path = output_dir / "summary.csv"
    columns = (["schema_version", "run_id", "run_dir", "status", "error"]
               + axis_names + SUMMARY_METRIC_COLUMNS)
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([SUMMARY_SCHEMA_VERSION] +
                            [row.get(c, "") for c in columns[1:]])
    return summary_path


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config not valid JSON: {exc}") from None


def _cli_overrides(args) -> dict:
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("train", {})["seed"] = args.seed
    if getattr(args, "output_dir", None):
        overrides["output_dir"] = args.output_dir
    return overrides


def cmd_run(args) -> int:
    cfg = resolve_config(_load_json(args.config), _cli_overrides(args))
    summary = run_experiment(cfg, Path(cfg["output_dir"]))
    print(json.dumps(summary, indent=2))
    return 0


def cmd_sweep(args) -> int:
    grid_cfg = _load_json(args.config)
    output_dir = Path(args.output_dir or grid_cfg.get("output_dir", "sweeps/sweep"))
    workers = args.workers or grid_cfg.get("workers", 1)
    summary = run_sweep(grid_cfg, output_dir, workers=workers, budget=args.budget)
    print(f"summary written to {summary}")
    return 0


def cmd_posthoc(args) -> int:
    cfg = resolve_config(_load_json(args.config), _cli_overrides(args))
    model, stored_tau = load_checkpoint(args.checkpoint)
    _, val_ds, test_ds = build_datasets(cfg)
    if model.in_dim != val_ds.dim or model.class_count != val_ds.class_count:
        raise ConfigError("checkpoint architecture does not match dataset")
    t_star = fit_posthoc_temperature(predict_logits(model, val_ds.features),
                                     val_ds.labels)
    test_logits = predict_logits(model, test_ds.features)
    bins = cfg["eval"]["bins"]
    before = evaluate(EvalSet.from_logits(test_logits, test_ds.labels), m=bins)
    after = evaluate(EvalSet.from_logits(test_logits, test_ds.labels, tau=t_star),
                     m=bins)
    payload = {
        "t_star": t_star,
        "stored_tau": stored_tau,
        "before": before.to_dict(),
        "after": after.to_dict(),
    }
    text = json.dumps(payload, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def cmd_logits(args) -> int:
    cfg = resolve_config(_load_json(args.config), _cli_overrides(args))
    model, _ = load_checkpoint(args.checkpoint)
    _, _, test_ds = build_datasets(cfg)
    if model.in_dim != test_ds.dim or model.class_count != test_ds.class_count:
        raise ConfigError("checkpoint architecture does not match dataset")
    logits = predict_logits(model, test_ds.features)
    out = Path(args.output or "logit_hist.csv")
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_logit_histogram(logits, args.bins, out)
    if args.raw:
        raw_path = Path(args.raw)
        with open(raw_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"logit_{k}" for k in range(model.class_count)]
                            + ["label"])
            for row, label in zip(logits, test_ds.labels):
                writer.writerow([f"{v:.17g}" for v in row] + [int(label)])
        print(f"raw logits written to {raw_path}")
    print(f"histogram written to {out}")
    return 0


def cmd_metrics(args) -> int:
    path = Path(args.logits)
    if not path.is_file():
        raise DataMissing(f"logits file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    logit_cols = sorted(
        (i for i, name in enumerate(header) if name.startswith("logit_")),
        key=lambda i: int(header[i].split("_", 1)[1]),
    )
    if not logit_cols or "label" not in header:
        raise DataMissing("logits CSV needs logit_<i> columns and a label column")
    label_col = header.index("label")
    logits = np.array([[float(r[i]) for i in logit_cols] for r in rows])
    labels = np.array([int(r[label_col]) for r in rows])
    report = evaluate(EvalSet.from_logits(logits, labels, tau=args.tau),
                      m=args.bins)
    text = json.dumps(report.to_dict(), indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kancal",
        description="Train spline-edge networks and evaluate calibration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configured experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output-dir")
    p_run.add_argument("--seed", type=int)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config grid and summarize")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--output-dir")
    p_sweep.add_argument("--workers", type=int)
    p_sweep.add_argument("--budget", type=int,
                         help="skip combos above this parameter count")
    p_sweep.set_defaults(func=cmd_sweep)

    p_post = sub.add_parser("posthoc", help="fit a held-out temperature")
    p_post.add_argument("--checkpoint", required=True)
    p_post.add_argument("--config", required=True)
    p_post.add_argument("--output")
    p_post.add_argument("--seed", type=int)
    p_post.set_defaults(func=cmd_posthoc)

    p_logits = sub.add_parser("logits", help="dump a logit histogram CSV")
    p_logits.add_argument("--checkpoint", required=True)
    p_logits.add_argument("--config", required=True)
    p_logits.add_argument("--bins", type=int, default=50)
    p_logits.add_argument("--output")
    p_logits.add_argument("--raw", help="also dump per-sample logits to this CSV")
    p_logits.add_argument("--seed", type=int)
    p_logits.set_defaults(func=cmd_logits)

    p_metrics = sub.add_parser("metrics", help="metric suite on dumped logits")
    p_metrics.add_argument("--logits", required=True,
                           help="CSV with logit_<i> columns and a label column")
    p_metrics.add_argument("--bins", type=int, default=15)
    p_metrics.add_argument("--tau", type=float, default=1.0)
    p_metrics.add_argument("--output")
    p_metrics.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
