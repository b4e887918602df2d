import numpy as np
import pytest

import kancal as kc
from kancal.datasets import normalize_features
from kancal.network import param_count


def make_synth_splits(seed, n=2000, fracs=(0.5, 0.1, 0.4), dim=20):
    ds = normalize_features(kc.synth_classification(n=n, dim=dim, seed=seed), (-1, 1))
    return kc.split(ds, kc.SplitSpec(*fracs, seed=seed))


def matched_mlp_width(kan_params, in_dim, classes, lo=2, hi=400):
    """Hidden width whose dense parameter count best matches the budget."""
    best_w, best_diff = lo, 10 ** 9
    for w in range(lo, hi):
        p = (in_dim * w + w) + (w * classes + classes)
        if abs(p - kan_params) < best_diff:
            best_w, best_diff = w, abs(p - kan_params)
    return best_w


@pytest.fixture(scope="session")
def spread_runs():
    """Five seeds of budget-matched KAN/MLP training on the synthetic set.

    Shared by the logit-spread checks in the network and CLI tests; each
    entry carries the trained models and their test logits.
    """
    spec = kc.SplineSpec(-1, 1, 5, 3)
    probe = kc.init_kan_model([20, 8, 3], spec, "silu", np.random.default_rng(0))
    width = matched_mlp_width(param_count(probe), 20, 3)
    runs = []
    for seed in range(5):
        train_ds, _, test_ds = make_synth_splits(seed)
        cfg = kc.TrainConfig(epochs=20, batch_size=64, lr=3e-3,
                             lr_after_decay=3e-4, seed=seed)
        kan = kc.init_kan_model([20, 8, 3], spec, "silu",
                                np.random.default_rng(seed))
        mlp = kc.init_mlp_model([20, width, 3], "relu",
                                np.random.default_rng(seed))
        kan_result = kc.train(kan, train_ds, test_ds, cfg)
        mlp_result = kc.train(mlp, train_ds, test_ds, cfg)
        runs.append({
            "seed": seed,
            "kan_logits": kc.predict_logits(kan_result.model, test_ds.features),
            "mlp_logits": kc.predict_logits(mlp_result.model, test_ds.features),
        })
    return runs
