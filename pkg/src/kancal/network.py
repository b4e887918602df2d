"""Spline-edge layers, an MLP baseline, and manual differentiation.

Every edge of a spline layer carries a learnable univariate function: a
B-spline (weighted by ``w_spline``) plus an optional fixed shortcut
function (weighted by ``w_base``).  Node outputs are sums over incoming
edges.  The spline path sees grid-clamped inputs; the shortcut path sees
the raw inputs, which supplies the tail behaviour outside the grid.

Forward passes return the caches needed for exact analytic backward
passes; no autodiff is involved anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, expit

from .splines import SplineSpec, basis_grad_matrix, basis_matrix, build_knots

SHORTCUT_KINDS = ("none", "identity", "silu")
ACTIVATIONS = ("relu", "gelu", "none")

CHECKPOINT_FORMAT = "kancal-checkpoint"
CHECKPOINT_VERSION = 1

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _shortcut(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "none":
        return np.zeros_like(x)
    if kind == "identity":
        return x
    if kind == "silu":
        return x * expit(x)
    raise ValueError(f"unknown shortcut kind: {kind!r}")


def _shortcut_grad(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "none":
        return np.zeros_like(x)
    if kind == "identity":
        return np.ones_like(x)
    if kind == "silu":
        s = expit(x)
        return s * (1.0 + x * (1.0 - s))
    raise ValueError(f"unknown shortcut kind: {kind!r}")


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "none":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "gelu":
        return 0.5 * z * (1.0 + erf(z * _INV_SQRT2))
    raise ValueError(f"unknown activation: {kind!r}")


def _activate_grad(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "none":
        return np.ones_like(z)
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "gelu":
        return 0.5 * (1.0 + erf(z * _INV_SQRT2)) + z * _INV_SQRT2PI * np.exp(-0.5 * z * z)
    raise ValueError(f"unknown activation: {kind!r}")


@dataclass
class KanLayerParams:
    """One spline-edge layer: per-edge coefficients and scalar edge weights."""

    in_dim: int
    out_dim: int
    spec: SplineSpec
    coeffs: np.ndarray        # (out_dim, in_dim, num_basis)
    shortcut_kind: str
    w_base: np.ndarray        # (out_dim, in_dim); zeros when shortcut is "none"
    w_spline: np.ndarray      # (out_dim, in_dim)
    knots: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.shortcut_kind not in SHORTCUT_KINDS:
            raise ValueError(f"unknown shortcut kind: {self.shortcut_kind!r}")
        want = (self.out_dim, self.in_dim, self.spec.num_basis)
        if self.coeffs.shape != want:
            raise ValueError(f"coeffs shape {self.coeffs.shape}, expected {want}")
        for name in ("w_base", "w_spline"):
            arr = getattr(self, name)
            if arr.shape != (self.out_dim, self.in_dim):
                raise ValueError(f"{name} shape {arr.shape}, expected "
                                 f"{(self.out_dim, self.in_dim)}")
        for name in ("coeffs", "w_base", "w_spline"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in {name}")
        if self.knots is None:
            self.knots = build_knots(self.spec)


@dataclass
class MlpLayerParams:
    """Dense layer with a fixed pointwise activation."""

    weight: np.ndarray        # (out_dim, in_dim)
    bias: np.ndarray          # (out_dim,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation: {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("weight/bias shape mismatch")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("non-finite layer parameters")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class Model:
    """A stack of layers of one kind ending in ``class_count`` logits."""

    kind: str                 # "kan" | "mlp"
    layers: list
    class_count: int

    def __post_init__(self):
        if self.kind not in ("kan", "mlp"):
            raise ValueError(f"unknown model kind: {self.kind!r}")
        if not self.layers:
            raise ValueError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"adjacent layer dims disagree: {prev.out_dim} -> {nxt.in_dim}"
                )
        if self.layers[-1].out_dim != self.class_count:
            raise ValueError("last layer width must equal class_count")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim


@dataclass
class KanCache:
    x: np.ndarray             # raw layer input (batch, in_dim)
    basis: np.ndarray         # (batch, in_dim, num_basis)
    spline_vals: np.ndarray   # (batch, out_dim, in_dim)
    base_vals: np.ndarray     # shortcut values (batch, in_dim)
    in_range: np.ndarray      # bool mask (batch, in_dim)


@dataclass
class MlpCache:
    x: np.ndarray
    z: np.ndarray             # pre-activation


def kan_layer_forward(params: KanLayerParams, x: np.ndarray):
    """Apply one spline layer to a batch; returns (output, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(f"input shape {x.shape} does not match in_dim {params.in_dim}")
    spec = params.spec
    batch = x.shape[0]
    basis = basis_matrix(params.knots, spec.degree, x.reshape(-1))
    basis = basis.reshape(batch, params.in_dim, spec.num_basis)
    spline_vals = np.einsum("bjk,ijk->bij", basis, params.coeffs)
    base_vals = _shortcut(params.shortcut_kind, x)
    y = (np.einsum("ij,bij->bi", params.w_spline, spline_vals)
         + base_vals @ params.w_base.T)
    in_range = (x >= spec.grid_min) & (x <= spec.grid_max)
    return y, KanCache(x, basis, spline_vals, base_vals, in_range)


def kan_layer_backward(params: KanLayerParams, cache: KanCache, d_y: np.ndarray):
    """Exact gradients of the layer given upstream d_y; returns (d_x, grads).

    Inputs that were clamped for the spline path get no spline input
    gradient; the shortcut path differentiates through the raw input.
    """
    d_y = np.asarray(d_y, dtype=np.float64)
    if cache.x.shape[1] != params.in_dim or cache.basis.shape[2] != params.spec.num_basis:
        raise ValueError("cache does not match these layer parameters")
    if d_y.shape != (cache.x.shape[0], params.out_dim):
        raise ValueError(f"d_y shape {d_y.shape} does not match cache/layer")

    grads = {
        "w_spline": np.einsum("bi,bij->ij", d_y, cache.spline_vals),
        "w_base": d_y.T @ cache.base_vals,
        "coeffs": params.w_spline[:, :, None]
        * np.einsum("bi,bjk->ijk", d_y, cache.basis),
    }

    spec = params.spec
    batch = cache.x.shape[0]
    xc = np.clip(cache.x, spec.grid_min, spec.grid_max)
    dbasis = basis_grad_matrix(params.knots, spec.degree, xc.reshape(-1))
    dbasis = dbasis.reshape(batch, params.in_dim, spec.num_basis)
    spline_slope = np.einsum("bjk,ijk->bij", dbasis, params.coeffs)
    d_x = np.einsum("bi,ij,bij->bj", d_y, params.w_spline, spline_slope)
    d_x *= cache.in_range
    d_x += (d_y @ params.w_base) * _shortcut_grad(params.shortcut_kind, cache.x)
    return d_x, grads


def mlp_layer_forward(params: MlpLayerParams, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(f"input shape {x.shape} does not match in_dim {params.in_dim}")
    z = x @ params.weight.T + params.bias
    return _activate(params.activation, z), MlpCache(x, z)


def mlp_layer_backward(params: MlpLayerParams, cache: MlpCache, d_y: np.ndarray):
    d_y = np.asarray(d_y, dtype=np.float64)
    if d_y.shape != cache.z.shape:
        raise ValueError(f"d_y shape {d_y.shape} does not match cache")
    d_z = d_y * _activate_grad(params.activation, cache.z)
    grads = {"weight": d_z.T @ cache.x, "bias": d_z.sum(axis=0)}
    return d_z @ params.weight, grads


def forward(model: Model, x: np.ndarray):
    """Compose all layers; returns (logits, list of per-layer caches)."""
    caches = []
    h = np.asarray(x, dtype=np.float64)
    layer_fwd = kan_layer_forward if model.kind == "kan" else mlp_layer_forward
    for layer in model.layers:
        h, cache = layer_fwd(layer, h)
        caches.append(cache)
    return h, caches


def backward(model: Model, caches: list, d_logits: np.ndarray):
    """Chain layer backwards; returns per-layer gradient dicts (input-first order)."""
    if len(caches) != len(model.layers):
        raise ValueError("cache list does not match model layers")
    layer_bwd = kan_layer_backward if model.kind == "kan" else mlp_layer_backward
    grads = [None] * len(model.layers)
    d = d_logits
    for idx in range(len(model.layers) - 1, -1, -1):
        d, grads[idx] = layer_bwd(model.layers[idx], caches[idx], d)
    return grads


def predict_logits(model: Model, x: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """Forward pass in chunks, discarding caches (inference only)."""
    x = np.asarray(x, dtype=np.float64)
    outs = [forward(model, x[i:i + batch_size])[0]
            for i in range(0, x.shape[0], batch_size)]
    return np.concatenate(outs, axis=0)


def param_count(model: Model) -> int:
    """Learnable scalar count; inactive shortcut weights are not counted."""
    total = 0
    for layer in model.layers:
        if isinstance(layer, KanLayerParams):
            edges = layer.out_dim * layer.in_dim
            total += edges * layer.spec.num_basis + edges  # coeffs + w_spline
            if layer.shortcut_kind != "none":
                total += edges                              # w_base
        else:
            total += layer.out_dim * layer.in_dim + layer.out_dim
    return total


def params_view(model: Model) -> list:
    """Per-layer dicts of the live parameter arrays, aligned with backward()."""
    out = []
    for layer in model.layers:
        if isinstance(layer, KanLayerParams):
            out.append({"coeffs": layer.coeffs, "w_base": layer.w_base,
                        "w_spline": layer.w_spline})
        else:
            out.append({"weight": layer.weight, "bias": layer.bias})
    return out


def init_kan_model(dims: list, spec: SplineSpec, shortcut_kind: str,
                   rng: np.random.Generator) -> Model:
    """Build a spline model over the given dim sequence [d_in, ..., K].

    Coefficients start small (std 0.1/sqrt(num_basis)) so initial logits are
    O(1); edge weights start at 1 (shortcut weight only when active).
    """
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    layers = []
    for n_in, n_out in zip(dims, dims[1:]):
        coeffs = rng.normal(0.0, 0.1 / np.sqrt(spec.num_basis),
                            size=(n_out, n_in, spec.num_basis))
        w_base = (np.ones((n_out, n_in)) if shortcut_kind != "none"
                  else np.zeros((n_out, n_in)))
        layers.append(KanLayerParams(
            in_dim=n_in, out_dim=n_out, spec=spec, coeffs=coeffs,
            shortcut_kind=shortcut_kind, w_base=w_base,
            w_spline=np.ones((n_out, n_in)),
        ))
    return Model(kind="kan", layers=layers, class_count=dims[-1])


def init_mlp_model(dims: list, activation: str, rng: np.random.Generator) -> Model:
    """Dense baseline: hidden layers activated, final layer linear (logits)."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    layers = []
    for i, (n_in, n_out) in enumerate(zip(dims, dims[1:])):
        bound = np.sqrt(6.0 / n_in)
        layers.append(MlpLayerParams(
            weight=rng.uniform(-bound, bound, size=(n_out, n_in)),
            bias=np.zeros(n_out),
            activation=activation if i < len(dims) - 2 else "none",
        ))
    return Model(kind="mlp", layers=layers, class_count=dims[-1])


def save_checkpoint(path, model: Model, tau: float = 1.0) -> None:
    """Write a model to disk: one JSON header line, then raw float64 data.

    The parameter block is little-endian float64, layer by layer in order:
    spline layers store coeffs (C order), then w_base, then w_spline; dense
    layers store weight then bias.  w_base is stored even when the shortcut
    is inactive so the layout depends only on shapes.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "class_count": model.class_count,
        "tau": float(tau),
        "layers": [],
    }
    blocks = []
    for layer in model.layers:
        if isinstance(layer, KanLayerParams):
            header["layers"].append({
                "type": "kan", "in_dim": layer.in_dim, "out_dim": layer.out_dim,
                "grid_min": layer.spec.grid_min, "grid_max": layer.spec.grid_max,
                "grid_size": layer.spec.grid_size, "degree": layer.spec.degree,
                "shortcut": layer.shortcut_kind,
            })
            blocks += [layer.coeffs, layer.w_base, layer.w_spline]
        else:
            header["layers"].append({
                "type": "mlp", "in_dim": layer.in_dim, "out_dim": layer.out_dim,
                "activation": layer.activation,
            })
            blocks += [layer.weight, layer.bias]
    flat = np.concatenate([b.ravel() for b in blocks]).astype("<f8")
    header["param_doubles"] = int(flat.size)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(flat.tobytes())


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint; returns (model, tau)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"unreadable checkpoint header: {exc}") from None
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a model checkpoint file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')}")
    flat = np.frombuffer(payload, dtype="<f8")
    if flat.size != header["param_doubles"]:
        raise ValueError(
            f"truncated checkpoint: expected {header['param_doubles']} doubles, "
            f"got {flat.size}"
        )

    layers = []
    offset = 0

    def take(shape):
        nonlocal offset
        n = int(np.prod(shape))
        block = flat[offset:offset + n].reshape(shape).astype(np.float64)
        offset += n
        return block

    for meta in header["layers"]:
        if meta["type"] == "kan":
            spec = SplineSpec(meta["grid_min"], meta["grid_max"],
                              meta["grid_size"], meta["degree"])
            nb = spec.num_basis
            layers.append(KanLayerParams(
                in_dim=meta["in_dim"], out_dim=meta["out_dim"], spec=spec,
                coeffs=take((meta["out_dim"], meta["in_dim"], nb)),
                shortcut_kind=meta["shortcut"],
                w_base=take((meta["out_dim"], meta["in_dim"])),
                w_spline=take((meta["out_dim"], meta["in_dim"])),
            ))
        else:
            layers.append(MlpLayerParams(
                weight=take((meta["out_dim"], meta["in_dim"])),
                bias=take((meta["out_dim"],)),
                activation=meta["activation"],
            ))
    model = Model(kind=header["kind"], layers=layers,
                  class_count=header["class_count"])
    return model, float(header["tau"])
