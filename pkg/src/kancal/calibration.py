"""Calibration metrics, reliability bins, and temperature fitting.

Binned metrics follow the half-open convention (c_{m-1}, c_m] on top-label
confidence.  The smooth metric replaces bins with a reflected-Gaussian
kernel on [0, 1], integrating the absolute smoothed gap on a fixed
512-point grid; its bandwidth can be given or solved as the fixed point
where the metric equals the bandwidth.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .losses import scale_logits, softmax

DEFAULT_BINS = 15
SMECE_GRID = 512
_TAU_LO, _TAU_HI = 0.05, 10.0


@dataclass
class EvalSet:
    """Predicted distributions and true labels for one evaluation pass."""

    probs: np.ndarray                 # (n, k), rows on the simplex
    labels: np.ndarray                # (n,) ints in [0, k)
    logits: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.intp)
        if self.probs.ndim != 2 or self.probs.shape[0] == 0:
            raise ValueError("probs must be a nonempty (n, k) matrix")
        if self.labels.shape != (self.probs.shape[0],):
            raise ValueError("labels length must match probs rows")
        row_sums = self.probs.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-9) or np.any(self.probs < -1e-12):
            raise ValueError("probs rows must lie on the probability simplex")
        k = self.probs.shape[1]
        if self.labels.min() < 0 or self.labels.max() >= k:
            raise ValueError(f"labels outside [0, {k})")

    @classmethod
    def from_logits(cls, logits: np.ndarray, labels: np.ndarray,
                    tau: float = 1.0) -> "EvalSet":
        logits = np.asarray(logits, dtype=np.float64)
        return cls(softmax(scale_logits(logits, tau)), labels, logits=logits)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def k(self) -> int:
        return self.probs.shape[1]

    @property
    def confidences(self) -> np.ndarray:
        return self.probs.max(axis=1)

    @property
    def predictions(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

    @property
    def correct(self) -> np.ndarray:
        return (self.predictions == self.labels).astype(np.float64)


def accuracy(ev: EvalSet) -> float:
    return float(ev.correct.mean())


@dataclass
class BinStats:
    """Per-bin counts, accuracies, and mean confidences."""

    scheme: str                      # "equal_width" | "adaptive"
    counts: np.ndarray               # (m,) ints
    accuracy: np.ndarray             # (m,) in [0, 1]; 0 for empty bins
    confidence: np.ndarray           # (m,) in [0, 1]; 0 for empty bins
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def m(self) -> int:
        return len(self.counts)

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.accuracy - self.confidence)


def _equal_width_index(conf: np.ndarray, m: int) -> np.ndarray:
    # (c_{i-1}, c_i] bins: ceil(conf * m) - 1, clipped for conf == 0
    return np.clip(np.ceil(conf * m).astype(np.intp) - 1, 0, m - 1)


def bin_stats(ev: EvalSet, m: int = DEFAULT_BINS,
              scheme: str = "equal_width") -> BinStats:
    """Group predictions by top-label confidence.

    equal_width cuts [0, 1] into m fixed bins; adaptive sorts confidences
    and cuts into m groups whose sizes differ by at most one.
    """
    if m < 1:
        raise ValueError("bin count must be >= 1")
    conf = ev.confidences
    correct = ev.correct
    counts = np.zeros(m, dtype=np.intp)
    acc = np.zeros(m)
    avg_conf = np.zeros(m)

    if scheme == "equal_width":
        lower = np.arange(m) / m
        upper = np.arange(1, m + 1) / m
        idx = _equal_width_index(conf, m)
        for b in range(m):
            mask = idx == b
            counts[b] = mask.sum()
            if counts[b]:
                acc[b] = correct[mask].mean()
                avg_conf[b] = conf[mask].mean()
    elif scheme == "adaptive":
        if ev.n < m:
            raise ValueError(f"need at least {m} samples for {m} adaptive bins")
        order = np.argsort(conf, kind="stable")
        lower = np.zeros(m)
        upper = np.zeros(m)
        for b, group in enumerate(np.array_split(order, m)):
            counts[b] = len(group)
            acc[b] = correct[group].mean()
            avg_conf[b] = conf[group].mean()
            lower[b] = conf[group].min()
            upper[b] = conf[group].max()
    else:
        raise ValueError(f"unknown binning scheme: {scheme!r}")
    return BinStats(scheme, counts, acc, avg_conf, lower, upper)


def ece(bins: BinStats) -> float:
    """Count-weighted mean absolute accuracy/confidence gap."""
    n = bins.n
    if n == 0:
        raise ValueError("empty bin statistics")
    return float((bins.counts / n * bins.gaps).sum())


def mce(bins: BinStats) -> float:
    """Largest gap over occupied bins."""
    occupied = bins.counts > 0
    if not occupied.any():
        raise ValueError("empty bin statistics")
    return float(bins.gaps[occupied].max())


def ada_ece(ev: EvalSet, m: int = DEFAULT_BINS) -> float:
    """Unweighted mean gap over equal-mass bins."""
    return float(bin_stats(ev, m, scheme="adaptive").gaps.mean())


def classwise_ece(ev: EvalSet, m: int = DEFAULT_BINS) -> float:
    """Mean over classes of the count-weighted gap on per-class probabilities."""
    if ev.k < 2:
        raise ValueError("need at least two classes")
    total = 0.0
    for cls in range(ev.k):
        p_cls = ev.probs[:, cls]
        hits = (ev.labels == cls).astype(np.float64)
        idx = _equal_width_index(p_cls, m)
        for b in range(m):
            mask = idx == b
            cnt = mask.sum()
            if cnt:
                total += cnt / ev.n * abs(hits[mask].mean() - p_cls[mask].mean())
    return total / ev.k


def nll(ev: EvalSet) -> float:
    """Mean negative log probability of the true class (floored at 1e-12)."""
    p_true = ev.probs[np.arange(ev.n), ev.labels]
    return float(-np.log(np.maximum(p_true, 1e-12)).mean())


def brier(ev: EvalSet) -> float:
    """Mean squared distance between the probability row and the one-hot label."""
    onehot = np.zeros_like(ev.probs)
    onehot[np.arange(ev.n), ev.labels] = 1.0
    return float(((ev.probs - onehot) ** 2).sum(axis=1).mean())


def _kernel_sums(conf: np.ndarray, correct: np.ndarray, sigma: float,
                 grid: np.ndarray):
    """Smoothed mass and hit-mass on the grid, kernel reflected at 0 and 1.

    Mirror images live at 2k +/- conf.  Contributions beyond 10 sigma are
    below 2e-22 of a point's mass and are dropped: far image bands are
    skipped entirely, and for narrow kernels each point is evaluated only
    on the grid window it can reach (scatter-added via bincount).
    """
    s0 = np.zeros_like(grid)
    s1 = np.zeros_like(grid)
    norm = 1.0 / (sigma * np.sqrt(2.0 * np.pi))
    reach = 10.0 * sigma
    h = grid[1] - grid[0]
    window = int(2.0 * reach / h) + 3
    m = len(grid)

    centers_list = []
    hits_list = []
    for k in range(-3, 4):
        for sign in (1.0, -1.0):
            band_lo = 2.0 * k + min(sign, 0.0)   # images span [2k, 2k+1] or [2k-1, 2k]
            if band_lo + 1.0 < -reach or band_lo > 1.0 + reach:
                continue
            centers = 2.0 * k + sign * conf
            near = (centers > -reach) & (centers < 1.0 + reach)
            if near.any():
                centers_list.append(centers[near])
                hits_list.append(correct[near])
    centers = np.concatenate(centers_list)
    hits = np.concatenate(hits_list)

    if window >= m:
        # Wide kernel: bin the points linearly onto the grid and smooth with
        # a mirror-boundary Gaussian (same image set); binning error is
        # bounded by (h/sigma)^2/8, far below the grid resolution here.
        from scipy.ndimage import gaussian_filter1d
        pos = conf / h
        j = np.clip(pos.astype(np.intp), 0, m - 2)
        t = pos - j
        w0 = (np.bincount(j, weights=1.0 - t, minlength=m)
              + np.bincount(j + 1, weights=t, minlength=m))
        w1 = (np.bincount(j, weights=(1.0 - t) * correct, minlength=m)
              + np.bincount(j + 1, weights=t * correct, minlength=m))
        s0 = gaussian_filter1d(w0, sigma / h, mode="mirror", truncate=10.0) / h
        s1 = gaussian_filter1d(w1, sigma / h, mode="mirror", truncate=10.0) / h
        return s0, s1

    start = np.clip(((centers - reach) / h).astype(np.intp), 0, m - window)
    idx = start[:, None] + np.arange(window)[None, :]
    d = (grid[idx] - centers[:, None]) / sigma
    w = norm * np.exp(-0.5 * d * d)
    flat = idx.ravel()
    s0 = np.bincount(flat, weights=w.ravel(), minlength=m)
    s1 = np.bincount(flat, weights=(w * hits[:, None]).ravel(), minlength=m)
    return s0, s1


def smece(ev: EvalSet, bandwidth: float | None = None):
    """Kernel-smoothed calibration gap; returns (value, bandwidth_used).

    With no bandwidth given, solves smece(sigma) = sigma by bisection on
    [1/n, 1] (the smoothed gap decreases in sigma, so the crossing is
    unique); values at the bracket ends are returned when the fixed point
    falls outside.
    """
    if ev.n < 2:
        raise ValueError("need at least 2 samples")
    conf = ev.confidences
    correct = ev.correct
    if np.ptp(conf) < 1e-12:
        # all confidences identical: the smoothed gap degenerates to one bin
        return abs(float(correct.mean()) - float(conf[0])), 0.0

    grid = np.linspace(0.0, 1.0, SMECE_GRID)

    def value_at(sigma: float) -> float:
        s0, s1 = _kernel_sums(conf, correct, sigma, grid)
        residual = np.abs(s1 - grid * s0) / ev.n
        return float(np.trapezoid(residual, grid))

    if bandwidth is not None:
        if bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        return value_at(bandwidth), bandwidth

    lo, hi = 1.0 / ev.n, 1.0
    if value_at(lo) <= lo:
        return value_at(lo), lo
    if value_at(hi) >= hi:
        return value_at(hi), hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if value_at(mid) > mid:
            lo = mid
        else:
            hi = mid
        if hi - lo < 0.25 / SMECE_GRID:
            break
    sigma = 0.5 * (lo + hi)
    return value_at(sigma), sigma


@dataclass
class CalibrationReport:
    """All metrics for one (predictions, labels) evaluation."""

    accuracy: float
    ece: float
    ada_ece: float
    classwise_ece: float
    mce: float
    smece: float
    nll: float
    brier: float
    bins: int = DEFAULT_BINS
    smece_bandwidth: float = 0.0

    def to_dict(self) -> dict:
        return {k: float(v) if k != "bins" else int(v)
                for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationReport":
        return cls(**d)


def evaluate(ev: EvalSet, m: int = DEFAULT_BINS,
             smece_bandwidth: float | None = None) -> CalibrationReport:
    """Compute the full metric suite on one evaluation set."""
    bins = bin_stats(ev, m, scheme="equal_width")
    sm_value, sm_bw = smece(ev, smece_bandwidth)
    return CalibrationReport(
        accuracy=accuracy(ev),
        ece=ece(bins),
        ada_ece=ada_ece(ev, min(m, ev.n)),
        classwise_ece=classwise_ece(ev, m),
        mce=mce(bins),
        smece=sm_value,
        nll=nll(ev),
        brier=brier(ev),
        bins=m,
        smece_bandwidth=sm_bw,
    )


def write_reliability_csv(bins: BinStats, path) -> None:
    """One row per bin: bin_lower, bin_upper, count, accuracy, confidence, gap."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lower", "bin_upper", "count", "accuracy",
                         "confidence", "gap"])
        for b in range(bins.m):
            writer.writerow([
                f"{bins.lower[b]:.10g}", f"{bins.upper[b]:.10g}",
                int(bins.counts[b]), f"{bins.accuracy[b]:.10g}",
                f"{bins.confidence[b]:.10g}", f"{bins.gaps[b]:.10g}",
            ])


def _val_nll(logits: np.ndarray, labels: np.ndarray, tau: float) -> float:
    return nll(EvalSet.from_logits(logits, labels, tau=tau))


def fit_posthoc_temperature(logits: np.ndarray, labels: np.ndarray) -> float:
    """Temperature minimizing held-out NLL, by golden-section on [0.05, 10].

    Returns 1.0 (with a warning) for degenerate single-class label sets;
    never returns a temperature with higher NLL than 1.0.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] < 2:
        raise ValueError("need at least 2 samples of finite logits")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    if len(np.unique(labels)) < 2:
        warnings.warn("single-class validation labels; keeping temperature 1.0")
        return 1.0

    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = _TAU_LO, _TAU_HI
    a = hi - inv_phi * (hi - lo)
    b = lo + inv_phi * (hi - lo)
    fa, fb = _val_nll(logits, labels, a), _val_nll(logits, labels, b)
    while hi - lo > 1e-4:
        if fa < fb:
            hi, b, fb = b, a, fa
            a = hi - inv_phi * (hi - lo)
            fa = _val_nll(logits, labels, a)
        else:
            lo, a, fa = a, b, fb
            b = lo + inv_phi * (hi - lo)
            fb = _val_nll(logits, labels, b)
    t_star = 0.5 * (lo + hi)
    if _val_nll(logits, labels, t_star) > _val_nll(logits, labels, 1.0):
        return 1.0
    return float(t_star)


def _bin_confidence(bin_logits: np.ndarray, tau: float) -> float:
    return float(softmax(scale_logits(bin_logits, tau)).max(axis=1).mean())


@dataclass
class PerBinTauResult:
    taus: np.ndarray          # (m,), NaN for empty bins
    ece_before: float
    ece_after: float


def per_bin_tau_oracle(logits: np.ndarray, labels: np.ndarray,
                       m: int = DEFAULT_BINS) -> PerBinTauResult:
    """Best per-bin temperature against each bin's accuracy.

    Bins are fixed by the unscaled confidences; within each occupied bin
    the mean top confidence decreases monotonically in the temperature
    (from 1 toward 1/k), so bisection finds the temperature whose scaled
    confidence is closest to the bin accuracy.  The reweighted gap sum can
    never exceed the unscaled one.
    """
    ev = EvalSet.from_logits(logits, labels)
    bins = bin_stats(ev, m, scheme="equal_width")
    idx = _equal_width_index(ev.confidences, m)
    taus = np.full(m, np.nan)
    gaps_after = np.zeros(m)
    for b in range(m):
        mask = idx == b
        if not mask.any():
            continue
        bin_logits = ev.logits[mask]
        target = bins.accuracy[b]
        lo, hi = _TAU_LO, _TAU_HI
        if _bin_confidence(bin_logits, lo) <= target:
            taus[b] = lo
        elif _bin_confidence(bin_logits, hi) >= target:
            taus[b] = hi
        else:
            for _ in range(64):
                mid = 0.5 * (lo + hi)
                if _bin_confidence(bin_logits, mid) > target:
                    lo = mid
                else:
                    hi = mid
            taus[b] = 0.5 * (lo + hi)
        gaps_after[b] = abs(target - _bin_confidence(bin_logits, taus[b]))
    weights = bins.counts / bins.n
    return PerBinTauResult(
        taus=taus,
        ece_before=ece(bins),
        ece_after=float((weights * gaps_after).sum()),
    )


@dataclass
class TauSweepResult:
    taus: np.ndarray
    eces: np.ndarray
    best_tau: float
    best_ece: float


def tau_sweep(logits: np.ndarray, labels: np.ndarray, taus,
              m: int = DEFAULT_BINS) -> TauSweepResult:
    """Binned calibration error of the rescaled predictions per temperature."""
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1 or len(taus) == 0 or np.any(taus <= 0) \
            or np.any(np.diff(taus) <= 0):
        raise ValueError("temperature grid must be positive and ascending")
    eces = np.array([
        ece(bin_stats(EvalSet.from_logits(logits, labels, tau=t), m))
        for t in taus
    ])
    best = int(eces.argmin())
    return TauSweepResult(taus=taus, eces=eces,
                          best_tau=float(taus[best]), best_ece=float(eces[best]))
