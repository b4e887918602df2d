"""Figure rendering from kancal artifact CSVs.

Consumes only the documented artifact schemas (reliability.csv,
tau_curve.csv, logit_hist.csv, summary.csv) — never library internals.
Renders are deterministic: fixed figure geometry, no timestamps.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

DPI = 110
FIGSIZE = (6.0, 4.5)


class SchemaError(ValueError):
    """Input CSV does not match the expected artifact schema."""


def _read_rows(path, required):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path.name}: missing columns {missing} "
                              f"(found {header})")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    return rows


def _floats(rows, column):
    try:
        return [float(r[column]) for r in rows]
    except ValueError as exc:
        raise SchemaError(f"bad numeric value in column {column!r}: {exc}") from None


def _save(fig, out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def plot_reliability(csv_path, out_path, title=None):
    """Bar-vs-diagonal reliability diagram with gap shading and the
    weighted calibration error in the legend."""
    rows = _read_rows(csv_path, ["bin_lower", "bin_upper", "count",
                                 "accuracy", "confidence", "gap"])
    lowers = _floats(rows, "bin_lower")
    uppers = _floats(rows, "bin_upper")
    counts = _floats(rows, "count")
    accs = _floats(rows, "accuracy")
    confs = _floats(rows, "confidence")
    total = sum(counts) or 1.0
    ece = sum(c / total * abs(a - f)
              for c, a, f in zip(counts, accs, confs))

    fig, ax = plt.subplots(figsize=FIGSIZE)
    occupied = [i for i, c in enumerate(counts) if c > 0]
    centers = [(lowers[i] + uppers[i]) / 2 for i in occupied]
    widths = [(uppers[i] - lowers[i]) * 0.92 for i in occupied]
    ax.bar(centers, [accs[i] for i in occupied], width=widths,
           color="#3274a1", edgecolor="black", linewidth=0.5,
           label="accuracy", zorder=2)
    gap_bottom = [min(accs[i], confs[i]) for i in occupied]
    gap_height = [abs(accs[i] - confs[i]) for i in occupied]
    ax.bar(centers, gap_height, width=widths, bottom=gap_bottom,
           color="#e1812c", alpha=0.55, hatch="//",
           edgecolor="#b05a10", linewidth=0.5,
           label="gap to confidence", zorder=3)
    ax.plot([0, 1], [0, 1], "k--", linewidth=1.0,
            label=f"ideal (ECE = {ece:.4f})", zorder=4)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("confidence")
    ax.set_ylabel("accuracy")
    ax.set_title(title or "Reliability diagram")
    ax.legend(loc="upper left", framealpha=0.9)
    return _save(fig, out_path)


def plot_tau_curve(csv_path, out_path, title=None):
    """Calibration error against the temperature, minimum marked; an
    optional nll column is drawn on a twin axis when present."""
    rows = _read_rows(csv_path, ["tau", "ece"])
    taus = _floats(rows, "tau")
    eces = _floats(rows, "ece")
    best = min(range(len(taus)), key=lambda i: eces[i])

    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(taus, eces, "-o", color="#3274a1", markersize=3, label="ECE")
    ax.axvline(taus[best], color="#c03d3e", linestyle="--", linewidth=1.0,
               label=f"minimum at {taus[best]:.3f}")
    ax.plot([taus[best]], [eces[best]], "v", color="#c03d3e", markersize=8)
    ax.set_xlabel("temperature")
    ax.set_ylabel("ECE")

    has_nll = rows[0].get("nll") not in (None, "",) and all(
        r.get("nll", "") != "" for r in rows)
    if has_nll:
        twin = ax.twinx()
        twin.plot(taus, _floats(rows, "nll"), "-s", color="#3a923a",
                  markersize=3, alpha=0.8, label="NLL")
        twin.set_ylabel("NLL")
        twin.legend(loc="upper right", framealpha=0.9)
    ax.set_title(title or "Calibration error vs temperature")
    ax.legend(loc="upper left", framealpha=0.9)
    return _save(fig, out_path)


def plot_logit_hist(csv_path, out_path, title=None):
    """Histogram bars straight from the dumped bin rows."""
    rows = _read_rows(csv_path, ["bin_lower", "bin_upper", "count"])
    lowers = _floats(rows, "bin_lower")
    uppers = _floats(rows, "bin_upper")
    counts = _floats(rows, "count")

    fig, ax = plt.subplots(figsize=FIGSIZE)
    centers = [(lo + up) / 2 for lo, up in zip(lowers, uppers)]
    widths = [up - lo for lo, up in zip(lowers, uppers)]
    ax.bar(centers, counts, width=widths, color="#3274a1",
           edgecolor="black", linewidth=0.4)
    ax.set_xlabel("logit value")
    ax.set_ylabel("count")
    ax.set_title(title or "Logit distribution")
    return _save(fig, out_path)


def plot_sweep(csv_path, axis, out_path, value="final_ece", title=None):
    """One distribution glyph per axis value over successful sweep rows."""
    rows = _read_rows(csv_path, ["status", axis])
    ok_rows = [r for r in rows if r["status"] == "ok"]
    if not ok_rows:
        raise SchemaError("no successful runs in summary")
    if value not in ok_rows[0]:
        raise SchemaError(f"summary has no column {value!r}")
    groups: dict[str, list[float]] = {}
    for r in ok_rows:
        try:
            groups.setdefault(r[axis], []).append(float(r[value]))
        except ValueError:
            raise SchemaError(f"bad numeric value in column {value!r}") from None
    labels = sorted(groups, key=lambda s: (len(s), s))
    data = [groups[k] for k in labels]

    fig, ax = plt.subplots(figsize=FIGSIZE)
    positions = list(range(1, len(labels) + 1))
    parts = ax.violinplot(data, positions=positions, showmeans=False,
                          showextrema=False)
    for body in parts["bodies"]:
        body.set_facecolor("#3274a1")
        body.set_alpha(0.5)
    means = [sum(v) / len(v) for v in data]
    ax.plot(positions, means, "D", color="#c03d3e", markersize=5,
            label="mean")
    for pos, values in zip(positions, data):
        ax.plot([pos] * len(values), values, ".", color="black",
                markersize=3, alpha=0.6)
    ax.set_xticks(positions)
    ax.set_xticklabels(labels)
    ax.set_xlabel(axis)
    ax.set_ylabel(value)
    ax.set_title(title or f"{value} by {axis}")
    ax.legend(loc="best", framealpha=0.9)
    return _save(fig, out_path)
