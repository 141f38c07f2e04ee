"""Regression statistics and fixed-range histograms."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAPE_EPS = 1e-8
METRIC_NAMES = ("mse", "rmse", "mae", "mape", "msle", "medae", "r2", "evs")
METRIC_LABELS = {
    "mse": "Mean Squared Error (MSE)",
    "rmse": "Root Mean Squared Error (RMSE)",
    "mae": "Mean Absolute Error (MAE)",
    "mape": "Mean Absolute Percentage Error (MAPE)",
    "msle": "Mean Squared Logarithmic Error (MSLE)",
    "medae": "Median Absolute Error (MedAE)",
    "r2": "Coefficient of Determination (R2)",
    "evs": "Explained Variance Score (EVS)",
}


@dataclass(frozen=True)
class MetricsReport:
    """Error statistics for one prediction set.

    ``mape`` is a fraction, not a percentage. ``r2`` and ``evs`` are None
    when the targets have zero variance.
    """

    mse: float
    rmse: float
    mae: float
    mape: float
    msle: float
    medae: float
    r2: float | None
    evs: float | None
    n: int
    n_excluded_mape: int

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            lines.append(f"{k} = {'undefined' if v is None else repr(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricsReport":
        vals = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            k, v = k.strip(), v.strip()
            if v == "undefined":
                vals[k] = None
            elif k in ("n", "n_excluded_mape"):
                vals[k] = int(v)
            else:
                vals[k] = float(v)
        return cls(**vals)


def compute_metrics(y_true: Sequence[float], y_pred: Sequence[float]) -> MetricsReport:
    yt = np.asarray(y_true, dtype=np.float64)
    yp = np.asarray(y_pred, dtype=np.float64)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise ValueError(f"y_true and y_pred must be equal-length vectors, got {yt.shape} and {yp.shape}")
    n = yt.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    e = yt - yp
    ae = np.abs(e)
    mse = float(np.mean(e * e))
    keep = yt > MAPE_EPS
    mape = float(np.mean(ae[keep] / yt[keep])) if keep.any() else math.nan
    log_err = np.log1p(yt) - np.log1p(np.maximum(yp, 0.0))
    ss_tot = float(np.sum((yt - yt.mean()) ** 2))
    var_t = float(np.var(yt))
    if ss_tot > 0.0:
        r2 = 1.0 - float(np.sum(e * e)) / ss_tot
        evs = 1.0 - float(np.var(e)) / var_t
    else:
        r2 = evs = None
    return MetricsReport(
        mse=mse, rmse=math.sqrt(mse), mae=float(np.mean(ae)), mape=mape,
        msle=float(np.mean(log_err * log_err)), medae=float(np.median(ae)),
        r2=r2, evs=evs, n=n, n_excluded_mape=int(n - keep.sum()),
    )


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


def histogram(values: Sequence[float], bins: int = 10, range_: tuple[float, float] = (0.0, 5.0)) -> Histogram:
    """Equal-width bins over [lo, hi]; bins are half-open except the last, which includes hi."""
    lo, hi = map(float, range_)
    if bins < 1 or not lo < hi:
        raise ValueError("need bins >= 1 and lo < hi")
    v = np.asarray(values, dtype=np.float64)
    width = (hi - lo) / bins
    under = int(np.sum(v < lo))
    over = int(np.sum(v > hi))
    inside = v[(v >= lo) & (v <= hi)]
    idx = np.floor((inside - lo) / width).astype(np.int64)
    idx = np.minimum(idx, bins - 1)
    edges = lo + (hi - lo) * np.arange(bins + 1) / bins
    # float division can push a value one bin off near an edge; reconcile against the edges
    idx = np.where((idx > 0) & (inside < edges[idx]), idx - 1, idx)
    idx = np.where((idx < bins - 1) & (inside >= edges[np.minimum(idx + 1, bins)]), idx + 1, idx)
    counts = np.bincount(idx, minlength=bins)
    return Histogram(edges, counts, under, over)


def write_histogram(path: str | Path, h: Histogram) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        w.writerow(["-inf", repr(float(h.edges[0])), h.underflow])
        w.writerow([repr(float(h.edges[-1])), "inf", h.overflow])


def extreme_mass(h: Histogram) -> float:
    """Share of all values falling in the first or last bin (overflow included)."""
    total = h.total
    return (int(h.counts[0]) + int(h.counts[-1]) + h.underflow + h.overflow) / total if total else 0.0


def comparison_rows(reports: dict[str, MetricsReport]) -> list[list[str]]:
    """Table rows ``metric, <model>...``; MAPE shown as a percentage."""
    rows = [["metric", *reports]]
    for name in METRIC_NAMES:
        row = [METRIC_LABELS[name]]
        for rep in reports.values():
            v = getattr(rep, name)
            if v is None:
                row.append("undefined")
            elif name == "mape":
                row.append(f"{100 * v:.2f}%")
            else:
                row.append(f"{v:.4f}")
        rows.append(row)
    return rows
