"""Figures for the report path. Each function writes one PNG and returns its path."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import Histogram  # noqa: E402
from .trainer import EpochRecord  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}
# PNG metadata without version strings keeps reruns byte-identical across installs
_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def coverage_figure(path, coverage: Sequence[float], marks: Sequence[float] = (0.95, 0.98)) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        k = np.arange(1, len(coverage) + 1)
        ax.plot(k, coverage, color="black", lw=1.2)
        cov = np.asarray(coverage)
        for m, color in zip(marks, ("tab:red", "tab:green")):
            kk = int(np.searchsorted(cov, m, side="left")) + 1
            if kk <= len(cov):
                ax.axhline(m, color=color, lw=0.8, ls="--")
                ax.axvline(kk, color=color, lw=0.8, ls=":")
                ax.annotate(f"{m:.0%}: {kk} words", (kk, m), textcoords="offset points",
                            xytext=(4, -12), color=color, fontsize=8)
        ax.set_xlabel("vocabulary size")
        ax.set_ylabel("coverage")
        ax.set_ylim(0, 1.02)
        return _save(fig, path)


def history_figure(path, history: Sequence[EpochRecord]) -> Path:
    ep = [r.epoch for r in history]
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=(8, 3.2))
        a.plot(ep, [r.train_loss for r in history], label="train")
        a.plot(ep, [r.val_loss for r in history], label="validation")
        a.set_ylabel("MSE loss")
        b.plot(ep, [r.train_mae for r in history], label="train")
        b.plot(ep, [r.val_mae for r in history], label="validation")
        b.set_ylabel("MAE")
        for ax in (a, b):
            ax.set_xlabel("epoch")
            ax.legend()
        return _save(fig, path)


def trials_figure(path, values: Sequence[float], phases: Sequence[str]) -> Path:
    it = np.arange(1, len(values) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(it, values, color="0.6", lw=0.8)
        for phase, marker in (("random", "o"), ("bayes", "s")):
            sel = [i for i, p in enumerate(phases) if p == phase]
            ax.scatter(it[sel], np.asarray(values)[sel], marker=marker, s=18, label=phase, zorder=3)
        ax.step(it, np.minimum.accumulate(values), where="post", color="black", lw=1.2, label="best so far")
        ax.set_xlabel("trial")
        ax.set_ylabel("validation MAE")
        ax.legend()
        return _save(fig, path)


def histograms_figure(path, hists: dict[str, Histogram]) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.4))
        n = len(hists)
        first = next(iter(hists.values()))
        width = (first.edges[1] - first.edges[0]) / (n + 1)
        for j, (name, h) in enumerate(hists.items()):
            frac = h.counts / max(h.total, 1)
            ax.bar(h.edges[:-1] + (j + 0.5) * width, frac, width=width, align="edge", label=name)
        ax.set_xlabel("score")
        ax.set_ylabel("share of reviews")
        ax.legend()
        return _save(fig, path)
