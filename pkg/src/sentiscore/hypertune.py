"""Random exploration followed by GP / expected-improvement search.

All points live in the unit cube; :class:`SearchSpace` maps them to
(learning rate, LSTM units, dropout) and back.
"""
from __future__ import annotations

import csv
import functools
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .rng import Xoshiro256pp, derive_seed

log = logging.getLogger(__name__)

LENGTH_GRID = (0.1, 0.2, 0.5, 1.0)
SIGNAL_GRID = (0.5, 1.0, 2.0)
JITTER = 1e-6
MAX_JITTER = 1e-2
N_CANDIDATES = 1024
PERTURB_SIGMA = 0.05
LEDGER_HEADER = ["trial", "phase", "learning_rate", "lstm_units", "dropout_rate", "val_mae"]
_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _tidy(v: float) -> float:
    # 12 significant digits: drops log/exp roundoff so configs survive a round trip unchanged
    return float(f"{float(v):.12g}")


@dataclass(frozen=True)
class HyperConfig:
    learning_rate: float
    lstm_units: int
    dropout_rate: float


@dataclass(frozen=True)
class SearchSpace:
    lr_low: float = 1e-4
    lr_high: float = 1e-2
    units_low: int = 32
    units_high: int = 128
    dropout_low: float = 0.2
    dropout_high: float = 0.6

    def __post_init__(self):
        if not (0 < self.lr_low < self.lr_high and 1 <= self.units_low < self.units_high
                and 0 <= self.dropout_low < self.dropout_high < 1):
            raise ValueError("invalid search space bounds")

    dim = 3

    def contains(self, cfg: HyperConfig) -> bool:
        return (self.lr_low <= cfg.learning_rate <= self.lr_high
                and self.units_low <= cfg.lstm_units <= self.units_high
                and self.dropout_low <= cfg.dropout_rate <= self.dropout_high)

    def normalize_point(self, cfg: HyperConfig) -> np.ndarray:
        if not self.contains(cfg):
            raise ValueError(f"{cfg} outside the search space")
        lo, hi = math.log10(self.lr_low), math.log10(self.lr_high)
        return np.array([
            (math.log10(cfg.learning_rate) - lo) / (hi - lo),
            (cfg.lstm_units - self.units_low) / (self.units_high - self.units_low),
            (cfg.dropout_rate - self.dropout_low) / (self.dropout_high - self.dropout_low),
        ])

    def denormalize_point(self, x: Sequence[float]) -> HyperConfig:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (3,) or np.any(x < 0) or np.any(x > 1):
            raise ValueError(f"point {x} outside the unit cube")
        lo, hi = math.log10(self.lr_low), math.log10(self.lr_high)
        return HyperConfig(
            learning_rate=_tidy(10.0 ** (lo + x[0] * (hi - lo))),
            lstm_units=int(round(self.units_low + x[1] * (self.units_high - self.units_low))),
            dropout_rate=_tidy(self.dropout_low + x[2] * (self.dropout_high - self.dropout_low)),
        )


def sq_exp_kernel(A: np.ndarray, B: np.ndarray, lengths, signal: float) -> np.ndarray:
    d = (A[:, None, :] - B[None, :, :]) / np.asarray(lengths, dtype=np.float64)
    return signal * np.exp(-0.5 * np.sum(d * d, axis=-1))


@dataclass
class Surrogate:
    X: np.ndarray
    y: np.ndarray            # raw objective values
    y_mean: float
    y_scale: float
    lengths: np.ndarray
    signal: float
    jitter: float
    chol: np.ndarray         # lower Cholesky factor of K + jitter * I
    alpha: np.ndarray        # (K + jitter * I)^-1 y_standardized
    log_marginal: float

    @property
    def best(self) -> float:
        return float(self.y.min())


def _fit_one(X, ys, lengths, signal, jitter):
    K = sq_exp_kernel(X, X, lengths, signal)
    K[np.diag_indices_from(K)] += jitter
    L = np.linalg.cholesky(K)
    alpha = cho_solve((L, True), ys)
    lml = -0.5 * ys @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(ys) * math.log(2 * math.pi)
    return L, alpha, float(lml)


def gp_fit(X: np.ndarray, y: np.ndarray, jitter: float = JITTER) -> Surrogate:
    """Squared-exponential GP with grid-searched hyperparameters.

    Targets are standardised; a constant target is only centred. Length
    scales and signal variance maximise the log marginal likelihood over
    the fixed grid, first maximum in enumeration order. Jitter grows x10 up
    to 1e-2 if a Cholesky factorisation fails.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2 or y.shape != (X.shape[0],):
        raise ValueError("need at least 2 points with one objective each")
    if len(np.unique(X, axis=0)) != X.shape[0]:
        raise ValueError("duplicate rows in X")
    mean = float(y.mean())
    std = float(y.std())
    scale = std if std > 1e-12 * max(1.0, abs(mean)) else 1.0
    ys = (y - mean) / scale
    best = None
    j = jitter
    while j <= MAX_JITTER * (1 + 1e-9):
        for lengths in itertools.product(LENGTH_GRID, repeat=X.shape[1]):
            for signal in SIGNAL_GRID:
                try:
                    L, alpha, lml = _fit_one(X, ys, lengths, signal, j)
                except np.linalg.LinAlgError:
                    continue
                if best is None or lml > best[-1]:
                    best = (np.array(lengths), signal, L, alpha, lml)
        if best is not None:
            break
        j *= 10.0
    if best is None:
        raise np.linalg.LinAlgError("kernel matrix not positive definite at maximum jitter")
    lengths, signal, L, alpha, lml = best
    return Surrogate(X, y, mean, scale, lengths, signal, j, L, alpha, lml)


def gp_predict(s: Surrogate, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance in objective units at point(s) ``x``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    k = sq_exp_kernel(xs, s.X, s.lengths, s.signal)
    mean = s.y_mean + s.y_scale * (k @ s.alpha)
    v = solve_triangular(s.chol, k.T, lower=True)
    var = np.maximum(s.signal - np.sum(v * v, axis=0), 0.0) * s.y_scale ** 2
    if single:
        return mean[0], var[0]
    return mean, var


def _norm_cdf(z):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(z) / math.sqrt(2.0)))


def _norm_pdf(z):
    return np.exp(-0.5 * np.asarray(z) ** 2) / math.sqrt(2.0 * math.pi)


def expected_improvement(mean, variance, best: float):
    """EI for minimisation; reduces to max(best - mean, 0) where variance is 0."""
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(variance < 0):
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(variance)
    gain = best - mean
    safe = np.where(sigma > 0, sigma, 1.0)
    # tiny sigma makes z huge; z**2 overflowing to inf still gives the right pdf of 0
    with np.errstate(over="ignore"):
        z = gain / safe
        ei = gain * _norm_cdf(z) + sigma * _norm_pdf(z)
    ei = np.where(sigma > 0, np.maximum(ei, 0.0), np.maximum(gain, 0.0))
    return float(ei) if ei.ndim == 0 else ei


def halton(n: int, dim: int) -> np.ndarray:
    """First ``n`` Halton points (skipping the origin) in ``dim`` dimensions."""
    return _halton(n, dim).copy()


@functools.lru_cache(maxsize=8)
def _halton(n: int, dim: int) -> np.ndarray:
    out = np.empty((n, dim))
    for d in range(dim):
        base = _PRIMES[d]
        for i in range(n):
            k, f, r = i + 1, 1.0, 0.0
            while k > 0:
                f /= base
                r += f * (k % base)
                k //= base
            out[i, d] = r
    return out


def candidate_points(s: Surrogate, rng: Xoshiro256pp, n: int = N_CANDIDATES) -> np.ndarray:
    """Randomly shifted Halton points, then each observed point plus N(0, 0.05^2) noise."""
    dim = s.X.shape[1]
    shift = rng.uniform_array(dim)
    qmc = (halton(n, dim) + shift) % 1.0
    local = np.clip(s.X + PERTURB_SIGMA * rng.normal_array(s.X.size).reshape(s.X.shape), 0.0, 1.0)
    return np.vstack([qmc, local])


def propose_next(s: Surrogate, rng: Xoshiro256pp, candidates: np.ndarray | None = None) -> np.ndarray:
    """Candidate with maximal EI, lowest index on ties; observed points are skipped."""
    if candidates is None:
        candidates = candidate_points(s, rng)
    mean, var = gp_predict(s, candidates)
    ei = np.atleast_1d(expected_improvement(mean, var, s.best))
    seen = {row.tobytes() for row in s.X}
    dup = np.array([c.tobytes() in seen for c in candidates])
    ei = np.where(dup, -np.inf, ei)
    return candidates[int(np.argmax(ei))].copy()


@dataclass
class Trial:
    index: int
    phase: str
    point: np.ndarray
    value: float
    config: HyperConfig | None = None
    failed: bool = False


def append_ledger(path: str | Path, trial: Trial) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    cfg = trial.config
    with open(path, "a", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(LEDGER_HEADER)
        w.writerow([trial.index, trial.phase,
                    repr(cfg.learning_rate) if cfg else "", cfg.lstm_units if cfg else "",
                    repr(cfg.dropout_rate) if cfg else "", repr(trial.value)])


def read_ledger(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class OptimizeResult:
    best: Trial
    trials: list[Trial] = field(default_factory=list)

    def best_so_far(self) -> list[float]:
        return list(np.minimum.accumulate([t.value for t in self.trials]))


def optimize(objective: Callable[[np.ndarray], float], dim: int, n_random: int = 5, n_bayes: int = 15,
             seed: int = 42, to_config: Callable[[np.ndarray], HyperConfig] | None = None,
             ledger_path: str | Path | None = None) -> OptimizeResult:
    """Minimise ``objective`` over the unit cube.

    ``n_random`` uniform points, then ``n_bayes`` rounds of fit-propose-evaluate.
    A non-finite objective is recorded as failed with twice the worst finite
    value seen so far. The ledger file, if given, gains one row per trial.
    """
    if n_random < 2 or n_bayes < 0:
        raise ValueError("need n_random >= 2 and n_bayes >= 0")
    rng = Xoshiro256pp(derive_seed(seed, "hypertune"))
    if ledger_path is not None:
        Path(ledger_path).write_text("")
    trials: list[Trial] = []

    def run(point: np.ndarray, phase: str) -> None:
        value = float(objective(point))
        failed = not math.isfinite(value)
        if failed:
            finite = [t.value for t in trials if not t.failed]
            value = 2.0 * max(finite) if finite else 1.0
            log.warning("trial %d failed; penalty %g", len(trials), value)
        t = Trial(len(trials), phase, point, value, to_config(point) if to_config else None, failed)
        trials.append(t)
        if ledger_path is not None:
            append_ledger(ledger_path, t)

    for _ in range(n_random):
        run(rng.uniform_array(dim), "random")
    for _ in range(n_bayes):
        s = gp_fit(np.array([t.point for t in trials]), np.array([t.value for t in trials]))
        run(propose_next(s, rng), "bayes")
    best = min(trials, key=lambda t: (t.value, t.index))
    return OptimizeResult(best, trials)


def tune_space(objective: Callable[[HyperConfig], float], space: SearchSpace = SearchSpace(),
               n_random: int = 5, n_bayes: int = 15, seed: int = 42,
               ledger_path: str | Path | None = None) -> OptimizeResult:
    """:func:`optimize` over a :class:`SearchSpace` with a config-level objective."""
    return optimize(lambda x: objective(space.denormalize_point(x)), space.dim, n_random, n_bayes,
                    seed, space.denormalize_point, ledger_path)
