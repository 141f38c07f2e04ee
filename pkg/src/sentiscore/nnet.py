"""Embedding -> BiLSTM -> dropout -> linear regressor, in NumPy.

Gate blocks along the 4H axis are ordered [input, forget, candidate,
output]. Recurrent weights are stored as (4H, in_dim) so one step reads
``z = x @ W.T + h @ U.T + b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .rng import Xoshiro256pp

PARAM_NAMES = ("embedding", "W_fwd", "U_fwd", "b_fwd", "W_bwd", "U_bwd", "b_bwd", "w_out", "b_out")
GATES = ("i", "f", "g", "o")


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 128
    lstm_units: int = 52
    dropout_rate: float = 0.0
    seq_len: int = 100

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 (PAD and OOV)")
        if min(self.embed_dim, self.lstm_units, self.seq_len) < 1:
            raise ValueError("embed_dim, lstm_units and seq_len must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        V, D, H = self.vocab_size, self.embed_dim, self.lstm_units
        return {
            "embedding": (V, D),
            "W_fwd": (4 * H, D), "U_fwd": (4 * H, H), "b_fwd": (4 * H,),
            "W_bwd": (4 * H, D), "U_bwd": (4 * H, H), "b_bwd": (4 * H,),
            "w_out": (2 * H,), "b_out": (1,),
        }


@dataclass
class ModelParams:
    embedding: np.ndarray
    W_fwd: np.ndarray
    U_fwd: np.ndarray
    b_fwd: np.ndarray
    W_bwd: np.ndarray
    U_bwd: np.ndarray
    b_bwd: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(self.items())

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(**{k: v.astype(dtype, copy=True) for k, v in self.items()})

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams(**{k: np.zeros_like(v) for k, v in self.items()})

    @property
    def dtype(self):
        return self.embedding.dtype

    def check(self, config: ModelConfig) -> None:
        for name, shape in config.shapes().items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {got}")

    def direction(self, which: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return getattr(self, f"W_{which}"), getattr(self, f"U_{which}"), getattr(self, f"b_{which}")


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> ModelParams:
    """Seeded initialisation.

    Embedding ~ U(-0.05, 0.05) with the PAD row zeroed; each gate block of
    W and U is Glorot-uniform; biases are zero except the forget block (1.0);
    the dense vector is Glorot-uniform over (2H, 1).
    """
    rng = Xoshiro256pp(seed)
    V, D, H = config.vocab_size, config.embed_dim, config.lstm_units
    emb = rng.uniform_array(V * D, -0.05, 0.05).reshape(V, D)
    emb[0] = 0.0
    arrays = {"embedding": emb}
    for d in ("fwd", "bwd"):
        for name, fan_in in (("W", D), ("U", H)):
            a = glorot_bound(fan_in, H)
            blocks = [rng.uniform_array(H * fan_in, -a, a).reshape(H, fan_in) for _ in GATES]
            arrays[f"{name}_{d}"] = np.concatenate(blocks, axis=0)
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        arrays[f"b_{d}"] = b
    a = glorot_bound(2 * H, 1)
    arrays["w_out"] = rng.uniform_array(2 * H, -a, a)
    arrays["b_out"] = np.zeros(1)
    return ModelParams(**{k: np.ascontiguousarray(v, dtype=dtype) for k, v in arrays.items()})


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_cell_forward(x, h_prev, c_prev, W, U, b):
    """One LSTM step; returns ``(h, c, gates)`` with gates = (i, f, g, o).

    Works for a single vector or a batch (leading axis).
    """
    H = U.shape[1]
    z = x @ W.T + h_prev @ U.T + b
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, (i, f, g, o)


@dataclass
class ChainCache:
    x: np.ndarray        # (T, B, D) inputs in processing order
    h: np.ndarray        # (T+1, B, H), h[0] is the initial zero state
    c: np.ndarray        # (T+1, B, H)
    gates: np.ndarray    # (T, 4, B, H)


def _run_chain(xs: np.ndarray, W, U, b) -> ChainCache:
    T, B, _ = xs.shape
    H = U.shape[1]
    dtype = W.dtype
    h = np.zeros((T + 1, B, H), dtype=dtype)
    c = np.zeros((T + 1, B, H), dtype=dtype)
    gates = np.empty((T, 4, B, H), dtype=dtype)
    # input projections for all steps at once; only the recurrent part is sequential
    zx = xs @ W.T + b
    for t in range(T):
        z = zx[t] + h[t] @ U.T
        gates[t, 0] = sigmoid(z[:, :H])
        gates[t, 1] = sigmoid(z[:, H:2 * H])
        gates[t, 2] = np.tanh(z[:, 2 * H:3 * H])
        gates[t, 3] = sigmoid(z[:, 3 * H:])
        c[t + 1] = gates[t, 1] * c[t] + gates[t, 0] * gates[t, 2]
        h[t + 1] = gates[t, 3] * np.tanh(c[t + 1])
    return ChainCache(xs, h, c, gates)


def bilstm_forward(embedded: np.ndarray, params: ModelParams) -> tuple[np.ndarray, ChainCache, ChainCache]:
    """Run both chains over ``embedded`` (B, L, D) or (L, D).

    Returns the feature ``[h_fwd at t=L, h_bwd at t=1]`` and the two chain caches.
    PAD steps are processed like any other input.
    """
    single = embedded.ndim == 2
    e = embedded[None] if single else embedded
    xs = np.ascontiguousarray(e.transpose(1, 0, 2))
    fwd = _run_chain(xs, *params.direction("fwd"))
    bwd = _run_chain(xs[::-1], *params.direction("bwd"))
    feature = np.concatenate([fwd.h[-1], bwd.h[-1]], axis=1)
    return (feature[0] if single else feature), fwd, bwd


@dataclass
class ForwardCache:
    ids: np.ndarray
    fwd: ChainCache
    bwd: ChainCache
    feature: np.ndarray
    mask: np.ndarray       # already includes the 1/(1-p) rescale
    dropped: np.ndarray
    pred: np.ndarray


def dropout_mask(shape: tuple[int, ...], rate: float, rng: Xoshiro256pp, dtype=np.float32) -> np.ndarray:
    """Inverted-dropout mask: 1/(1-rate) where kept, 0 where dropped."""
    keep = 1.0 - rate
    u = rng.uniform_array(int(np.prod(shape))).reshape(shape)
    return np.where(u < keep, 1.0 / keep, 0.0).astype(dtype)


def forward(ids: np.ndarray, params: ModelParams, config: ModelConfig, mode: str = "eval",
            rng: Xoshiro256pp | None = None, mask: np.ndarray | None = None):
    """Predict for a batch of id sequences of shape (B, L).

    ``mode="train"`` applies inverted dropout (mask drawn from ``rng`` unless
    a frozen ``mask`` is given) and returns a cache for :func:`backward`;
    ``mode="eval"`` is pure and returns ``(pred, None)``.
    """
    ids = np.asarray(ids)
    if ids.ndim != 2:
        raise ShapeError(f"ids must be (batch, seq_len), got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise ValueError(f"token id out of range [0, {config.vocab_size})")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    emb = params.embedding[ids]
    feature, fwd, bwd = bilstm_forward(emb, params)
    if mode == "eval":
        return feature @ params.w_out + params.b_out[0], None
    if mask is None:
        if config.dropout_rate == 0.0:
            mask = np.ones_like(feature)
        elif rng is None:
            raise ValueError("train mode with dropout needs an rng or a frozen mask")
        else:
            mask = dropout_mask(feature.shape, config.dropout_rate, rng, feature.dtype)
    mask = np.asarray(mask, dtype=feature.dtype)
    if mask.shape != feature.shape:
        raise ShapeError(f"dropout mask shape {mask.shape} != feature shape {feature.shape}")
    dropped = feature * mask
    pred = dropped @ params.w_out + params.b_out[0]
    return pred, ForwardCache(ids, fwd, bwd, feature, mask, dropped, pred)


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise ValueError("mse of an empty batch")
    d = pred - target
    return float(np.mean(d * d))


def _chain_backward(cache: ChainCache, dh_last: np.ndarray, W, U):
    T = cache.x.shape[0]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[0], dtype=W.dtype)
    dx = np.empty_like(cache.x)
    dh = dh_last
    dc = np.zeros_like(dh_last)
    dz = np.empty((dh.shape[0], W.shape[0]), dtype=W.dtype)
    H = U.shape[1]
    for t in range(T - 1, -1, -1):
        i, f, g, o = cache.gates[t]
        c = cache.c[t + 1]
        tc = np.tanh(c)
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * cache.c[t] * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dW += dz.T @ cache.x[t]
        dU += dz.T @ cache.h[t]
        db += dz.sum(axis=0)
        dx[t] = dz @ W
        dh = dz @ U
        dc = dc * f
    return dW, dU, db, dx


def backward(cache: ForwardCache, targets, params: ModelParams) -> ModelParams:
    """Exact gradients of :func:`mse_loss` for the batch held in ``cache``."""
    targets = np.asarray(targets, dtype=cache.pred.dtype)
    if targets.shape != cache.pred.shape:
        raise ShapeError(f"targets shape {targets.shape} != batch predictions {cache.pred.shape}")
    B = targets.shape[0]
    H = params.U_fwd.shape[1]
    dpred = (2.0 / B) * (cache.pred - targets)
    grads = params.zeros_like()
    grads.w_out[...] = cache.dropped.T @ dpred
    grads.b_out[0] = dpred.sum()
    dfeat = np.outer(dpred, params.w_out) * cache.mask
    W, U, _ = params.direction("fwd")
    grads.W_fwd[...], grads.U_fwd[...], grads.b_fwd[...], dx_f = _chain_backward(cache.fwd, dfeat[:, :H], W, U)
    W, U, _ = params.direction("bwd")
    grads.W_bwd[...], grads.U_bwd[...], grads.b_bwd[...], dx_b = _chain_backward(cache.bwd, dfeat[:, H:], W, U)
    # both chains saw the same embeddings; the backward chain in reversed time
    demb = (dx_f + dx_b[::-1]).transpose(1, 0, 2)
    np.add.at(grads.embedding, cache.ids, demb)
    grads.embedding[0] = 0.0
    return grads


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """In-place Adam step over named arrays."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype, copy=False)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState) -> tuple[ModelParams, AdamState]:
    adam_update(params.as_dict(), grads.as_dict(), state)
    params.embedding[0] = 0.0
    return params, state


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst: tuple[str, tuple[int, ...]] | None
    n_checked: int
    tolerance: float


def relative_error(a, b, floor: float = 1e-7):
    # below the floor, central differences at step 1e-5 are roundoff-limited (~1e-12)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradcheck_batch(config: ModelConfig, seed: int, batch: int = 4):
    """Seeded random ids (with some pre-padding) and targets in [0, 1]."""
    rng = Xoshiro256pp(seed ^ 0x5EED)
    ids = np.zeros((batch, config.seq_len), dtype=np.int64)
    for r in range(batch):
        n = 1 + rng.randbelow(config.seq_len)
        ids[r, config.seq_len - n:] = [1 + rng.randbelow(config.vocab_size - 1) for _ in range(n)]
    targets = rng.uniform_array(batch)
    return ids, targets


def gradient_check(config: ModelConfig, seed: int = 42, tolerance: float = 1e-4, *,
                   batch: int = 4, step: float = 1e-5, mask: np.ndarray | None = None,
                   grad_fn=None) -> GradCheckReport:
    """Compare :func:`backward` against central differences on every coordinate.

    Runs in float64. Dropout must be off or frozen by ``mask``. The PAD
    embedding row is not trainable and is skipped. ``grad_fn`` substitutes
    the analytic gradient (used to confirm faults are caught).
    """
    if config.dropout_rate != 0.0 and mask is None:
        raise ValueError("gradient check needs dropout_rate == 0 or a frozen mask")
    params = init_params(config, seed, dtype=np.float64)
    ids, targets = gradcheck_batch(config, seed, batch)
    if mask is None:
        mask = np.ones((batch, 2 * config.lstm_units))

    def loss() -> float:
        pred, _ = forward(ids, params, config, "train", mask=mask)
        return mse_loss(pred, targets)

    _, cache = forward(ids, params, config, "train", mask=mask)
    grads = (grad_fn or backward)(cache, targets, params)
    worst_err, worst_at, n = 0.0, None, 0
    for name, p in params.items():
        g = getattr(grads, name)
        for idx in np.ndindex(p.shape):
            if name == "embedding" and idx[0] == 0:
                continue
            old = p[idx]
            p[idx] = old + step
            up = loss()
            p[idx] = old - step
            down = loss()
            p[idx] = old
            num = (up - down) / (2.0 * step)
            err = float(relative_error(g[idx], num))
            n += 1
            if err > worst_err:
                worst_err, worst_at = err, (name, idx)
    passed = worst_err < tolerance
    return GradCheckReport(passed, worst_err, None if passed else worst_at, n, tolerance)


__all__ = [
    "ModelConfig", "ModelParams", "AdamState", "ForwardCache", "GradCheckReport",
    "init_params", "lstm_cell_forward", "bilstm_forward", "forward", "mse_loss",
    "backward", "adam_step", "adam_update", "gradient_check", "dropout_mask", "PARAM_NAMES",
]
