"""Splitting, the fixed-epoch training loop, checkpoints and prediction."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import nnet
from .nnet import AdamState, ModelConfig, ModelParams
from .rng import Xoshiro256pp, derive_seed
from .textprep import Preprocessor, Vocabulary, encode, pad_truncate

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SSCK"
CHECKPOINT_VERSION = 1
HISTORY_HEADER = ["epoch", "train_loss", "train_mae", "val_loss", "val_mae"]
EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    epochs: int = 100
    batch_size: int = 64
    split_fraction: float = 0.8
    seed: int = 42
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be positive")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass
class EncodedSet:
    """Padded id matrix (N, L) and labels normalised to [0, 1]."""

    ids: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.ids.ndim != 2 or self.labels.shape != (self.ids.shape[0],):
            raise ValueError("ids must be (N, L) and labels (N,)")

    def __len__(self) -> int:
        return self.ids.shape[0]

    def subset(self, index) -> "EncodedSet":
        return EncodedSet(self.ids[index], self.labels[index])


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_mae: float
    val_loss: float
    val_mae: float


class TrainingError(RuntimeError):
    def __init__(self, message: str, history: list[EpochRecord]):
        super().__init__(message)
        self.history = history


def split_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ValueError("need at least 2 items to split")
    cut = math.floor(fraction * n)
    if cut < 1 or cut >= n:
        raise ValueError(f"split fraction {fraction} leaves an empty side for n={n}")
    perm = Xoshiro256pp(derive_seed(seed, "trainer.split")).permutation(n)
    return perm[:cut], perm[cut:]


def split_dataset(data: Sequence, fraction: float = 0.8, seed: int = 42):
    """Seeded shuffle, then the first floor(fraction * n) items train."""
    tr, va = split_indices(len(data), fraction, seed)
    if isinstance(data, (EncodedSet, np.ndarray)):
        take = data.subset if isinstance(data, EncodedSet) else data.__getitem__
        return take(tr), take(va)
    return [data[i] for i in tr], [data[i] for i in va]


def predict_raw(params: ModelParams, config: ModelConfig, ids: np.ndarray,
                batch: int = EVAL_BATCH) -> np.ndarray:
    """Eval-mode network output, unclamped, as float64."""
    out = np.empty(ids.shape[0], dtype=np.float64)
    for s in range(0, ids.shape[0], batch):
        pred, _ = nnet.forward(ids[s:s + batch], params, config, "eval")
        out[s:s + batch] = pred
    return out


def _loss_mae(params, config, data: EncodedSet) -> tuple[float, float]:
    pred = predict_raw(params, config, data.ids)
    err = pred - data.labels
    return float(np.mean(err * err)), float(np.mean(np.abs(err)))


def write_history(path: str | Path, history: Sequence[EpochRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for r in history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.train_mae), repr(r.val_loss), repr(r.val_mae)])


def read_history(path: str | Path) -> list[EpochRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["train_mae"]),
                        float(r["val_loss"]), float(r["val_mae"])) for r in rows]


def train(train_set: EncodedSet, val_set: EncodedSet, config: TrainConfig,
          history_path: str | Path | None = None, init: ModelParams | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> tuple[ModelParams, list[EpochRecord]]:
    """Minibatch Adam for ``config.epochs`` epochs with no early stopping.

    Each epoch reshuffles the training set, steps over every batch (the last
    partial one included), then records full-set loss and MAE on both sets.
    The history file, when given, is rewritten after every epoch.
    """
    mc = config.model
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be nonempty")
    for name, s in (("train", train_set), ("validation", val_set)):
        if s.ids.shape[1] != mc.seq_len:
            raise ValueError(f"{name} sequences have length {s.ids.shape[1]}, model expects {mc.seq_len}")
    params = init.copy() if init is not None else nnet.init_params(mc, derive_seed(config.seed, "nnet.init"))
    params.check(mc)
    shuffle_rng = Xoshiro256pp(derive_seed(config.seed, "trainer.shuffle"))
    dropout_rng = Xoshiro256pp(derive_seed(config.seed, "nnet.dropout"))
    state = AdamState(learning_rate=config.learning_rate)
    labels = train_set.labels.astype(params.dtype)
    history: list[EpochRecord] = []
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        for b, s in enumerate(range(0, n, config.batch_size), start=1):
            idx = order[s:s + config.batch_size]
            pred, cache = nnet.forward(train_set.ids[idx], params, mc, "train", rng=dropout_rng)
            loss = nnet.mse_loss(pred, labels[idx])
            if not math.isfinite(loss):
                if history_path:
                    write_history(history_path, history)
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}", history)
            grads = nnet.backward(cache, labels[idx], params)
            nnet.adam_step(params, grads, state)
        tr_loss, tr_mae = _loss_mae(params, mc, train_set)
        va_loss, va_mae = _loss_mae(params, mc, val_set)
        rec = EpochRecord(epoch, tr_loss, tr_mae, va_loss, va_mae)
        if not all(math.isfinite(v) for v in (tr_loss, tr_mae, va_loss, va_mae)):
            history.append(rec)
            if history_path:
                write_history(history_path, history)
            raise TrainingError(f"non-finite epoch metrics at epoch {epoch}", history)
        history.append(rec)
        if history_path:
            write_history(history_path, history)
        if on_epoch:
            on_epoch(rec)
        log.debug("epoch %d train_loss %.5f val_mae %.5f", epoch, tr_loss, va_mae)
    return params, history


# -- checkpoints ------------------------------------------------------------

class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    model: ModelConfig
    params: ModelParams
    seed: int = 0
    train_digest: str = ""
    vocab_digest: str = ""
    extra: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Write magic, u16 version, u32 header length, JSON header, then f32 arrays.

    Arrays are stored little-endian float32, so float64 parameters are rounded.
    """
    ckpt.params.check(ckpt.model)
    header = {
        "model": asdict(ckpt.model),
        "seed": ckpt.seed,
        "train_digest": ckpt.train_digest,
        "vocab_digest": ckpt.vocab_digest,
        "arrays": list(nnet.PARAM_NAMES),
        "extra": ckpt.extra,
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HI", ckpt.version, len(blob)))
        fh.write(blob)
        for _, arr in ckpt.params.items():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path, expect: ModelConfig | None = None) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < 10:
        raise CheckpointTruncatedError(f"{path}: file too short for a checkpoint header")
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes {data[:4]!r}")
    version, hlen = struct.unpack("<HI", data[4:10])
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}")
    if len(data) < 10 + hlen:
        raise CheckpointTruncatedError(f"{path}: header truncated")
    try:
        header = json.loads(data[10:10 + hlen].decode("utf-8"))
        model = ModelConfig(**header["model"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from None
    if header.get("arrays") != list(nnet.PARAM_NAMES):
        raise CheckpointError(f"{path}: unexpected array list {header.get('arrays')}")
    shapes = model.shapes()
    need = sum(int(np.prod(s)) for s in shapes.values()) * 4
    body = data[10 + hlen:]
    if len(body) < need:
        raise CheckpointTruncatedError(f"{path}: {len(body)} array bytes, expected {need}")
    if len(body) > need:
        raise CheckpointError(f"{path}: {len(body) - need} unexpected trailing bytes")
    arrays = {}
    offset = 0
    for name in nnet.PARAM_NAMES:
        count = int(np.prod(shapes[name]))
        arrays[name] = np.frombuffer(body, dtype="<f4", count=count, offset=offset).astype(np.float32).reshape(shapes[name])
        offset += count * 4
    if expect is not None:
        for key in ("vocab_size", "embed_dim", "lstm_units", "seq_len"):
            got, want = getattr(model, key), getattr(expect, key)
            if got != want:
                raise CheckpointDimensionError(f"{path}: {key}={got} in checkpoint, {want} expected")
    return Checkpoint(model, ModelParams(**arrays), header.get("seed", 0), header.get("train_digest", ""),
                      header.get("vocab_digest", ""), header.get("extra", {}), version)


# -- prediction ---------------------------------------------------------------

def score_from_output(raw: float) -> float:
    """Clamp a raw network output to [0, 1] and rescale to a 0-5 score."""
    return min(max(float(raw), 0.0), 1.0) * 5.0


def predict(texts: Sequence[str], params: ModelParams, config: ModelConfig, vocab: Vocabulary,
            prep: Preprocessor) -> list[float | None]:
    """0-5 scores for raw texts; None marks a text with no tokens after cleaning."""
    rows, slots = [], []
    for i, text in enumerate(texts):
        tokens = prep.tokenize(text)
        if tokens:
            rows.append(pad_truncate(encode(tokens, vocab), config.seq_len).ids)
            slots.append(i)
    scores: list[float | None] = [None] * len(texts)
    if rows:
        raw = predict_raw(params, config, np.stack(rows))
        for i, r in zip(slots, raw):
            scores[i] = score_from_output(r)
    return scores
