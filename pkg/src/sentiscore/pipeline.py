"""Glue between the stages: raw file -> token lists -> encoded, split tensors."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import CleanReview, clean_reviews, load_dataset
from .textprep import Preprocessor, Vocabulary, build_vocab, encode_batch, normalize_label
from .trainer import EncodedSet, split_indices

log = logging.getLogger(__name__)


@dataclass
class Prepared:
    """Cleaned reviews that still have tokens, with their token lists."""

    reviews: list[CleanReview]
    tokens: list[list[str]]

    def __len__(self) -> int:
        return len(self.reviews)

    @property
    def ratings(self) -> np.ndarray:
        return np.array([r.rating for r in self.reviews], dtype=np.float64)

    def subset(self, index: Sequence[int]) -> "Prepared":
        return Prepared([self.reviews[i] for i in index], [self.tokens[i] for i in index])

    def encode(self, vocab: Vocabulary, seq_len: int) -> EncodedSet:
        labels = np.array([normalize_label(r.rating) for r in self.reviews])
        return EncodedSet(encode_batch(self.tokens, vocab, seq_len), labels)


def prepare(reviews, prep: Preprocessor) -> Prepared:
    cleaned = clean_reviews(reviews)
    keep_r, keep_t = [], []
    for r in cleaned:
        toks = prep.tokenize_clean(r.text)
        if toks:
            keep_r.append(r)
            keep_t.append(toks)
    if len(keep_r) < len(cleaned):
        log.info("dropped %d reviews with no tokens after stop-word removal", len(cleaned) - len(keep_r))
    return Prepared(keep_r, keep_t)


def load_prepared(path: str | Path, prep: Preprocessor, fmt: str | None = None) -> Prepared:
    return prepare(load_dataset(path, fmt), prep)


def vocab_for(data: Prepared, max_tokens: int | None = None, coverage: float = 0.95) -> Vocabulary:
    return build_vocab(data.tokens, max_tokens, coverage)


def split_prepared(data: Prepared, fraction: float, seed: int) -> tuple[Prepared, Prepared]:
    tr, va = split_indices(len(data), fraction, seed)
    return data.subset(tr), data.subset(va)
