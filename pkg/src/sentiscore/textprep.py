"""Segmentation, stop words, frequency vocabulary, coverage and fixed-length encoding."""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import check_rating, clean_text

PAD_ID = 0
OOV_ID = 1
PAD_TOKEN = "<PAD>"
OOV_TOKEN = "<OOV>"
DEFAULT_SEQ_LEN = 100
DEFAULT_COVERAGE = 0.95


class VocabularyError(ValueError):
    pass


def segment(text: str, dictionary: set[str] | frozenset[str], max_len: int | None = None) -> list[str]:
    """Maximum forward matching.

    At each position take the longest dictionary word starting there; with
    no match emit one character. The output always joins back to ``text``.
    """
    if max_len is None:
        max_len = max((len(w) for w in dictionary), default=1)
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        for size in range(min(max_len, n - i), 1, -1):
            piece = text[i:i + size]
            if piece in dictionary:
                tokens.append(piece)
                i += size
                break
        else:
            tokens.append(text[i])
            i += 1
    return tokens


def remove_stopwords(tokens: Sequence[str], stoplist: set[str] | frozenset[str]) -> list[str]:
    return [t for t in tokens if t not in stoplist]


def read_wordlist(path: str | Path) -> set[str]:
    """One token per line, UTF-8; blank lines and ``#`` comments skipped."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.strip()
            if w and not w.startswith("#"):
                words.add(w)
    return words


def write_wordlist(path: str | Path, words: Iterable[str], comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for w in words:
            fh.write(w + "\n")


@dataclass
class Preprocessor:
    """Bundles the segmentation dictionary and stop list used on every text."""

    dictionary: frozenset[str] = frozenset()
    stopwords: frozenset[str] = frozenset()
    max_len: int = field(init=False)

    def __post_init__(self):
        self.dictionary = frozenset(self.dictionary)
        self.stopwords = frozenset(self.stopwords)
        self.max_len = max((len(w) for w in self.dictionary), default=1)

    @classmethod
    def from_files(cls, dictionary: str | Path | None = None,
                   stopwords: str | Path | None = None) -> "Preprocessor":
        d = read_wordlist(dictionary) if dictionary else set()
        s = read_wordlist(stopwords) if stopwords else set()
        return cls(frozenset(d), frozenset(s))

    def tokenize_clean(self, text: str) -> list[str]:
        """Tokens of already-cleaned text; spaces separate independent chunks."""
        tokens = []
        for chunk in text.split():
            tokens.extend(segment(chunk, self.dictionary, self.max_len))
        return remove_stopwords(tokens, self.stopwords)

    def tokenize(self, text: str) -> list[str]:
        return self.tokenize_clean(clean_text(text))


@dataclass
class Vocabulary:
    """Token ids ordered by descending corpus frequency.

    ``tokens[i]`` is the token with id ``i``; ids 0 and 1 are PAD and OOV.
    """

    tokens: list[str]
    frequencies: list[int]

    def __post_init__(self):
        if len(self.tokens) < 2 or self.tokens[0] != PAD_TOKEN or self.tokens[1] != OOV_TOKEN:
            raise VocabularyError("vocabulary must start with <PAD>, <OOV>")
        if len(self.tokens) != len(self.frequencies):
            raise VocabularyError("tokens and frequencies differ in length")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise VocabularyError("duplicate token in vocabulary")
        content = self.frequencies[2:]
        if any(a < b for a, b in zip(content, content[1:])):
            raise VocabularyError("content frequencies must be non-increasing by id")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, OOV_ID)

    def digest(self) -> str:
        h = hashlib.sha256()
        for t, f in zip(self.tokens, self.frequencies):
            h.update(f"{t}\t{f}\n".encode("utf-8"))
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, (t, f) in enumerate(zip(self.tokens, self.frequencies)):
                fh.write(f"{t}\t{i}\t{f}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        tokens, freqs = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise VocabularyError(f"{path}:{lineno}: expected token<TAB>id<TAB>frequency")
                token, idx, freq = parts[0], int(parts[1]), int(parts[2])
                if idx != len(tokens):
                    raise VocabularyError(f"{path}:{lineno}: ids must be consecutive from 0")
                tokens.append(token)
                freqs.append(freq)
        return cls(tokens, freqs)


def count_tokens(corpus: Iterable[Sequence[str]]) -> Counter:
    # Counter keeps first-insertion order, which the stable sort uses as tie-break
    counts: Counter = Counter()
    for doc in corpus:
        counts.update(doc)
    return counts


def sorted_frequencies(counts: Counter) -> list[tuple[str, int]]:
    return sorted(counts.items(), key=lambda kv: -kv[1])


def build_vocab(corpus: Iterable[Sequence[str]], max_content_tokens: int | None = None,
                coverage: float = DEFAULT_COVERAGE) -> Vocabulary:
    """Frequency-ordered vocabulary.

    Ties are broken by first occurrence. When ``max_content_tokens`` is None
    the budget is the smallest vocabulary reaching ``coverage`` of all
    token occurrences.
    """
    counts = count_tokens(corpus)
    if not counts:
        raise VocabularyError("cannot build a vocabulary from an empty corpus")
    for reserved in (PAD_TOKEN, OOV_TOKEN):
        if reserved in counts:
            raise VocabularyError(f"reserved token {reserved} appears in the corpus")
    ranked = sorted_frequencies(counts)
    if max_content_tokens is None:
        max_content_tokens = min_vocab_for_coverage([c for _, c in ranked], coverage)
    if max_content_tokens < 1:
        raise VocabularyError("max_content_tokens must be >= 1")
    kept = ranked[:max_content_tokens]
    n_oov = sum(c for _, c in ranked[max_content_tokens:])
    return Vocabulary([PAD_TOKEN, OOV_TOKEN] + [t for t, _ in kept],
                      [0, n_oov] + [c for _, c in kept])


def _check_frequencies(frequencies: Sequence[int]) -> np.ndarray:
    f = np.asarray(frequencies, dtype=np.int64)
    if f.size == 0:
        raise ValueError("frequencies must be nonempty")
    if np.any(f <= 0):
        raise ValueError("frequencies must be positive")
    if np.any(np.diff(f) > 0):
        raise ValueError("frequencies must be sorted non-increasing")
    return f


def coverage_values(frequencies: Sequence[int]) -> np.ndarray:
    f = _check_frequencies(frequencies)
    return np.cumsum(f) / f.sum()


def coverage_curve(frequencies: Sequence[int]) -> list[tuple[int, float]]:
    """(k, share of all occurrences covered by the top-k words) for every k."""
    cov = coverage_values(frequencies)
    return [(k, float(c)) for k, c in enumerate(cov, start=1)]


def min_vocab_for_coverage(frequencies: Sequence[int], threshold: float) -> int:
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    cov = coverage_values(frequencies)
    return int(np.searchsorted(cov, threshold, side="left")) + 1


def encode(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    return [vocab.id_of(t) for t in tokens]


@dataclass(frozen=True)
class TokenSequence:
    ids: np.ndarray
    true_length: int


def pad_truncate(ids: Sequence[int], length: int = DEFAULT_SEQ_LEN) -> TokenSequence:
    """Pre-pad with PAD to ``length`` or keep the first ``length`` ids."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if len(ids) == 0:
        raise ValueError("cannot pad an empty id sequence")
    out = np.zeros(length, dtype=np.int64)
    n = min(len(ids), length)
    out[length - n:] = np.asarray(ids[:n], dtype=np.int64)
    return TokenSequence(out, n)


def normalize_label(rating: float) -> float:
    return check_rating(rating) / 5.0


def denormalize(value: float) -> float:
    return min(max(float(value), 0.0), 1.0) * 5.0


def encode_batch(token_lists: Sequence[Sequence[str]], vocab: Vocabulary,
                 length: int = DEFAULT_SEQ_LEN) -> np.ndarray:
    """Stack padded id sequences into an (N, length) int64 array."""
    out = np.zeros((len(token_lists), length), dtype=np.int64)
    for i, toks in enumerate(token_lists):
        out[i] = pad_truncate(encode(toks, vocab), length).ids
    return out
