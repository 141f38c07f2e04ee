"""Planted-lexicon synthetic review corpus.

Words are two-character CJK strings drawn from a private character pool.
Each review mixes positive (+1), negative (-1) and Zipf-distributed
neutral (0) words, with stop words, punctuation and stray markup sprinkled
in so the cleaning and segmentation stages have real work to do. Its
rating is ``clamp(2.5 + scale * mean_weight + noise, 0, 5)`` where the
mean runs over the content words of the review.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import RawReview, write_dataset
from .rng import Xoshiro256pp, derive_seed
from .textprep import write_wordlist

STOPWORDS = ("的", "是", "在", "了", "和", "也", "都", "就")
PUNCTUATION = ("，", "。", "！", "？", "、", "...", "!!", " ")
MARKUP = ("<br/>", "<p>", "</p>", "<b>", "</b>")
EMOJI = ("😀", "👍", "😡", "🚗")
# CJK unified ideographs block, minus the stop-word characters
_POOL_START = 0x4E00
_POOL_SIZE = 0x9FA5 - 0x4E00


@dataclass
class SynthParams:
    n_reviews: int = 2000
    lexicon_size: int = 40          # K positive and K negative words
    n_neutral: int = 400
    zipf_exponent: float = 1.1
    min_words: int = 6
    max_words: int = 30
    sentiment_share: tuple[float, float] = (0.25, 0.7)
    scale: float = 2.5
    noise: float = 0.15
    n_users: int = 300
    duplicate_rate: float = 0.01
    markup_rate: float = 0.1

    def __post_init__(self):
        if self.n_reviews < 10:
            raise ValueError("n_reviews must be >= 10")
        if self.lexicon_size < 1 or self.n_neutral < 1:
            raise ValueError("lexicon_size and n_neutral must be >= 1")
        if not 1 <= self.min_words <= self.max_words:
            raise ValueError("need 1 <= min_words <= max_words")


@dataclass
class SynthCorpus:
    reviews: list[RawReview]
    weights: dict[str, int]
    stopwords: tuple[str, ...] = STOPWORDS
    neutral_probs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dictionary(self) -> list[str]:
        return list(self.weights)


def make_words(n: int, rng: Xoshiro256pp) -> list[str]:
    banned = {ord(c) for c in STOPWORDS}
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n:
        a = _POOL_START + rng.randbelow(_POOL_SIZE)
        b = _POOL_START + rng.randbelow(_POOL_SIZE)
        if a in banned or b in banned:
            continue
        w = chr(a) + chr(b)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def label_rating(weights: list[int], scale: float, noise: float) -> float:
    mean = sum(weights) / len(weights) if weights else 0.0
    return min(max(2.5 + scale * mean + noise, 0.0), 5.0)


def _choice(rng: Xoshiro256pp, cdf: np.ndarray) -> int:
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def generate_synthetic_corpus(params: SynthParams = SynthParams(), seed: int = 42) -> SynthCorpus:
    rng = Xoshiro256pp(derive_seed(seed, "synth"))
    K = params.lexicon_size
    words = make_words(2 * K + params.n_neutral, rng)
    pos, neg, neutral = words[:K], words[K:2 * K], words[2 * K:]
    weights = {w: 1 for w in pos} | {w: -1 for w in neg} | {w: 0 for w in neutral}
    ranks = np.arange(1, params.n_neutral + 1, dtype=np.float64)
    probs = ranks ** -params.zipf_exponent
    probs /= probs.sum()
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    lo, hi = params.sentiment_share
    reviews: list[RawReview] = []
    while len(reviews) < params.n_reviews:
        if reviews and rng.random() < params.duplicate_rate:
            dup = reviews[rng.randbelow(len(reviews))]
            reviews.append(RawReview(dup.user_id, dup.text + rng_choice(rng, PUNCTUATION[:4]), dup.rating))
            continue
        n = params.min_words + rng.randbelow(params.max_words - params.min_words + 1)
        share = lo + (hi - lo) * rng.random()
        polarity = rng.random()
        content, w = [], []
        for _ in range(n):
            if rng.random() < share:
                if rng.random() < polarity:
                    content.append(pos[rng.randbelow(K)])
                    w.append(1)
                else:
                    content.append(neg[rng.randbelow(K)])
                    w.append(-1)
            else:
                content.append(neutral[_choice(rng, cdf)])
                w.append(0)
        rating = label_rating(w, params.scale, params.noise * rng.normal())
        text = _decorate(content, rng, params.markup_rate)
        user = f"u{rng.randbelow(params.n_users):04d}"
        reviews.append(RawReview(user, text, round(rating, 4)))
    return SynthCorpus(reviews, weights, STOPWORDS, probs)


def rng_choice(rng: Xoshiro256pp, items):
    return items[rng.randbelow(len(items))]


def _decorate(content: list[str], rng: Xoshiro256pp, markup_rate: float) -> str:
    parts = []
    for word in content:
        r = rng.random()
        if r < 0.15:
            parts.append(rng_choice(rng, STOPWORDS))
        elif r < 0.25:
            parts.append(rng_choice(rng, PUNCTUATION))
        parts.append(word)
    if rng.random() < 0.2:
        parts.append(rng_choice(rng, EMOJI))
    text = "".join(parts)
    if rng.random() < markup_rate:
        text = f"{rng_choice(rng, MARKUP)}{text}{rng_choice(rng, MARKUP)}"
    return text


def write_corpus(out_dir: str | Path, corpus: SynthCorpus) -> dict[str, Path]:
    """corpus.jsonl, dictionary.txt, stopwords.txt and lexicon.csv (ground truth)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "dataset": out / "corpus.jsonl",
        "dictionary": out / "dictionary.txt",
        "stopwords": out / "stopwords.txt",
        "lexicon": out / "lexicon.csv",
    }
    write_dataset(paths["dataset"], corpus.reviews, "jsonl")
    write_wordlist(paths["dictionary"], corpus.dictionary, "synthetic segmentation dictionary")
    write_wordlist(paths["stopwords"], corpus.stopwords, "synthetic stop words")
    with open(paths["lexicon"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["token", "weight"])
        for tok, wt in corpus.weights.items():
            w.writerow([tok, wt])
    return paths


def zipf_counts(n_types: int, n_tokens: int, exponent: float = 1.1, seed: int = 42) -> list[int]:
    """Token counts of a seeded Zipf sample, sorted non-increasing (zeros dropped)."""
    rng = Xoshiro256pp(derive_seed(seed, "synth.zipf"))
    ranks = np.arange(1, n_types + 1, dtype=np.float64)
    cdf = np.cumsum(ranks ** -exponent)
    cdf /= cdf[-1]
    draws = np.searchsorted(cdf, rng.uniform_array(n_tokens), side="right")
    counts = np.bincount(draws, minlength=n_types)
    return sorted((int(c) for c in counts if c > 0), reverse=True)
