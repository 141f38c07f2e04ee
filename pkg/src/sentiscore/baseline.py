"""Multinomial naive-Bayes polarity scorer used as the comparison baseline."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .textprep import Preprocessor

POSITIVE_MIN = 4.0
NEGATIVE_MAX = 2.0
FORMAT_TAG = "sentiscore-nb v1"


class BaselineError(ValueError):
    pass


@dataclass
class NBModel:
    log_prior_pos: float
    log_prior_neg: float
    loglik_pos: dict[str, float]
    loglik_neg: dict[str, float]
    unseen_pos: float
    unseen_neg: float

    def token_loglik(self, token: str) -> tuple[float, float]:
        return (self.loglik_pos.get(token, self.unseen_pos),
                self.loglik_neg.get(token, self.unseen_neg))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {FORMAT_TAG}\n")
            fh.write(f"log_prior_pos\t{self.log_prior_pos!r}\n")
            fh.write(f"log_prior_neg\t{self.log_prior_neg!r}\n")
            fh.write(f"unseen\t{self.unseen_pos!r}\t{self.unseen_neg!r}\n")
            fh.write("tokens\n")
            for tok in self.loglik_pos:
                fh.write(f"{tok}\t{self.loglik_pos[tok]!r}\t{self.loglik_neg[tok]!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> "NBModel":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != f"# {FORMAT_TAG}":
            raise BaselineError(f"{path}: not a baseline model file")
        try:
            head = dict(line.split("\t", 1) for line in lines[1:4])
            unseen = head["unseen"].split("\t")
            if lines[4] != "tokens":
                raise ValueError("missing token table")
            pos, neg = {}, {}
            for line in lines[5:]:
                tok, lp, ln = line.split("\t")
                pos[tok], neg[tok] = float(lp), float(ln)
            return cls(float(head["log_prior_pos"]), float(head["log_prior_neg"]), pos, neg,
                       float(unseen[0]), float(unseen[1]))
        except (ValueError, KeyError, IndexError) as exc:
            raise BaselineError(f"{path}: malformed baseline model: {exc}") from None


def train_baseline(docs: Sequence[Sequence[str]], ratings: Sequence[float]) -> NBModel:
    """Fit on token lists; ratings >= 4 are positive, <= 2 negative, others dropped.

    Add-one smoothing over the union vocabulary of both classes.
    """
    if len(docs) != len(ratings):
        raise BaselineError("docs and ratings differ in length")
    counts = {True: Counter(), False: Counter()}
    n_docs = {True: 0, False: 0}
    for toks, r in zip(docs, ratings):
        if r >= POSITIVE_MIN:
            cls_ = True
        elif r <= NEGATIVE_MAX:
            cls_ = False
        else:
            continue
        counts[cls_].update(toks)
        n_docs[cls_] += 1
    if n_docs[True] == 0 or n_docs[False] == 0:
        raise BaselineError("need at least one positive (>=4) and one negative (<=2) review")
    vocab = list(counts[True])
    vocab += [t for t in counts[False] if t not in counts[True]]
    V = len(vocab)
    denom_pos = sum(counts[True].values()) + V
    denom_neg = sum(counts[False].values()) + V
    total = n_docs[True] + n_docs[False]
    return NBModel(
        log_prior_pos=math.log(n_docs[True] / total),
        log_prior_neg=math.log(n_docs[False] / total),
        loglik_pos={t: math.log((counts[True][t] + 1) / denom_pos) for t in vocab},
        loglik_neg={t: math.log((counts[False][t] + 1) / denom_neg) for t in vocab},
        unseen_pos=math.log(1 / denom_pos),
        unseen_neg=math.log(1 / denom_neg),
    )


def positive_probability(tokens: Iterable[str], model: NBModel) -> float:
    # accumulate the log-odds directly so tokens with equal likelihoods add exactly zero
    d = model.log_prior_neg - model.log_prior_pos
    for t in tokens:
        a, b = model.token_loglik(t)
        d += b - a
    # two-class log-sum-exp: P(pos) = 1 / (1 + exp(d))
    if d >= 0:
        return math.exp(-d) / (1.0 + math.exp(-d))
    return 1.0 / (1.0 + math.exp(d))


def score_tokens(tokens: Sequence[str], model: NBModel) -> float:
    """5 * P(positive | tokens); an empty list falls back to the prior."""
    return 5.0 * positive_probability(tokens, model)


def score_baseline(text: str, model: NBModel, prep: Preprocessor) -> float:
    return score_tokens(prep.tokenize(text), model)


def train_from_reviews(reviews, prep: Preprocessor) -> NBModel:
    docs = [prep.tokenize_clean(r.text) for r in reviews]
    return train_baseline(docs, [r.rating for r in reviews])
