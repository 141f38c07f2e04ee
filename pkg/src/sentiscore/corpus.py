"""Review ingestion and cleaning: tag stripping, character filtering, dedup."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

FORMATS = ("jsonl", "csv")
CSV_HEADER = ["user_id", "text", "rating"]


class DatasetError(ValueError):
    """A dataset file could not be parsed or holds an invalid record."""


@dataclass(frozen=True)
class RawReview:
    user_id: str
    text: str
    rating: float


@dataclass(frozen=True)
class CleanReview:
    user_id: str
    text: str
    rating: float


def check_rating(rating: float) -> float:
    rating = float(rating)
    if not (math.isfinite(rating) and 0.0 <= rating <= 5.0):
        raise ValueError(f"rating {rating!r} outside [0, 5]")
    return rating


def strip_html(text: str) -> str:
    """Remove ``<...>`` spans.

    A ``<`` opens a tag only when a ``>`` follows somewhere later in the
    text; otherwise it is kept as a literal character.
    """
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "<":
            close = text.find(">", i + 1)
            if close != -1:
                i = close + 1
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _retained(ch: str) -> bool:
    return ch.isalpha() or ch.isdecimal()


def strip_special_chars(text: str) -> str:
    """Keep letters and decimal digits; each run of anything else becomes one space."""
    out = []
    gap = False
    for ch in text:
        if _retained(ch):
            if gap and out:
                out.append(" ")
            gap = False
            out.append(ch)
        else:
            gap = True
    return "".join(out)


def clean_text(text: str) -> str:
    return strip_special_chars(strip_html(text))


def deduplicate(reviews: Iterable[RawReview]) -> list[RawReview]:
    """Keep the first review for each (user_id, cleaned text) pair, in order."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for r in reviews:
        key = (r.user_id, clean_text(r.text))
        if key in seen:
            continue
        seen.add(key)
        kept.append(r)
    return kept


def clean_reviews(reviews: Sequence[RawReview]) -> list[CleanReview]:
    """Full cleaning pass: tags, special characters, dedup, drop empties."""
    cleaned = [RawReview(r.user_id, clean_text(r.text), r.rating) for r in reviews]
    unique = deduplicate(cleaned)
    out = [CleanReview(r.user_id, r.text, check_rating(r.rating)) for r in unique if r.text]
    n_dup = len(cleaned) - len(unique)
    n_empty = len(unique) - len(out)
    log.info("cleaned %d reviews: %d duplicates, %d empty after cleaning, %d kept",
             len(reviews), n_dup, n_empty, len(out))
    return out


def _parse_record(fields: dict, lineno: int) -> RawReview:
    try:
        user_id = fields["user_id"]
        text = fields["text"]
        rating_raw = fields["rating"]
    except KeyError as exc:
        raise DatasetError(f"line {lineno}: missing field {exc.args[0]!r}") from None
    if not isinstance(text, str):
        raise DatasetError(f"line {lineno}: text must be a string")
    try:
        rating = float(rating_raw)
    except (TypeError, ValueError):
        raise DatasetError(f"line {lineno}: rating {rating_raw!r} is not a number") from None
    try:
        check_rating(rating)
    except ValueError as exc:
        raise DatasetError(f"line {lineno}: user {user_id!r}: {exc}") from None
    return RawReview(str(user_id), text, rating)


def load_dataset(path: str | Path, fmt: str | None = None) -> list[RawReview]:
    """Read reviews from a JSON-lines (``jsonl``) or delimited (``csv``) file.

    The format is inferred from the suffix when ``fmt`` is None.
    Errors name the offending line number.
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in FORMATS:
        raise DatasetError(f"unknown dataset format {fmt!r}; expected one of {FORMATS}")
    reviews = []
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"line {lineno}: malformed record: {exc.msg}") from None
                if not isinstance(rec, dict):
                    raise DatasetError(f"line {lineno}: record is not an object")
                reviews.append(_parse_record(rec, lineno))
        else:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise DatasetError(f"line 1: header must be {','.join(CSV_HEADER)}")
            for row in reader:
                lineno = reader.line_num
                if not row:
                    continue
                if len(row) != 3:
                    raise DatasetError(f"line {lineno}: expected 3 fields, got {len(row)}")
                reviews.append(_parse_record(dict(zip(CSV_HEADER, row)), lineno))
    log.info("loaded %d reviews from %s", len(reviews), path)
    return reviews


def write_dataset(path: str | Path, reviews: Iterable[RawReview | CleanReview],
                  fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for r in reviews:
                rec = {"user_id": r.user_id, "text": r.text, "rating": r.rating}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        elif fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in reviews:
                writer.writerow([r.user_id, r.text, repr(float(r.rating))])
        else:
            raise DatasetError(f"unknown dataset format {fmt!r}")
