"""``sentiscore`` command line.

    sentiscore <subcommand> [--config PATH] [--seed N] [--out DIR] [--set key=value ...]

Subcommands: synth, clean, vocab, train, tune, evaluate, predict, baseline,
compare. The config file holds flat ``key = value`` lines (``#`` comments);
``--set`` overrides single keys. Every output lands under ``--out`` with a
fixed name. Failures exit 1 with one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import NBModel, score_tokens, train_baseline
from .corpus import write_dataset
from .hypertune import SearchSpace, read_ledger, tune_space
from .metrics import comparison_rows, compute_metrics, histogram, write_histogram
from .nnet import ModelConfig
from .pipeline import Prepared, load_prepared, split_prepared, vocab_for
from .synth import SynthParams, generate_synthetic_corpus, write_corpus
from .textprep import Preprocessor, Vocabulary, coverage_values
from .trainer import (Checkpoint, TrainConfig, load_checkpoint, predict, predict_raw, save_checkpoint,
                      score_from_output, train, write_history)

log = logging.getLogger("sentiscore")

DEFAULT_SEED = 42
SUBCOMMANDS = ("synth", "clean", "vocab", "train", "tune", "evaluate", "predict", "baseline", "compare")
OUT_NAMES = {
    "history": "history.csv", "trials": "trials.csv", "coverage": "coverage.csv",
    "metrics": "metrics.txt", "metrics_baseline": "metrics_baseline.txt",
    "hist_model": "hist_model.csv", "hist_baseline": "hist_baseline.csv", "hist_truth": "hist_truth.csv",
    "checkpoint": "checkpoint.ssck", "vocab": "vocab.tsv", "clean": "clean.jsonl",
    "baseline": "baseline.txt", "best": "best_config.txt", "compare": "compare.csv",
    "scores": "scores.csv",
}


class CliError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


@dataclass
class RunConfig:
    # inputs; empty means "the synth output under --out"
    dataset: str = ""
    format: str = ""
    dictionary: str = ""
    stopwords: str = ""
    test_dataset: str = ""
    # vocabulary
    vocab_coverage: float = 0.95
    max_vocab: int = 0
    # model and training
    seq_len: int = 100
    embed_dim: int = 128
    lstm_units: int = 52
    dropout_rate: float = 0.007038
    learning_rate: float = 0.005358
    epochs: int = 100
    batch_size: int = 64
    split_fraction: float = 0.8
    # tuning
    n_random: int = 5
    n_bayes: int = 15
    tune_epochs: int = 15
    lr_low: float = 1e-4
    lr_high: float = 1e-2
    units_low: int = 32
    units_high: int = 128
    dropout_low: float = 0.2
    dropout_high: float = 0.6
    # synthetic corpus
    corpus_size: int = 2000
    lexicon_size: int = 40
    n_neutral: int = 400
    noise: float = 0.15
    label_scale: float = 2.5
    # reporting
    bins: int = 10
    plots: bool = True

    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, raw in pairs.items():
            if key not in known:
                raise CliError("config", f"unknown config key {key!r}", key=key)
            typ = known[key].type
            try:
                if typ == "bool":
                    values[key] = raw.strip().lower() in ("1", "true", "yes", "on")
                elif typ == "int":
                    values[key] = int(raw)
                elif typ == "float":
                    values[key] = float(raw)
                else:
                    values[key] = raw.strip()
            except ValueError:
                raise CliError("config", f"bad value {raw!r} for {key}", key=key) from None
        return cls(**values)

    def model_config(self, vocab_size: int, **override) -> ModelConfig:
        kw = dict(vocab_size=vocab_size, embed_dim=self.embed_dim, lstm_units=self.lstm_units,
                  dropout_rate=self.dropout_rate, seq_len=self.seq_len)
        kw.update(override)
        return ModelConfig(**kw)

    def train_config(self, model: ModelConfig, seed: int, **override) -> TrainConfig:
        kw = dict(model=model, epochs=self.epochs, batch_size=self.batch_size,
                  split_fraction=self.split_fraction, seed=seed, learning_rate=self.learning_rate)
        kw.update(override)
        return TrainConfig(**kw)

    def search_space(self) -> SearchSpace:
        return SearchSpace(self.lr_low, self.lr_high, self.units_low, self.units_high,
                           self.dropout_low, self.dropout_high)

    def synth_params(self) -> SynthParams:
        return SynthParams(n_reviews=self.corpus_size, lexicon_size=self.lexicon_size,
                           n_neutral=self.n_neutral, noise=self.noise, scale=self.label_scale)


def read_config(path: str | None, overrides: list[str]) -> RunConfig:
    pairs: dict[str, str] = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise CliError("missing_path", f"config file not found: {p}", path=str(p))
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        parser.optionxform = str
        parser.read_string("[run]\n" + p.read_text(encoding="utf-8"), source=str(p))
        pairs.update(parser["run"])
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError("config", f"--set expects key=value, got {item!r}")
        pairs[key.strip()] = value
    return RunConfig.from_pairs(pairs)


class Run:
    """Resolved inputs and output locations for one invocation."""

    def __init__(self, cfg: RunConfig, out: Path, seed: int):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        out.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.out / OUT_NAMES[key]

    def _input(self, value: str, default_name: str, what: str, required: bool = True) -> Path | None:
        p = Path(value) if value else self.out / default_name
        if not p.is_file():
            if required or value:
                raise CliError("missing_path", f"{what} not found: {p}", path=str(p))
            return None
        return p

    def dataset_path(self) -> Path:
        return self._input(self.cfg.dataset, "corpus.jsonl", "dataset")

    def preprocessor(self) -> Preprocessor:
        d = self._input(self.cfg.dictionary, "dictionary.txt", "dictionary", required=False)
        s = self._input(self.cfg.stopwords, "stopwords.txt", "stop-word list", required=False)
        return Preprocessor.from_files(d, s)

    def data(self) -> Prepared:
        return load_prepared(self.dataset_path(), self.preprocessor(), self.cfg.format or None)

    def vocab(self, data: Prepared | None = None) -> Vocabulary:
        p = self.path("vocab")
        if p.is_file():
            return Vocabulary.load(p)
        vocab = vocab_for(data if data is not None else self.data(), self.cfg.max_vocab or None,
                          self.cfg.vocab_coverage)
        vocab.save(p)
        log.info("built vocabulary of %d ids -> %s", len(vocab), p)
        return vocab

    def split(self, data: Prepared) -> tuple[Prepared, Prepared]:
        return split_prepared(data, self.cfg.split_fraction, self.seed)

    def plot(self, fn_name: str, *args) -> None:
        if not self.cfg.plots:
            return
        from . import plots
        path = getattr(plots, fn_name)(*args)
        log.info("figure -> %s", path)


# -- subcommands ------------------------------------------------------------------

def cmd_synth(run: Run) -> None:
    corpus = generate_synthetic_corpus(run.cfg.synth_params(), run.seed)
    paths = write_corpus(run.out, corpus)
    print(f"synth: {len(corpus.reviews)} reviews -> {paths['dataset']}")


def cmd_clean(run: Run) -> None:
    data = run.data()
    write_dataset(run.path("clean"), data.reviews, "jsonl")
    print(f"clean: {len(data)} reviews -> {run.path('clean')}")


def cmd_vocab(run: Run) -> None:
    data = run.data()
    vocab = vocab_for(data, run.cfg.max_vocab or None, run.cfg.vocab_coverage)
    vocab.save(run.path("vocab"))
    counts = sorted((c for c in _token_counts(data).values()), reverse=True)
    cov = coverage_values(counts)
    with open(run.path("coverage"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "coverage"])
        for k, c in enumerate(cov, start=1):
            w.writerow([k, repr(float(c))])
    run.plot("coverage_figure", run.out / "coverage.png", cov)
    print(f"vocab: {len(vocab) - 2} content tokens of {len(counts)} "
          f"(coverage {run.cfg.vocab_coverage}) -> {run.path('vocab')}")


def _token_counts(data: Prepared):
    from .textprep import count_tokens
    return count_tokens(data.tokens)


def cmd_train(run: Run) -> None:
    data = run.data()
    vocab = run.vocab(data)
    tr, va = run.split(data)
    mc = run.cfg.model_config(len(vocab))
    tc = run.cfg.train_config(mc, run.seed)
    params, history = train(tr.encode(vocab, mc.seq_len), va.encode(vocab, mc.seq_len), tc,
                            history_path=run.path("history"))
    ckpt = Checkpoint(mc, params, run.seed, tc.digest(), vocab.digest(),
                      {"split_fraction": tc.split_fraction, "learning_rate": tc.learning_rate,
                       "epochs": tc.epochs, "batch_size": tc.batch_size})
    save_checkpoint(run.path("checkpoint"), ckpt)
    run.plot("history_figure", run.out / "history.png", history)
    last = history[-1]
    print(f"train: {tc.epochs} epochs, final train_mae {last.train_mae:.4f} val_mae {last.val_mae:.4f} "
          f"-> {run.path('checkpoint')}")


def cmd_tune(run: Run) -> None:
    data = run.data()
    vocab = run.vocab(data)
    tr, va = run.split(data)
    tr_set, va_set = tr.encode(vocab, run.cfg.seq_len), va.encode(vocab, run.cfg.seq_len)

    def objective(hc) -> float:
        mc = run.cfg.model_config(len(vocab), lstm_units=hc.lstm_units, dropout_rate=hc.dropout_rate)
        tc = run.cfg.train_config(mc, run.seed, epochs=run.cfg.tune_epochs, learning_rate=hc.learning_rate)
        try:
            _, history = train(tr_set, va_set, tc)
        except (FloatingPointError, RuntimeError) as exc:
            log.warning("trial diverged: %s", exc)
            return float("nan")
        log.info("trial %s -> val_mae %.5f", hc, history[-1].val_mae)
        return history[-1].val_mae

    res = tune_space(objective, run.cfg.search_space(), run.cfg.n_random, run.cfg.n_bayes, run.seed,
                     run.path("trials"))
    best = res.best.config
    with open(run.path("best"), "w", encoding="utf-8") as fh:
        fh.write(f"# best of {len(res.trials)} trials (trial {res.best.index}, {res.best.phase})\n")
        fh.write(f"learning_rate = {best.learning_rate!r}\n")
        fh.write(f"lstm_units = {best.lstm_units}\n")
        fh.write(f"dropout_rate = {best.dropout_rate!r}\n")
        fh.write(f"# val_mae = {res.best.value!r}\n")
    rows = read_ledger(run.path("trials"))
    run.plot("trials_figure", run.out / "trials.png", [float(r["val_mae"]) for r in rows],
             [r["phase"] for r in rows])
    print(f"tune: best val_mae {res.best.value:.5f} at {best} -> {run.path('best')}")


def _load_model(run: Run, vocab: Vocabulary) -> Checkpoint:
    p = run.path("checkpoint")
    if not p.is_file():
        raise CliError("missing_path", f"checkpoint not found: {p} (run train first)", path=str(p))
    ckpt = load_checkpoint(p)
    if ckpt.model.vocab_size != len(vocab) or (ckpt.vocab_digest and ckpt.vocab_digest != vocab.digest()):
        raise CliError("mismatch", f"checkpoint was trained with a different vocabulary than {run.path('vocab')}")
    return ckpt


def _eval_sets(run: Run, ckpt: Checkpoint) -> tuple[Prepared, Prepared]:
    data = run.data()
    fraction = ckpt.extra.get("split_fraction", run.cfg.split_fraction)
    tr, va = split_prepared(data, fraction, ckpt.seed)
    if run.cfg.test_dataset:
        p = run._input(run.cfg.test_dataset, "", "test dataset")
        va = load_prepared(p, run.preprocessor(), run.cfg.format or None)
    return tr, va


def _baseline(run: Run, train_part: Prepared) -> NBModel:
    p = run.path("baseline")
    if p.is_file():
        return NBModel.load(p)
    model = train_baseline(train_part.tokens, train_part.ratings)
    model.save(p)
    return model


def _evaluate(run: Run):
    vocab = Vocabulary.load(run._input("", OUT_NAMES["vocab"], "vocabulary"))
    ckpt = _load_model(run, vocab)
    tr, held = _eval_sets(run, ckpt)
    raw = predict_raw(ckpt.params, ckpt.model, held.encode(vocab, ckpt.model.seq_len).ids)
    model_scores = np.array([score_from_output(r) for r in raw])
    nb = _baseline(run, tr)
    base_scores = np.array([score_tokens(t, nb) for t in held.tokens])
    truth = held.ratings
    reports = {"BiLSTM": compute_metrics(truth, model_scores),
               "baseline": compute_metrics(truth, base_scores)}
    return truth, model_scores, base_scores, reports


def cmd_evaluate(run: Run) -> None:
    truth, model_scores, base_scores, reports = _evaluate(run)
    run.path("metrics").write_text(reports["BiLSTM"].to_text(), encoding="utf-8")
    run.path("metrics_baseline").write_text(reports["baseline"].to_text(), encoding="utf-8")
    hists = {}
    for key, name, values in (("hist_model", "BiLSTM", model_scores), ("hist_baseline", "baseline", base_scores),
                              ("hist_truth", "actual", truth)):
        h = histogram(values, run.cfg.bins, (0.0, 5.0))
        write_histogram(run.path(key), h)
        hists[name] = h
    run.plot("histograms_figure", run.out / "histograms.png", hists)
    m, b = reports["BiLSTM"], reports["baseline"]
    print(f"evaluate: n={m.n} BiLSTM mae {m.mae:.4f} rmse {m.rmse:.4f} | baseline mae {b.mae:.4f} "
          f"rmse {b.rmse:.4f} -> {run.path('metrics')}")


def cmd_compare(run: Run) -> None:
    _, _, _, reports = _evaluate(run)
    rows = comparison_rows(reports)
    with open(run.path("compare"), "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    width = max(len(r[0]) for r in rows)
    for r in rows:
        print(f"{r[0]:<{width}}  " + "  ".join(f"{c:>10}" for c in r[1:]))


def cmd_baseline(run: Run) -> None:
    data = run.data()
    tr, _ = run.split(data)
    model = train_baseline(tr.tokens, tr.ratings)
    model.save(run.path("baseline"))
    print(f"baseline: {len(model.loglik_pos)} tokens -> {run.path('baseline')}")


def cmd_predict(run: Run, texts: list[str]) -> None:
    vocab = Vocabulary.load(run._input("", OUT_NAMES["vocab"], "vocabulary"))
    ckpt = _load_model(run, vocab)
    scores = predict(texts, ckpt.params, ckpt.model, vocab, run.preprocessor())
    with open(run.path("scores"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "score", "text"])
        for i, (s, t) in enumerate(zip(scores, texts)):
            w.writerow([i, "error:empty" if s is None else f"{s:.4f}", t])
    for s, t in zip(scores, texts):
        print(f"{'error:empty' if s is None else f'{s:.3f}'}\t{t}")


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentiscore", description="BiLSTM sentiment-intensity scoring.")
    parser.add_argument("--version", action="version", version=f"sentiscore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    helps = {
        "synth": "generate a planted-lexicon corpus",
        "clean": "clean and deduplicate the dataset",
        "vocab": "build the vocabulary and coverage curve",
        "train": "train the BiLSTM and write checkpoint + history",
        "tune": "random + Bayesian hyperparameter search",
        "evaluate": "metrics and score histograms for model, baseline and truth",
        "predict": "score texts with a trained checkpoint",
        "baseline": "train the naive-Bayes baseline",
        "compare": "side-by-side metric table",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED})")
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "predict":
            g = p.add_mutually_exclusive_group(required=True)
            g.add_argument("--text", action="append", help="text to score (repeatable)")
            g.add_argument("--input", help="file with one text per line")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = read_config(args.config, args.set)
        run = Run(cfg, Path(args.out), args.seed)
        if args.command == "predict":
            if args.input:
                src = Path(args.input)
                if not src.is_file():
                    raise CliError("missing_path", f"input file not found: {src}", path=str(src))
                texts = [line.rstrip("\n") for line in src.read_text(encoding="utf-8").splitlines()]
            else:
                texts = args.text
            cmd_predict(run, texts)
        else:
            globals()[f"cmd_{args.command}"](run)
    except CliError as exc:
        _fail(exc.kind, str(exc), **exc.extra)
        return 1
    except FileNotFoundError as exc:
        _fail("missing_path", str(exc), path=exc.filename)
        return 1
    except (ValueError, RuntimeError, OSError) as exc:
        _fail(type(exc).__name__, str(exc))
        return 1
    return 0


def _fail(kind: str, message: str, **extra) -> None:
    rec = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(rec, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    sys.exit(main())

