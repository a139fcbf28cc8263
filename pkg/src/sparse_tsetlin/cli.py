"""Command-line interface.

Subcommands: prepare (corpus -> sparse file), train, eval, bench (epoch-time
vs. vocabulary-size sweeps), and inspect.  Every command is deterministic
given --seed with --threads 1, and all flags are echoed into the metrics
stream and the model header for provenance.

Exit codes: 0 success, 2 usage or validation error, 3 data error,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    SparseDataset,
    Vocabulary,
    build_vocabulary,
    load_sparse_file,
    ngrams,
    save_sparse_file,
    tokenize,
    vectorize,
)
from .engine import StmModel, TrainConfig, confusion_matrix, evaluate_accuracy
from .errors import ConfigError, DataFormatError, InvariantError, ModelFormatError
from .model_io import export_rules, load_model, model_memory_bound, model_memory_bytes, save_model

USAGE_ERROR = 2
DATA_ERROR = 3
INVARIANT_ERROR = 4


def _echo_flags(args: argparse.Namespace) -> dict:
    flags = {}
    for key, value in vars(args).items():
        if key == "func":
            continue
        flags[key] = str(value) if isinstance(value, Path) else value
    return flags


# -- corpus reading -----------------------------------------------------------


def _read_text_corpus(path: Path) -> tuple[list[str], list[int]]:
    """Lines of '<label><TAB><text>'; returns raw texts and labels."""
    docs: list[list[str]] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            label_str, sep, text = line.partition("\t")
            if not sep:
                raise DataFormatError(f"{path}:{lineno}: expected '<label>\\t<text>'")
            try:
                label = int(label_str)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: malformed label {label_str!r}") from None
            if label < 0:
                raise DataFormatError(f"{path}:{lineno}: label must be >= 0")
            labels.append(label)
            docs.append(text)
    if not docs:
        raise DataFormatError(f"{path}: empty corpus")
    return docs, labels


def _tokenize_corpus(texts: list[str], lowercase: bool, ngram: int) -> list[list[str]]:
    docs = []
    for text in texts:
        tokens = tokenize(text, lowercase=lowercase)
        if ngram > 1:
            expanded = []
            for size in range(1, ngram + 1):
                expanded.extend(ngrams(tokens, size))
            tokens = expanded
        docs.append(tokens)
    return docs


def _read_tabular(path: Path) -> tuple[list[np.ndarray], list[int], int]:
    """CSV with the label in the first column and pre-binarized 0/1 features
    after it.  A non-numeric first row is treated as a header and skipped."""
    rows: list[np.ndarray] = []
    labels: list[int] = []
    width = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if not record:
                continue
            if lineno == 1:
                try:
                    int(record[0])
                except ValueError:
                    continue  # header row
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DataFormatError(f"{path}:{lineno}: ragged row ({len(record)} vs {width})")
            try:
                label = int(record[0])
                values = [int(v) for v in record[1:]]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-integer cell") from None
            if label < 0:
                raise DataFormatError(f"{path}:{lineno}: label must be >= 0")
            if any(v not in (0, 1) for v in values):
                raise DataFormatError(
                    f"{path}:{lineno}: tabular features must arrive pre-binarized to 0/1"
                )
            labels.append(label)
            rows.append(np.flatnonzero(np.array(values, dtype=np.int8)).astype(np.int32))
    if not rows:
        raise DataFormatError(f"{path}: empty table")
    return rows, labels, width - 1


def _save_vocab_sidecar(vocab: Vocabulary, path: Path, lowercase: bool, ngram: int) -> None:
    payload = {
        "tokens": vocab.index_to_token,
        "max_size": vocab.max_size,
        "min_df": vocab.min_df,
        "lowercase": lowercase,
        "ngrams": ngram,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def _load_vocab_sidecar(path: Path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return Vocabulary(payload["tokens"], payload["max_size"], payload["min_df"])


# -- subcommands ---------------------------------------------------------------


def cmd_prepare(args: argparse.Namespace) -> int:
    if args.format == "text":
        texts, labels = _read_text_corpus(args.input)
        docs = _tokenize_corpus(texts, not args.no_lowercase, args.ngrams)
        vocab = build_vocabulary(docs, max_size=args.vocab_size, min_df=args.min_df)
        rows = [vectorize(doc, vocab) for doc in docs]
        feature_count = max(len(vocab), 1)
        vocab_out = args.vocab_out or args.output.with_suffix(args.output.suffix + ".vocab.json")
        _save_vocab_sidecar(vocab, vocab_out, not args.no_lowercase, args.ngrams)
    else:
        rows, labels, feature_count = _read_tabular(args.input)
    class_count = max(labels) + 1
    ds = SparseDataset(rows, labels, feature_count, class_count)
    save_sparse_file(ds, args.output)
    print(
        f"wrote {args.output}: {len(ds)} samples, o={ds.feature_count}, "
        f"m={ds.class_count}, density={ds.density():.5f}"
    )
    return 0


def _config_from_args(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        clause_count=args.clauses,
        al_capacity=args.al_size,
        lower_threshold=args.lower_threshold,
        max_clause_size=args.clause_size,
        state_count=args.state_count,
        margin=args.margin,
        specificity=args.specificity,
        al_mode=args.al_mode,
        negative_sampler=args.negative_sampler,
        insert_state=args.insert_state,
        k_intro=args.k_intro,
        epochs=args.epochs,
        seed=args.seed,
    )


class _MetricsWriter:
    """JSON-lines and CSV metrics, written side by side."""

    def __init__(self, jsonl_path: Path | None, csv_path: Path | None, flags: dict):
        self._jsonl = open(jsonl_path, "w", encoding="utf-8") if jsonl_path else None
        self._csv = open(csv_path, "w", encoding="utf-8", newline="") if csv_path else None
        self._csv_writer = None
        if self._jsonl:
            self._jsonl.write(json.dumps({"flags": flags}, sort_keys=True) + "\n")
        if self._csv:
            self._csv_writer = csv.writer(self._csv)
            self._csv_writer.writerow(
                ["epoch", "seconds", "train_acc", "test_acc", "mean_clause_size", "al_occupancy"]
            )

    def write(self, record: dict) -> None:
        if self._jsonl:
            self._jsonl.write(json.dumps(record, sort_keys=True) + "\n")
            self._jsonl.flush()
        if self._csv_writer:
            self._csv_writer.writerow(
                [
                    record["epoch"],
                    f"{record['seconds']:.6f}",
                    f"{record['train_acc']:.6f}",
                    f"{record['test_acc']:.6f}",
                    f"{record['mean_clause_size']:.4f}",
                    ";".join(str(x) for x in record["al_occupancy"]),
                ]
            )
            self._csv.flush()

    def close(self) -> None:
        if self._jsonl:
            self._jsonl.close()
        if self._csv:
            self._csv.close()


def cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)  # validates before any data is touched
    train_ds = load_sparse_file(args.train)
    test_ds = load_sparse_file(args.test) if args.test else None
    if test_ds is not None and (
        test_ds.feature_count != train_ds.feature_count
        or test_ds.class_count != train_ds.class_count
    ):
        raise DataFormatError("train and test files declare different shapes")
    vocab = _load_vocab_sidecar(args.vocab) if args.vocab else None
    if vocab is not None and len(vocab) != train_ds.feature_count:
        raise DataFormatError(
            f"vocabulary size {len(vocab)} does not match o={train_ds.feature_count}"
        )

    model = StmModel(config, train_ds.feature_count, train_ds.class_count, vocab)
    model.meta = {"command": "train", "flags": _echo_flags(args), "version": __version__}
    model.debug = args.debug
    rng = np.random.default_rng(config.seed)
    writer = _MetricsWriter(args.metrics_out, args.metrics_csv, _echo_flags(args))
    best_test = 0.0
    try:
        for epoch in range(1, config.epochs + 1):
            metrics = model.train_epoch(train_ds, rng, threads=args.threads)
            train_acc = evaluate_accuracy(model, train_ds)
            test_acc = evaluate_accuracy(model, test_ds) if test_ds is not None else train_acc
            best_test = max(best_test, test_acc)
            record = {
                "epoch": epoch,
                "seconds": metrics.seconds,
                "train_acc": train_acc,
                "test_acc": test_acc,
                "mean_clause_size": metrics.mean_clause_size,
                "al_occupancy": metrics.al_occupancy,
            }
            writer.write(record)
            if not args.quiet:
                print(
                    f"epoch {epoch:4d}  {metrics.seconds:8.3f}s  "
                    f"train {train_acc:.4f}  test {test_acc:.4f}  "
                    f"clause size {metrics.mean_clause_size:.2f}"
                )
    finally:
        writer.close()
    save_model(model, args.output)
    print(f"saved {args.output}; best test accuracy {best_test:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    ds = load_sparse_file(args.data)
    if ds.feature_count != model.feature_count or ds.class_count != model.class_count:
        raise DataFormatError(
            f"data shape (o={ds.feature_count}, m={ds.class_count}) does not match model "
            f"(o={model.feature_count}, m={model.class_count})"
        )
    accuracy = evaluate_accuracy(model, ds)
    counts = confusion_matrix(model, ds)
    print(f"accuracy {accuracy:.4f} on {len(ds)} samples")
    print("confusion (rows = true class, columns = predicted):")
    for true_cls in range(ds.class_count):
        print(f"  {true_cls}: " + " ".join(f"{int(c):7d}" for c in counts[true_cls]))
    return 0


def _parse_sweep(spec: str) -> list[int]:
    try:
        start, stop, step = (int(part) for part in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--vocab-sweep expects start:stop:step, got {spec!r}") from None
    if start < 1 or stop < start or step < 1:
        raise ConfigError(f"invalid sweep range {spec!r}")
    return list(range(start, stop + 1, step))


def cmd_bench(args: argparse.Namespace) -> int:
    sweep = _parse_sweep(args.vocab_sweep)
    texts, labels = _read_text_corpus(args.corpus)
    docs = _tokenize_corpus(texts, not args.no_lowercase, args.ngrams)
    class_count = max(labels) + 1

    split_rng = np.random.default_rng(args.seed)
    order = split_rng.permutation(len(docs))
    test_size = max(1, int(len(docs) * args.test_fraction))
    test_idx, train_idx = order[:test_size], order[test_size:]

    csv_fh = open(args.csv_out, "w", encoding="utf-8", newline="")
    csv_writer = csv.writer(csv_fh)
    csv_writer.writerow(["vocab_size", "epoch", "seconds", "test_accuracy"])
    cumulative: dict[int, float] = {}
    try:
        for vocab_size in sweep:
            vocab = build_vocabulary(
                [docs[i] for i in train_idx], max_size=vocab_size, min_df=args.min_df
            )
            feature_count = max(len(vocab), 1)
            train_ds = SparseDataset(
                [vectorize(docs[i], vocab) for i in train_idx],
                [labels[i] for i in train_idx],
                feature_count,
                class_count,
            )
            test_ds = SparseDataset(
                [vectorize(docs[i], vocab) for i in test_idx],
                [labels[i] for i in test_idx],
                feature_count,
                class_count,
            )
            config = _config_from_args(args)
            model = StmModel(config, feature_count, class_count)
            rng = np.random.default_rng(config.seed)
            total = 0.0
            for epoch in range(1, config.epochs + 1):
                metrics = model.train_epoch(train_ds, rng, threads=args.threads)
                accuracy = evaluate_accuracy(model, test_ds)
                total += metrics.seconds
                csv_writer.writerow(
                    [vocab_size, epoch, f"{metrics.seconds:.6f}", f"{accuracy:.6f}"]
                )
            csv_fh.flush()
            cumulative[vocab_size] = total
            if not args.quiet:
                print(f"V={vocab_size}: cumulative {total:.2f}s over {config.epochs} epochs")
    finally:
        csv_fh.close()
    low, high = sweep[0], sweep[-1]
    if high != low:
        increase = 100.0 * (cumulative[high] - cumulative[low]) / cumulative[low]
        print(
            f"cumulative training time increase from V={low} to V={high}: {increase:+.2f}%"
        )
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    did_anything = False
    if args.rules is not None:
        for rule in export_rules(model, args.rules):
            print(rule.format())
        did_anything = True
    if args.memory:
        cfg = model.config
        bound = model_memory_bound(
            cfg.clause_count, cfg.max_clause_size, model.class_count, cfg.al_capacity
        )
        print(f"memory bytes: {model_memory_bytes(model)} (bound {bound})")
        print(f"stored literals: {model.bank.stored_literal_count()}")
        did_anything = True
    if args.al_occupancy:
        for cls, count in enumerate(model.al.occupancy()):
            print(f"class {cls}: {int(count)}/{model.config.al_capacity}")
        did_anything = True
    if not did_anything:
        raise ConfigError("inspect needs at least one of --rules, --memory, --al-occupancy")
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stm",
        description="Sparse Tsetlin Machine: train and inspect conjunctive-clause "
        "classifiers on compressed sparse binary data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_hyperparameters(p: argparse.ArgumentParser) -> None:
        p.add_argument("--clauses", type=int, default=256, help="number of clauses")
        p.add_argument("--margin", type=int, default=None, help="voting margin (default 4*sqrt(clauses))")
        p.add_argument("--specificity", type=float, default=2.0, help="erosion rate is 1/specificity")
        p.add_argument("--al-size", type=int, default=100, help="active literal record capacity per class")
        p.add_argument("--state-count", type=int, default=128, help="automaton states per action")
        p.add_argument("--lower-threshold", type=int, default=40, help="minimum allowed automaton state")
        p.add_argument("--clause-size", type=int, default=75, help="maximum stored literals per clause")
        p.add_argument("--al-mode", choices=["static", "dynamic"], default="dynamic")
        p.add_argument("--insert-state", type=int, default=None, help="state for introduced literals (default: state count)")
        p.add_argument("--k-intro", type=int, default=1, help="literals introduced per discrimination event")
        p.add_argument("--negative-sampler", choices=["uniform", "focused"], default="focused")
        p.add_argument("--epochs", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1, help=">1 is parallel and non-deterministic")
        p.add_argument("--quiet", action="store_true")

    prepare = sub.add_parser("prepare", help="convert a corpus or table to the sparse format")
    prepare.add_argument("input", type=Path)
    prepare.add_argument("-o", "--output", type=Path, required=True)
    prepare.add_argument("--format", choices=["text", "tabular"], default="text")
    prepare.add_argument("--vocab-size", type=int, default=2500)
    prepare.add_argument("--min-df", type=int, default=1)
    prepare.add_argument("--ngrams", type=int, default=1, help="also emit n-grams up to this size")
    prepare.add_argument("--no-lowercase", action="store_true")
    prepare.add_argument("--vocab-out", type=Path, default=None)
    prepare.set_defaults(func=cmd_prepare)

    train = sub.add_parser("train", help="train a model on sparse files")
    train.add_argument("train", type=Path)
    train.add_argument("test", type=Path, nargs="?", default=None)
    train.add_argument("-o", "--output", type=Path, required=True)
    train.add_argument("--vocab", type=Path, default=None, help="vocabulary sidecar to embed")
    train.add_argument("--metrics-out", type=Path, default=None, help="JSON-lines metrics stream")
    train.add_argument("--metrics-csv", type=Path, default=None)
    train.add_argument("--debug", action="store_true", help="check invariants every epoch")
    add_hyperparameters(train)
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="accuracy and confusion matrix of a saved model")
    evaluate.add_argument("model", type=Path)
    evaluate.add_argument("data", type=Path)
    evaluate.set_defaults(func=cmd_eval)

    bench = sub.add_parser("bench", help="epoch time and accuracy across a vocabulary sweep")
    bench.add_argument("corpus", type=Path)
    bench.add_argument("--vocab-sweep", default="2500:10000:500", help="start:stop:step inclusive")
    bench.add_argument("--min-df", type=int, default=1)
    bench.add_argument("--ngrams", type=int, default=1)
    bench.add_argument("--no-lowercase", action="store_true")
    bench.add_argument("--test-fraction", type=float, default=0.2)
    bench.add_argument("--csv-out", type=Path, required=True)
    add_hyperparameters(bench)
    bench.set_defaults(func=cmd_bench)

    inspect = sub.add_parser("inspect", help="rules, memory accounting, record occupancy")
    inspect.add_argument("model", type=Path)
    inspect.add_argument("--rules", type=int, default=None, metavar="TOP_K")
    inspect.add_argument("--memory", action="store_true")
    inspect.add_argument("--al-occupancy", action="store_true")
    inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (DataFormatError, ModelFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except InvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return INVARIANT_ERROR


if __name__ == "__main__":
    sys.exit(main())
