"""Command-line entry point: dataset generation, embedding training, single
model training/evaluation/prediction, and full grid runs.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 training or
convergence error. Every error prints one diagnostic line to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .classifiers import MODEL_KINDS, TrainConfig
from .data import generate_codemix, load_dataset, save_dataset, stratified_split
from .encoders import (
    encoder_from_state,
    encoder_to_state,
    train_skipgram,
    write_word_embeddings,
)
from .errors import (
    ArgumentError,
    ConvergenceError,
    DataError,
    DimensionError,
    IntentBenchError,
    NumericError,
    ParseError,
    TrainingError,
)
from .evaluation import evaluate
from .grid import (
    CellSpec,
    GridSpec,
    _build_encoder,
    _mapped_options,
    _resolve_recurrent_table,
    _SEQ_ALIASES,
    _TRAIN_ALIASES,
    _TRAINERS,
    RECURRENT_KINDS,
    parse_spec_string,
    run_grid,
)
from .numerics import stack_vectors
from .recurrent import SequenceConfig, SequenceModel, train_sequence_model

logger = logging.getLogger(__name__)

_BUNDLE_FORMAT = "intentbench-bundle"

_GRID_SECTIONS = ("grid", "encoders", "classifiers", "recurrent", "recurrent-embeddings")
_IGNORED_SECTIONS = ("cells", "meta")
_GRID_KEYS = ("seed", "dataset", "test-fraction", "jobs",
              "dataset-digest", "train-digest", "test-digest")


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_grid_spec(path) -> GridSpec:
    """Read a grid configuration (or a previously emitted manifest, whose
    [cells]/[meta] sections are ignored) into a GridSpec."""
    grid_keys: dict[str, str] = {}
    sections: dict[str, list[tuple[str, str]]] = {
        "encoders": [], "classifiers": [], "recurrent": [], "recurrent-embeddings": [],
    }
    current: str | None = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read grid spec: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip()
                if name not in _GRID_SECTIONS and name not in _IGNORED_SECTIONS:
                    raise ParseError(f"unknown section [{name}]", line=lineno)
                current = name
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep or not key:
                raise ParseError("expected 'key = value'", line=lineno)
            if current in _IGNORED_SECTIONS:
                continue
            if current is None or current == "grid":
                if key not in _GRID_KEYS:
                    raise ParseError(f"unknown key {key!r} in [grid]", line=lineno)
                grid_keys[key] = value
            else:
                sections[current].append((key, value))
    if "seed" not in grid_keys:
        raise ParseError(f"seed required in [grid] section of {path}")
    if "dataset" not in grid_keys:
        raise ParseError(f"dataset required in [grid] section of {path}")

    def cells(section):
        out = []
        for name, spec_text in sections[section]:
            kind, options = parse_spec_string(spec_text)
            out.append(CellSpec(name, kind, options))
        return out

    try:
        spec = GridSpec(
            seed=int(grid_keys["seed"]),
            dataset=grid_keys["dataset"],
            encoders=cells("encoders"),
            classifiers=cells("classifiers"),
            recurrent=cells("recurrent"),
            recurrent_embeddings=cells("recurrent-embeddings"),
            test_fraction=float(grid_keys.get("test-fraction", 1.0 / 11.0)),
            jobs=int(grid_keys.get("jobs", 1)),
        )
    except ValueError as exc:
        raise ParseError(f"bad value in grid spec: {exc}") from exc
    return spec


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_gen_data(args) -> int:
    ds = generate_codemix(args.seed, args.per_intent)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} records to {args.out}", file=sys.stderr)
    return 0


def _cmd_embed(args) -> int:
    ds = load_dataset(args.data)
    table = train_skipgram(
        ds, dim=args.dim, window=args.window, negatives=args.negatives,
        epochs=args.epochs, lr=args.lr, seed=args.seed, min_df=args.min_df,
    )
    write_word_embeddings(table, args.out)
    print(f"wrote {len(table.vocabulary)} x {table.dim} embeddings to {args.out}",
          file=sys.stderr)
    return 0


def _split_for_training(args):
    ds = load_dataset(args.data)
    if args.test_fraction > 0:
        return stratified_split(ds, args.test_fraction, args.seed)
    return ds, None


def _cmd_train(args) -> int:
    train_ds, test_ds = _split_for_training(args)
    model_kind, model_opts = parse_spec_string(args.model)
    if model_kind in RECURRENT_KINDS:
        emb_kind, emb_opts = parse_spec_string(args.encoder)
        table = _resolve_recurrent_table(
            CellSpec("embedding", emb_kind, emb_opts), train_ds, args.seed, {}
        )
        cfg = SequenceConfig(**_mapped_options(model_opts, _SEQ_ALIASES, SequenceConfig,
                                               f"recurrent {model_kind}"))
        model, history = train_sequence_model(model_kind, train_ds, table, cfg,
                                              seed=args.seed)
        bundle = {
            "format": _BUNDLE_FORMAT, "version": 1, "type": "sequence",
            "model": {"kind": model_kind, "state": model.to_state()},
        }
        print(f"trained {model_kind} for {len(history.val_scores)} epochs "
              f"(best {history.best_epoch + 1})", file=sys.stderr)
    else:
        if model_kind not in MODEL_KINDS:
            raise ArgumentError(f"unknown model kind {model_kind!r}")
        enc_kind, enc_opts = parse_spec_string(args.encoder)
        encoder = _build_encoder(CellSpec("encoder", enc_kind, enc_opts),
                                 train_ds, args.seed, {})
        x_train = stack_vectors([encoder.encode(u) for u, _ in train_ds.records],
                                dim=encoder.dim)
        cfg = TrainConfig(**_mapped_options(model_opts, _TRAIN_ALIASES, TrainConfig,
                                            f"classifier {model_kind}"))
        clf = _TRAINERS[model_kind](x_train, train_ds.label_column(), cfg, seed=args.seed)
        model = clf
        bundle = {
            "format": _BUNDLE_FORMAT, "version": 1, "type": "fixed",
            "encoder": encoder_to_state(encoder),
            "model": {"kind": model_kind, "state": clf.to_state()},
        }
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(bundle, fh)
        fh.write("\n")
    print(f"saved model bundle to {args.out}", file=sys.stderr)
    if test_ds is not None and len(test_ds):
        report = _evaluate_bundle_on(bundle, test_ds)
        print(report.format_text())
    return 0


def _load_bundle(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            bundle = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model bundle: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"model bundle is not valid JSON: {exc}") from exc
    if bundle.get("format") != _BUNDLE_FORMAT:
        raise DataError(f"not an {_BUNDLE_FORMAT} artifact: {path}")
    return bundle


def _bundle_predictor(bundle: dict):
    """Returns (predict_fn: Utterance -> label, label order)."""
    if bundle["type"] == "sequence":
        model = SequenceModel.from_state(bundle["model"]["state"])
        return model.predict, model.labels_
    encoder = encoder_from_state(bundle["encoder"])
    kind = bundle["model"]["kind"]
    clf = MODEL_KINDS[kind].from_state(bundle["model"]["state"])

    def predict(utterance):
        vec = encoder.encode(utterance)
        if hasattr(vec, "to_dense"):
            vec = vec.to_dense()
        return clf.predict(vec)

    return predict, clf.labels_


def _evaluate_bundle_on(bundle: dict, ds):
    predict, labels = _bundle_predictor(bundle)
    preds = [predict(u) for u, _ in ds.records]
    golds = ds.label_column()
    label_set = sorted(set(labels) | set(ds.labels))
    return evaluate(preds, golds, label_set)


def _cmd_predict(args) -> int:
    from .data import Utterance

    bundle = _load_bundle(args.model)
    predict, _ = _bundle_predictor(bundle)
    source = open(args.input, encoding="utf-8") if args.input else sys.stdin
    try:
        for raw in source:
            text = raw.rstrip("\n")
            if not text:
                continue
            print(f"{predict(Utterance(text))}\t{text}")
    finally:
        if args.input:
            source.close()
    return 0


def _cmd_eval(args) -> int:
    bundle = _load_bundle(args.model)
    ds = load_dataset(args.data)
    report = _evaluate_bundle_on(bundle, ds)
    print(report.format_text())
    return 0


def _cmd_grid(args) -> int:
    spec = parse_grid_spec(args.spec)
    if args.jobs is not None:
        spec.jobs = args.jobs
    result = run_grid(spec, out_dir=args.out)
    n_failed = len(result.errors) + len(result.recurrent_errors)
    print(f"grid complete: {len(result.classifier_names)}x{len(result.encoder_names)} "
          f"fixed cells"
          + (f" + {len(result.recurrent_names)}x{len(result.recurrent_embedding_names)}"
             f" recurrent cells" if result.recurrent_names else "")
          + (f", {n_failed} failed" if n_failed else "")
          + f"; outputs in {args.out}", file=sys.stderr)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="intentbench",
        description="Intent-detection toolkit and benchmark grid for code-mixed text.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"intentbench {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a synthetic code-mix dataset",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--seed", type=int, default=1, help="generator seed")
    p.add_argument("--per-intent", type=int, default=100, help="utterances per intent")
    p.add_argument("--out", required=True, help="output TSV path")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("embed", help="train skip-gram embeddings to a vector file",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--data", required=True, help="training TSV")
    p.add_argument("--dim", type=int, default=25, help="embedding dimension")
    p.add_argument("--window", type=int, default=5, help="maximum context window")
    p.add_argument("--negatives", type=int, default=5, help="negative samples per pair")
    p.add_argument("--epochs", type=int, default=15, help="training epochs")
    p.add_argument("--lr", type=float, default=0.025, help="initial learning rate")
    p.add_argument("--min-df", type=int, default=1, help="minimum document frequency")
    p.add_argument("--seed", type=int, default=1, help="training seed")
    p.add_argument("--out", required=True, help="output embedding file")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("train", help="fit one encoder + model and save a bundle",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--data", required=True, help="training TSV")
    p.add_argument("--encoder", default="count",
                   help="encoder spec, e.g. 'tfidf', 'lsa source=tfidf k=100', "
                        "'sgns-avg dim=25'; for recurrent models an embedding "
                        "source, e.g. 'sgns dim=25' or 'external path=f.txt'")
    p.add_argument("--model", default="linear-svm",
                   help="model spec, e.g. 'logreg', 'knn k=5', 'gru hidden=64'")
    p.add_argument("--test-fraction", type=float, default=0.0,
                   help="held-out fraction; when > 0 an evaluation is printed")
    p.add_argument("--seed", type=int, default=1, help="training seed")
    p.add_argument("--out", required=True, help="output model bundle path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="classify utterances from stdin or a file",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--model", required=True, help="model bundle path")
    p.add_argument("--input", default=None, help="input text file (default: stdin)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="evaluate a saved model on a labeled TSV",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--model", required=True, help="model bundle path")
    p.add_argument("--data", required=True, help="labeled TSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("grid", help="run a classifier x encoder benchmark grid",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--spec", required=True, help="grid configuration file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel cell workers (default: value from spec, or 1)")
    p.set_defaults(func=_cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING
    if args.verbose >= 2:
        level = logging.DEBUG
    elif args.verbose == 1 or args.command == "grid":
        level = logging.INFO  # grid emits one log line per cell by default
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except (ParseError, DataError) as exc:
        print(f"intentbench: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, ConvergenceError, NumericError) as exc:
        print(f"intentbench: {exc}", file=sys.stderr)
        return 3
    except (ArgumentError, DimensionError) as exc:
        print(f"intentbench: {exc}", file=sys.stderr)
        return 1
    except IntentBenchError as exc:  # any future category defaults to usage
        print(f"intentbench: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
