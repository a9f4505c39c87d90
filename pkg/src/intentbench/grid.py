"""Benchmark grid runner: {classifier} x {encoder} macro-F1 matrices over a
single stratified split, plus a {recurrent kind} x {embedding source} matrix,
with per-cell derived seeds, per-cell failure isolation, and a manifest that
reruns the grid bit-identically."""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .classifiers import (
    TrainConfig,
    train_cosine_1nn,
    train_decision_tree,
    train_ffnn,
    train_kernel_svm,
    train_knn,
    train_linear_svm,
    train_logreg,
    train_random_forest,
)
from .data import LabeledDataset, generate_codemix, load_dataset, stratified_split
from .encoders import (
    CountEncoder,
    EmbeddingAvgEncoder,
    LsaEncoder,
    SentenceLookupEncoder,
    TfidfEncoder,
    WordAvgEncoder,
    read_sentence_vectors,
    read_word_embeddings,
    train_skipgram,
)
from .errors import ArgumentError, DataError, IntentBenchError
from .evaluation import macro_f1
from .numerics import derive_seed, stack_vectors
from .recurrent import SequenceConfig, train_sequence_model

logger = logging.getLogger(__name__)

ENCODER_KINDS = ("count", "tfidf", "lsa", "sgns-avg", "sgns-idfavg",
                 "external-word", "external-sentence")
CLASSIFIER_KINDS = ("linear-svm", "kernel-svm", "logreg", "knn",
                    "random-forest", "decision-tree", "ffnn", "cosine-1nn")
RECURRENT_KINDS = ("rnn", "gru", "lstm")
EMBEDDING_SOURCE_KINDS = ("sgns", "external")

_TRAINERS = {
    "linear-svm": train_linear_svm,
    "kernel-svm": train_kernel_svm,
    "logreg": train_logreg,
    "knn": train_knn,
    "random-forest": train_random_forest,
    "decision-tree": train_decision_tree,
    "ffnn": train_ffnn,
    "cosine-1nn": train_cosine_1nn,
}

_TRAIN_ALIASES = {
    "k": "k_neighbors", "trees": "n_trees", "depth": "max_depth",
    "lambda": "lam", "c": "svm_c", "h1": "hidden1", "h2": "hidden2",
    "batch": "batch_size",
}
_SEQ_ALIASES = {"batch": "batch_size", "truncate": "max_tokens"}
_SGNS_OPTION_NAMES = ("dim", "window", "negatives", "epochs", "lr", "min_df")


def parse_spec_string(text: str):
    """Parse '<kind> key=value key=value ...' into (kind, options); values
    coerce to int, then float, then str."""
    parts = text.split()
    if not parts:
        raise ArgumentError("empty spec string")
    kind = parts[0]
    options: dict = {}
    for item in parts[1:]:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ArgumentError(f"expected key=value, got {item!r} in spec {text!r}")
        value: object
        try:
            value = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        options[key] = value
    return kind, options


def format_spec_string(kind: str, options: dict) -> str:
    if not options:
        return kind
    return kind + " " + " ".join(f"{k}={v}" for k, v in options.items())


@dataclass(frozen=True)
class CellSpec:
    """One grid row or column: a display name plus a build recipe."""

    name: str
    kind: str
    options: dict = field(default_factory=dict)

    def spec_string(self) -> str:
        return format_spec_string(self.kind, self.options)


@dataclass
class GridSpec:
    """Everything needed to rerun a grid byte-identically."""

    seed: int
    dataset: str                       # a TSV path or 'codemix:seed=S,per-intent=N'
    encoders: list[CellSpec]
    classifiers: list[CellSpec]
    recurrent: list[CellSpec] = field(default_factory=list)
    recurrent_embeddings: list[CellSpec] = field(default_factory=list)
    test_fraction: float = 1.0 / 11.0  # the corpus's 10:1 train:test split
    jobs: int = 1

    def __post_init__(self):
        if not self.encoders or not self.classifiers:
            raise ArgumentError("grid needs at least one encoder and one classifier")
        if bool(self.recurrent) != bool(self.recurrent_embeddings):
            raise ArgumentError(
                "recurrent rows and recurrent embedding columns must be given together"
            )
        for spec, allowed in ((self.encoders, ENCODER_KINDS),
                              (self.classifiers, CLASSIFIER_KINDS),
                              (self.recurrent, RECURRENT_KINDS),
                              (self.recurrent_embeddings, EMBEDDING_SOURCE_KINDS)):
            for cell in spec:
                if cell.kind not in allowed:
                    raise ArgumentError(f"unknown kind {cell.kind!r} (allowed: {allowed})")


@dataclass
class GridResult:
    """Macro-F1 x 100 (2 decimals) per cell; failed cells carry an error
    string instead and never abort the surrounding grid."""

    classifier_names: list[str]
    encoder_names: list[str]
    scores: list[list[float | None]]
    errors: dict[tuple[int, int], str]
    times: dict[tuple[int, int], float]
    recurrent_names: list[str]
    recurrent_embedding_names: list[str]
    recurrent_scores: list[list[float | None]]
    recurrent_errors: dict[tuple[int, int], str]
    recurrent_times: dict[tuple[int, int], float]
    dataset_digest: str
    train_digest: str
    test_digest: str
    manifest: str = ""

    def best_fixed(self) -> float:
        return max(v for row in self.scores for v in row if v is not None)

    def best_recurrent(self) -> float:
        return max(v for row in self.recurrent_scores for v in row if v is not None)


def _digest(ds: LabeledDataset) -> str:
    return "sha256:" + hashlib.sha256(ds.to_tsv().encode("utf-8")).hexdigest()


def _assert_split(ds: LabeledDataset, expected: str, which: str) -> None:
    if _digest(ds) != expected:
        raise DataError(f"{which} split digest mismatch: training saw altered data")


def parse_dataset_spec(text: str) -> tuple[str, dict]:
    """'codemix:seed=1,per-intent=200' -> ('codemix', options); anything else
    is a TSV path."""
    if text.startswith("codemix:"):
        options = {}
        for item in text[len("codemix:"):].split(","):
            key, sep, raw = item.partition("=")
            if not sep:
                raise ArgumentError(f"expected key=value in dataset spec, got {item!r}")
            options[key] = int(raw)
        unknown = set(options) - {"seed", "per-intent"}
        if unknown:
            raise ArgumentError(f"unknown dataset option(s): {sorted(unknown)}")
        if "seed" not in options or "per-intent" not in options:
            raise ArgumentError("codemix dataset spec needs seed= and per-intent=")
        return "codemix", options
    return "path", {"path": text}


def load_grid_dataset(spec_text: str) -> LabeledDataset:
    kind, options = parse_dataset_spec(spec_text)
    if kind == "codemix":
        return generate_codemix(options["seed"], options["per-intent"])
    return load_dataset(options["path"])


def _mapped_options(options: dict, aliases: dict, cls, context: str) -> dict:
    out = {}
    valid = set(cls.__dataclass_fields__)
    for key, value in options.items():
        name = aliases.get(key, key)
        if name not in valid:
            raise ArgumentError(f"unknown option {key!r} for {context}")
        out[name] = value
    return out


def _build_encoder(cell: CellSpec, train_ds: LabeledDataset, master_seed: int,
                   sgns_tables: dict):
    kind, opts = cell.kind, dict(cell.options)
    if kind == "count":
        enc = CountEncoder(min_df=opts.pop("min_df", 1))
    elif kind == "tfidf":
        enc = TfidfEncoder(min_df=opts.pop("min_df", 1))
    elif kind == "lsa":
        enc = LsaEncoder(source=opts.pop("source", "count"), k=opts.pop("k", 100),
                         min_df=opts.pop("min_df", 1))
    elif kind in ("sgns-avg", "sgns-idfavg"):
        table = _sgns_table(opts, train_ds, master_seed, sgns_tables, consume=True)
        enc = EmbeddingAvgEncoder(
            table=table, weighting="idf" if kind == "sgns-idfavg" else "uniform"
        )
    elif kind == "external-word":
        path = opts.pop("path", None)
        if path is None:
            raise ArgumentError(f"encoder {cell.name!r}: external-word needs path=")
        enc = WordAvgEncoder(read_word_embeddings(path))
    elif kind == "external-sentence":
        path = opts.pop("path", None)
        if path is None:
            raise ArgumentError(f"encoder {cell.name!r}: external-sentence needs path=")
        enc = SentenceLookupEncoder(read_sentence_vectors(path))
    else:
        raise ArgumentError(f"unknown encoder kind {kind!r}")
    if opts:
        raise ArgumentError(f"unknown option(s) {sorted(opts)} for encoder {cell.name!r}")
    return enc.fit(train_ds)


def _sgns_table(opts: dict, train_ds: LabeledDataset, master_seed: int,
                cache: dict, consume: bool):
    """Embedding tables are trained once per hyperparameter set and shared by
    every column and recurrent cell that references them."""
    params = {}
    for name in _SGNS_OPTION_NAMES:
        if name in opts:
            params[name] = opts.pop(name) if consume else opts[name]
    key = tuple(sorted(params.items()))
    if key not in cache:
        dim = params.get("dim", 25)
        cache[key] = train_skipgram(
            train_ds, seed=derive_seed(master_seed, "sgns", *key), **params
        )
        logger.info("trained skip-gram table dim=%d over %d tokens", dim,
                    len(cache[key].vocabulary))
    return cache[key]


def _encode_matrix(encoder, ds: LabeledDataset) -> np.ndarray:
    return stack_vectors([encoder.encode(u) for u, _ in ds.records], dim=encoder.dim)


def _run_fixed_cell(task):
    """One classifier x encoder cell; returns (row, col, score, error, secs)."""
    (row, col, kind, options, x_train, y_train, x_test, y_test, labels, seed) = task
    started = time.perf_counter()
    try:
        cfg = TrainConfig(**_mapped_options(options, _TRAIN_ALIASES, TrainConfig,
                                            f"classifier {kind}"))
        clf = _TRAINERS[kind](x_train, y_train, cfg, seed=seed)
        preds = clf.predict_many(x_test)
        score = round(macro_f1(preds, y_test, labels) * 100.0, 2)
        return row, col, score, None, time.perf_counter() - started
    except IntentBenchError as exc:
        return row, col, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - started


def _resolve_recurrent_table(cell: CellSpec, train_ds, master_seed, sgns_tables):
    opts = dict(cell.options)
    if cell.kind == "sgns":
        table = _sgns_table(opts, train_ds, master_seed, sgns_tables, consume=True)
    else:
        path = opts.pop("path", None)
        if path is None:
            raise ArgumentError(f"embedding source {cell.name!r}: external needs path=")
        table = read_word_embeddings(path)
    if opts:
        raise ArgumentError(
            f"unknown option(s) {sorted(opts)} for embedding source {cell.name!r}"
        )
    return table


def run_grid(spec: GridSpec, out_dir=None) -> GridResult:
    """Execute every cell of the grid.

    Per cell: the column's encoder is fitted on the training split only
    (seeded per column), both splits are encoded once, the row's classifier
    trains under seed mix(master, row, col), and macro-F1 is measured on the
    test split. A failing cell records its error and leaves the rest of the
    grid untouched. Writes TSV/table/manifest outputs when out_dir is given.
    """
    ds = load_grid_dataset(spec.dataset)
    dataset_digest = _digest(ds)
    train_ds, test_ds = stratified_split(ds, spec.test_fraction,
                                         seed=derive_seed(spec.seed, "split"))
    if len(test_ds) == 0:
        raise ArgumentError("test split is empty; raise test_fraction")
    train_digest = _digest(train_ds)
    test_digest = _digest(test_ds)
    labels = ds.labels
    y_train = train_ds.label_column()
    y_test = test_ds.label_column()

    sgns_tables: dict = {}
    columns = []
    for col, enc_spec in enumerate(spec.encoders):
        _assert_split(train_ds, train_digest, "train")
        encoder = _build_encoder(enc_spec, train_ds, spec.seed, sgns_tables)
        x_train = _encode_matrix(encoder, train_ds)
        x_test = _encode_matrix(encoder, test_ds)
        columns.append((x_train, x_test))
        logger.info("encoded column %s (dim=%d)", enc_spec.name, encoder.dim)

    tasks = []
    for row, clf_spec in enumerate(spec.classifiers):
        for col in range(len(spec.encoders)):
            x_train, x_test = columns[col]
            tasks.append((
                row, col, clf_spec.kind, clf_spec.options, x_train, y_train,
                x_test, y_test, labels, derive_seed(spec.seed, row, col),
            ))

    n_rows, n_cols = len(spec.classifiers), len(spec.encoders)
    scores: list[list[float | None]] = [[None] * n_cols for _ in range(n_rows)]
    errors: dict[tuple[int, int], str] = {}
    times: dict[tuple[int, int], float] = {}

    _assert_split(train_ds, train_digest, "train")
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            outcomes = list(pool.map(_run_fixed_cell, tasks))
    else:
        outcomes = [_run_fixed_cell(t) for t in tasks]
    for row, col, score, error, secs in outcomes:
        times[(row, col)] = secs
        if error is None:
            scores[row][col] = score
        else:
            errors[(row, col)] = error
            logger.warning("cell %s x %s failed: %s", spec.classifiers[row].name,
                           spec.encoders[col].name, error)

    r_names = [c.name for c in spec.recurrent]
    re_names = [c.name for c in spec.recurrent_embeddings]
    r_scores: list[list[float | None]] = [[None] * len(re_names) for _ in r_names]
    r_errors: dict[tuple[int, int], str] = {}
    r_times: dict[tuple[int, int], float] = {}
    test_utts = [u for u, _ in test_ds.records]
    for col, emb_spec in enumerate(spec.recurrent_embeddings):
        table = _resolve_recurrent_table(emb_spec, train_ds, spec.seed, sgns_tables)
        for row, model_spec in enumerate(spec.recurrent):
            started = time.perf_counter()
            try:
                cfg = SequenceConfig(**_mapped_options(
                    model_spec.options, _SEQ_ALIASES, SequenceConfig,
                    f"recurrent {model_spec.kind}",
                ))
                _assert_split(train_ds, train_digest, "train")
                model, _ = train_sequence_model(
                    model_spec.kind, train_ds, table, cfg,
                    seed=derive_seed(spec.seed, "recurrent", row, col),
                )
                preds = model.predict_many(test_utts)
                r_scores[row][col] = round(macro_f1(preds, y_test, labels) * 100.0, 2)
            except IntentBenchError as exc:
                r_errors[(row, col)] = f"{type(exc).__name__}: {exc}"
                logger.warning("recurrent cell %s x %s failed: %s",
                               model_spec.name, emb_spec.name, exc)
            r_times[(row, col)] = time.perf_counter() - started
            logger.info("recurrent cell %s x %s done in %.1fs",
                        model_spec.name, emb_spec.name, r_times[(row, col)])

    result = GridResult(
        classifier_names=[c.name for c in spec.classifiers],
        encoder_names=[c.name for c in spec.encoders],
        scores=scores, errors=errors, times=times,
        recurrent_names=r_names, recurrent_embedding_names=re_names,
        recurrent_scores=r_scores, recurrent_errors=r_errors, recurrent_times=r_times,
        dataset_digest=dataset_digest, train_digest=train_digest,
        test_digest=test_digest,
    )
    result.manifest = format_manifest(spec, result)
    if out_dir is not None:
        write_grid_outputs(result, out_dir)
    return result


# ---------------------------------------------------------------------------
# Output formats
# ---------------------------------------------------------------------------


def _cell_text(score, error) -> str:
    if score is not None:
        return f"{score:.2f}"
    return "FAILED"


def format_matrix_tsv(row_names, col_names, scores, errors) -> str:
    lines = ["classifier\t" + "\t".join(col_names)]
    for r, name in enumerate(row_names):
        cells = [_cell_text(scores[r][c], errors.get((r, c))) for c in range(len(col_names))]
        lines.append(name + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


def format_matrix_table(title, row_names, col_names, scores, errors) -> str:
    width = max([len(n) for n in row_names] + [10])
    col_widths = [max(len(n), 7) for n in col_names]
    lines = [title, "-" * len(title)]
    header = " " * width + "  " + "  ".join(
        f"{n:>{w}}" for n, w in zip(col_names, col_widths)
    )
    lines.append(header)
    for r, name in enumerate(row_names):
        cells = []
        for c, w in enumerate(col_widths):
            cells.append(f"{_cell_text(scores[r][c], errors.get((r, c))):>{w}}")
        lines.append(f"{name:<{width}}  " + "  ".join(cells))
    return "\n".join(lines) + "\n"


def format_manifest(spec: GridSpec, result: GridResult) -> str:
    lines = ["# intentbench grid manifest", "[grid]"]
    lines.append(f"seed = {spec.seed}")
    lines.append(f"dataset = {spec.dataset}")
    lines.append(f"test-fraction = {spec.test_fraction!r}")
    lines.append(f"jobs = {spec.jobs}")
    lines.append(f"dataset-digest = {result.dataset_digest}")
    lines.append(f"train-digest = {result.train_digest}")
    lines.append(f"test-digest = {result.test_digest}")
    lines.append("")
    for section, cells in (("encoders", spec.encoders),
                           ("classifiers", spec.classifiers),
                           ("recurrent", spec.recurrent),
                           ("recurrent-embeddings", spec.recurrent_embeddings)):
        if not cells and section in ("recurrent", "recurrent-embeddings"):
            continue
        lines.append(f"[{section}]")
        for cell in cells:
            lines.append(f"{cell.name} = {cell.spec_string()}")
        lines.append("")
    lines.append("[cells]")
    for r, rname in enumerate(result.classifier_names):
        for c, cname in enumerate(result.encoder_names):
            status = ("ok score=" + f"{result.scores[r][c]:.2f}"
                      if result.scores[r][c] is not None
                      else "failed error=" + result.errors[(r, c)].replace(" ", "_"))
            secs = result.times.get((r, c), 0.0)
            lines.append(f"fixed.{rname}.{cname} = {status} time={secs:.3f}s")
    for r, rname in enumerate(result.recurrent_names):
        for c, cname in enumerate(result.recurrent_embedding_names):
            score = result.recurrent_scores[r][c]
            status = (f"ok score={score:.2f}" if score is not None
                      else "failed error=" + result.recurrent_errors[(r, c)].replace(" ", "_"))
            secs = result.recurrent_times.get((r, c), 0.0)
            lines.append(f"recurrent.{rname}.{cname} = {status} time={secs:.3f}s")
    lines.append("")
    lines.append("[meta]")
    lines.append(f"tool = intentbench {__version__}")
    return "\n".join(lines) + "\n"


def write_grid_outputs(result: GridResult, out_dir) -> None:
    """results.tsv, recurrent.tsv, tables.txt (all byte-stable across reruns)
    and manifest.txt (contains wall times)."""
    import os

    os.makedirs(out_dir, exist_ok=True)

    def spill(name, text):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    spill("results.tsv", format_matrix_tsv(
        result.classifier_names, result.encoder_names, result.scores, result.errors
    ))
    tables = format_matrix_table(
        "macro-F1 x 100 (fixed-vector classifiers)",
        result.classifier_names, result.encoder_names, result.scores, result.errors,
    )
    if result.recurrent_names:
        spill("recurrent.tsv", format_matrix_tsv(
            result.recurrent_names, result.recurrent_embedding_names,
            result.recurrent_scores, result.recurrent_errors,
        ))
        tables += "\n" + format_matrix_table(
            "macro-F1 x 100 (recurrent models)",
            result.recurrent_names, result.recurrent_embedding_names,
            result.recurrent_scores, result.recurrent_errors,
        )
    spill("tables.txt", tables)
    spill("manifest.txt", result.manifest)
