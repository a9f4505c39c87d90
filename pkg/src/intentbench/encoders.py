"""Utterance vectorizers: bag-of-words counts, smoothed tf-idf, latent topic
projection via truncated SVD, skip-gram negative-sampling embedding training,
embedding averaging (plain and idf-weighted), and a text file interface for
precomputed word- or sentence-level vectors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset, Utterance, Vocabulary, build_vocabulary
from .errors import ArgumentError, NumericError, ParseError
from .numerics import RngStream, SparseVector, truncated_svd


def count_encode(vocab: Vocabulary, u: Utterance) -> SparseVector:
    """Bag-of-words token counts over the vocabulary; OOV tokens ignored."""
    counts: dict[int, float] = {}
    for token in u.tokens:
        idx = vocab.get(token)
        if idx is not None:
            counts[idx] = counts.get(idx, 0.0) + 1.0
    return SparseVector.from_pairs(counts, len(vocab))


@dataclass(frozen=True)
class IdfTable:
    """Smoothed inverse document frequencies; strictly positive weights."""

    weights: dict[str, float]
    default: float

    def get(self, token: str) -> float:
        return self.weights.get(token, self.default)


def tfidf_fit(ds: LabeledDataset, min_df: int = 1) -> IdfTable:
    """idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the corpus; the default
    weight for unseen tokens uses df = 0."""
    vocab = build_vocabulary(ds, min_df)
    n = vocab.n_docs
    weights = {t: math.log((1.0 + n) / (1.0 + df)) + 1.0 for t, df in vocab.df.items()}
    return IdfTable(weights, default=math.log(1.0 + n) + 1.0)


def tfidf_encode(vocab: Vocabulary, idf: IdfTable, u: Utterance) -> SparseVector:
    """Term frequency times idf, scaled to unit L2 norm (zero stays zero)."""
    counts = count_encode(vocab, u)
    if counts.nnz == 0:
        return counts
    inv = {i: t for t, i in vocab.index.items()}
    values = counts.values * np.array([idf.get(inv[int(i)]) for i in counts.indices])
    norm = float(np.sqrt(values @ values))
    if norm > 0.0:
        values = values / norm
    return SparseVector(counts.indices, values, counts.dim)


# ---------------------------------------------------------------------------
# Latent topic projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LsaProjection:
    """Fold-in map from term space to topic space: x -> x @ matrix."""

    matrix: np.ndarray  # (n_terms, dim)
    singular_values: np.ndarray
    dim: int


def lsa_fit(X, k: int) -> LsaProjection:
    """Build the rank-k fold-in projection V_k diag(1/s_k) from the doc-term
    matrix; components with singular value below 1e-12 are dropped with a
    warning and shrink the output dimension."""
    _, s, V = truncated_svd(X, k)
    keep = s >= 1e-12
    if not np.all(keep):
        dropped = int(np.sum(~keep))
        warnings.warn(
            f"dropping {dropped} topic component(s) with singular value below 1e-12",
            stacklevel=2,
        )
    s_kept = s[keep]
    V_kept = V[:, keep]
    return LsaProjection(V_kept / s_kept, s_kept, int(s_kept.shape[0]))


def lsa_encode(proj: LsaProjection, v) -> np.ndarray:
    """Map a count or tf-idf vector into topic space."""
    if isinstance(v, SparseVector):
        if v.nnz == 0:
            return np.zeros(proj.dim)
        return proj.matrix[v.indices].T @ v.values
    return np.asarray(v, dtype=np.float64) @ proj.matrix


# ---------------------------------------------------------------------------
# Skip-gram with negative sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingTable:
    """Vocabulary-aligned token vector matrix."""

    vocabulary: dict[str, int]
    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ArgumentError("vectors must be a 2-D matrix")
        if self.vocabulary and max(self.vocabulary.values()) >= self.vectors.shape[0]:
            raise ArgumentError("vocabulary index beyond vector row count")
        if not np.all(np.isfinite(self.vectors)):
            raise NumericError("embedding vectors contain non-finite entries")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def lookup(self, token: str):
        idx = self.vocabulary.get(token)
        return None if idx is None else self.vectors[idx]


def train_skipgram(
    ds: LabeledDataset,
    dim: int = 25,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 15,
    lr: float = 0.025,
    seed: int = 0,
    min_df: int = 1,
) -> EmbeddingTable:
    """Train center-word embeddings with skip-gram negative sampling.

    Per (center, context) pair, the positive pair is pushed toward
    sigma(u.v) = 1 and ``negatives`` noise words (drawn proportional to
    unigram^0.75) toward 0, by sequential SGD on the center and context
    tables. The window per center position is drawn uniformly from
    1..window; the learning rate decays linearly over all epochs.
    Deterministic under seed; returns the center-vector table.
    """
    vocab = build_vocabulary(ds, min_df)
    docs = [
        [vocab.index[t] for t in u.tokens if t in vocab.index]
        for u, _ in ds.records
    ]
    docs = [d for d in docs if d]
    if not docs:
        raise ArgumentError("cannot train embeddings on an empty corpus")
    n_vocab = len(vocab)
    counts = np.zeros(n_vocab)
    for d in docs:
        np.add.at(counts, d, 1.0)
    noise = counts**0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    rng = RngStream(seed).derive("skipgram", dim)
    center_vecs = rng.uniform(n_vocab * dim, -0.5 / dim, 0.5 / dim).reshape(n_vocab, dim)
    context_vecs = np.zeros((n_vocab, dim))

    total_tokens = sum(len(d) for d in docs) * epochs
    processed = 0
    alpha = lr
    min_alpha = lr * 1e-4
    final_epoch_loss = 0.0

    for epoch in range(epochs):
        track_loss = epoch == epochs - 1
        for d in docs:
            n_tok = len(d)
            widths = rng.integers(n_tok, window) + 1
            centers: list[int] = []
            contexts: list[int] = []
            for i in range(n_tok):
                b = int(widths[i])
                for j in range(max(0, i - b), min(n_tok, i + b + 1)):
                    if j != i:
                        centers.append(d[i])
                        contexts.append(d[j])
            n_pairs = len(centers)
            if n_pairs == 0:
                processed += n_tok
                continue
            draws = rng.uniform(n_pairs * negatives)
            neg_table = np.searchsorted(noise_cdf, draws).reshape(n_pairs, negatives)
            for p in range(n_pairs):
                c, o = centers[p], contexts[p]
                rows = [o]
                for k in neg_table[p]:
                    if k != o:
                        rows.append(int(k))
                v = center_vecs[c]
                u_rows = context_vecs[rows]
                scores = u_rows @ v
                sig = 1.0 / (1.0 + np.exp(-np.clip(scores, -60.0, 60.0)))
                grad = -sig
                grad[0] += 1.0
                if track_loss:
                    final_epoch_loss += float(np.logaddexp(0.0, -scores[0]))
                    final_epoch_loss += float(np.sum(np.logaddexp(0.0, scores[1:])))
                step = alpha * grad
                dv = step @ u_rows
                context_vecs[rows] += step[:, None] * v
                center_vecs[c] += dv
            processed += n_tok
            alpha = max(min_alpha, lr * (1.0 - processed / total_tokens))
    if not math.isfinite(final_epoch_loss):
        raise NumericError("skip-gram training diverged: non-finite final-epoch loss")
    return EmbeddingTable(dict(vocab.index), center_vecs)


def avg_encode(u: Utterance, table: EmbeddingTable) -> np.ndarray:
    """Unweighted mean of the in-vocabulary token embeddings; zero if none."""
    rows = [table.vocabulary[t] for t in u.tokens if t in table.vocabulary]
    if not rows:
        return np.zeros(table.dim)
    return table.vectors[rows].mean(axis=0)


def idf_avg_encode(u: Utterance, table: EmbeddingTable, idf: IdfTable) -> np.ndarray:
    """Idf-weighted mean of the in-vocabulary token embeddings; zero if none."""
    rows = []
    weights = []
    for t in u.tokens:
        idx = table.vocabulary.get(t)
        if idx is not None:
            rows.append(idx)
            weights.append(idf.get(t))
    if not rows:
        return np.zeros(table.dim)
    w = np.asarray(weights)
    return (w @ table.vectors[rows]) / float(w.sum())


# ---------------------------------------------------------------------------
# Precomputed external vectors (word- or sentence-level files)
# ---------------------------------------------------------------------------


def normalize_sentence_key(text: str) -> str:
    """Lowercase and collapse internal whitespace to single spaces."""
    return " ".join(text.lower().split())


@dataclass
class SentenceVectorTable:
    """Fixed-dimension sentence vectors keyed by normalized text; unknown
    sentences resolve to the zero vector and are counted."""

    vectors: dict[str, np.ndarray]
    dim: int
    misses: int = 0

    def lookup(self, text: str) -> np.ndarray:
        key = normalize_sentence_key(text)
        hit = self.vectors.get(key)
        if hit is not None:
            return hit
        if self.misses == 0:
            warnings.warn(
                f"sentence not in vector table (first miss): {key!r}; "
                "returning the zero vector",
                stacklevel=2,
            )
        self.misses += 1
        return np.zeros(self.dim)


def _format_row(values: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in values)


def write_word_embeddings(table: EmbeddingTable, path) -> None:
    """Text format: header ``V D`` then one ``token v1 .. vD`` row per token."""
    items = sorted(table.vocabulary.items(), key=lambda kv: kv[1])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(items)} {table.dim}\n")
        for token, row in items:
            if any(ch.isspace() for ch in token):
                raise ArgumentError(f"token contains whitespace: {token!r}")
            fh.write(f"{token} {_format_row(table.vectors[row])}\n")


def read_word_embeddings(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ParseError("expected header 'V D'", line=1)
        n_rows, dim = int(parts[0]), int(parts[1])
        vocab: dict[str, int] = {}
        rows = np.empty((n_rows, dim))
        lineno = 1
        for i in range(n_rows):
            line = fh.readline()
            lineno += 1
            if line == "":
                raise ParseError(f"expected {n_rows} rows, found {i}", line=lineno)
            fields = line.split()
            if len(fields) != dim + 1:
                raise ParseError(
                    f"expected token plus {dim} values, found {len(fields) - 1}",
                    line=lineno,
                )
            token = fields[0]
            if token in vocab:
                raise ParseError(f"duplicate token {token!r}", line=lineno)
            try:
                rows[i] = [float(x) for x in fields[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            vocab[token] = i
    return EmbeddingTable(vocab, rows)


def write_sentence_vectors(vectors: dict, dim: int, path) -> None:
    """Same header as the word format; rows are ``key<TAB>v1 v2 .. vD``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(vectors)} {dim}\n")
        for key, values in vectors.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != (dim,):
                raise ArgumentError(f"vector for {key!r} is not {dim}-dimensional")
            fh.write(f"{normalize_sentence_key(key)}\t{_format_row(arr)}\n")


def read_sentence_vectors(path) -> SentenceVectorTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ParseError("expected header 'V D'", line=1)
        n_rows, dim = int(parts[0]), int(parts[1])
        vectors: dict[str, np.ndarray] = {}
        lineno = 1
        for i in range(n_rows):
            line = fh.readline()
            lineno += 1
            if line == "":
                raise ParseError(f"expected {n_rows} rows, found {i}", line=lineno)
            key, sep, rest = line.rstrip("\n").partition("\t")
            if not sep:
                raise ParseError("expected 'key<TAB>values'", line=lineno)
            fields = rest.split()
            if len(fields) != dim:
                raise ParseError(f"expected {dim} values, found {len(fields)}", line=lineno)
            try:
                vectors[normalize_sentence_key(key)] = np.array([float(x) for x in fields])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return SentenceVectorTable(vectors, dim)


def load_external_embeddings(path, level: str):
    """Load a precomputed vector file; ``level`` is 'word' or 'sentence'."""
    if level == "word":
        return read_word_embeddings(path)
    if level == "sentence":
        return read_sentence_vectors(path)
    raise ArgumentError(f"unknown embedding level {level!r}")


def random_word_embeddings(tokens, dim: int, seed: int) -> EmbeddingTable:
    """Seeded random table standing in for a pretrained word encoder."""
    ordered = sorted(set(tokens))
    rng = RngStream(seed).derive("standin-word", dim)
    return EmbeddingTable(
        {t: i for i, t in enumerate(ordered)},
        rng.normal((len(ordered), dim)) / math.sqrt(dim),
    )


def random_sentence_vectors(texts, dim: int, seed: int) -> SentenceVectorTable:
    """Seeded random sentence table standing in for a pretrained sentence
    encoder; keys are normalized texts."""
    keys = sorted({normalize_sentence_key(t) for t in texts})
    rng = RngStream(seed).derive("standin-sentence", dim)
    vectors = {k: rng.normal(dim) / math.sqrt(dim) for k in keys}
    return SentenceVectorTable(vectors, dim)


# ---------------------------------------------------------------------------
# Fit/encode wrappers shared by the grid runner and CLI
# ---------------------------------------------------------------------------


def _vocab_to_state(vocab: Vocabulary) -> dict:
    tokens = sorted(vocab.index, key=vocab.index.get)
    return {"tokens": tokens, "df": [vocab.df[t] for t in tokens], "n_docs": vocab.n_docs}


def _vocab_from_state(state: dict) -> Vocabulary:
    tokens = state["tokens"]
    return Vocabulary(
        index={t: i for i, t in enumerate(tokens)},
        df=dict(zip(tokens, state["df"])),
        n_docs=int(state["n_docs"]),
    )


def _table_to_state(table: EmbeddingTable) -> dict:
    items = sorted(table.vocabulary.items(), key=lambda kv: kv[1])
    return {"tokens": [t for t, _ in items], "vectors": table.vectors.tolist()}


def _table_from_state(state: dict) -> EmbeddingTable:
    return EmbeddingTable(
        {t: i for i, t in enumerate(state["tokens"])},
        np.asarray(state["vectors"], dtype=np.float64),
    )


class CountEncoder:
    """Sparse token-count vectors over a corpus vocabulary."""

    kind = "count"

    def __init__(self, min_df: int = 1):
        self.min_df = min_df
        self.vocab: Vocabulary | None = None
        self.dim: int | None = None

    def fit(self, ds: LabeledDataset) -> "CountEncoder":
        self.vocab = build_vocabulary(ds, self.min_df)
        self.dim = len(self.vocab)
        return self

    def encode(self, u: Utterance) -> SparseVector:
        return count_encode(self.vocab, u)

    def to_state(self) -> dict:
        return {"min_df": self.min_df, "vocab": _vocab_to_state(self.vocab)}

    @classmethod
    def from_state(cls, state: dict) -> "CountEncoder":
        enc = cls(min_df=state["min_df"])
        enc.vocab = _vocab_from_state(state["vocab"])
        enc.dim = len(enc.vocab)
        return enc


class TfidfEncoder:
    """L2-normalized tf-idf vectors."""

    kind = "tfidf"

    def __init__(self, min_df: int = 1):
        self.min_df = min_df
        self.vocab: Vocabulary | None = None
        self.idf: IdfTable | None = None
        self.dim: int | None = None

    def fit(self, ds: LabeledDataset) -> "TfidfEncoder":
        self.vocab = build_vocabulary(ds, self.min_df)
        self.idf = tfidf_fit(ds, self.min_df)
        self.dim = len(self.vocab)
        return self

    def encode(self, u: Utterance) -> SparseVector:
        return tfidf_encode(self.vocab, self.idf, u)

    def to_state(self) -> dict:
        tokens = sorted(self.vocab.index, key=self.vocab.index.get)
        return {
            "min_df": self.min_df, "vocab": _vocab_to_state(self.vocab),
            "idf_weights": [self.idf.get(t) for t in tokens],
            "idf_default": self.idf.default,
        }

    @classmethod
    def from_state(cls, state: dict) -> "TfidfEncoder":
        enc = cls(min_df=state["min_df"])
        enc.vocab = _vocab_from_state(state["vocab"])
        enc.idf = IdfTable(
            dict(zip(state["vocab"]["tokens"], state["idf_weights"])),
            default=float(state["idf_default"]),
        )
        enc.dim = len(enc.vocab)
        return enc


class LsaEncoder:
    """Topic-space vectors: a count or tf-idf source projected through a
    truncated SVD of the training doc-term matrix."""

    kind = "lsa"

    def __init__(self, source: str = "count", k: int = 100, min_df: int = 1):
        if source not in ("count", "tfidf"):
            raise ArgumentError(f"LSA source must be 'count' or 'tfidf', got {source!r}")
        self.source_kind = source
        self.k = k
        self.min_df = min_df
        self.source = None
        self.projection: LsaProjection | None = None
        self.dim: int | None = None

    def fit(self, ds: LabeledDataset) -> "LsaEncoder":
        self.source = (
            CountEncoder(self.min_df) if self.source_kind == "count" else TfidfEncoder(self.min_df)
        )
        self.source.fit(ds)
        rows = [self.source.encode(u).to_dense() for u, _ in ds.records]
        X = np.vstack(rows) if rows else np.zeros((0, self.source.dim))
        cap = min(len(ds), self.source.dim) - 1
        k = max(1, min(self.k, cap)) if cap >= 1 else 1
        self.projection = lsa_fit(X, k)
        self.dim = self.projection.dim
        return self

    def encode(self, u: Utterance) -> np.ndarray:
        return lsa_encode(self.projection, self.source.encode(u))

    def to_state(self) -> dict:
        return {
            "source_kind": self.source_kind, "k": self.k, "min_df": self.min_df,
            "source": self.source.to_state(),
            "matrix": self.projection.matrix.tolist(),
            "singular_values": self.projection.singular_values.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "LsaEncoder":
        enc = cls(source=state["source_kind"], k=state["k"], min_df=state["min_df"])
        source_cls = CountEncoder if state["source_kind"] == "count" else TfidfEncoder
        enc.source = source_cls.from_state(state["source"])
        matrix = np.asarray(state["matrix"], dtype=np.float64)
        enc.projection = LsaProjection(
            matrix, np.asarray(state["singular_values"], dtype=np.float64),
            int(matrix.shape[1]),
        )
        enc.dim = enc.projection.dim
        return enc


class EmbeddingAvgEncoder:
    """Sentence vectors as the (optionally idf-weighted) mean of token
    embeddings; the table is trained at fit time unless supplied."""

    kind = "embedding-avg"

    def __init__(
        self,
        table: EmbeddingTable | None = None,
        weighting: str = "uniform",
        dim: int = 25,
        window: int = 5,
        negatives: int = 5,
        epochs: int = 15,
        lr: float = 0.025,
        seed: int = 0,
    ):
        if weighting not in ("uniform", "idf"):
            raise ArgumentError(f"weighting must be 'uniform' or 'idf', got {weighting!r}")
        self.table = table
        self.weighting = weighting
        self.train_params = dict(
            dim=dim, window=window, negatives=negatives, epochs=epochs, lr=lr, seed=seed
        )
        self.idf: IdfTable | None = None
        self.dim = table.dim if table is not None else None

    def fit(self, ds: LabeledDataset) -> "EmbeddingAvgEncoder":
        if self.table is None:
            self.table = train_skipgram(ds, **self.train_params)
        if self.weighting == "idf":
            self.idf = tfidf_fit(ds)
        self.dim = self.table.dim
        return self

    def encode(self, u: Utterance) -> np.ndarray:
        if self.weighting == "idf":
            return idf_avg_encode(u, self.table, self.idf)
        return avg_encode(u, self.table)

    def to_state(self) -> dict:
        state = {
            "weighting": self.weighting, "train_params": dict(self.train_params),
            "table": _table_to_state(self.table), "idf": None,
        }
        if self.idf is not None:
            tokens = sorted(self.idf.weights)
            state["idf"] = {
                "tokens": tokens,
                "weights": [self.idf.weights[t] for t in tokens],
                "default": self.idf.default,
            }
        return state

    @classmethod
    def from_state(cls, state: dict) -> "EmbeddingAvgEncoder":
        enc = cls(weighting=state["weighting"], **state["train_params"])
        enc.table = _table_from_state(state["table"])
        enc.dim = enc.table.dim
        if state["idf"] is not None:
            enc.idf = IdfTable(
                dict(zip(state["idf"]["tokens"], state["idf"]["weights"])),
                default=float(state["idf"]["default"]),
            )
        return enc


class WordAvgEncoder:
    """Mean of precomputed external word vectors (word-level stand-in)."""

    kind = "external-word"

    def __init__(self, table: EmbeddingTable):
        self.table = table
        self.dim = table.dim

    def fit(self, ds: LabeledDataset) -> "WordAvgEncoder":
        return self

    def encode(self, u: Utterance) -> np.ndarray:
        return avg_encode(u, self.table)

    def to_state(self) -> dict:
        return {"table": _table_to_state(self.table)}

    @classmethod
    def from_state(cls, state: dict) -> "WordAvgEncoder":
        return cls(_table_from_state(state["table"]))


class SentenceLookupEncoder:
    """Precomputed sentence vectors looked up by normalized text."""

    kind = "external-sentence"

    def __init__(self, table: SentenceVectorTable):
        self.table = table
        self.dim = table.dim

    def fit(self, ds: LabeledDataset) -> "SentenceLookupEncoder":
        return self

    def encode(self, u: Utterance) -> np.ndarray:
        return self.table.lookup(u.text)

    def to_state(self) -> dict:
        keys = sorted(self.table.vectors)
        return {
            "dim": self.table.dim, "keys": keys,
            "vectors": [self.table.vectors[k].tolist() for k in keys],
        }

    @classmethod
    def from_state(cls, state: dict) -> "SentenceLookupEncoder":
        vectors = {
            k: np.asarray(v, dtype=np.float64)
            for k, v in zip(state["keys"], state["vectors"])
        }
        return cls(SentenceVectorTable(vectors, int(state["dim"])))


_ENCODER_CLASSES = {
    cls.kind: cls
    for cls in (CountEncoder, TfidfEncoder, LsaEncoder, EmbeddingAvgEncoder,
                WordAvgEncoder, SentenceLookupEncoder)
}


def encoder_to_state(encoder) -> dict:
    return {"kind": encoder.kind, "state": encoder.to_state()}


def encoder_from_state(payload: dict):
    kind = payload.get("kind")
    if kind not in _ENCODER_CLASSES:
        raise ArgumentError(f"unknown encoder kind {kind!r}")
    return _ENCODER_CLASSES[kind].from_state(payload["state"])
