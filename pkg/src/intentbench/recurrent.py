"""Token-sequence classifiers: plain RNN, GRU, and LSTM cells stacked two
deep over frozen embedding lookup, trained by backpropagation through time
with gradient-norm clipping and validation-based early stopping."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import LabeledDataset, Utterance
from .encoders import EmbeddingTable
from .errors import ArgumentError, DimensionError, TrainingError
from .evaluation import macro_f1
from .numerics import RngStream, sigmoid, softmax

_GATES = {"rnn": 1, "gru": 3, "lstm": 4}


@dataclass
class CellParams:
    """Stacked per-gate parameters: W is (d_in, gates*H), U is (H, gates*H),
    b is (gates*H,). Gate order: GRU (update, reset, candidate); LSTM
    (input, forget, output, candidate)."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return int(self.U.shape[0])

    def copy(self) -> "CellParams":
        return CellParams(self.W.copy(), self.U.copy(), self.b.copy())


def _check_shapes(x, h, p: CellParams, gates: int):
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    hidden = p.hidden
    if p.W.shape != (x.shape[0], gates * hidden) or p.U.shape != (hidden, gates * hidden) \
            or p.b.shape != (gates * hidden,) or h.shape != (hidden,):
        raise DimensionError(
            f"cell shapes inconsistent: x {x.shape}, h {h.shape}, "
            f"W {p.W.shape}, U {p.U.shape}, b {p.b.shape}"
        )
    return x, h


def rnn_cell(x, h, p: CellParams) -> np.ndarray:
    """h' = tanh(W x + U h + b)."""
    x, h = _check_shapes(x, h, p, 1)
    return np.tanh(x @ p.W + h @ p.U + p.b)


def gru_cell(x, h, p: CellParams) -> np.ndarray:
    """Update/reset-gated cell:
    z = sigma(W_z x + U_z h + b_z), r = sigma(W_r x + U_r h + b_r),
    cand = tanh(W x + U (r*h) + b), h' = (1-z)*h + z*cand."""
    x, h = _check_shapes(x, h, p, 3)
    hid = p.hidden
    a = x @ p.W + p.b
    rec = h @ p.U[:, : 2 * hid]
    z = sigmoid(a[:hid] + rec[:hid])
    r = sigmoid(a[hid: 2 * hid] + rec[hid:])
    cand = np.tanh(a[2 * hid:] + (r * h) @ p.U[:, 2 * hid:])
    return (1.0 - z) * h + z * cand


def lstm_cell(x, state, p: CellParams):
    """Memory cell with input/forget/output gates i, f, o and candidate g:
    c' = f*c + i*g, h' = o*tanh(c'). Returns (h', c')."""
    h, c = state
    x, h = _check_shapes(x, h, p, 4)
    c = np.asarray(c, dtype=np.float64)
    if c.shape != h.shape:
        raise DimensionError(f"cell state shape {c.shape} != hidden shape {h.shape}")
    hid = p.hidden
    a = x @ p.W + h @ p.U + p.b
    i = sigmoid(a[:hid])
    f = sigmoid(a[hid: 2 * hid])
    o = sigmoid(a[2 * hid: 3 * hid])
    g = np.tanh(a[3 * hid:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


# ---------------------------------------------------------------------------
# Layer-level forward/backward over a whole sequence
# ---------------------------------------------------------------------------


def _layer_forward(X, p: CellParams, kind: str):
    """Run one recurrent layer over a (T, d_in) sequence from a zero initial
    state; returns (hidden states (T, H), cache for backward)."""
    T = X.shape[0]
    hid = p.hidden
    xp = X @ p.W + p.b
    hs = np.empty((T, hid))
    h = np.zeros(hid)
    if kind == "rnn":
        for t in range(T):
            h = np.tanh(xp[t] + h @ p.U)
            hs[t] = h
        return hs, (X, hs, None)
    if kind == "gru":
        zs = np.empty((T, hid))
        rs = np.empty((T, hid))
        cands = np.empty((T, hid))
        for t in range(T):
            a = xp[t]
            rec = h @ p.U[:, : 2 * hid]
            z = sigmoid(a[:hid] + rec[:hid])
            r = sigmoid(a[hid: 2 * hid] + rec[hid:])
            cand = np.tanh(a[2 * hid:] + (r * h) @ p.U[:, 2 * hid:])
            h = (1.0 - z) * h + z * cand
            zs[t], rs[t], cands[t], hs[t] = z, r, cand, h
        return hs, (X, hs, (zs, rs, cands))
    if kind == "lstm":
        gates = np.empty((T, 4 * hid))
        cs = np.empty((T, hid))
        c = np.zeros(hid)
        for t in range(T):
            a = xp[t] + h @ p.U
            i = sigmoid(a[:hid])
            f = sigmoid(a[hid: 2 * hid])
            o = sigmoid(a[2 * hid: 3 * hid])
            g = np.tanh(a[3 * hid:])
            c = f * c + i * g
            h = o * np.tanh(c)
            gates[t, :hid], gates[t, hid: 2 * hid] = i, f
            gates[t, 2 * hid: 3 * hid], gates[t, 3 * hid:] = o, g
            cs[t], hs[t] = c, h
        return hs, (X, hs, (gates, cs))
    raise ArgumentError(f"unknown cell kind {kind!r}")


def _prev_rows(hs):
    prev = np.empty_like(hs)
    prev[0] = 0.0
    prev[1:] = hs[:-1]
    return prev


def _layer_backward(dH, cache, p: CellParams, kind: str, need_dx: bool):
    """BPTT through one layer; dH is the (T, H) upstream gradient. Returns
    (dX or None, gradient CellParams)."""
    X, hs, extra = cache
    T, hid = hs.shape
    prev = _prev_rows(hs)
    dh_next = np.zeros(hid)
    if kind == "rnn":
        das = np.empty((T, hid))
        for t in range(T - 1, -1, -1):
            da = (dH[t] + dh_next) * (1.0 - hs[t] * hs[t])
            das[t] = da
            dh_next = da @ p.U.T
        gU = prev.T @ das
    elif kind == "gru":
        zs, rs, cands = extra
        das = np.empty((T, 3 * hid))
        rh = rs * prev
        for t in range(T - 1, -1, -1):
            dh = dH[t] + dh_next
            z, r, cand, h_prev = zs[t], rs[t], cands[t], prev[t]
            dz = dh * (cand - h_prev)
            dcand = dh * z
            dh_prev = dh * (1.0 - z)
            da_c = dcand * (1.0 - cand * cand)
            drh = da_c @ p.U[:, 2 * hid:].T
            dr = drh * h_prev
            dh_prev += drh * r
            da_z = dz * z * (1.0 - z)
            da_r = dr * r * (1.0 - r)
            dh_prev += np.concatenate([da_z, da_r]) @ p.U[:, : 2 * hid].T
            das[t, :hid], das[t, hid: 2 * hid], das[t, 2 * hid:] = da_z, da_r, da_c
            dh_next = dh_prev
        gU = np.concatenate(
            [prev.T @ das[:, : 2 * hid], rh.T @ das[:, 2 * hid:]], axis=1
        )
    elif kind == "lstm":
        gates, cs = extra
        das = np.empty((T, 4 * hid))
        dc_next = np.zeros(hid)
        prev_c = _prev_rows(cs)
        for t in range(T - 1, -1, -1):
            i = gates[t, :hid]
            f = gates[t, hid: 2 * hid]
            o = gates[t, 2 * hid: 3 * hid]
            g = gates[t, 3 * hid:]
            tc = np.tanh(cs[t])
            dh = dH[t] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * prev_c[t]
            dc_next = dc * f
            da = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g * g),
            ])
            das[t] = da
            dh_next = da @ p.U.T
        gU = prev.T @ das
    else:
        raise ArgumentError(f"unknown cell kind {kind!r}")
    gW = X.T @ das
    gb = das.sum(axis=0)
    dX = das @ p.W.T if need_dx else None
    return dX, CellParams(gW, gU, gb)


# ---------------------------------------------------------------------------
# Two-layer sequence classifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SequenceConfig:
    hidden: int = 64
    lr: float = 0.01
    clip_norm: float = 5.0
    batch_size: int = 32
    epochs: int = 50
    patience: int = 5
    val_fraction: float = 0.1
    max_tokens: int = 64

    def __post_init__(self):
        for name in ("hidden", "lr", "clip_norm", "batch_size", "epochs",
                     "patience", "max_tokens"):
            if getattr(self, name) <= 0:
                raise ArgumentError(f"{name} must be positive")
        if not 0.0 < self.val_fraction <= 0.5:
            raise ArgumentError("val_fraction must lie in (0, 0.5]")


@dataclass
class TrainHistory:
    """Per-epoch training loss and validation macro-F1, plus the (0-based)
    epoch whose weights the trained model carries."""

    train_losses: list[float] = field(default_factory=list)
    val_scores: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_score: float = -math.inf

    def record(self, loss: float, score: float) -> bool:
        """Append one epoch; returns True when it strictly improves the best."""
        self.train_losses.append(float(loss))
        self.val_scores.append(float(score))
        if score > self.best_score:
            self.best_score = float(score)
            self.best_epoch = len(self.val_scores) - 1
            return True
        return False


def early_stop(history: TrainHistory, patience: int) -> bool:
    """True once the validation score has not strictly improved for
    ``patience`` consecutive epochs (the caller then restores the best
    epoch's weights)."""
    if patience < 1:
        raise ArgumentError("patience must be >= 1")
    return len(history.val_scores) - (history.best_epoch + 1) >= patience


def stratified_holdout(y_idx, fraction: float, rng: RngStream):
    """Per-class round-half-up holdout; returns (rest, held) index arrays."""
    held: list[int] = []
    for c in np.unique(y_idx):
        members = np.flatnonzero(y_idx == c).tolist()
        rng.derive("class", int(c)).shuffle(members)
        take = int(math.floor(len(members) * fraction + 0.5))
        held.extend(members[:take])
    held_set = set(held)
    rest = [i for i in range(len(y_idx)) if i not in held_set]
    return np.array(rest, dtype=np.int64), np.array(sorted(held), dtype=np.int64)


def _model_params_list(params: dict) -> list[np.ndarray]:
    l1, l2 = params["layer1"], params["layer2"]
    return [l1.W, l1.U, l1.b, l2.W, l2.U, l2.b, params["w_out"], params["b_out"]]


def sequence_loss_and_grad(params: dict, kind: str, X_seq: np.ndarray, target: int):
    """Cross-entropy loss of one sequence and gradients for every parameter
    tensor (embeddings are frozen inputs and receive no gradient)."""
    h1, cache1 = _layer_forward(X_seq, params["layer1"], kind)
    h2, cache2 = _layer_forward(h1, params["layer2"], kind)
    logits = h2[-1] @ params["w_out"] + params["b_out"]
    probs = softmax(logits)
    loss = -math.log(max(float(probs[target]), 1e-300))
    dlogits = probs.copy()
    dlogits[target] -= 1.0
    g_wout = np.outer(h2[-1], dlogits)
    g_bout = dlogits
    dh2 = np.zeros_like(h2)
    dh2[-1] = params["w_out"] @ dlogits
    dh1, g2 = _layer_backward(dh2, cache2, params["layer2"], kind, need_dx=True)
    _, g1 = _layer_backward(dh1, cache1, params["layer1"], kind, need_dx=False)
    grads = {"layer1": g1, "layer2": g2, "w_out": g_wout, "b_out": g_bout}
    return loss, grads


class SequenceModel:
    """Frozen-embedding, two-layer recurrent classifier reading the label
    from the final time step's top hidden state through softmax."""

    KINDS = ("rnn", "gru", "lstm")

    def __init__(self, kind: str, config: SequenceConfig, labels, params: dict,
                 table: EmbeddingTable):
        if kind not in self.KINDS:
            raise ArgumentError(f"kind must be one of {self.KINDS}, got {kind!r}")
        self.kind = kind
        self.config = config
        self.labels_ = tuple(labels)
        self.params = params
        self.table = table

    def embed(self, u: Utterance) -> np.ndarray:
        """(T, D) rows for the first max_tokens tokens; OOV tokens map to the
        zero vector, and an empty utterance becomes one zero-vector step."""
        dim = self.table.dim
        tokens = u.tokens[: self.config.max_tokens]
        if not tokens:
            return np.zeros((1, dim))
        rows = np.zeros((len(tokens), dim))
        for t, token in enumerate(tokens):
            vec = self.table.lookup(token)
            if vec is not None:
                rows[t] = vec
        return rows

    def predict_scores(self, u: Utterance) -> np.ndarray:
        x = self.embed(u)
        h1, _ = _layer_forward(x, self.params["layer1"], self.kind)
        h2, _ = _layer_forward(h1, self.params["layer2"], self.kind)
        return softmax(h2[-1] @ self.params["w_out"] + self.params["b_out"])

    def predict(self, u: Utterance) -> str:
        return self.labels_[int(np.argmax(self.predict_scores(u)))]

    def predict_many(self, utterances) -> list[str]:
        return [self.predict(u) for u in utterances]

    def to_state(self) -> dict:
        l1, l2 = self.params["layer1"], self.params["layer2"]
        vocab_items = sorted(self.table.vocabulary.items(), key=lambda kv: kv[1])
        return {
            "kind": self.kind,
            "config": asdict(self.config),
            "labels": list(self.labels_),
            "params": {
                "layer1": {"W": l1.W.tolist(), "U": l1.U.tolist(), "b": l1.b.tolist()},
                "layer2": {"W": l2.W.tolist(), "U": l2.U.tolist(), "b": l2.b.tolist()},
                "w_out": self.params["w_out"].tolist(),
                "b_out": self.params["b_out"].tolist(),
            },
            "table": {
                "tokens": [t for t, _ in vocab_items],
                "vectors": self.table.vectors.tolist(),
            },
        }

    @classmethod
    def from_state(cls, state: dict) -> "SequenceModel":
        def cell(d):
            return CellParams(
                np.asarray(d["W"], dtype=np.float64),
                np.asarray(d["U"], dtype=np.float64),
                np.asarray(d["b"], dtype=np.float64),
            )

        params = {
            "layer1": cell(state["params"]["layer1"]),
            "layer2": cell(state["params"]["layer2"]),
            "w_out": np.asarray(state["params"]["w_out"], dtype=np.float64),
            "b_out": np.asarray(state["params"]["b_out"], dtype=np.float64),
        }
        table = EmbeddingTable(
            {t: i for i, t in enumerate(state["table"]["tokens"])},
            np.asarray(state["table"]["vectors"], dtype=np.float64),
        )
        return cls(state["kind"], SequenceConfig(**state["config"]),
                   state["labels"], params, table)

    @property
    def kind_for_persistence(self) -> str:
        return self.kind


def _init_sequence_params(kind: str, dim: int, hidden: int, n_classes: int,
                          rng: RngStream) -> dict:
    gates = _GATES[kind]
    bound = 1.0 / math.sqrt(hidden)

    def uniform(shape):
        size = int(np.prod(shape))
        return rng.uniform(size, -bound, bound).reshape(shape)

    def layer(d_in):
        p = CellParams(
            uniform((d_in, gates * hidden)),
            uniform((hidden, gates * hidden)),
            uniform((gates * hidden,)),
        )
        if kind == "lstm":
            p.b[hidden: 2 * hidden] = 1.0  # forget gate opens by default
        return p

    return {
        "layer1": layer(dim),
        "layer2": layer(hidden),
        "w_out": uniform((hidden, n_classes)),
        "b_out": np.zeros(n_classes),
    }


def _clip_grads(grads: dict, clip_norm: float) -> None:
    total = 0.0
    for g in _model_params_list(grads):
        total += float(np.sum(g * g))
    norm = math.sqrt(total)
    if norm > clip_norm:
        scale = clip_norm / norm
        for g in _model_params_list(grads):
            g *= scale


def train_sequence_model(
    kind: str,
    ds: LabeledDataset,
    table: EmbeddingTable,
    cfg: SequenceConfig | None = None,
    seed: int = 0,
):
    """Train a two-layer recurrent classifier on token sequences.

    Records are canonically ordered before any seeded operation, so training
    is invariant to the dataset's record order. A stratified 10% (by default)
    validation split drives early stopping on macro-F1; the best epoch's
    weights are restored. Returns (model, history).
    """
    if kind not in SequenceModel.KINDS:
        raise ArgumentError(f"kind must be one of {SequenceModel.KINDS}, got {kind!r}")
    cfg = cfg or SequenceConfig()
    if len(ds) == 0:
        raise TrainingError("cannot train on an empty dataset")
    labels = tuple(sorted({y for _, y in ds.records}))
    if len(labels) < 2:
        raise TrainingError(f"need at least 2 classes, got {len(labels)}")
    label_index = {y: i for i, y in enumerate(labels)}

    canonical = sorted(range(len(ds)), key=lambda i: (ds.records[i][1], ds.records[i][0].text))
    rng = RngStream(seed).derive("sequence", kind)
    model = SequenceModel(
        kind, cfg, labels,
        _init_sequence_params(kind, table.dim, cfg.hidden, len(labels), rng),
        table,
    )
    sequences = [model.embed(ds.records[i][0]) for i in canonical]
    y_idx = np.array([label_index[ds.records[i][1]] for i in canonical], dtype=np.int64)

    train_pos, val_pos = stratified_holdout(y_idx, cfg.val_fraction, rng.derive("val"))
    if val_pos.size == 0:
        train_pos = np.arange(len(y_idx))

    def snapshot(params):
        return {
            "layer1": params["layer1"].copy(), "layer2": params["layer2"].copy(),
            "w_out": params["w_out"].copy(), "b_out": params["b_out"].copy(),
        }

    history = TrainHistory()
    best = snapshot(model.params)
    shuffler = rng.derive("batches")
    for _ in range(cfg.epochs):
        order = shuffler.permutation(len(train_pos))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [int(train_pos[i]) for i in order[start:start + cfg.batch_size]]
            acc: dict | None = None
            for pos in batch:
                loss, grads = sequence_loss_and_grad(
                    model.params, kind, sequences[pos], int(y_idx[pos])
                )
                epoch_loss += loss
                if acc is None:
                    acc = grads
                else:
                    for a, g in zip(_model_params_list(acc), _model_params_list(grads)):
                        a += g
            inv = 1.0 / len(batch)
            for g in _model_params_list(acc):
                g *= inv
            _clip_grads(acc, cfg.clip_norm)
            for p, g in zip(_model_params_list(model.params), _model_params_list(acc)):
                p -= cfg.lr * g
        eval_pos = val_pos if val_pos.size else train_pos
        preds = []
        for pos in eval_pos:
            x = sequences[int(pos)]
            h1, _ = _layer_forward(x, model.params["layer1"], kind)
            h2, _ = _layer_forward(h1, model.params["layer2"], kind)
            logits = h2[-1] @ model.params["w_out"] + model.params["b_out"]
            preds.append(labels[int(np.argmax(logits))])
        golds = [labels[int(y_idx[int(pos)])] for pos in eval_pos]
        score = macro_f1(preds, golds, labels)
        if history.record(epoch_loss / max(len(train_pos), 1), score):
            best = snapshot(model.params)
        if early_stop(history, cfg.patience):
            break
    model.params = best
    return model, history
