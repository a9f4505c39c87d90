"""Classification scoring: confusion matrix, per-class precision/recall/F1,
macro-averaged F1, and accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True)
class EvalReport:
    """Scores over a fixed label set; labels are sorted ascending and the
    confusion matrix is gold x predicted in that order."""

    labels: tuple[str, ...]
    confusion: np.ndarray
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    macro_f1: float
    accuracy: float

    @property
    def size(self) -> int:
        return int(self.confusion.sum())

    def format_text(self) -> str:
        width = max(5, max(len(y) for y in self.labels))
        lines = [f"{'class':<{width}}  {'prec':>7}  {'recall':>7}  {'f1':>7}"]
        for y in self.labels:
            lines.append(
                f"{y:<{width}}  {self.precision[y]:>7.4f}  {self.recall[y]:>7.4f}"
                f"  {self.f1[y]:>7.4f}"
            )
        lines.append(f"macro-F1 {self.macro_f1:.4f}  accuracy {self.accuracy:.4f}"
                     f"  n {self.size}")
        return "\n".join(lines)


def evaluate(preds, golds, label_set) -> EvalReport:
    """Score predictions against gold labels over ``label_set``.

    Per-class F1 is 2PR/(P+R) with any zero denominator resolving to 0;
    classes absent from both predictions and gold still contribute 0 to the
    macro mean. Raises on length mismatch or labels outside the set.
    """
    preds = list(preds)
    golds = list(golds)
    if len(preds) != len(golds):
        raise ArgumentError(f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise ArgumentError("cannot evaluate an empty prediction set")
    labels = tuple(sorted(set(label_set)))
    index = {y: i for i, y in enumerate(labels)}
    for seq, name in ((preds, "prediction"), (golds, "gold")):
        for y in seq:
            if y not in index:
                raise ArgumentError(f"unknown {name} label {y!r}")
    c = len(labels)
    confusion = np.zeros((c, c), dtype=np.int64)
    for p, g in zip(preds, golds):
        confusion[index[g], index[p]] += 1
    precision: dict[str, float] = {}
    recall: dict[str, float] = {}
    f1: dict[str, float] = {}
    f1_values = []
    for i, y in enumerate(labels):
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum()) - tp
        fn = int(confusion[i, :].sum()) - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        score = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        precision[y], recall[y], f1[y] = p, r, score
        f1_values.append(score)
    confusion.flags.writeable = False
    return EvalReport(
        labels=labels,
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=sum(f1_values) / c,
        accuracy=float(np.trace(confusion)) / len(preds),
    )


def macro_f1(preds, golds, label_set) -> float:
    return evaluate(preds, golds, label_set).macro_f1
