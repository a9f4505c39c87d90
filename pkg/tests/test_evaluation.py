"""Macro-F1 evaluation tests, including exact agreement with an independent
direct-formula oracle on seeded random prediction sets."""

import numpy as np
import pytest

from intentbench.errors import ArgumentError
from intentbench.evaluation import EvalReport, evaluate, macro_f1
from intentbench.numerics import RngStream


def oracle_macro_f1(preds, golds, label_set):
    """Independent brute-force macro-F1: direct counting loops plus the
    textbook per-class formula, mirroring the production arithmetic shape so
    integer-count inputs give bitwise-equal floats."""
    labels = sorted(label_set)
    f1s = []
    for c in labels:
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if p != c and g == c)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1s.append(2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0)
    return sum(f1s) / len(labels)


class TestEvaluate:
    def test_perfect_agreement(self):
        r = evaluate(["A", "B", "A"], ["A", "B", "A"], ["A", "B"])
        assert r.macro_f1 == 1.0
        assert r.accuracy == 1.0

    def test_total_disagreement(self):
        r = evaluate(["B", "A"], ["A", "B"], ["A", "B"])
        assert r.macro_f1 == 0.0

    def test_hand_confusion_example(self):
        # golds (A,A,B,B), preds (A,B,B,B):
        #   A: P=1, R=1/2, F1=2/3;  B: P=2/3, R=1, F1=4/5;  macro=(2/3+4/5)/2
        r = evaluate(["A", "B", "B", "B"], ["A", "A", "B", "B"], ["A", "B"])
        assert r.f1["A"] == pytest.approx(2 / 3, abs=1e-12)
        assert r.f1["B"] == pytest.approx(0.8, abs=1e-12)
        assert r.macro_f1 == pytest.approx(0.7333, abs=1e-4)

    def test_absent_class_contributes_zero(self):
        r = evaluate(["A", "A"], ["A", "A"], ["A", "B", "C"])
        assert r.f1["B"] == 0.0 and r.f1["C"] == 0.0
        assert r.macro_f1 == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_confusion_matrix_layout(self):
        r = evaluate(["B", "B", "A"], ["A", "B", "A"], ["A", "B"])
        # rows = gold, cols = predicted, labels ascending
        assert r.labels == ("A", "B")
        assert r.confusion.tolist() == [[1, 1], [0, 1]]
        assert int(r.confusion.sum()) == 3

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            evaluate(["A"], ["A", "B"], ["A", "B"])

    def test_unknown_label(self):
        with pytest.raises(ArgumentError):
            evaluate(["Z"], ["A"], ["A", "B"])

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            evaluate([], [], ["A"])

    def test_matches_direct_formula_oracle_exactly(self):
        rng = RngStream(2024)
        labels = ["a", "b", "c", "d", "e"]
        for _ in range(1000):
            n = 1 + rng.randint(40)
            preds = [labels[rng.randint(5)] for _ in range(n)]
            golds = [labels[rng.randint(5)] for _ in range(n)]
            mine = evaluate(preds, golds, labels).macro_f1
            assert mine == oracle_macro_f1(preds, golds, labels)

    def test_permutation_invariance(self):
        rng = RngStream(8)
        preds = [str(rng.randint(3)) for _ in range(30)]
        golds = [str(rng.randint(3)) for _ in range(30)]
        base = evaluate(preds, golds, ["0", "1", "2"])
        order = list(range(30))
        rng.shuffle(order)
        shuf = evaluate([preds[i] for i in order], [golds[i] for i in order], ["0", "1", "2"])
        assert base.macro_f1 == shuf.macro_f1
        assert np.array_equal(base.confusion, shuf.confusion)

    def test_relabeling_invariance(self):
        preds = ["A", "B", "B", "C", "A"]
        golds = ["A", "A", "B", "C", "C"]
        mapping = {"A": "x", "B": "y", "C": "z"}
        base = evaluate(preds, golds, ["A", "B", "C"])
        remap = evaluate([mapping[p] for p in preds], [mapping[g] for g in golds],
                         ["x", "y", "z"])
        assert base.macro_f1 == remap.macro_f1

    def test_macro_f1_shortcut(self):
        preds, golds = ["A", "B"], ["A", "A"]
        assert macro_f1(preds, golds, ["A", "B"]) == evaluate(preds, golds, ["A", "B"]).macro_f1

    def test_report_text_renders(self):
        r = evaluate(["A", "B", "B", "B"], ["A", "A", "B", "B"], ["A", "B"])
        text = r.format_text()
        assert "macro-F1" in text and "A" in text
