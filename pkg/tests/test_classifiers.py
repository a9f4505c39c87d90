"""Fixed-vector classifier tests: hand-value oracles, exhaustive-scan
oracles for the neighbor models, gradient checks against finite differences,
separability reference runs, and persistence round-trips."""

import math

import numpy as np
import pytest

from intentbench.classifiers import (
    CosineNearestClassifier,
    DecisionTreeClassifier,
    FeedForwardClassifier,
    KernelSvmClassifier,
    KnnClassifier,
    LinearSvmClassifier,
    LogisticRegressionClassifier,
    RandomForestClassifier,
    TrainConfig,
    ffnn_loss_and_grad,
    gini_impurity,
    linear_svm_loss_and_grad,
    load_model,
    logreg_loss_and_grad,
    save_model,
    train_cosine_1nn,
    train_decision_tree,
    train_ffnn,
    train_kernel_svm,
    train_knn,
    train_linear_svm,
    train_logreg,
    train_random_forest,
)
from intentbench.errors import ArgumentError, TrainingError
from intentbench.evaluation import macro_f1
from intentbench.numerics import RngStream, cosine_similarity, finite_diff_grad, max_relative_error

from synth import make_blobs, make_xor, split_arrays


def _blob_split(seed=1):
    X, y = make_blobs(seed)
    return split_arrays(X, y, 0.25, seed)


class TestLinearSvm:
    def test_separable_threshold(self):
        rng = RngStream(3)
        xs = np.concatenate([rng.uniform(20, -5.0, -0.5), rng.uniform(20, 0.5, 5.0)])
        X = xs.reshape(-1, 1)
        y = ["A"] * 20 + ["B"] * 20
        clf = train_linear_svm(X, y, seed=0)
        assert [clf.predict(x) for x in X] == y

    def test_single_class_rejected(self):
        with pytest.raises(TrainingError):
            train_linear_svm(np.zeros((4, 2)), ["A"] * 4)

    def test_blobs_reference_run(self):
        Xtr, ytr, Xte, yte = _blob_split()
        clf = train_linear_svm(Xtr, ytr, seed=0)
        preds = [clf.predict(x) for x in Xte]
        assert macro_f1(preds, yte, clf.labels_) >= 0.95

    def test_hinge_subgradient_matches_finite_diff(self):
        # away from the hinge at margin exactly 1 the objective is smooth
        rng = RngStream(11)
        X = rng.normal((12, 3))
        ysigns = np.where(rng.uniform(12 * 2).reshape(2, 12) < 0.5, -1.0, 1.0)
        W0 = rng.normal((2, 3))
        b0 = rng.normal(2)

        def unpack(theta):
            return theta[:6].reshape(2, 3), theta[6:]

        def f(theta):
            W, b = unpack(theta)
            return linear_svm_loss_and_grad(W, b, X, ysigns, lam=1e-2)[0]

        theta0 = np.concatenate([W0.ravel(), b0])
        _, gW, gb = linear_svm_loss_and_grad(W0, b0, X, ysigns, lam=1e-2)
        analytic = np.concatenate([gW.ravel(), gb])
        numeric = finite_diff_grad(f, theta0, h=1e-6)
        assert max_relative_error(analytic, numeric) <= 1e-4


class TestKernelSvm:
    def test_xor_beats_linear(self):
        X, y = make_xor(5)
        Xtr, ytr, Xte, yte = split_arrays(X, y, 0.25, 5)
        rbf = train_kernel_svm(Xtr, ytr, seed=0)
        lin = train_linear_svm(Xtr, ytr, seed=0)
        rbf_f1 = macro_f1([rbf.predict(x) for x in Xte], yte, rbf.labels_)
        lin_f1 = macro_f1([lin.predict(x) for x in Xte], yte, lin.labels_)
        assert rbf_f1 >= 0.95
        assert lin_f1 <= 0.75

    def test_vanishing_gamma_collapses_to_majority(self):
        # gamma small enough that every kernel entry rounds to exactly 1.0:
        # the decision function degenerates to its bias and every query
        # receives the majority label
        centers = {"a": (4.0, 0.0), "b": (0.0, 4.0), "c": (-3.0, -3.0)}
        rng = RngStream(1)
        X, y = [], []
        for label, count in (("a", 90), ("b", 30), ("c", 30)):
            for _ in range(count):
                X.append(np.array(centers[label]) + rng.normal(2, std=0.5))
                y.append(label)
        clf = train_kernel_svm(np.vstack(X), y, TrainConfig(gamma=1e-20), seed=0)
        queries = RngStream(2).normal((30, 2), std=3.0)
        assert all(clf.predict(q) == "a" for q in queries)

    def test_memorizes_single_point_per_class(self):
        X = np.array([[0.0, 0.0], [3.0, 3.0], [-3.0, 2.0]])
        y = ["a", "b", "c"]
        clf = train_kernel_svm(X, y, seed=0)
        assert [clf.predict(x) for x in X] == y


class TestLogreg:
    def test_gradient_matches_finite_diff(self):
        rng = RngStream(17)
        X = rng.normal((10, 4))
        y_idx = rng.integers(10, 3)
        for trial in range(3):
            W0 = RngStream(100 + trial).normal((3, 4))
            b0 = RngStream(200 + trial).normal(3)

            def f(theta):
                W = theta[:12].reshape(3, 4)
                b = theta[12:]
                return logreg_loss_and_grad(W, b, X, y_idx, lam=1e-3)[0]

            _, gW, gb = logreg_loss_and_grad(W0, b0, X, y_idx, lam=1e-3)
            analytic = np.concatenate([gW.ravel(), gb])
            numeric = finite_diff_grad(f, np.concatenate([W0.ravel(), b0]))
            assert max_relative_error(analytic, numeric) <= 1e-4

    def test_zero_weights_give_uniform_probabilities(self):
        state = {
            "config": {}, "labels": ["a", "b", "c", "d"],
            "weights": np.zeros((4, 2)).tolist(), "bias": np.zeros(4).tolist(),
        }
        clf = LogisticRegressionClassifier.from_state(state)
        scores = clf.predict_scores(np.array([5.0, -2.0]))
        assert np.allclose(scores, 0.25, atol=1e-12)

    def test_probabilities_sum_to_one(self):
        Xtr, ytr, Xte, _ = _blob_split()
        clf = train_logreg(Xtr, ytr, seed=0)
        for x in Xte[:20]:
            s = clf.predict_scores(x)
            assert abs(float(s.sum()) - 1.0) <= 1e-9
            assert np.all(s >= 0)

    def test_blobs_reference_run(self):
        Xtr, ytr, Xte, yte = _blob_split()
        clf = train_logreg(Xtr, ytr, seed=0)
        assert macro_f1([clf.predict(x) for x in Xte], yte, clf.labels_) >= 0.95


class TestKnn:
    def test_identity_at_k1(self):
        X = np.array([[0.0, 0.0], [5.0, 5.0]])
        clf = train_knn(X, ["A", "B"], TrainConfig(k_neighbors=1))
        assert clf.predict(np.array([0.0, 0.0])) == "A"

    def test_hand_majority(self):
        X = np.array([[0.0], [0.1], [5.0]])
        clf = train_knn(X, ["A", "A", "B"], TrainConfig(k_neighbors=3))
        assert clf.predict(np.array([0.05])) == "A"

    def test_k_exceeds_data_rejected(self):
        with pytest.raises(ArgumentError):
            train_knn(np.zeros((2, 1)), ["A", "B"], TrainConfig(k_neighbors=3))

    def test_vote_tie_broken_by_nearest(self):
        # K=2: one A at distance 1, one B at distance 2 -> tie on votes,
        # nearest neighbor is A
        X = np.array([[1.0], [2.0], [10.0]])
        clf = train_knn(X, ["A", "B", "B"], TrainConfig(k_neighbors=2))
        assert clf.predict(np.array([0.0])) == "A"

    def test_exhaustive_scan_oracle(self):
        rng = RngStream(31)
        X = rng.normal((60, 3))
        labels = ["u", "v", "w"]
        y = [labels[rng.randint(3)] for _ in range(60)]
        k = 5
        clf = train_knn(X, y, TrainConfig(k_neighbors=k))

        def oracle(q):
            scored = sorted(range(60), key=lambda i: (float(np.sum((X[i] - q) ** 2)), i))
            top = scored[:k]
            votes = {}
            for rank, i in enumerate(top):
                lab = y[i]
                votes.setdefault(lab, [0, rank])
                votes[lab][0] += 1
            # max votes; tie -> smaller first-occurrence rank in the k-list
            return max(votes, key=lambda lab: (votes[lab][0], -votes[lab][1]))

        for t in range(100):
            q = RngStream(500 + t).normal(3)
            assert clf.predict(q) == oracle(q)


class TestDecisionTree:
    def test_gini_hand_values(self):
        assert gini_impurity(np.array([2, 2])) == pytest.approx(0.5)
        assert gini_impurity(np.array([4, 0])) == 0.0
        assert gini_impurity(np.array([1, 1, 1, 1])) == pytest.approx(0.75)

    def test_pure_node_never_splits(self):
        # the left child {0, 1} is pure (all A): Gini 0, so it stays a leaf
        clf = train_decision_tree(np.array([[0.0], [1.0], [5.0]]), ["A", "A", "B"])
        assert gini_impurity(np.array([2, 0])) == 0.0
        assert clf.root.left.is_leaf and clf.root.right.is_leaf

    def test_single_split_at_midpoint(self):
        clf = train_decision_tree(np.array([[0.0], [1.0]]), ["A", "B"])
        assert not clf.root.is_leaf
        assert clf.root.threshold == pytest.approx(0.5)
        assert clf.predict(np.array([0.2])) == "A"
        assert clf.predict(np.array([0.9])) == "B"

    def test_consistent_data_reaches_full_training_accuracy(self):
        # includes the XOR arrangement, where the root split has zero Gini
        # gain but growth must continue
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = ["even", "odd", "odd", "even"]
        clf = train_decision_tree(X, y, TrainConfig(max_depth=10))
        assert [clf.predict(x) for x in X] == y
        Xb, yb = make_blobs(3, n=60)
        clf2 = train_decision_tree(Xb, yb, TrainConfig(max_depth=32))
        assert [clf2.predict(x) for x in Xb] == yb

    def test_max_depth_limits_growth(self):
        rng = RngStream(4)
        X = rng.normal((40, 2))
        y = [("A" if rng.uniform() < 0.5 else "B") for _ in range(40)]
        clf = train_decision_tree(X, y, TrainConfig(max_depth=1))

        def depth(node):
            if node.is_leaf:
                return 0
            return 1 + max(depth(node.left), depth(node.right))

        assert depth(clf.root) <= 1


class TestRandomForest:
    def test_reduces_to_decision_tree(self):
        Xtr, ytr, Xte, _ = _blob_split()
        d = Xtr.shape[1]
        cfg = TrainConfig(n_trees=1, rf_bootstrap=False, rf_features=d, max_depth=8)
        forest = train_random_forest(Xtr, ytr, cfg, seed=0)
        tree = train_decision_tree(Xtr, ytr, TrainConfig(max_depth=8))
        assert [forest.predict(x) for x in Xte] == [tree.predict(x) for x in Xte]

    def test_deterministic(self):
        Xtr, ytr, Xte, _ = _blob_split()
        cfg = TrainConfig(n_trees=12, max_depth=8)
        a = train_random_forest(Xtr, ytr, cfg, seed=7)
        b = train_random_forest(Xtr, ytr, cfg, seed=7)
        assert [a.predict(x) for x in Xte] == [b.predict(x) for x in Xte]

    def test_blobs_reference_run(self):
        Xtr, ytr, Xte, yte = _blob_split()
        clf = train_random_forest(Xtr, ytr, TrainConfig(n_trees=50, max_depth=16), seed=0)
        assert macro_f1([clf.predict(x) for x in Xte], yte, clf.labels_) >= 0.95


class TestFeedForward:
    def test_gradient_matches_finite_diff_through_both_layers(self):
        rng = RngStream(23)
        X = rng.normal((8, 3))
        y_idx = rng.integers(8, 3)
        shapes = [(3, 4), (4,), (4, 4), (4,), (4, 3), (3,)]
        sizes = [int(np.prod(s)) for s in shapes]

        def unpack(theta):
            parts = []
            at = 0
            for s, size in zip(shapes, sizes):
                parts.append(theta[at:at + size].reshape(s))
                at += size
            return parts

        for trial in range(3):
            theta0 = RngStream(700 + trial).normal(sum(sizes)) * 0.7

            def f(theta):
                return ffnn_loss_and_grad(unpack(theta), X, y_idx, lam=1e-3)[0]

            _, grads = ffnn_loss_and_grad(unpack(theta0), X, y_idx, lam=1e-3)
            analytic = np.concatenate([g.ravel() for g in grads])
            numeric = finite_diff_grad(f, theta0)
            assert max_relative_error(analytic, numeric) <= 1e-4

    def test_zero_final_layer_gives_uniform_probabilities(self):
        cfg = TrainConfig(hidden1=4, hidden2=4)
        clf = train_ffnn(np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]), ["a", "b", "c"],
                         TrainConfig(hidden1=4, hidden2=4, epochs=1), seed=0)
        state = clf.to_state()
        state["params"][4] = np.zeros((4, 3)).tolist()  # output weights
        state["params"][5] = np.zeros(3).tolist()       # output bias
        zeroed = FeedForwardClassifier.from_state(state)
        s = zeroed.predict_scores(np.array([9.0, -3.0]))
        assert np.allclose(s, 1.0 / 3.0, atol=1e-12)

    def test_xor_reference_run(self):
        X, y = make_xor(5)
        Xtr, ytr, Xte, yte = split_arrays(X, y, 0.25, 5)
        cfg = TrainConfig(hidden1=16, hidden2=16, epochs=60, lr=0.3)
        clf = train_ffnn(Xtr, ytr, cfg, seed=1)
        assert macro_f1([clf.predict(x) for x in Xte], yte, clf.labels_) >= 0.95

    def test_probabilities_sum_to_one(self):
        Xtr, ytr, Xte, _ = _blob_split()
        clf = train_ffnn(Xtr, ytr, TrainConfig(hidden1=8, hidden2=8, epochs=10), seed=0)
        s = clf.predict_scores(Xte[0])
        assert abs(float(s.sum()) - 1.0) <= 1e-9


class TestCosineNearest:
    def test_identity(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        clf = train_cosine_1nn(X, ["A", "B"])
        assert clf.predict(np.array([1.0, 0.0])) == "A"

    def test_scale_invariance(self):
        rng = RngStream(6)
        X = rng.normal((20, 4))
        y = [("A" if rng.uniform() < 0.5 else "B") for _ in range(20)]
        clf = train_cosine_1nn(X, y)
        for t in range(10):
            q = RngStream(900 + t).normal(4)
            assert clf.predict(q) == clf.predict(17.0 * q)

    def test_exhaustive_scan_oracle(self):
        rng = RngStream(41)
        X = rng.normal((50, 3))
        labels = ["p", "q", "r"]
        y = [labels[rng.randint(3)] for _ in range(50)]
        clf = train_cosine_1nn(X, y)

        def oracle(q):
            best_i, best_s = 0, -2.0
            for i in range(50):
                s = cosine_similarity(X[i], q)
                if s > best_s:
                    best_i, best_s = i, s
            return y[best_i]

        for t in range(100):
            q = RngStream(1200 + t).normal(3)
            assert clf.predict(q) == oracle(q)

    def test_zero_query_falls_back_deterministically(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        clf = train_cosine_1nn(X, ["B", "A"])
        # all similarities 0 -> lowest training index wins
        assert clf.predict(np.array([0.0, 0.0])) == "B"


class TestInterfaceContracts:
    def _all_models(self, Xtr, ytr):
        cfg_small = TrainConfig(hidden1=8, hidden2=8, epochs=8, n_trees=10, max_depth=8)
        return [
            train_linear_svm(Xtr, ytr, seed=3),
            train_kernel_svm(Xtr, ytr, seed=3),
            train_logreg(Xtr, ytr, seed=3),
            train_knn(Xtr, ytr, TrainConfig(k_neighbors=3)),
            train_decision_tree(Xtr, ytr, cfg_small),
            train_random_forest(Xtr, ytr, cfg_small, seed=3),
            train_ffnn(Xtr, ytr, cfg_small, seed=3),
            train_cosine_1nn(Xtr, ytr),
        ]

    def test_predictions_in_label_set_and_deterministic(self):
        Xtr, ytr, Xte, _ = _blob_split(seed=2)
        models_a = self._all_models(Xtr, ytr)
        models_b = self._all_models(Xtr, ytr)
        for ma, mb in zip(models_a, models_b):
            pa = [ma.predict(x) for x in Xte]
            pb = [mb.predict(x) for x in Xte]
            assert pa == pb, ma.kind
            assert set(pa) <= set(ma.labels_)

    def test_argmax_models_agree_with_scores(self):
        Xtr, ytr, Xte, _ = _blob_split(seed=2)
        for clf in self._all_models(Xtr, ytr):
            if clf.kind in ("knn", "cosine-1nn"):
                continue  # these use their stated instance-based tie rules
            for x in Xte[:10]:
                scores = clf.predict_scores(x)
                assert clf.predict(x) == clf.labels_[int(np.argmax(scores))]

    def test_persistence_round_trip(self, tmp_path):
        Xtr, ytr, Xte, _ = _blob_split(seed=4)
        for clf in self._all_models(Xtr, ytr):
            p = tmp_path / f"{clf.kind}.json"
            save_model(clf, p)
            back = load_model(p)
            assert back.kind == clf.kind
            assert [back.predict(x) for x in Xte] == [clf.predict(x) for x in Xte]
            for x in Xte[:5]:
                assert np.array_equal(back.predict_scores(x), clf.predict_scores(x))


class TestTrainConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ArgumentError):
            TrainConfig(epochs=0)
        with pytest.raises(ArgumentError):
            TrainConfig(val_fraction=0.9)
        with pytest.raises(ArgumentError):
            TrainConfig(k_neighbors=-1)
