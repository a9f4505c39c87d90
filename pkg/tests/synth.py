"""Seeded synthetic datasets shared by classifier, recurrent, and acceptance
tests."""

import numpy as np

from intentbench.data import LabeledDataset, Utterance
from intentbench.numerics import RngStream


def make_blobs(seed, n=200, std=0.5):
    """Three angularly separated Gaussian blobs in 2-D (separable for every
    classifier family, including cosine-based ones)."""
    centers = np.array([[4.0, 0.0], [0.0, 4.0], [-3.0, -3.0]])
    names = ["a", "b", "c"]
    rng = RngStream(seed).derive("blobs")
    X = np.empty((n, 2))
    y = []
    for i in range(n):
        c = i % 3
        X[i] = centers[c] + rng.normal(2, std=std)
        y.append(names[c])
    return X, y


def make_xor(seed, n=200, noise=0.15):
    """Four corner clusters at (+-1, +-1) labeled by coordinate-sign parity;
    linearly inseparable by construction."""
    rng = RngStream(seed).derive("xor")
    X = np.empty((n, 2))
    y = []
    for i in range(n):
        sx = 1.0 if rng.uniform() < 0.5 else -1.0
        sy = 1.0 if rng.uniform() < 0.5 else -1.0
        X[i] = [sx, sy] + rng.normal(2, std=noise)
        y.append("even" if sx * sy > 0 else "odd")
    return X, y


def split_arrays(X, y, test_fraction, seed):
    """Stratified array split mirroring the dataset splitter's contract."""
    rng = RngStream(seed).derive("array-split")
    by_class = {}
    for i, label in enumerate(y):
        by_class.setdefault(label, []).append(i)
    test_idx = []
    for label in sorted(by_class):
        members = list(by_class[label])
        rng.derive(label).shuffle(members)
        take = int(np.floor(len(members) * test_fraction + 0.5))
        test_idx.extend(members[:take])
    test_set = set(test_idx)
    train_idx = [i for i in range(len(y)) if i not in test_set]
    test_idx = sorted(test_idx)
    return (X[train_idx], [y[i] for i in train_idx], X[test_idx], [y[i] for i in test_idx])


def make_order_task(seed, n=400, vocab_extra=("c", "d", "e", "f", "g", "h")):
    """Order-sensitive binary task: every utterance contains markers 'a' and
    'b' exactly once amid filler tokens; the label says which came first.
    Bag-of-words representations carry no label signal by construction."""
    rng = RngStream(seed).derive("order-task")
    pairs = []
    for _ in range(n):
        length = 4 + rng.randint(5)
        tokens = [vocab_extra[rng.randint(len(vocab_extra))] for _ in range(length)]
        i = rng.randint(length)
        j = rng.randint(length - 1)
        if j >= i:
            j += 1
        first, second = (i, j) if i < j else (j, i)
        a_first = rng.uniform() < 0.5
        tokens[first] = "a" if a_first else "b"
        tokens[second] = "b" if a_first else "a"
        pairs.append((" ".join(tokens), "ab" if a_first else "ba"))
    return LabeledDataset.from_pairs(pairs)
