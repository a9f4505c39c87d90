"""Intent-detection toolkit for code-mixed text: from-scratch vectorizers and
classifiers plus a benchmark grid runner reporting macro-averaged F1."""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    INTENT_LABELS,
    LabeledDataset,
    Utterance,
    Vocabulary,
    build_vocabulary,
    generate_codemix,
    load_dataset,
    save_dataset,
    stratified_split,
    tokenize,
)
from .errors import IntentBenchError  # noqa: F401
from .evaluation import EvalReport, evaluate, macro_f1  # noqa: F401
from .numerics import (  # noqa: F401
    RngStream,
    SparseVector,
    cosine_similarity,
    finite_diff_grad,
    truncated_svd,
)
