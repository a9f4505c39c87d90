"""Grid runner tests: composition consistency with standalone runs, rerun
determinism, per-cell failure isolation, shared embedding tables, and the
output file formats."""

import numpy as np
import pytest

from intentbench.classifiers import TrainConfig, train_logreg
from intentbench.data import generate_codemix, stratified_split
from intentbench.encoders import (
    CountEncoder,
    random_sentence_vectors,
    random_word_embeddings,
    write_sentence_vectors,
    write_word_embeddings,
)
from intentbench.errors import ArgumentError, DataError
from intentbench.evaluation import macro_f1
from intentbench.grid import (
    CellSpec,
    GridSpec,
    _assert_split,
    _digest,
    format_matrix_tsv,
    load_grid_dataset,
    parse_dataset_spec,
    parse_spec_string,
    run_grid,
)
from intentbench.numerics import derive_seed, stack_vectors


def _tiny_spec(tmp_path=None, recurrent=False, classifiers=None, encoders=None):
    enc = encoders or [CellSpec("Count", "count"), CellSpec("Tfidf", "tfidf")]
    clf = classifiers or [
        CellSpec("LogReg", "logreg", {"epochs": 15}),
        CellSpec("Cosine", "cosine-1nn"),
    ]
    kw = {}
    if recurrent:
        kw["recurrent"] = [CellSpec("GRU", "gru", {"hidden": 8, "epochs": 2})]
        kw["recurrent_embeddings"] = [CellSpec("SG8", "sgns", {"dim": 8, "epochs": 2})]
    return GridSpec(
        seed=7, dataset="codemix:seed=5,per-intent=12",
        encoders=enc, classifiers=clf, test_fraction=0.25, **kw,
    )


class TestSpecParsing:
    def test_spec_string_round_trip(self):
        kind, opts = parse_spec_string("lsa source=tfidf k=50 lr=0.5 path=a/b.txt")
        assert kind == "lsa"
        assert opts == {"source": "tfidf", "k": 50, "lr": 0.5, "path": "a/b.txt"}

    def test_spec_string_rejects_bare_words(self):
        with pytest.raises(ArgumentError):
            parse_spec_string("knn five")

    def test_dataset_spec(self):
        assert parse_dataset_spec("codemix:seed=3,per-intent=10") == (
            "codemix", {"seed": 3, "per-intent": 10})
        assert parse_dataset_spec("some/file.tsv") == ("path", {"path": "some/file.tsv"})
        with pytest.raises(ArgumentError):
            parse_dataset_spec("codemix:seed=3,bogus=1")

    def test_grid_spec_validation(self):
        with pytest.raises(ArgumentError):
            GridSpec(seed=1, dataset="d", encoders=[], classifiers=[CellSpec("a", "logreg")])
        with pytest.raises(ArgumentError):
            GridSpec(seed=1, dataset="d",
                     encoders=[CellSpec("c", "count")],
                     classifiers=[CellSpec("a", "logreg")],
                     recurrent=[CellSpec("r", "gru")])  # missing embedding columns

    def test_unknown_kind_rejected(self):
        with pytest.raises(ArgumentError):
            GridSpec(seed=1, dataset="d",
                     encoders=[CellSpec("c", "bert")],
                     classifiers=[CellSpec("a", "logreg")])


class TestRunGrid:
    def test_shape_and_scores_populated(self):
        result = run_grid(_tiny_spec())
        assert len(result.scores) == 2 and len(result.scores[0]) == 2
        for row in result.scores:
            for value in row:
                assert value is not None and 0.0 <= value <= 100.0

    def test_single_cell_matches_standalone_run(self):
        spec = GridSpec(
            seed=11, dataset="codemix:seed=5,per-intent=12",
            encoders=[CellSpec("Count", "count")],
            classifiers=[CellSpec("LogReg", "logreg", {"epochs": 15})],
            test_fraction=0.25,
        )
        result = run_grid(spec)
        # standalone pipeline under the same derived seeds
        ds = load_grid_dataset(spec.dataset)
        train, test = stratified_split(ds, 0.25, seed=derive_seed(11, "split"))
        enc = CountEncoder().fit(train)
        x_train = stack_vectors([enc.encode(u) for u, _ in train.records], dim=enc.dim)
        x_test = stack_vectors([enc.encode(u) for u, _ in test.records], dim=enc.dim)
        clf = train_logreg(x_train, train.label_column(),
                           TrainConfig(epochs=15), seed=derive_seed(11, 0, 0))
        score = macro_f1(clf.predict_many(x_test), test.label_column(), ds.labels)
        assert result.scores[0][0] == round(score * 100.0, 2)

    def test_rerun_bit_identical(self):
        a = run_grid(_tiny_spec(recurrent=True))
        b = run_grid(_tiny_spec(recurrent=True))
        assert a.scores == b.scores
        assert a.recurrent_scores == b.recurrent_scores
        assert format_matrix_tsv(a.classifier_names, a.encoder_names, a.scores, a.errors) \
            == format_matrix_tsv(b.classifier_names, b.encoder_names, b.scores, b.errors)

    def test_failed_cell_isolated(self):
        spec = _tiny_spec(classifiers=[
            CellSpec("BadKnn", "knn", {"k": 10_000}),  # k exceeds training size
            CellSpec("LogReg", "logreg", {"epochs": 10}),
        ])
        result = run_grid(spec)
        assert (0, 0) in result.errors and (0, 1) in result.errors
        assert result.scores[0][0] is None
        assert result.scores[1][0] is not None  # remaining rows unaffected

    def test_embedding_table_shared_across_columns(self):
        # the avg column's score must not depend on whether a sibling
        # idf-avg column is also present (one table per hyperparameter set)
        base = GridSpec(
            seed=3, dataset="codemix:seed=5,per-intent=12",
            encoders=[CellSpec("SG-Avg", "sgns-avg", {"dim": 8, "epochs": 2})],
            classifiers=[CellSpec("Cosine", "cosine-1nn")],
            test_fraction=0.25,
        )
        both = GridSpec(
            seed=3, dataset="codemix:seed=5,per-intent=12",
            encoders=[
                CellSpec("SG-Avg", "sgns-avg", {"dim": 8, "epochs": 2}),
                CellSpec("SG-IdfAvg", "sgns-idfavg", {"dim": 8, "epochs": 2}),
            ],
            classifiers=[CellSpec("Cosine", "cosine-1nn")],
            test_fraction=0.25,
        )
        assert run_grid(base).scores[0][0] == run_grid(both).scores[0][0]

    def test_external_columns(self, tmp_path):
        ds = load_grid_dataset("codemix:seed=5,per-intent=12")
        tokens = {t for u, _ in ds.records for t in u.tokens}
        wp = tmp_path / "w.txt"
        write_word_embeddings(random_word_embeddings(tokens, 16, seed=2), wp)
        sp = tmp_path / "s.txt"
        sent = random_sentence_vectors([u.text for u, _ in ds.records], 16, seed=2)
        write_sentence_vectors(sent.vectors, 16, sp)
        spec = GridSpec(
            seed=5, dataset="codemix:seed=5,per-intent=12",
            encoders=[
                CellSpec("ExtWord", "external-word", {"path": str(wp)}),
                CellSpec("ExtSent", "external-sentence", {"path": str(sp)}),
            ],
            classifiers=[CellSpec("Cosine", "cosine-1nn")],
            test_fraction=0.25,
        )
        result = run_grid(spec)
        assert all(v is not None for row in result.scores for v in row)

    def test_split_digest_guard(self):
        ds = generate_codemix(seed=1, n_per_intent=3)
        digest = _digest(ds)
        _assert_split(ds, digest, "train")
        tampered = generate_codemix(seed=2, n_per_intent=3)
        with pytest.raises(DataError):
            _assert_split(tampered, digest, "train")

    def test_outputs_written(self, tmp_path):
        out = tmp_path / "results"
        run_grid(_tiny_spec(recurrent=True), out_dir=out)
        for name in ("results.tsv", "recurrent.tsv", "tables.txt", "manifest.txt"):
            assert (out / name).exists(), name
        tsv = (out / "results.tsv").read_text()
        assert tsv.startswith("classifier\tCount\tTfidf")
        manifest = (out / "manifest.txt").read_text()
        assert "[grid]" in manifest and "seed = 7" in manifest
        assert "dataset-digest = sha256:" in manifest

    def test_jobs_parallel_matches_serial(self):
        serial = run_grid(_tiny_spec())
        spec = _tiny_spec()
        spec.jobs = 2
        parallel = run_grid(spec)
        assert serial.scores == parallel.scores


class TestFormatting:
    def test_failed_cells_marked(self):
        tsv = format_matrix_tsv(["A"], ["X", "Y"], [[12.34, None]], {(0, 1): "boom"})
        lines = tsv.strip().split("\n")
        assert lines[1] == "A\t12.34\tFAILED"
