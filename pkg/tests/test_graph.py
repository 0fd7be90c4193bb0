import numpy as np
import pytest

from kgebench import generate_synthetic, load_dataset, stats
from kgebench.errors import DatasetNotFoundError, TripleParseError
from kgebench.graph import KnowledgeGraph, Vocabulary


def test_minimal_dataset(dataset_dir):
    kg = load_dataset(dataset_dir([("a", "r", "b")]))
    assert stats(kg).as_tuple() == (2, 1, 1, 0, 0)
    assert kg.train.tolist() == [[0, 0, 1]]


def test_first_appearance_order(dataset_dir):
    d = dataset_dir(
        train=[("b", "r2", "a"), ("a", "r1", "c")],
        valid=[("d", "r2", "b")],
        test=[("e", "r3", "a")],
    )
    kg = load_dataset(d)
    assert kg.entities.labels == ["b", "a", "c", "d", "e"]
    assert kg.relations.labels == ["r2", "r1", "r3"]
    assert kg.train.tolist() == [[0, 0, 1], [1, 1, 2]]
    assert kg.validation.tolist() == [[3, 0, 0]]
    assert kg.test.tolist() == [[4, 2, 1]]


def test_load_is_deterministic(dataset_dir):
    d = dataset_dir(
        train=[("x", "p", "y"), ("y", "q", "z")],
        valid=[("z", "p", "x")],
        test=[("x", "q", "z")],
    )
    a = load_dataset(d)
    b = load_dataset(d)
    assert a.entities.labels == b.entities.labels
    assert a.relations.labels == b.relations.labels
    for split in ("train", "validation", "test"):
        assert np.array_equal(getattr(a, split), getattr(b, split))


def test_missing_directory():
    with pytest.raises(DatasetNotFoundError):
        load_dataset("/nonexistent/dataset/dir")


def test_missing_split_file(dataset_dir, tmp_path):
    d = dataset_dir([("a", "r", "b")])
    (d / "valid.txt").unlink()
    with pytest.raises(DatasetNotFoundError):
        load_dataset(d)


def test_malformed_line_reports_position(dataset_dir, tmp_path):
    d = dataset_dir([("a", "r", "b")])
    with open(d / "train.txt", "a", encoding="utf-8") as fh:
        fh.write("only\ttwo\n")
    with pytest.raises(TripleParseError) as exc:
        load_dataset(d)
    assert exc.value.line_no == 2
    assert "train.txt" in exc.value.path


def test_empty_field_rejected(dataset_dir):
    d = dataset_dir([("a", "  ", "b")])
    with pytest.raises(TripleParseError):
        load_dataset(d)


def test_whitespace_trimmed(dataset_dir):
    kg = load_dataset(dataset_dir([(" a ", "  r", " b ")]))
    assert kg.entities.labels == ["a", "b"]
    assert kg.relations.labels == ["r"]


def test_vocabulary_round_trip():
    vocab = Vocabulary()
    labels = ["alpha", "beta", "gamma"]
    for lb in labels:
        vocab.add(lb)
    for lb in labels:
        assert vocab.decode(vocab.encode(lb)) == lb
    assert len(vocab) == 3


def test_decoded_triples_round_trip(dataset_dir):
    rows = [("n1", "likes", "n2"), ("n2", "knows", "n3"), ("n3", "likes", "n1")]
    kg = load_dataset(dataset_dir(rows))
    decoded = [
        (kg.entities.decode(h), kg.relations.decode(r), kg.entities.decode(t))
        for h, r, t in kg.train
    ]
    assert decoded == rows


def test_empty_graph_stats():
    empty = np.empty((0, 3), dtype=np.int32)
    kg = KnowledgeGraph(Vocabulary(), Vocabulary(), empty, empty, empty)
    assert stats(kg).as_tuple() == (0, 0, 0, 0, 0)


class TestSyntheticRing:
    def test_ten_entities(self):
        kg = generate_synthetic(10, 1, "ring", 7)
        assert stats(kg).as_tuple() == (10, 1, 9, 0, 1)
        # the 10th edge (head 9) is the held-out one
        assert kg.test.tolist() == [[9, 0, 0]]

    def test_two_entities_holdout_boundary(self):
        # fewer than 10 edges: nothing reaches the holdout positions, so
        # the test split is empty and train keeps the full ring
        kg = generate_synthetic(2, 1, "ring", 0)
        assert [0, 0, 1] in kg.train.tolist()
        assert [1, 0, 0] in kg.train.tolist()
        assert len(kg.test) == 0

    def test_degenerate_sizes(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, 1, "ring", 0)
        with pytest.raises(ValueError):
            generate_synthetic(10, 0, "ring", 0)

    def test_unknown_pattern(self):
        with pytest.raises(ValueError):
            generate_synthetic(10, 1, "spiral", 0)

    def test_deterministic(self):
        a = generate_synthetic(30, 2, "ring", 3)
        b = generate_synthetic(30, 2, "ring", 3)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.test, b.test)
        assert a.entities.labels == b.entities.labels

    def test_fifty_entities_split(self):
        kg = generate_synthetic(50, 1, "ring", 0)
        assert stats(kg).as_tuple() == (50, 1, 45, 0, 5)
        heads = sorted(kg.test[:, 0].tolist())
        assert heads == [9, 19, 29, 39, 49]

    def test_all_indices_valid(self):
        kg = generate_synthetic(37, 3, "ring", 0)
        for split in (kg.train, kg.validation, kg.test):
            if len(split):
                assert split[:, 0].max() < kg.n_entities
                assert split[:, 2].max() < kg.n_entities
                assert split[:, 1].max() < kg.n_relations
