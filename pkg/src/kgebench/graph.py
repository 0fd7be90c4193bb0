"""Triple dataset loading, vocabularies, and synthetic graph generation.

Datasets are directories with three UTF-8 TSV files (``train.txt``,
``valid.txt``, ``test.txt``), one ``head<TAB>relation<TAB>tail`` fact per
line, no header. Vocabularies are built over the union of the three splits
in first-appearance order (train, then valid, then test), so index
assignment is a deterministic function of file contents alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DatasetNotFoundError, TripleParseError

SPLIT_FILES = ("train.txt", "valid.txt", "test.txt")


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass
class Vocabulary:
    """Bijective label <-> dense index map, indices assigned in insertion order."""

    index_of: dict[str, int] = field(default_factory=dict)
    labels: list[str] = field(default_factory=list)

    def add(self, label: str) -> int:
        idx = self.index_of.get(label)
        if idx is None:
            idx = len(self.labels)
            self.index_of[label] = idx
            self.labels.append(label)
        return idx

    def encode(self, label: str) -> int:
        return self.index_of[label]

    def decode(self, index: int) -> str:
        return self.labels[index]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class DatasetStats:
    n_entities: int
    n_relations: int
    n_train: int
    n_valid: int
    n_test: int

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.n_entities, self.n_relations, self.n_train, self.n_valid, self.n_test)


@dataclass
class KnowledgeGraph:
    """Immutable-by-convention container for an encoded triple dataset.

    Splits are int32 arrays of shape (n, 3) with columns (head, relation,
    tail); safe to share read-only across threads.
    """

    entities: Vocabulary
    relations: Vocabulary
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    name: str = ""

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def all_triples(self) -> np.ndarray:
        return np.concatenate([self.train, self.validation, self.test], axis=0)


def _empty_split() -> np.ndarray:
    return np.empty((0, 3), dtype=np.int32)


def _parse_split(path: str) -> list[tuple[str, str, str]]:
    rows: list[tuple[str, str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.endswith("\n"):
                line = line[:-1]
            fields = [f.strip() for f in line.split("\t")]
            if len(fields) != 3:
                raise TripleParseError(
                    f"expected 3 tab-separated fields, got {len(fields)}", path, line_no
                )
            if not all(fields):
                raise TripleParseError("empty field after whitespace trimming", path, line_no)
            rows.append((fields[0], fields[1], fields[2]))
    return rows


def load_dataset(
    dir_path: str | os.PathLike,
    split_files: tuple[str, str, str] = SPLIT_FILES,
) -> KnowledgeGraph:
    """Load and encode a three-split triple dataset from ``dir_path``.

    Raises DatasetNotFoundError if the directory or any split file is
    missing, and TripleParseError (with file and line number) on malformed
    lines.
    """
    dir_path = os.fspath(dir_path)
    if not os.path.isdir(dir_path):
        raise DatasetNotFoundError(f"dataset directory not found: {dir_path}")
    paths = [os.path.join(dir_path, name) for name in split_files]
    for p in paths:
        if not os.path.isfile(p):
            raise DatasetNotFoundError(f"missing split file: {p}")

    raw_splits = [_parse_split(p) for p in paths]

    entities = Vocabulary()
    relations = Vocabulary()
    encoded: list[np.ndarray] = []
    for raw in raw_splits:
        if not raw:
            encoded.append(_empty_split())
            continue
        arr = np.empty((len(raw), 3), dtype=np.int32)
        for i, (h, r, t) in enumerate(raw):
            arr[i, 0] = entities.add(h)
            arr[i, 1] = relations.add(r)
            arr[i, 2] = entities.add(t)
        encoded.append(arr)

    return KnowledgeGraph(
        entities=entities,
        relations=relations,
        train=encoded[0],
        validation=encoded[1],
        test=encoded[2],
        name=os.path.basename(os.path.normpath(dir_path)),
    )


def stats(kg: KnowledgeGraph) -> DatasetStats:
    return DatasetStats(
        n_entities=kg.n_entities,
        n_relations=kg.n_relations,
        n_train=len(kg.train),
        n_valid=len(kg.validation),
        n_test=len(kg.test),
    )


def generate_synthetic(
    n_entities: int,
    n_relations: int,
    pattern: str = "ring",
    seed: int = 0,
) -> KnowledgeGraph:
    """Build a deterministic desk-scale test graph.

    Pattern ``ring`` links entity i to entity (i+1) mod n via relation 0 and
    holds out every 10th triple (1-based: ring edges at positions 10, 20, ...)
    as the test split; the validation split is empty. ``seed`` is accepted for
    signature stability across patterns; the ring construction is fully
    deterministic and does not consume randomness.

    The relation vocabulary always contains all ``n_relations`` labels even if
    a pattern uses only relation 0.
    """
    if n_entities < 2:
        raise ValueError(f"n_entities must be >= 2, got {n_entities}")
    if n_relations < 1:
        raise ValueError(f"n_relations must be >= 1, got {n_relations}")
    if pattern != "ring":
        raise ValueError(f"unknown synthetic pattern: {pattern!r}")

    entities = Vocabulary()
    for i in range(n_entities):
        entities.add(f"e{i}")
    relations = Vocabulary()
    for j in range(n_relations):
        relations.add(f"r{j}")

    heads = np.arange(n_entities, dtype=np.int32)
    tails = (heads + 1) % n_entities
    edges = np.stack([heads, np.zeros(n_entities, dtype=np.int32), tails], axis=1)

    positions = np.arange(1, n_entities + 1)
    test_mask = positions % 10 == 0
    return KnowledgeGraph(
        entities=entities,
        relations=relations,
        train=edges[~test_mask],
        validation=_empty_split(),
        test=edges[test_mask],
        name=f"ring-{n_entities}",
    )
