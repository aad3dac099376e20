"""Attributed multiplex network data model and graph-side operations.

A multiplex network is one node set connected by several relation types,
each with its own binary symmetric adjacency, plus an n x f attribute
matrix and optional per-node labels and train/val/test split tags.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import SparseMatrix
from .errors import ContractError, DegenerateDegreeError

SPLIT_TAGS = ("train", "val", "test")


@dataclass
class AttributedMultiplexNetwork:
    relation_names: list[str]
    adjacencies: list[SparseMatrix]
    attributes: np.ndarray
    classes: int = 0
    labels: np.ndarray | None = None    # -1 marks an unlabeled node
    splits: np.ndarray | None = None    # "" marks an untagged node

    def __post_init__(self):
        self.attributes = np.asarray(self.attributes, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.splits is not None:
            self.splits = np.asarray(self.splits, dtype=object)
        self.validate()

    @property
    def n(self) -> int:
        return self.attributes.shape[0]

    @property
    def num_attributes(self) -> int:
        return self.attributes.shape[1]

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def validate(self) -> None:
        if self.num_relations < 1:
            raise ContractError("a multiplex network needs at least one relation")
        if len(self.adjacencies) != self.num_relations:
            raise ContractError("relation names and adjacencies differ in count")
        if self.attributes.ndim != 2:
            raise ContractError("attributes must be an n x f matrix")
        n = self.n
        for name, adj in zip(self.relation_names, self.adjacencies):
            if adj.rows != n or adj.cols != n:
                raise ContractError(f"adjacency '{name}' is {adj.rows}x{adj.cols}, expected {n}x{n}")
            if (adj.row_idx == adj.col_idx).any():
                raise ContractError(f"adjacency '{name}' has self-loops")
            if adj.nnz and not (adj.values == 1.0).all():
                raise ContractError(f"adjacency '{name}' is not binary")
            if not _is_symmetric(adj):
                raise ContractError(f"adjacency '{name}' is not symmetric")
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise ContractError("labels must have one entry per node")
            labeled = self.labels >= 0
            if labeled.any():
                if self.classes < 1:
                    raise ContractError("labeled network must declare a class count")
                if self.labels[labeled].max() >= self.classes:
                    raise ContractError("label id out of range for declared class count")
                if self.splits is None:
                    raise ContractError("labeled nodes must carry split tags")
        if self.splits is not None:
            if self.splits.shape != (self.n,):
                raise ContractError("splits must have one entry per node")
            tagged = np.array([s != "" for s in self.splits])
            for s in self.splits[tagged]:
                if s not in SPLIT_TAGS:
                    raise ContractError(f"unknown split tag {s!r}")
            labeled = (self.labels >= 0) if self.labels is not None else np.zeros(self.n, bool)
            if not np.array_equal(tagged, labeled):
                raise ContractError("split tags must cover exactly the labeled nodes")

    def labeled_indices(self) -> np.ndarray:
        if self.labels is None:
            return np.array([], dtype=np.int64)
        return np.nonzero(self.labels >= 0)[0]

    def split_indices(self, tag: str) -> np.ndarray:
        if tag not in SPLIT_TAGS:
            raise ContractError(f"unknown split tag {tag!r}")
        if self.splits is None:
            return np.array([], dtype=np.int64)
        return np.array([i for i, s in enumerate(self.splits) if s == tag], dtype=np.int64)


@dataclass
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        seen = set()
        for part in (self.train, self.val, self.test):
            for i in part:
                if int(i) in seen:
                    raise ContractError("split index sets overlap")
                seen.add(int(i))

    @classmethod
    def of(cls, network: AttributedMultiplexNetwork) -> "SplitMasks":
        return cls(network.split_indices("train"),
                   network.split_indices("val"),
                   network.split_indices("test"))


def _is_symmetric(adj: SparseMatrix) -> bool:
    t = adj.transpose()
    return (np.array_equal(adj.row_idx, t.row_idx)
            and np.array_equal(adj.col_idx, t.col_idx)
            and np.array_equal(adj.values, t.values))


def normalize_adjacency(adj: SparseMatrix, self_weight: float) -> SparseMatrix:
    """Symmetric degree normalization with weighted self-connections.

    Adds ``self_weight`` to every diagonal entry, then rescales each entry
    (i, j) by the inverse square roots of the row sums of the augmented
    matrix. The result is symmetric whenever the input is.
    """
    if adj.rows != adj.cols:
        raise ContractError("normalize_adjacency requires a square matrix")
    if self_weight < 0:
        raise ContractError("self-connection weight must be nonnegative")
    if adj.nnz and adj.values.min() < 0:
        raise ContractError("adjacency values must be nonnegative")
    if (adj.row_idx == adj.col_idx).any():
        raise ContractError("input adjacency must have a zero diagonal; "
                            "self-connections are injected here exactly once")
    n = adj.rows
    if self_weight > 0:
        row_idx = np.concatenate([adj.row_idx, np.arange(n)])
        col_idx = np.concatenate([adj.col_idx, np.arange(n)])
        values = np.concatenate([adj.values, np.full(n, float(self_weight))])
    else:
        row_idx, col_idx, values = adj.row_idx, adj.col_idx, adj.values
    degrees = np.zeros(n)
    np.add.at(degrees, row_idx, values)
    if (degrees <= 0).any():
        bad = int(np.nonzero(degrees <= 0)[0][0])
        raise DegenerateDegreeError(
            f"node {bad} has zero augmented degree; isolated nodes need self_weight > 0")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    return SparseMatrix(n, n, row_idx, col_idx,
                        values * inv_sqrt[row_idx] * inv_sqrt[col_idx])


def corrupt_attributes(attributes: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    """Row-shuffled copy of the attribute matrix: row i of the output is
    row permutation[i] of the input."""
    attributes = np.asarray(attributes, dtype=np.float64)
    perm = np.asarray(permutation, dtype=np.int64)
    n = attributes.shape[0]
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ContractError("permutation must be a bijection on node indices")
    return attributes[perm].copy()


def generate_synthetic_multiplex(n: int,
                                 classes: int,
                                 relations: list[tuple[float, float]],
                                 attr_dim: int,
                                 attr_noise: float,
                                 seed: int,
                                 relation_names: list[str] | None = None,
                                 ) -> AttributedMultiplexNetwork:
    """Planted-partition benchmark with class-indicator attributes.

    Nodes get balanced class assignments. Per relation, each intra-class
    pair edges with probability p_in and each inter-class pair with p_out
    (symmetric, no self-loops). Attributes start as a one-hot class block
    of width attr_dim // classes, then every entry is flipped independently
    with probability ``attr_noise``. Labeled nodes get per-class splits of
    roughly 10% train, 10% val, 80% test. Deterministic under ``seed``.
    """
    if classes < 2:
        raise ContractError("need at least two classes")
    if attr_dim < classes:
        raise ContractError("attr_dim must be at least the class count")
    if n < 3 * classes:
        raise ContractError("need at least three nodes per class for splits")
    if not 0.0 <= attr_noise <= 1.0:
        raise ContractError("attr_noise must lie in [0, 1]")
    for p_in, p_out in relations:
        if not 0.0 <= p_out <= p_in <= 1.0:
            raise ContractError("relation probabilities need 0 <= p_out <= p_in <= 1")
    if relation_names is None:
        relation_names = [f"rel{i}" for i in range(len(relations))]
    if len(relation_names) != len(relations):
        raise ContractError("one name per relation required")

    seeds = np.random.SeedSequence(seed).spawn(2 + len(relations))
    rng_attr = np.random.Generator(np.random.PCG64(seeds[0]))
    rng_split = np.random.Generator(np.random.PCG64(seeds[1]))

    # balanced contiguous class blocks; sizes differ by at most one
    bounds = [round(c * n / classes) for c in range(classes + 1)]
    labels = np.empty(n, dtype=np.int64)
    for c in range(classes):
        labels[bounds[c]:bounds[c + 1]] = c

    adjacencies = []
    same_class = labels[:, None] == labels[None, :]
    for k, (p_in, p_out) in enumerate(relations):
        rng_rel = np.random.Generator(np.random.PCG64(seeds[2 + k]))
        prob = np.where(same_class, p_in, p_out)
        draws = rng_rel.random((n, n))
        upper = np.triu(draws < prob, k=1)
        rows, cols = np.nonzero(upper | upper.T)
        adjacencies.append(SparseMatrix(n, n, rows, cols, np.ones(len(rows))))

    block = attr_dim // classes
    attributes = np.zeros((n, attr_dim))
    for i in range(n):
        attributes[i, labels[i] * block:(labels[i] + 1) * block] = 1.0
    flips = rng_attr.random((n, attr_dim)) < attr_noise
    attributes = np.abs(attributes - flips.astype(np.float64))

    splits = np.array([""] * n, dtype=object)
    for c in range(classes):
        members = np.nonzero(labels == c)[0]
        members = rng_split.permutation(members)
        n_train = max(1, round(0.1 * len(members)))
        n_val = max(1, round(0.1 * len(members)))
        splits[members[:n_train]] = "train"
        splits[members[n_train:n_train + n_val]] = "val"
        splits[members[n_train + n_val:]] = "test"

    return AttributedMultiplexNetwork(
        relation_names=list(relation_names),
        adjacencies=adjacencies,
        attributes=attributes,
        classes=classes,
        labels=labels,
        splits=splits,
    )
