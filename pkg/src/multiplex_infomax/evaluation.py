"""Downstream evaluation of embeddings: clustering, similarity search,
and linear classification."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .graphs import AttributedMultiplexNetwork, SplitMasks


@dataclass
class EvalReport:
    nmi: float
    sim_at_k: float
    macro_f1: float
    micro_f1: float
    k: int
    restarts: int
    seed: int

    def __post_init__(self):
        for name in ("nmi", "sim_at_k", "macro_f1", "micro_f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractError(f"{name}={value} outside [0, 1]")

    def as_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    def as_table(self) -> str:
        rows = [
            ("clustering NMI", self.nmi),
            (f"similarity Sim@{self.k}", self.sim_at_k),
            ("classification Macro-F1", self.macro_f1),
            ("classification Micro-F1", self.micro_f1),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value:.4f}" for name, value in rows)


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return (diff * diff).sum(axis=2)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            pick = rng.integers(n)
        else:
            pick = rng.choice(n, p=closest / total)
        centroids[j] = points[pick]
        closest = np.minimum(closest, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray,
           max_iter: int = 300, tol: float = 1e-8
           ) -> tuple[np.ndarray, float, list[float]]:
    k = centroids.shape[0]
    assignments = np.zeros(points.shape[0], dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _squared_distances(points, centroids)
        assignments = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(points)), assignments].sum()))
        new_centroids = centroids.copy()
        for j in range(k):
            members = points[assignments == j]
            if len(members) == 0:
                # re-seed an empty cluster at the point farthest from its centroid
                farthest = d2[np.arange(len(points)), assignments].argmax()
                new_centroids[j] = points[farthest]
            else:
                new_centroids[j] = members.mean(axis=0)
        shift = np.abs(new_centroids - centroids).max()
        centroids = new_centroids
        if shift < tol:
            break
    d2 = _squared_distances(points, centroids)
    assignments = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(points)), assignments].sum())
    history.append(inertia)
    return assignments, inertia, history


def kmeans_cluster(points: np.ndarray, k: int, restarts: int = 10,
                   seed: int = 0) -> np.ndarray:
    """Best-inertia k-means assignment over several k-means++ restarts."""
    points = np.asarray(points, dtype=np.float64)
    if k < 1:
        raise ContractError("k must be at least 1")
    if points.shape[0] < k:
        raise ContractError("need at least k points")
    if restarts < 1:
        raise ContractError("restarts must be at least 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    best_assign, best_inertia = None, np.inf
    for _ in range(restarts):
        centroids = _kmeans_pp_init(points, k, rng)
        assignments, inertia, _ = _lloyd(points, centroids)
        if inertia < best_inertia:
            best_assign, best_inertia = assignments, inertia
    return best_assign


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def normalized_mutual_information(labels_a, labels_b) -> float:
    """Mutual information over the geometric mean of the entropies.

    Natural logs, I(a;b) = H(a) + H(b) - H(a,b); identical partitions score
    exactly 1. When both partitions are single-cluster the value is 1; when
    exactly one is, it is 0.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise ContractError("label sequences must be equal-length and nonempty")
    n = len(a)
    _, a_ids = np.unique(a, return_inverse=True)
    _, b_ids = np.unique(b, return_inverse=True)
    table = np.zeros((a_ids.max() + 1, b_ids.max() + 1))
    np.add.at(table, (a_ids, b_ids), 1.0)
    entropy_a = _entropy(table.sum(axis=1), n)
    entropy_b = _entropy(table.sum(axis=0), n)
    if entropy_a == 0.0 and entropy_b == 0.0:
        return 1.0
    if entropy_a == 0.0 or entropy_b == 0.0:
        return 0.0
    entropy_joint = _entropy(table.reshape(-1), n)
    mutual = entropy_a + entropy_b - entropy_joint
    return float(min(1.0, max(0.0, mutual / np.sqrt(entropy_a * entropy_b))))


def similarity_at_k(embeddings: np.ndarray, labels: np.ndarray,
                    queries: np.ndarray, k: int = 5) -> float:
    """Mean same-class fraction among each query's top-k cosine neighbors.

    Candidates are all labeled nodes except the query itself; ties are
    broken by ascending node index; zero-norm rows rank last.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    queries = np.asarray(queries, dtype=np.int64)
    pool = np.nonzero(labels >= 0)[0]
    if k < 1 or k >= embeddings.shape[0]:
        raise ContractError("k must satisfy 1 <= k < n")
    if len(pool) - 1 < k:
        raise ContractError("not enough labeled candidates for the requested k")
    if len(queries) == 0:
        raise ContractError("query set is empty")
    if not set(queries.tolist()) <= set(pool.tolist()):
        raise ContractError("queries must be labeled nodes")
    norms = np.linalg.norm(embeddings, axis=1)
    unit = np.zeros_like(embeddings)
    nonzero = norms > 0
    unit[nonzero] = embeddings[nonzero] / norms[nonzero, None]
    fractions = []
    for q in queries:
        candidates = pool[pool != q]
        sims = unit[candidates] @ unit[q]
        sims[norms[candidates] == 0] = -np.inf
        if norms[q] == 0:
            sims = np.full(len(candidates), -np.inf)
        order = np.lexsort((candidates, -sims))
        top = candidates[order[:k]]
        fractions.append(float((labels[top] == labels[q]).mean()))
    return float(np.mean(fractions))


def _f1_counts(y_true: np.ndarray, y_pred: np.ndarray, classes: int
               ) -> tuple[float, float]:
    tp = np.zeros(classes)
    fp = np.zeros(classes)
    fn = np.zeros(classes)
    for c in range(classes):
        tp[c] = ((y_pred == c) & (y_true == c)).sum()
        fp[c] = ((y_pred == c) & (y_true != c)).sum()
        fn[c] = ((y_pred != c) & (y_true == c)).sum()
    denom = 2 * tp + fp + fn
    per_class = np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1), 0.0)
    macro = float(per_class.mean())
    micro = float(tp.sum() / (tp.sum() + 0.5 * (fp.sum() + fn.sum())))
    return macro, micro


def logistic_regression_classify(embeddings: np.ndarray, labels: np.ndarray,
                                 splits: SplitMasks, l2: float = 1e-4,
                                 learning_rate: float = 0.1,
                                 max_iter: int = 5000,
                                 tol: float = 1e-6) -> tuple[float, float]:
    """Macro and Micro F1 of a multinomial logistic head on frozen embeddings.

    Full-batch gradient descent from a zero initialization (the objective is
    convex, so the solver is deterministic) until the gradient norm drops
    below ``tol`` or the iteration budget runs out.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    train, test = np.asarray(splits.train), np.asarray(splits.test)
    if len(train) == 0 or len(test) == 0:
        raise ContractError("classification needs nonempty train and test splits")
    classes = int(labels[labels >= 0].max()) + 1
    x_train = embeddings[train]
    y_train = labels[train]
    onehot = np.zeros((len(train), classes))
    onehot[np.arange(len(train)), y_train] = 1.0
    d = embeddings.shape[1]
    weights = np.zeros((d, classes))
    bias = np.zeros((1, classes))
    m = len(train)
    for _ in range(max_iter):
        logits = x_train @ weights + bias
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        delta = (probs - onehot) / m
        grad_w = x_train.T @ delta + 2.0 * l2 * weights
        grad_b = delta.sum(axis=0, keepdims=True)
        norm = np.sqrt((grad_w ** 2).sum() + (grad_b ** 2).sum())
        if norm < tol:
            break
        weights -= learning_rate * grad_w
        bias -= learning_rate * grad_b
    predictions = (embeddings[test] @ weights + bias).argmax(axis=1)
    return _f1_counts(labels[test], predictions, classes)


def evaluate_embeddings(network: AttributedMultiplexNetwork,
                        embeddings: np.ndarray, k: int = 5,
                        restarts: int = 10, seed: int = 0) -> EvalReport:
    """The full report: k-means NMI over labeled nodes, Sim@k with the test
    split as queries, and F1 from a logistic head on the train/test splits."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if network.labels is None:
        raise ContractError("evaluation needs a labeled network")
    if embeddings.shape[0] != network.n:
        raise ContractError(f"embeddings have {embeddings.shape[0]} rows, "
                            f"network has {network.n} nodes")
    labeled = network.labeled_indices()
    assignments = kmeans_cluster(embeddings[labeled], network.classes,
                                 restarts=restarts, seed=seed)
    nmi = normalized_mutual_information(network.labels[labeled], assignments)
    queries = network.split_indices("test")
    sim = similarity_at_k(embeddings, network.labels, queries, k=k)
    masks = SplitMasks.of(network)
    macro, micro = logistic_regression_classify(embeddings, network.labels, masks)
    return EvalReport(nmi=nmi, sim_at_k=sim, macro_f1=macro, micro_f1=micro,
                      k=k, restarts=restarts, seed=seed)
