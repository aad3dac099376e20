"""Reverse-mode automatic differentiation over dense/sparse float64 matrices.

Every value is a 2-D ``numpy`` array wrapped in a :class:`Tensor`. Operations
build a define-by-run graph; :func:`backward` walks it in reverse topological
order and accumulates gradients additively. The graph is rebuilt on every
evaluation, which keeps the engine trivially correct at the scale this
package targets (thousands of nodes, not millions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, NonFiniteError, ShapeMismatchError

Array = np.ndarray


def _as_matrix(value) -> Array:
    out = np.asarray(value, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D matrix, got shape {out.shape}")
    return out


def _check_finite(value: Array, what: str) -> None:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"{what} contains NaN or Inf")


@dataclass
class SparseMatrix:
    """Coordinate-list sparse matrix with sorted, deduplicated entries.

    Sparse matrices are constants in the computation graph (they hold
    normalized adjacencies); gradients never flow into their values.
    """

    rows: int
    cols: int
    row_idx: Array
    col_idx: Array
    values: Array

    def __post_init__(self):
        self.row_idx = np.asarray(self.row_idx, dtype=np.int64)
        self.col_idx = np.asarray(self.col_idx, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if not (len(self.row_idx) == len(self.col_idx) == len(self.values)):
            raise ContractError("sparse index/value arrays differ in length")
        if len(self.row_idx):
            if self.row_idx.min() < 0 or self.row_idx.max() >= self.rows:
                raise ContractError("sparse row index out of range")
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.cols:
                raise ContractError("sparse column index out of range")
        _check_finite(self.values, "sparse values")
        order = np.lexsort((self.col_idx, self.row_idx))
        self.row_idx = self.row_idx[order]
        self.col_idx = self.col_idx[order]
        self.values = self.values[order]
        if len(self.row_idx) > 1:
            same = (np.diff(self.row_idx) == 0) & (np.diff(self.col_idx) == 0)
            if same.any():
                raise ContractError("duplicate (row, col) entry in sparse matrix")

    @property
    def nnz(self) -> int:
        return len(self.values)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = _as_matrix(dense)
        r, c = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], r, c, dense[r, c])

    def to_dense(self) -> Array:
        out = np.zeros((self.rows, self.cols))
        out[self.row_idx, self.col_idx] = self.values
        return out

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.cols, self.rows, self.col_idx, self.row_idx, self.values)

    def permuted(self, permutation: Array) -> "SparseMatrix":
        """Return P, with P[i, j] = self[perm[i], perm[j]] (square matrices only)."""
        if self.rows != self.cols:
            raise ContractError("permuted() requires a square matrix")
        perm = np.asarray(permutation, dtype=np.int64)
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(len(perm))
        return SparseMatrix(self.rows, self.cols,
                            inverse[self.row_idx], inverse[self.col_idx], self.values)

    def matmul_dense(self, dense: Array) -> Array:
        """self @ dense, accumulating nonzero terms in (row, col) order."""
        if dense.shape[0] != self.cols:
            raise ShapeMismatchError(
                f"sparse {self.rows}x{self.cols} @ dense {dense.shape[0]}x{dense.shape[1]}")
        out = np.zeros((self.rows, dense.shape[1]))
        np.add.at(out, self.row_idx, self.values[:, None] * dense[self.col_idx])
        return out


class Tensor:
    """A node of the computation graph: a 2-D float64 value plus backward hook."""

    __slots__ = ("value", "parents", "_backward", "is_param", "grad", "name")

    def __init__(self, value, parents: tuple = (), backward: Callable | None = None,
                 is_param: bool = False, name: str = ""):
        self.value = _as_matrix(value)
        _check_finite(self.value, name or "tensor value")
        self.parents = parents
        self._backward = backward
        self.is_param = is_param
        self.grad: Array | None = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = self.name or ("param" if self.is_param else "tensor")
        return f"Tensor({tag}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(value, name: str = "") -> Tensor:
    return Tensor(value, is_param=True, name=name)


def constant(value, name: str = "") -> Tensor:
    return Tensor(value, name=name)


def _result(value: Array, parents, backward, name="") -> Tensor:
    out = Tensor(value, parents=tuple(parents), backward=backward, name=name)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul {a.shape} @ {b.shape}: inner dimensions differ")
    out_value = a.value @ b.value

    def backward(g):
        return g @ b.value.T, a.value.T @ g

    return _result(out_value, (a, b), backward, "matmul")


def spmm(sparse: SparseMatrix, dense: Tensor) -> Tensor:
    out_value = sparse.matmul_dense(dense.value)

    def backward(g):
        grad = np.zeros_like(dense.value)
        np.add.at(grad, sparse.col_idx, sparse.values[:, None] * g[sparse.row_idx])
        return (grad,)

    return _result(out_value, (dense,), backward, "spmm")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"add {a.shape} + {b.shape}: shapes differ")

    def backward(g):
        return g, g

    return _result(a.value + b.value, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"sub {a.shape} - {b.shape}: shapes differ")

    def backward(g):
        return g, -g

    return _result(a.value - b.value, (a, b), backward, "sub")


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def backward(g):
        return (factor * g,)

    return _result(factor * a.value, (a,), backward, "scale")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of same-shape matrices."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mul {a.shape} * {b.shape}: shapes differ")

    def backward(g):
        return g * b.value, g * a.value

    return _result(a.value * b.value, (a, b), backward, "mul")


def mul_const(a: Tensor, weights: Array) -> Tensor:
    """Elementwise product with a fixed array (masks, one-hot targets)."""
    weights = _as_matrix(weights)
    if a.shape != weights.shape:
        raise ShapeMismatchError(f"mul_const {a.shape} * {weights.shape}: shapes differ")

    def backward(g):
        return (g * weights,)

    return _result(a.value * weights, (a,), backward, "mul_const")


def transpose(a: Tensor) -> Tensor:
    def backward(g):
        return (g.T,)

    return _result(a.value.T, (a,), backward, "transpose")


def row_broadcast(row: Tensor, n: int) -> Tensor:
    """Tile a 1 x d row vector to n x d."""
    if row.shape[0] != 1:
        raise ShapeMismatchError(f"row_broadcast expects a 1 x d row, got {row.shape}")

    def backward(g):
        return (g.sum(axis=0, keepdims=True),)

    return _result(np.repeat(row.value, n, axis=0), (row,), backward, "row_broadcast")


def col_broadcast(col: Tensor, d: int) -> Tensor:
    """Tile an n x 1 column vector to n x d."""
    if col.shape[1] != 1:
        raise ShapeMismatchError(f"col_broadcast expects an n x 1 column, got {col.shape}")

    def backward(g):
        return (g.sum(axis=1, keepdims=True),)

    return _result(np.repeat(col.value, d, axis=1), (col,), backward, "col_broadcast")


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0

    def backward(g):
        return (g * mask,)

    return _result(np.where(mask, a.value, 0.0), (a,), backward, "relu")


def _sigmoid(x: Array) -> Array:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out_value = _sigmoid(a.value)

    def backward(g):
        return (g * out_value * (1.0 - out_value),)

    return _result(out_value, (a,), backward, "sigmoid")


def _log_sigmoid(x: Array) -> Array:
    # log(sigma(x)) = -softplus(-x), branch for stability at both tails
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                    x - np.log1p(np.exp(-np.abs(x))))


def log_sigmoid(a: Tensor) -> Tensor:
    out_value = _log_sigmoid(a.value)

    def backward(g):
        return (g * _sigmoid(-a.value),)

    return _result(out_value, (a,), backward, "log_sigmoid")


def _row_softmax(x: Array) -> Array:
    shifted = x - x.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def row_softmax(a: Tensor) -> Tensor:
    out_value = _row_softmax(a.value)

    def backward(g):
        inner = (g * out_value).sum(axis=1, keepdims=True)
        return (out_value * (g - inner),)

    return _result(out_value, (a,), backward, "row_softmax")


def row_log_softmax(a: Tensor) -> Tensor:
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out_value = shifted - log_z
    soft = np.exp(out_value)

    def backward(g):
        return (g - soft * g.sum(axis=1, keepdims=True),)

    return _result(out_value, (a,), backward, "row_log_softmax")


def mean_rows(a: Tensor) -> Tensor:
    """Column means: n x d -> 1 x d."""
    n = a.shape[0]
    if n == 0:
        raise ShapeMismatchError("mean_rows on an empty matrix")

    def backward(g):
        return (np.repeat(g / n, n, axis=0),)

    return _result(a.value.mean(axis=0, keepdims=True), (a,), backward, "mean_rows")


def max_rows(a: Tensor) -> Tensor:
    """Columnwise max: n x d -> 1 x d. Gradient routes to the first argmax row."""
    if a.shape[0] == 0:
        raise ShapeMismatchError("max_rows on an empty matrix")
    argmax = a.value.argmax(axis=0)

    def backward(g):
        grad = np.zeros_like(a.value)
        grad[argmax, np.arange(a.shape[1])] = g[0]
        return (grad,)

    return _result(a.value.max(axis=0, keepdims=True), (a,), backward, "max_rows")


def square(a: Tensor) -> Tensor:
    def backward(g):
        return (2.0 * a.value * g,)

    return _result(a.value * a.value, (a,), backward, "square")


def sum_all(a: Tensor) -> Tensor:
    def backward(g):
        return (np.full_like(a.value, g[0, 0]),)

    return _result(np.array([[a.value.sum()]]), (a,), backward, "sum_all")


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise dot products: two n x d matrices -> n x 1."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"row_dot {a.shape} . {b.shape}: shapes differ")

    def backward(g):
        return g * b.value, g * a.value

    return _result((a.value * b.value).sum(axis=1, keepdims=True), (a, b), backward, "row_dot")


def hconcat(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeMismatchError("hconcat of an empty sequence")
    n = parts[0].shape[0]
    for p in parts:
        if p.shape[0] != n:
            raise ShapeMismatchError("hconcat operands differ in row count")
    widths = [p.shape[1] for p in parts]
    bounds = np.cumsum([0] + widths)

    def backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _result(np.concatenate([p.value for p in parts], axis=1), parts,
                   backward, "hconcat")


def col_slice(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[1]):
        raise ShapeMismatchError(f"col_slice [{start}:{stop}] outside 0..{a.shape[1]}")

    def backward(g):
        grad = np.zeros_like(a.value)
        grad[:, start:stop] = g
        return (grad,)

    return _result(a.value[:, start:stop].copy(), (a,), backward, "col_slice")


def _topological_order(loss: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, params: Sequence[Tensor]) -> list[Array]:
    """Gradient of a scalar loss with respect to each parameter tensor.

    Parameters that do not feed the loss get an all-zero gradient. Every
    visited node's ``.grad`` is (re)set, so stale gradients from a previous
    graph never leak into the current step.
    """
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a scalar (1x1) loss, got shape {loss.shape}")
    order = _topological_order(loss)
    for node in order:
        node.grad = np.zeros_like(node.value)
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._backward is None or not node.parents:
            continue
        parent_grads = node._backward(node.grad)
        for parent, grad in zip(node.parents, parent_grads):
            parent.grad = parent.grad + grad
    results = []
    in_graph = {id(node) for node in order}
    for p in params:
        if id(p) not in in_graph:
            p.grad = np.zeros_like(p.value)
        results.append(p.grad.copy())
    return results


def finite_difference_oracle(loss_fn: Callable[[list[Array]], float],
                             params: Sequence[Array],
                             step: float = 1e-6) -> list[Array]:
    """Central-difference gradient estimate, one coordinate at a time.

    ``loss_fn`` must be a deterministic scalar function of the parameter
    list. This is the reference the reverse-mode engine is tested against;
    it deliberately shares no code with :func:`backward`.
    """
    if step <= 0:
        raise ContractError("finite difference step must be positive")
    work = [np.array(p, dtype=np.float64, copy=True) for p in params]
    grads = [np.zeros_like(p) for p in work]
    for k, p in enumerate(work):
        flat = p.reshape(-1)
        grad_flat = grads[k].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            hi = loss_fn(work)
            flat[i] = saved - step
            lo = loss_fn(work)
            flat[i] = saved
            grad_flat[i] = (hi - lo) / (2.0 * step)
    return grads
