import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiplex_infomax.autodiff import SparseMatrix
from multiplex_infomax.errors import ContractError, DegenerateDegreeError
from multiplex_infomax.graphs import (AttributedMultiplexNetwork, SplitMasks,
                                      corrupt_attributes,
                                      generate_synthetic_multiplex,
                                      normalize_adjacency)


def _dense_normalize(dense: np.ndarray, w: float) -> np.ndarray:
    """Independent oracle: full dense arithmetic for the degree normalization."""
    augmented = dense + w * np.eye(dense.shape[0])
    inv_sqrt = np.diag(1.0 / np.sqrt(augmented.sum(axis=1)))
    return inv_sqrt @ augmented @ inv_sqrt


class TestNormalizeAdjacency:
    def test_single_isolated_node_with_self_weight(self):
        out = normalize_adjacency(SparseMatrix(1, 1, [], [], []), 3.0)
        np.testing.assert_allclose(out.to_dense(), [[1.0]], atol=1e-15)

    def test_two_node_edge_unit_self_weight(self):
        adj = SparseMatrix(2, 2, [0, 1], [1, 0], [1.0, 1.0])
        np.testing.assert_allclose(normalize_adjacency(adj, 1.0).to_dense(),
                                   np.full((2, 2), 0.5), atol=1e-15)

    def test_three_node_path_matches_dense_oracle(self):
        dense = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        got = normalize_adjacency(SparseMatrix.from_dense(dense), 3.0).to_dense()
        np.testing.assert_allclose(got, _dense_normalize(dense, 3.0), atol=1e-12)

    @pytest.mark.parametrize("n,seed", [(4, 0), (11, 1), (32, 2), (32, 3)])
    def test_random_graphs_match_dense_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        upper = np.triu(rng.random((n, n)) < 0.3, k=1)
        dense = (upper | upper.T).astype(float)
        got = normalize_adjacency(SparseMatrix.from_dense(dense), 3.0).to_dense()
        np.testing.assert_allclose(got, _dense_normalize(dense, 3.0), atol=1e-12)

    def test_symmetry_preserved(self):
        rng = np.random.default_rng(4)
        upper = np.triu(rng.random((9, 9)) < 0.4, k=1)
        dense = (upper | upper.T).astype(float)
        out = normalize_adjacency(SparseMatrix.from_dense(dense), 2.0).to_dense()
        np.testing.assert_array_equal(out, out.T)

    def test_isolated_node_without_self_weight_fails(self):
        adj = SparseMatrix(3, 3, [0, 1], [1, 0], [1.0, 1.0])  # node 2 isolated
        with pytest.raises(DegenerateDegreeError, match="node 2"):
            normalize_adjacency(adj, 0.0)

    def test_self_loop_input_rejected(self):
        adj = SparseMatrix(2, 2, [0], [0], [1.0])
        with pytest.raises(ContractError, match="zero diagonal"):
            normalize_adjacency(adj, 1.0)

    def test_negative_self_weight_rejected(self):
        with pytest.raises(ContractError):
            normalize_adjacency(SparseMatrix(1, 1, [], [], []), -1.0)


class TestCorruptAttributes:
    def test_identity_permutation(self):
        x = np.arange(12.0).reshape(4, 3)
        np.testing.assert_array_equal(corrupt_attributes(x, np.arange(4)), x)

    def test_two_node_swap(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(corrupt_attributes(x, [1, 0]),
                                      [[3.0, 4.0], [1.0, 2.0]])

    def test_row_multiset_preserved(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(10, 4))
        shuffled = corrupt_attributes(x, rng.permutation(10))
        order = lambda m: m[np.lexsort(m.T)]
        np.testing.assert_array_equal(order(shuffled), order(x))

    def test_input_not_modified(self):
        x = np.arange(6.0).reshape(3, 2)
        before = x.copy()
        corrupt_attributes(x, [2, 0, 1])
        np.testing.assert_array_equal(x, before)

    @pytest.mark.parametrize("perm", [[0, 0, 1], [0, 1], [0, 1, 3]])
    def test_invalid_permutation_rejected(self, perm):
        with pytest.raises(ContractError, match="bijection"):
            corrupt_attributes(np.zeros((3, 2)), perm)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_corruption_row_multiset_property(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(8, 3))
    shuffled = corrupt_attributes(x, rng.permutation(8))
    order = lambda m: m[np.lexsort(m.T)]
    np.testing.assert_array_equal(order(shuffled), order(x))


class TestGenerator:
    def test_full_intra_no_inter_gives_class_cliques(self):
        net = generate_synthetic_multiplex(12, 3, [(1.0, 0.0)], attr_dim=6,
                                           attr_noise=0.0, seed=0)
        dense = net.adjacencies[0].to_dense()
        same = net.labels[:, None] == net.labels[None, :]
        expected = same.astype(float) - np.eye(12)
        np.testing.assert_array_equal(dense, expected)

    def test_zero_probabilities_give_edgeless_graphs(self):
        net = generate_synthetic_multiplex(9, 3, [(0.0, 0.0), (0.0, 0.0)],
                                           attr_dim=6, attr_noise=0.1, seed=1)
        assert all(adj.nnz == 0 for adj in net.adjacencies)

    def test_intra_class_edge_counts_within_four_sigma(self):
        net = generate_synthetic_multiplex(300, 3, [(0.1, 0.01), (0.1, 0.01)],
                                           attr_dim=50, attr_noise=0.2, seed=2)
        same = net.labels[:, None] == net.labels[None, :]
        pairs = int(np.triu(same, k=1).sum())
        mean = pairs * 0.1
        sigma = np.sqrt(pairs * 0.1 * 0.9)
        for adj in net.adjacencies:
            intra = int(sum(1 for i, j in zip(adj.row_idx, adj.col_idx)
                            if i < j and net.labels[i] == net.labels[j]))
            assert abs(intra - mean) <= 4 * sigma

    def test_balanced_classes(self):
        net = generate_synthetic_multiplex(10, 3, [(0.2, 0.1)], attr_dim=9,
                                           attr_noise=0.0, seed=3)
        sizes = np.bincount(net.labels)
        assert sizes.max() - sizes.min() <= 1

    def test_noise_free_attributes_are_class_blocks(self):
        net = generate_synthetic_multiplex(9, 3, [(0.5, 0.1)], attr_dim=7,
                                           attr_noise=0.0, seed=4)
        block = 7 // 3
        for i in range(9):
            expected = np.zeros(7)
            expected[net.labels[i] * block:(net.labels[i] + 1) * block] = 1.0
            np.testing.assert_array_equal(net.attributes[i], expected)

    def test_deterministic_under_seed(self):
        a = generate_synthetic_multiplex(40, 2, [(0.3, 0.05)], attr_dim=8,
                                         attr_noise=0.3, seed=9)
        b = generate_synthetic_multiplex(40, 2, [(0.3, 0.05)], attr_dim=8,
                                         attr_noise=0.3, seed=9)
        np.testing.assert_array_equal(a.attributes, b.attributes)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert list(a.splits) == list(b.splits)
        for adj_a, adj_b in zip(a.adjacencies, b.adjacencies):
            np.testing.assert_array_equal(adj_a.row_idx, adj_b.row_idx)
            np.testing.assert_array_equal(adj_a.col_idx, adj_b.col_idx)

    def test_splits_partition_each_class(self):
        net = generate_synthetic_multiplex(60, 3, [(0.2, 0.02)], attr_dim=9,
                                           attr_noise=0.1, seed=5)
        masks = SplitMasks.of(net)
        assert len(masks.train) and len(masks.val) and len(masks.test)
        assert len(masks.train) + len(masks.val) + len(masks.test) == 60
        for c in range(3):
            assert (net.labels[masks.train] == c).any()

    def test_attr_dim_below_classes_rejected(self):
        with pytest.raises(ContractError, match="attr_dim"):
            generate_synthetic_multiplex(12, 4, [(0.5, 0.1)], attr_dim=3,
                                         attr_noise=0.0, seed=0)

    def test_bad_probabilities_rejected(self):
        with pytest.raises(ContractError):
            generate_synthetic_multiplex(12, 3, [(0.1, 0.5)], attr_dim=6,
                                         attr_noise=0.0, seed=0)


class TestNetworkValidation:
    def _attrs(self, n):
        return np.ones((n, 2))

    def test_asymmetric_adjacency_rejected(self):
        adj = SparseMatrix(3, 3, [0], [1], [1.0])
        with pytest.raises(ContractError, match="symmetric"):
            AttributedMultiplexNetwork(["r"], [adj], self._attrs(3))

    def test_self_loop_rejected(self):
        adj = SparseMatrix(2, 2, [0, 0, 1], [0, 1, 0], [1.0, 1.0, 1.0])
        with pytest.raises(ContractError, match="self-loop"):
            AttributedMultiplexNetwork(["r"], [adj], self._attrs(2))

    def test_nonbinary_adjacency_rejected(self):
        adj = SparseMatrix(2, 2, [0, 1], [1, 0], [2.0, 2.0])
        with pytest.raises(ContractError, match="binary"):
            AttributedMultiplexNetwork(["r"], [adj], self._attrs(2))

    def test_labeled_nodes_need_split_tags(self):
        adj = SparseMatrix(2, 2, [0, 1], [1, 0], [1.0, 1.0])
        with pytest.raises(ContractError, match="split"):
            AttributedMultiplexNetwork(["r"], [adj], self._attrs(2), classes=2,
                                       labels=np.array([0, 1]))

    def test_split_on_unlabeled_node_rejected(self):
        adj = SparseMatrix(2, 2, [0, 1], [1, 0], [1.0, 1.0])
        with pytest.raises(ContractError, match="exactly the labeled"):
            AttributedMultiplexNetwork(
                ["r"], [adj], self._attrs(2), classes=2,
                labels=np.array([0, -1]),
                splits=np.array(["train", "test"], dtype=object))

    def test_overlapping_split_masks_rejected(self):
        with pytest.raises(ContractError, match="overlap"):
            SplitMasks(np.array([0, 1]), np.array([1]), np.array([2]))
