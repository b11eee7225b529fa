import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egoprior import RegionMask, context_features, neighbor_set
from egoprior.context import frame_context_matrix


def centroids_and_vectors(rng, count, dim=77):
    centroids = rng.uniform(0, 40, size=(count, 2))
    vectors = rng.uniform(-1, 1, size=(count, dim))
    return centroids, vectors


class TestNeighborSet:
    def test_all_others_when_fewer_than_n(self):
        rng = np.random.default_rng(0)
        centroids, vectors = centroids_and_vectors(rng, 3)
        nbrs = neighbor_set(0, centroids, vectors, n=2)
        assert set(nbrs.neighbor_ids) == {1, 2}

    def test_identical_neighbors_pool_to_same_vector(self):
        centroids = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        v = np.arange(5.0)
        vectors = np.stack([np.zeros(5), v, v])
        nbrs = neighbor_set(0, centroids, vectors, n=2)
        assert nbrs.phi_min == pytest.approx(v)
        assert nbrs.phi_mean == pytest.approx(v)
        assert nbrs.phi_max == pytest.approx(v)

    def test_pooling_arithmetic(self):
        centroids = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        vectors = np.zeros((4, 3))
        vectors[1, 0], vectors[2, 0], vectors[3, 0] = 1.0, 2.0, 3.0
        nbrs = neighbor_set(0, centroids, vectors, n=3)
        assert nbrs.phi_min[0] == 1.0
        assert nbrs.phi_mean[0] == 2.0
        assert nbrs.phi_max[0] == 3.0

    def test_ordered_by_distance_then_id(self):
        centroids = np.array([[0.0, 0.0], [0.0, 2.0], [2.0, 0.0], [0.0, 1.0]])
        vectors = np.zeros((4, 2))
        nbrs = neighbor_set(0, centroids, vectors, n=3)
        assert nbrs.neighbor_ids == (3, 1, 2)  # tie between 1 and 2 -> lower id

    def test_no_other_regions(self):
        rng = np.random.default_rng(1)
        centroids, vectors = centroids_and_vectors(rng, 1, dim=4)
        nbrs = neighbor_set(0, centroids, vectors, n=5)
        assert nbrs.neighbor_ids == ()
        out = context_features(vectors[0], nbrs, k=2)
        assert np.all(out == 0.0)
        assert out.shape == (5 * 4,)


class TestContextFeatures:
    def test_identical_target_and_neighbors_all_zero(self):
        rng = np.random.default_rng(2)
        v = rng.uniform(0, 1, 77)
        centroids = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        vectors = np.stack([v, v, v])
        nbrs = neighbor_set(0, centroids, vectors, n=2)
        out = context_features(v, nbrs, k=3)
        assert out.shape == (6 * 77,)
        assert np.all(out == 0.0)

    def test_k_zero_length(self):
        rng = np.random.default_rng(3)
        centroids, vectors = centroids_and_vectors(rng, 4)
        nbrs = neighbor_set(1, centroids, vectors, n=3)
        assert context_features(vectors[1], nbrs, k=0).shape == (231,)

    def test_min_difference_entry(self):
        centroids = np.array([[0.0, 0.0], [1.0, 0.0]])
        target = np.array([5.0, 0.0])
        other = np.array([2.0, 0.0])
        nbrs = neighbor_set(0, centroids, np.stack([target, other]), n=1)
        out = context_features(target, nbrs, k=0)
        assert out[0] == pytest.approx(3.0)

    def test_length_mismatch_rejected(self):
        centroids = np.array([[0.0, 0.0], [1.0, 0.0]])
        vectors = np.zeros((2, 4))
        nbrs = neighbor_set(0, centroids, vectors, n=1)
        with pytest.raises(ValueError):
            context_features(np.zeros(5), nbrs, k=1)

    @given(st.integers(min_value=0, max_value=4), st.integers(min_value=2, max_value=8))
    @settings(max_examples=40, deadline=None)
    def test_nonnegative_and_fixed_length(self, k, count):
        rng = np.random.default_rng(17)
        centroids, vectors = centroids_and_vectors(rng, count, dim=11)
        nbrs = neighbor_set(0, centroids, vectors, n=3)
        out = context_features(vectors[0], nbrs, k=k)
        assert out.shape == ((3 + k) * 11,)
        assert np.all(out >= 0.0)

    def test_input_order_irrelevant(self):
        rng = np.random.default_rng(4)
        centroids, vectors = centroids_and_vectors(rng, 6, dim=9)
        nbrs = neighbor_set(2, centroids, vectors, n=4)
        out_a = context_features(vectors[2], nbrs, k=2)
        # permute the NON-target regions; region ids follow the new order,
        # but distance-based selection plus id tie-break is order-free here
        perm = np.array([0, 1, 2, 5, 4, 3])
        nbrs_p = neighbor_set(2, centroids[perm], vectors[perm], n=4)
        out_b = context_features(vectors[2], nbrs_p, k=2)
        assert out_a == pytest.approx(out_b)


class TestFrameContextMatrix:
    def test_shapes(self):
        rng = np.random.default_rng(5)
        masks = []
        for i in range(4):
            m = np.zeros((16, 16), dtype=bool)
            m[i * 3 : i * 3 + 2, 5:8] = True
            masks.append(RegionMask(m))
        base = rng.uniform(0, 1, size=(4, 77))
        out = frame_context_matrix(masks, base, n=3, k=2)
        assert out.shape == (4, 5 * 77)

    def test_empty_frame(self):
        out = frame_context_matrix([], np.zeros((0, 77)), n=3, k=2)
        assert out.shape == (0, 5 * 77)
