"""Neighbor-context features: elementwise distances between a region's base
vector and min/mean/max-pooled neighbor vectors plus the k nearest ones.

Neighborhoods are defined by centroid Euclidean distance (ties broken by
region id), with n = 32 neighbors and k = 3 nearest by default. A region
with no other regions in the frame gets an all-zero context block, and
fewer than k neighbors pad with zero blocks, so the output length is
always (3 + k) * 77.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import RegionMask
from .features import BASE_DIM

DEFAULT_N_NEIGHBORS = 32
DEFAULT_KNN = 3


@dataclass(frozen=True, eq=False)
class NeighborSet:
    """Nearest regions to a target plus their pooled feature vectors."""

    target: int
    neighbor_ids: tuple[int, ...]
    neighbor_vectors: np.ndarray  # (m, dim), ordered like neighbor_ids
    phi_min: np.ndarray
    phi_mean: np.ndarray
    phi_max: np.ndarray


def neighbor_set(
    target: int,
    centroids: np.ndarray,
    vectors: np.ndarray,
    n: int = DEFAULT_N_NEIGHBORS,
) -> NeighborSet:
    """The n regions nearest to `target` by centroid distance.

    `centroids` is (R, 2) in (row, col); `vectors` is the (R, dim) matrix of
    base features. Pooled vectors are elementwise min/mean/max over exactly
    the selected neighbors. With no other regions the set is empty.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    vectors = np.asarray(vectors, dtype=np.float64)
    n_regions = centroids.shape[0]
    if not 0 <= target < n_regions:
        raise ValueError("target region id out of range")
    others = np.array([i for i in range(n_regions) if i != target], dtype=np.int64)
    if others.size == 0:
        dim = vectors.shape[1]
        empty = np.zeros((0, dim))
        zero = np.zeros(dim)
        return NeighborSet(target, (), empty, zero, zero, zero)
    dists = np.linalg.norm(centroids[others] - centroids[target], axis=1)
    order = np.lexsort((others, dists))
    chosen = others[order][:n]
    vecs = vectors[chosen]
    return NeighborSet(
        target=target,
        neighbor_ids=tuple(int(i) for i in chosen),
        neighbor_vectors=vecs,
        phi_min=vecs.min(axis=0),
        phi_mean=vecs.mean(axis=0),
        phi_max=vecs.max(axis=0),
    )


def context_features(
    target_vec: np.ndarray, nbrs: NeighborSet, k: int = DEFAULT_KNN
) -> np.ndarray:
    """(3 + k) * dim absolute-difference context block for one region.

    Order: |t - min|, |t - mean|, |t - max|, then |t - nearest_j| for
    j = 1..k; missing neighbors contribute zero blocks, and a region with
    no neighbors at all yields an all-zero output.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    target_vec = np.asarray(target_vec, dtype=np.float64)
    dim = target_vec.shape[0]
    if nbrs.neighbor_vectors.size and nbrs.neighbor_vectors.shape[1] != dim:
        raise ValueError("neighbor vectors and target have different lengths")
    m = len(nbrs.neighbor_ids)
    out = np.zeros((3 + k) * dim)
    if m == 0:
        return out
    out[0:dim] = np.abs(target_vec - nbrs.phi_min)
    out[dim : 2 * dim] = np.abs(target_vec - nbrs.phi_mean)
    out[2 * dim : 3 * dim] = np.abs(target_vec - nbrs.phi_max)
    for j in range(min(k, m)):
        start = (3 + j) * dim
        out[start : start + dim] = np.abs(target_vec - nbrs.neighbor_vectors[j])
    return out


def frame_context_matrix(
    regions: Sequence[RegionMask],
    base_matrix: np.ndarray,
    n: int = DEFAULT_N_NEIGHBORS,
    k: int = DEFAULT_KNN,
) -> np.ndarray:
    """Context blocks for every region of a frame, stacked row-wise."""
    base_matrix = np.asarray(base_matrix, dtype=np.float64)
    n_regions = base_matrix.shape[0]
    dim = base_matrix.shape[1] if n_regions else BASE_DIM
    out = np.zeros((n_regions, (3 + k) * dim))
    if n_regions == 0:
        return out
    centroids = np.array([r.centroid for r in regions])
    for i in range(n_regions):
        nbrs = neighbor_set(i, centroids, base_matrix, n)
        out[i] = context_features(base_matrix[i], nbrs, k)
    return out
