"""Candidate region supply: grid-seeded greedy merging plus mask ingestion.

The proposer partitions the frame into grid cells, then greedily merges
adjacent regions in order of ascending boundary strength (mean contour
value along the shared boundary). Every region of the resulting hierarchy
is a proposal candidate, and the hierarchy doubles as the merge tree whose
thresholds feed the appear/disappear shape features.

Externally computed masks (one 1-bit PNG per region) can be ingested
instead; they are matched to the merge tree by maximal IOU when their
appear/disappear values are needed.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage

from .data import RegionMask, RgbdFrame, read_mask_png
from .errors import DatasetError

MIN_PROPOSAL_AREA = 9


def contour_strength(rgb: np.ndarray) -> np.ndarray:
    """Max-normalized Sobel gradient magnitude of the grayscale image.

    Returns values in [0, 1]; a constant image maps to all zeros.
    """
    rgb = np.asarray(rgb)
    if rgb.size == 0:
        raise ValueError("empty raster")
    gray = rgb @ np.array([0.299, 0.587, 0.114]) if rgb.ndim == 3 else rgb.astype(float)
    gx = ndimage.sobel(gray, axis=1, mode="nearest")
    gy = ndimage.sobel(gray, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    return mag / peak if peak > 0 else np.zeros_like(mag)


@dataclass(frozen=True, eq=False)
class MergeTree:
    """Binary merge hierarchy over grid-seeded leaf regions.

    Nodes are numbered 0..n_leaves-1 for leaves; merge i joins nodes
    (a_i, b_i) into node n_leaves + i at a non-decreasing threshold.
    """

    leaf_labels: np.ndarray  # (H, W) int32 leaf id per pixel
    n_leaves: int
    merges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        thr = [t for _, _, t in self.merges]
        if any(b < a for a, b in zip(thr, thr[1:])):
            raise ValueError("merge thresholds must be non-decreasing")

    @property
    def n_nodes(self) -> int:
        return self.n_leaves + len(self.merges)

    @cached_property
    def node_leaves(self) -> list[np.ndarray]:
        """Leaf ids contained in each node, indexed by node id."""
        sets: list[np.ndarray] = [np.array([i]) for i in range(self.n_leaves)]
        for a, b, _ in self.merges:
            sets.append(np.concatenate([sets[a], sets[b]]))
        return sets

    @cached_property
    def leaf_sizes(self) -> np.ndarray:
        return np.bincount(self.leaf_labels.ravel(), minlength=self.n_leaves)

    @cached_property
    def node_areas(self) -> np.ndarray:
        areas = np.zeros(self.n_nodes, dtype=np.int64)
        areas[: self.n_leaves] = self.leaf_sizes
        for i, (a, b, _) in enumerate(self.merges):
            areas[self.n_leaves + i] = areas[a] + areas[b]
        return areas

    @cached_property
    def appear(self) -> np.ndarray:
        """Threshold at which each node forms (0 for leaves)."""
        out = np.zeros(self.n_nodes)
        for i, (_, _, t) in enumerate(self.merges):
            out[self.n_leaves + i] = t
        return out

    @cached_property
    def disappear(self) -> np.ndarray:
        """Threshold at which each node is merged away (1 for the root)."""
        out = np.ones(self.n_nodes)
        for i, (a, b, t) in enumerate(self.merges):
            out[a] = t
            out[b] = t
        return out

    def node_mask(self, node_id: int) -> np.ndarray:
        lut = np.zeros(self.n_leaves, dtype=bool)
        lut[self.node_leaves[node_id]] = True
        return lut[self.leaf_labels]


def ucm_bounds(
    region: RegionMask, tree: MergeTree, node_id: int | None = None
) -> tuple[float, float]:
    """(appear, disappear) thresholds of the region within the hierarchy.

    When `node_id` is not given, the region is matched to the tree node of
    maximal IOU (ties to the lowest node id).
    """
    if tree.n_nodes == 0:
        raise ValueError("empty merge tree")
    if node_id is None:
        counts = np.bincount(
            tree.leaf_labels[region.mask].ravel(), minlength=tree.n_leaves
        ).astype(np.int64)
        best_iou, node_id = -1.0, 0
        for n in range(tree.n_nodes):
            inter = int(counts[tree.node_leaves[n]].sum())
            union = region.area + int(tree.node_areas[n]) - inter
            val = inter / union if union else 0.0
            if val > best_iou:
                best_iou, node_id = val, n
    return float(tree.appear[node_id]), float(tree.disappear[node_id])


@dataclass(frozen=True, eq=False)
class ProposalSet:
    """Proposals plus the hierarchy they came from; node_ids[i] is the tree
    node of regions[i], or None for externally supplied masks (those are
    matched to the tree by maximal IOU when needed)."""

    regions: tuple[RegionMask, ...]
    tree: MergeTree
    node_ids: tuple[int | None, ...]

    def __len__(self) -> int:
        return len(self.regions)


def _grid_labels(h: int, w: int, n_superpixels: int) -> tuple[np.ndarray, int]:
    gr = int(round(np.sqrt(n_superpixels * h / w))) or 1
    gr = min(max(gr, 1), h)
    gc = min(max(int(round(n_superpixels / gr)) or 1, 1), w)
    row_edges = np.linspace(0, h, gr + 1).astype(int)
    col_edges = np.linspace(0, w, gc + 1).astype(int)
    labels = np.empty((h, w), dtype=np.int32)
    rid = np.searchsorted(row_edges, np.arange(h), side="right") - 1
    cid = np.searchsorted(col_edges, np.arange(w), side="right") - 1
    labels[:] = rid[:, None] * gc + cid[None, :]
    return labels, gr * gc


def _boundary_stats(labels: np.ndarray, contour: np.ndarray, n: int):
    """Per adjacent-leaf-pair (sum, count) of straddling-pixel contour means."""
    sums: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}
    for la, lb, va, vb in (
        (labels[:, :-1], labels[:, 1:], contour[:, :-1], contour[:, 1:]),
        (labels[:-1, :], labels[1:, :], contour[:-1, :], contour[1:, :]),
    ):
        diff = la != lb
        a = np.minimum(la[diff], lb[diff]).astype(np.int64)
        b = np.maximum(la[diff], lb[diff]).astype(np.int64)
        v = 0.5 * (va[diff] + vb[diff])
        keys = a * n + b
        uniq, inv = np.unique(keys, return_inverse=True)
        s = np.bincount(inv, weights=v)
        c = np.bincount(inv)
        for k, sv, cv in zip(uniq, s, c):
            pair = (int(k // n), int(k % n))
            sums[pair] = sums.get(pair, 0.0) + float(sv)
            counts[pair] = counts.get(pair, 0) + int(cv)
    return sums, counts


def propose_regions(
    frame: RgbdFrame | np.ndarray,
    n_superpixels: int = 256,
    max_proposals: int = 2000,
    contour: np.ndarray | None = None,
) -> ProposalSet:
    """Generate overlapping multi-scale region proposals for one frame.

    Grid-seeded leaf regions are merged greedily by ascending boundary
    strength (ties broken by the (row, col) grid seed of each side); every
    hierarchy region with area >= 9 px is a candidate, and the output is
    capped at `max_proposals` by ascending merge threshold. Deterministic
    for fixed inputs.
    """
    rgb = frame.rgb if isinstance(frame, RgbdFrame) else np.asarray(frame)
    h, w = rgb.shape[:2]
    if h < 3 or w < 3:
        raise ValueError("frame must be at least 3x3")
    if n_superpixels < 2:
        raise ValueError("n_superpixels must be >= 2")
    if contour is None:
        contour = contour_strength(rgb)
    contour = np.asarray(contour, dtype=np.float64)
    if contour.shape != (h, w):
        raise ValueError("contour map dims do not match frame")

    labels, n_leaves = _grid_labels(h, w, n_superpixels)
    sums, counts = _boundary_stats(labels, contour, n_leaves)

    n_total = 2 * n_leaves - 1
    alive = np.ones(n_total, dtype=bool)
    rep = np.arange(n_total, dtype=np.int64)  # smallest contained leaf id
    neighbors: list[dict[int, None]] = [dict() for _ in range(n_total)]
    pair_sum: dict[tuple[int, int], float] = dict(sums)
    pair_cnt: dict[tuple[int, int], int] = dict(counts)
    heap: list[tuple[float, int, int, int, int]] = []
    for (a, b), s in pair_sum.items():
        strength = s / pair_cnt[(a, b)]
        heapq.heappush(heap, (strength, a, b, a, b))
        neighbors[a][b] = None
        neighbors[b][a] = None

    merges: list[tuple[int, int, float]] = []
    next_id = n_leaves
    last_thr = 0.0
    while next_id < n_total and heap:
        strength, _, _, a, b = heapq.heappop(heap)
        if not (alive[a] and alive[b]):
            continue
        cur = pair_sum.get((min(a, b), max(a, b)))
        if cur is None:
            continue
        thr = max(strength, last_thr)
        last_thr = thr
        m = next_id
        next_id += 1
        alive[a] = alive[b] = False
        rep[m] = min(rep[a], rep[b])
        # Node id order equals merge order, so (a, b) stored canonically.
        merges.append((a, b, float(thr)))

        merged_nb: dict[int, None] = {}
        for side in (a, b):
            for x in neighbors[side]:
                key = (min(side, x), max(side, x))
                s_v = pair_sum.pop(key, None)
                c_v = pair_cnt.pop(key, None)
                if x in (a, b) or not alive[x] or s_v is None:
                    continue
                nkey = (min(m, x), max(m, x))
                pair_sum[nkey] = pair_sum.get(nkey, 0.0) + s_v
                pair_cnt[nkey] = pair_cnt.get(nkey, 0) + c_v
                merged_nb[x] = None
        neighbors[a].clear()
        neighbors[b].clear()
        neighbors[m] = merged_nb
        for x in merged_nb:
            neighbors[x].pop(a, None)
            neighbors[x].pop(b, None)
            neighbors[x][m] = None
            nkey = (min(m, x), max(m, x))
            strength = pair_sum[nkey] / pair_cnt[nkey]
            # Tie-break by grid seed of each side (leaf ids are row-major).
            ra, rb = sorted((rep[m], rep[x]))
            heapq.heappush(heap, (strength, ra, rb, m, x))

    tree = MergeTree(leaf_labels=labels, n_leaves=n_leaves, merges=tuple(merges))

    candidates = [
        (tree.appear[n], n)
        for n in range(tree.n_nodes)
        if tree.node_areas[n] >= MIN_PROPOSAL_AREA
    ]
    candidates.sort()
    chosen = [n for _, n in candidates[:max_proposals]]
    regions = tuple(RegionMask(tree.node_mask(n)) for n in chosen)
    return ProposalSet(regions=regions, tree=tree, node_ids=tuple(chosen))


def load_masks(mask_dir, frame: RgbdFrame) -> list[RegionMask]:
    """Read 1-bit PNG region masks in lexicographic filename order.

    Empty masks are skipped with a warning; a size mismatch raises
    DatasetError naming the file.
    """
    mask_dir = Path(mask_dir)
    if not mask_dir.is_dir():
        raise DatasetError(f"mask directory not found: {mask_dir}")
    regions = []
    for path in sorted(mask_dir.glob("*.png")):
        mask = read_mask_png(path)
        if mask.shape != frame.dims:
            raise DatasetError(
                f"{path}: mask dims {mask.shape} do not match frame {frame.dims}"
            )
        if not mask.any():
            warnings.warn(f"{path}: empty mask skipped")
            continue
        regions.append(RegionMask(mask))
    return regions
