"""From-scratch random forest for regression and binary classification.

Trees grow on bootstrap resamples, choosing at each node the best midpoint
threshold among a random subset of candidate features by impurity
reduction (variance; for 0/1 targets this is proportional to Gini). Ties
break toward the lowest feature index, then the lowest threshold. If no
candidate feature admits a valid split the search falls back to all
features, so distinct rows are always separable; with bootstrap disabled,
min_leaf=1 and unlimited depth the forest interpolates its training set.

Per-tree RNGs are spawned from the master seed, so serial and parallel
training produce byte-identical forests. Feature importance accumulates
the weighted impurity reduction of every split, averaged over trees.

File format (little-endian), versioned:
    magic "EGOF" | u32 version | u8 mode | u32 feature_dim
    | u16 layout_len + layout_id utf8 | u32 meta_len + meta JSON utf8
    | f64 importance[feature_dim] | u32 n_trees
    | per tree: u32 n_nodes, then preorder nodes:
        u8 tag (0=leaf, 1=split)
        leaf: f64 value (regression) / 2x f64 class probabilities
        split: u32 feature, f64 threshold, left subtree, right subtree
"""

from __future__ import annotations

import json
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelFormatError

MAGIC = b"EGOF"
FORMAT_VERSION = 1
MODE_REGRESSION = "regression"
MODE_CLASSIFICATION = "classification"

IOU_BIN_EDGES = (0.25, 0.5, 0.75)  # [0,.25) [.25,.5) [.5,.75) [.75,1]


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 50
    max_depth: int | None = None
    min_leaf: int = 5
    features_per_split: int | None = None  # default ceil(sqrt(dim))
    bootstrap: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


class Tree:
    """Flat array representation; node 0 is the root, preorder layout.

    feature[i] < 0 marks a leaf; value[i] holds the leaf prediction
    (regression) or the (p_sight, p_touch) pair (classification).
    """

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Leaf values for every row of x; (n,) or (n, 2) per mode."""
        n = x.shape[0]
        node = np.zeros(n, dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.flatnonzero(active)
            go_left = (
                x[rows, feat[rows]] <= self.threshold[node[rows]]
            )
            node[rows] = np.where(
                go_left, self.left[node[rows]], self.right[node[rows]]
            )
        return self.value[node]


@dataclass(eq=False)
class Forest:
    mode: str
    feature_dim: int
    layout_id: str
    trees: list[Tree]
    importance: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray | float:
        """Mean of per-tree leaf values; touch probability for classifiers.

        Accepts a single vector or an (n, feature_dim) matrix.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.feature_dim:
            raise ValueError(
                f"feature dim mismatch: got {x.shape[1]}, model has {self.feature_dim}"
            )
        acc = np.zeros(x.shape[0])
        for tree in self.trees:
            vals = tree.predict(x)
            acc += vals[:, 1] if self.mode == MODE_CLASSIFICATION else vals
        out = acc / len(self.trees)
        return float(out[0]) if single else out


def predict(forest: Forest, x) -> np.ndarray | float:
    return forest.predict(x)


# ---------------------------------------------------------------------------
# Balanced sampling over IOU target bins


def iou_bin(target: float) -> int:
    """Bin index for the four IOU ranges; the last bin is closed at 1."""
    if target < IOU_BIN_EDGES[0]:
        return 0
    if target < IOU_BIN_EDGES[1]:
        return 1
    if target < IOU_BIN_EDGES[2]:
        return 2
    return 3


def balanced_sample(targets: np.ndarray, rng_seed: int = 0) -> np.ndarray:
    """Indices of an equalized sample across the four IOU bins.

    Each non-empty bin contributes min(non-empty bin counts) examples,
    drawn without replacement with a seeded RNG. If every example falls in
    one bin, that whole bin is returned with a warning.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size == 0:
        raise ValueError("no examples to sample")
    bins = np.fromiter((iou_bin(t) for t in targets), dtype=np.int64)
    members = [np.flatnonzero(bins == b) for b in range(4)]
    nonempty = [m for m in members if m.size]
    if len(nonempty) == 1:
        warnings.warn("all examples fall in one IOU bin; returning it unbalanced")
        return nonempty[0]
    take = min(m.size for m in nonempty)
    rng = np.random.default_rng(rng_seed)
    picks = [rng.choice(m, size=take, replace=False) for m in members if m.size]
    return np.concatenate([np.sort(p) for p in picks])


# ---------------------------------------------------------------------------
# Training


def _best_split(x_node, y_node, candidates, min_leaf):
    """Best (gain, feature, threshold) over candidate features, or None.

    Gain is the node SSE minus the children SSE (for 0/1 targets this is
    Gini reduction up to a factor of 2). Ties resolve to the lowest feature
    index, then the lowest threshold.
    """
    n = y_node.shape[0]
    total = y_node.sum()
    total_sq = (y_node * y_node).sum()
    sse_parent = total_sq - total * total / n
    best = None
    for f in candidates:
        vals = x_node[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        if sv[0] == sv[-1]:
            continue
        sy = y_node[order]
        cs = np.cumsum(sy)
        cs2 = np.cumsum(sy * sy)
        i = np.arange(1, n)
        ok = sv[:-1] < sv[1:]
        if min_leaf > 1:
            ok &= (i >= min_leaf) & (n - i >= min_leaf)
        if not ok.any():
            continue
        pos = i[ok]
        s_l, s2_l = cs[pos - 1], cs2[pos - 1]
        sse_l = s2_l - s_l * s_l / pos
        n_r = n - pos
        s_r, s2_r = total - s_l, total_sq - s2_l
        sse_r = s2_r - s_r * s_r / n_r
        gains = sse_parent - sse_l - sse_r
        j = int(np.argmax(gains))  # first max = lowest threshold
        gain = float(gains[j])
        if gain <= 1e-12:
            continue
        thr = 0.5 * (sv[pos[j] - 1] + sv[pos[j]])
        if not sv[pos[j] - 1] <= thr < sv[pos[j]]:
            # midpoint of adjacent floats rounded onto the right value;
            # fall back to the left value so both children stay non-empty
            thr = float(sv[pos[j] - 1])
        if best is None or gain > best[0] + 1e-15:
            best = (gain, int(f), thr)
    return best


def _grow_tree(x, y, cfg: TrainConfig, mode: str, rng, importance: np.ndarray):
    n_total, dim = x.shape
    mtry = cfg.features_per_split or int(np.ceil(np.sqrt(dim)))
    mtry = min(mtry, dim)
    max_depth = np.inf if cfg.max_depth is None else cfg.max_depth

    if cfg.bootstrap:
        idx0 = np.sort(rng.choice(n_total, size=n_total, replace=True))
    else:
        idx0 = np.arange(n_total)

    feature, threshold, left, right, values = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        values.append(0.0)
        return len(feature) - 1

    def leaf_value(y_node):
        if mode == MODE_CLASSIFICATION:
            p = float(y_node.mean())
            return (1.0 - p, p)
        return float(y_node.mean())

    root = new_node()
    stack = [(idx0, 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        y_node = y[idx]
        n = idx.shape[0]
        is_leaf = (
            depth >= max_depth
            or n < 2 * cfg.min_leaf
            or y_node.min() == y_node.max()
        )
        split = None
        if not is_leaf:
            x_node = x[idx]
            cand = np.sort(rng.choice(dim, size=mtry, replace=False))
            split = _best_split(x_node, y_node, cand, cfg.min_leaf)
            if split is None and mtry < dim:
                split = _best_split(
                    x_node, y_node, np.arange(dim), cfg.min_leaf
                )
        if split is None:
            values[slot] = leaf_value(y_node)
            continue
        gain, f, thr = split
        importance[f] += gain / n_total
        feature[slot] = f
        threshold[slot] = thr
        go_left = x[idx, f] <= thr
        left_slot = new_node()
        right_slot = new_node()
        left[slot] = left_slot
        right[slot] = right_slot
        # Preorder layout: process the left subtree first (LIFO stack).
        stack.append((idx[~go_left], depth + 1, right_slot))
        stack.append((idx[go_left], depth + 1, left_slot))

    if mode == MODE_CLASSIFICATION:
        vals = np.array(
            [v if isinstance(v, tuple) else (0.0, 0.0) for v in values]
        )
    else:
        vals = np.asarray(values, dtype=np.float64)
    return Tree(feature, threshold, left, right, vals)


def train(
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    mode: str = MODE_REGRESSION,
    layout_id: str = "",
    n_jobs: int = 1,
    meta: dict | None = None,
) -> Forest:
    """Train a forest; deterministic for a fixed seed, serial or parallel.

    Regression targets must lie in [0, 1]; classification targets must be
    0/1 (touch = 1). Constant targets yield single-leaf trees.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError("x must be (n, dim) with matching 1-D targets")
    if x.shape[0] < 2 * cfg.min_leaf:
        raise ValueError("need at least 2 * min_leaf training rows")
    if mode == MODE_REGRESSION:
        if y.min() < 0.0 or y.max() > 1.0:
            raise ValueError("regression targets must lie in [0, 1]")
    elif mode == MODE_CLASSIFICATION:
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("classification targets must be 0 or 1")
    else:
        raise ValueError(f"unknown mode {mode!r}")

    dim = x.shape[1]
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.n_trees)
    importances = [np.zeros(dim) for _ in range(cfg.n_trees)]

    def build(i):
        return _grow_tree(
            x, y, cfg, mode, np.random.default_rng(seeds[i]), importances[i]
        )

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, range(cfg.n_trees)))
    else:
        trees = [build(i) for i in range(cfg.n_trees)]

    return Forest(
        mode=mode,
        feature_dim=dim,
        layout_id=layout_id,
        trees=trees,
        importance=np.sum(importances, axis=0) / cfg.n_trees,
        meta=dict(meta or {}),
    )


def feature_importance(forest: Forest, groups: dict[int, str]) -> dict[str, float]:
    """Mean per-feature importance of each named group.

    `groups` maps feature index -> group name; indices must be valid for
    the forest. Features never split on contribute 0.
    """
    for idx in groups:
        if not 0 <= idx < forest.feature_dim:
            raise ValueError(f"feature index {idx} outside model dimension")
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for idx, name in groups.items():
        sums[name] = sums.get(name, 0.0) + float(forest.importance[idx])
        counts[name] = counts.get(name, 0) + 1
    return {name: sums[name] / counts[name] for name in sums}


# ---------------------------------------------------------------------------
# Serialization


def _write_nodes(tree: Tree, mode: str, out: bytearray) -> None:
    stack = [0]
    while stack:
        node = stack.pop()
        if tree.feature[node] < 0:
            out += b"\x00"
            if mode == MODE_CLASSIFICATION:
                out += struct.pack("<2d", *tree.value[node])
            else:
                out += struct.pack("<d", float(tree.value[node]))
        else:
            out += b"\x01"
            out += struct.pack(
                "<Id", int(tree.feature[node]), float(tree.threshold[node])
            )
            stack.append(int(tree.right[node]))
            stack.append(int(tree.left[node]))


def save(forest: Forest, path) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<B", 1 if forest.mode == MODE_CLASSIFICATION else 0)
    out += struct.pack("<I", forest.feature_dim)
    layout = forest.layout_id.encode("utf-8")
    out += struct.pack("<H", len(layout)) + layout
    meta = json.dumps(forest.meta, sort_keys=True).encode("utf-8")
    out += struct.pack("<I", len(meta)) + meta
    out += np.asarray(forest.importance, dtype="<f8").tobytes()
    out += struct.pack("<I", len(forest.trees))
    for tree in forest.trees:
        out += struct.pack("<I", tree.n_nodes)
        _write_nodes(tree, forest.mode, out)
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ModelFormatError("model file truncated")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_nodes(reader: _Reader, n_nodes: int, mode: str) -> Tree:
    feature = np.empty(n_nodes, dtype=np.int32)
    threshold = np.zeros(n_nodes, dtype=np.float64)
    left = np.full(n_nodes, -1, dtype=np.int32)
    right = np.full(n_nodes, -1, dtype=np.int32)
    width = 2 if mode == MODE_CLASSIFICATION else 1
    value = np.zeros((n_nodes, width), dtype=np.float64)

    next_slot = 0
    stack = [-1]  # parent slots awaiting a child; -1 = root sentinel
    while stack:
        if next_slot >= n_nodes:
            raise ModelFormatError("model file has more nodes than declared")
        parent = stack.pop()
        slot = next_slot
        next_slot += 1
        if parent >= 0:
            if left[parent] < 0:
                left[parent] = slot
            else:
                right[parent] = slot
        (tag,) = reader.unpack("<B")
        if tag == 0:
            feature[slot] = -1
            value[slot] = reader.unpack(f"<{width}d")
        elif tag == 1:
            f, thr = reader.unpack("<Id")
            feature[slot] = f
            threshold[slot] = thr
            # Preorder: left child comes next, so its parent entry is
            # pushed last (a parent re-enters the stack for the right child).
            stack.append(slot)
            stack.append(slot)
        else:
            raise ModelFormatError(f"unknown node tag {tag}")
    if next_slot != n_nodes:
        raise ModelFormatError("model file node count mismatch")
    vals = value if mode == MODE_CLASSIFICATION else value[:, 0]
    return Tree(feature, threshold, left, right, vals)


def load(path, expected_layout: str | None = None) -> Forest:
    """Load a forest; rejects bad magic, version, truncation, and (when
    `expected_layout` is given) a feature-layout mismatch."""
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != MAGIC:
        raise ModelFormatError(f"{path}: not a forest model file")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    (mode_byte,) = reader.unpack("<B")
    mode = MODE_CLASSIFICATION if mode_byte == 1 else MODE_REGRESSION
    (feature_dim,) = reader.unpack("<I")
    (layout_len,) = reader.unpack("<H")
    layout_id = reader.take(layout_len).decode("utf-8")
    (meta_len,) = reader.unpack("<I")
    try:
        meta = json.loads(reader.take(meta_len).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt metadata") from exc
    importance = np.frombuffer(reader.take(8 * feature_dim), dtype="<f8").copy()
    (n_trees,) = reader.unpack("<I")
    trees = []
    for _ in range(n_trees):
        (n_nodes,) = reader.unpack("<I")
        trees.append(_read_nodes(reader, n_nodes, mode))
    if reader.pos != len(reader.buf):
        raise ModelFormatError(f"{path}: trailing bytes after model data")
    if expected_layout is not None and layout_id != expected_layout:
        raise ModelFormatError(
            f"{path}: layout {layout_id!r} does not match expected {expected_layout!r}"
        )
    forest = Forest(
        mode=mode,
        feature_dim=feature_dim,
        layout_id=layout_id,
        trees=trees,
        importance=importance,
        meta=meta,
    )
    for tree in trees:
        bad = (tree.feature >= feature_dim).any()
        if bad:
            raise ModelFormatError(f"{path}: split feature out of range")
    return forest
