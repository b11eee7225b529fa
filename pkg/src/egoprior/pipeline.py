"""Task orchestration: 3D saliency detection, future-saliency prediction,
and sight/touch interaction classification, under leave-one-sequence-out
training.

Task eligibility of a manifest frame:
  * saliency    - has a GT mask and no future link,
  * future(h)   - has a future link of horizon h and a GT mask (which
                  annotates the future-salient object at this frame),
  * interaction - has a GT mask, an interaction label, and no future link.

Saliency and future models regress each region's IOU against the frame's
GT mask, trained on a bin-balanced sample; interaction models classify
regions overlapping the GT (IOU >= 0.5) with the frame's label. Future
models append the 5 gaze dimensions computed from block-matched
frame-to-frame homographies (identity-padded when history is missing).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import forest as rf
from .context import DEFAULT_KNN, DEFAULT_N_NEIGHBORS, frame_context_matrix
from .data import (
    DatasetManifest,
    FrameEntry,
    RegionMask,
    RgbdFrame,
    SaliencyMap,
    iou,
    load_frame,
)
from .errors import EvaluationError, TrainingError
from .features import (
    base_features,
    full_dim,
    full_feature_groups,
    full_layout_id,
)
from .homography import (
    N_GAZE_HISTORY,
    estimate_homography,
    gaze_features,
    match_correspondences,
)
from .metrics import average_precision, max_f_score, pr_curve
from .proposals import ProposalSet, contour_strength, propose_regions

TOP_REGIONS_FOR_VOTE = 15
INTERACTION_IOU_MIN = 0.5
TASKS = ("saliency", "future", "interaction")
# Features must not depend on the training seed, so homography RANSAC runs
# with a fixed one.
GAZE_RANSAC_SEED = 0


@dataclass(frozen=True)
class PipelineConfig:
    n_superpixels: int = 256
    max_proposals: int = 2000
    n_neighbors: int = DEFAULT_N_NEIGHBORS
    knn: int = DEFAULT_KNN
    sample_budget: int = 70_000
    forest: rf.TrainConfig = field(default_factory=rf.TrainConfig)
    exclude_groups: tuple[str, ...] = ()
    n_jobs: int = 1


@dataclass(frozen=True, eq=False)
class TaskModel:
    """A trained forest plus everything needed to reproduce its features."""

    task: str
    horizon: Optional[int]
    forest: rf.Forest
    config: PipelineConfig
    column_indices: Optional[np.ndarray]  # None = all columns
    held_out: Optional[str]
    seed: int

    @property
    def use_gaze(self) -> bool:
        return self.task == "future"


def _entry_matches_task(entry: FrameEntry, task: str, horizon: Optional[int]) -> bool:
    if entry.gt_mask is None:
        return False
    if task == "saliency":
        return entry.future is None
    if task == "future":
        return entry.future is not None and entry.future.horizon_s == horizon
    if task == "interaction":
        return entry.future is None and entry.interaction is not None
    raise ValueError(f"unknown task {task!r}")


@dataclass(eq=False)
class FrameData:
    frame: RgbdFrame
    gt: Optional[RegionMask]
    entry: FrameEntry
    proposals: ProposalSet
    features: np.ndarray  # (R, base+context) without gaze
    region_mean_depth: np.ndarray  # (R,), NaN when a region has no valid depth


class FeatureCache:
    """Per-frame proposals, features, and homographies, computed once.

    Extraction is a pure function of the frame and the proposal/context
    configuration, so cached results are shared across folds and tasks.
    """

    def __init__(self, manifest: DatasetManifest, config: PipelineConfig):
        self.manifest = manifest
        self.config = config
        self._frames: dict[tuple[str, int], FrameData] = {}
        self._homographies: dict[tuple[str, int, int], np.ndarray] = {}

    def get(self, sequence_id: str, frame_index: int) -> FrameData:
        key = (sequence_id, frame_index)
        if key not in self._frames:
            frame, gt, entry = load_frame(self.manifest, sequence_id, frame_index)
            cfg = self.config
            proposals = propose_regions(
                frame, cfg.n_superpixels, cfg.max_proposals
            )
            feats = extract_frame_features(
                frame,
                proposals,
                n_neighbors=cfg.n_neighbors,
                knn=cfg.knn,
            )
            depths = np.array(
                [
                    _region_mean_depth(r, frame.depth)
                    for r in proposals.regions
                ]
            )
            self._frames[key] = FrameData(
                frame=frame,
                gt=gt,
                entry=entry,
                proposals=proposals,
                features=feats,
                region_mean_depth=depths,
            )
        return self._frames[key]

    def homography(self, sequence_id: str, earlier: int, later: int) -> np.ndarray:
        """H mapping frame `earlier` into frame `later`, block-matched."""
        key = (sequence_id, earlier, later)
        if key not in self._homographies:
            fa = self.get(sequence_id, earlier).frame
            fb = self.get(sequence_id, later).frame
            pairs = match_correspondences(fa.rgb, fb.rgb)
            self._homographies[key] = estimate_homography(
                pairs, seed=GAZE_RANSAC_SEED
            )
        return self._homographies[key]

    def gaze_history(self, sequence_id: str, frame_index: int) -> list[np.ndarray]:
        """H^t_{t-k} for k = 1..5, identity-padded for missing frames."""
        seq = self.manifest.sequence(sequence_id)
        available = {e.index for e in seq.frames}
        mats = []
        for k in range(1, N_GAZE_HISTORY + 1):
            prev = frame_index - k
            if prev in available:
                mats.append(self.homography(sequence_id, prev, frame_index))
            else:
                mats.append(np.eye(3))
        return mats

    def gaze_matrix(self, sequence_id: str, frame_index: int) -> np.ndarray:
        data = self.get(sequence_id, frame_index)
        mats = self.gaze_history(sequence_id, frame_index)
        dims = data.frame.dims
        if not data.proposals.regions:
            return np.zeros((0, N_GAZE_HISTORY))
        return np.stack(
            [gaze_features(r, mats, dims) for r in data.proposals.regions]
        )


def _region_mean_depth(region: RegionMask, depth: np.ndarray) -> float:
    vals = depth[region.mask]
    vals = vals[np.isfinite(vals)]
    return float(vals.mean()) if vals.size else float("nan")


def extract_frame_features(
    frame: RgbdFrame,
    proposals: ProposalSet,
    n_neighbors: int = DEFAULT_N_NEIGHBORS,
    knn: int = DEFAULT_KNN,
    gaze_homographies: Optional[Sequence[np.ndarray]] = None,
    contour: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Feature matrix for a frame: one row per region.

    Row layout: 77 base dims, (3 + knn) * 77 context dims, then 5 gaze dims
    when homographies are given. An empty proposal set yields a (0, D)
    matrix without error.
    """
    gaze = gaze_homographies is not None
    dim = full_dim(knn, gaze)
    regions = proposals.regions
    if not regions:
        return np.zeros((0, dim))
    if contour is None:
        contour = contour_strength(frame.rgb)
    base = np.stack(
        [
            base_features(
                region, contour, proposals.tree, frame.depth, frame.dims, node_id
            ).values
            for region, node_id in zip(regions, proposals.node_ids)
        ]
    )
    ctx = frame_context_matrix(regions, base, n=n_neighbors, k=knn)
    blocks = [base, ctx]
    if gaze:
        blocks.append(
            np.stack(
                [gaze_features(r, gaze_homographies, frame.dims) for r in regions]
            )
        )
    return np.concatenate(blocks, axis=1)


# ---------------------------------------------------------------------------
# Training


def _column_indices(config: PipelineConfig, gaze: bool) -> Optional[np.ndarray]:
    if not config.exclude_groups:
        return None
    groups = full_feature_groups(config.knn, gaze)
    keep = [i for i, g in enumerate(groups) if g not in config.exclude_groups]
    return np.asarray(keep, dtype=np.int64)


def parse_task(task: str) -> tuple[str, Optional[int]]:
    """'saliency' | 'future2'/'future4'/'future6' | 'interaction'."""
    if task in ("saliency", "interaction"):
        return task, None
    if task.startswith("future") and task[len("future") :] in ("2", "4", "6"):
        return "future", int(task[len("future") :])
    raise ValueError(f"unknown task {task!r}")


def train_task(
    manifest: DatasetManifest,
    task: str,
    held_out: Optional[str],
    config: PipelineConfig = PipelineConfig(),
    cache: Optional[FeatureCache] = None,
    horizon: Optional[int] = None,
) -> TaskModel:
    """Train one task model on every sequence except `held_out`.

    `task` may carry the horizon suffix ('future4') or pass it separately.
    Raises TrainingError when no eligible training regions exist.
    """
    kind, parsed_h = parse_task(task) if horizon is None else (task, horizon)
    horizon = parsed_h if parsed_h is not None else horizon
    if kind == "future" and horizon not in (2, 4, 6):
        raise ValueError("future task needs horizon 2, 4, or 6")
    cache = cache or FeatureCache(manifest, config)
    seed = config.forest.rng_seed
    use_gaze = kind == "future"

    eligible: list[tuple[str, int]] = []
    for seq in manifest.sequences:
        if seq.id == held_out:
            continue
        for entry in seq.frames:
            if _entry_matches_task(entry, kind, horizon):
                eligible.append((seq.id, entry.index))
    if not eligible:
        raise TrainingError(f"no eligible training frames for task {task!r}")

    per_frame_budget = max(1, int(np.ceil(config.sample_budget / len(eligible))))
    rng = np.random.default_rng(seed)

    rows, targets = [], []
    for seq_id, idx in eligible:
        data = cache.get(seq_id, idx)
        n_regions = len(data.proposals)
        if n_regions == 0:
            continue
        feats = data.features
        if use_gaze:
            feats = np.concatenate(
                [feats, cache.gaze_matrix(seq_id, idx)], axis=1
            )
        if data.gt is None:  # annotated-but-empty GT: every region scores 0
            ious = np.zeros(n_regions)
        else:
            ious = np.array([iou(r, data.gt) for r in data.proposals.regions])
        if kind == "interaction":
            keep = np.flatnonzero(ious >= INTERACTION_IOU_MIN)
            label = 1.0 if data.entry.interaction == "touch" else 0.0
            for i in keep:
                rows.append(feats[i])
                targets.append(label)
        else:
            if n_regions > per_frame_budget:
                chosen = np.sort(
                    rng.choice(n_regions, size=per_frame_budget, replace=False)
                )
            else:
                chosen = np.arange(n_regions)
            for i in chosen:
                rows.append(feats[i])
                targets.append(float(ious[i]))
    if not rows:
        raise TrainingError(f"no eligible training regions for task {task!r}")

    x = np.asarray(rows)
    y = np.asarray(targets)
    if kind in ("saliency", "future"):
        sel = rf.balanced_sample(y, rng_seed=seed)
        x, y = x[sel], y[sel]
    cols = _column_indices(config, use_gaze)
    if cols is not None:
        x = x[:, cols]

    layout = full_layout_id(config.n_neighbors, config.knn, use_gaze)
    if config.exclude_groups:
        layout += "/drop:" + ",".join(sorted(config.exclude_groups))
    mode = rf.MODE_CLASSIFICATION if kind == "interaction" else rf.MODE_REGRESSION
    meta = {
        "task": kind,
        "horizon": horizon,
        "held_out": held_out,
        "seed": seed,
        "n_superpixels": config.n_superpixels,
        "max_proposals": config.max_proposals,
        "n_neighbors": config.n_neighbors,
        "knn": config.knn,
        "exclude_groups": list(config.exclude_groups),
    }
    model_forest = rf.train(
        x,
        y,
        cfg=config.forest,
        mode=mode,
        layout_id=layout,
        n_jobs=config.n_jobs,
        meta=meta,
    )
    return TaskModel(
        task=kind,
        horizon=horizon,
        forest=model_forest,
        config=config,
        column_indices=cols,
        held_out=held_out,
        seed=seed,
    )


def model_from_forest(loaded: rf.Forest) -> TaskModel:
    """Rebuild a TaskModel from a forest file's embedded metadata."""
    meta = loaded.meta
    config = PipelineConfig(
        n_superpixels=int(meta.get("n_superpixels", 256)),
        max_proposals=int(meta.get("max_proposals", 2000)),
        n_neighbors=int(meta.get("n_neighbors", DEFAULT_N_NEIGHBORS)),
        knn=int(meta.get("knn", DEFAULT_KNN)),
        exclude_groups=tuple(meta.get("exclude_groups", ())),
    )
    task = meta.get("task", "saliency")
    cols = _column_indices(config, task == "future")
    return TaskModel(
        task=task,
        horizon=meta.get("horizon"),
        forest=loaded,
        config=config,
        column_indices=cols,
        held_out=meta.get("held_out"),
        seed=int(meta.get("seed", 0)),
    )


# ---------------------------------------------------------------------------
# Prediction


def score_regions(model: TaskModel, features: np.ndarray) -> np.ndarray:
    feats = features
    if model.column_indices is not None:
        feats = feats[:, model.column_indices]
    if feats.shape[0] == 0:
        return np.zeros(0)
    return np.asarray(model.forest.predict(feats))


def saliency_map_from_scores(
    dims: tuple[int, int], regions: Sequence[RegionMask], scores: np.ndarray
) -> SaliencyMap:
    """Per-pixel max over covering regions; uncovered pixels score 0."""
    out = np.zeros(dims, dtype=np.float64)
    for region, s in zip(regions, scores):
        m = region.mask
        out[m] = np.maximum(out[m], s)
    return SaliencyMap(scores=np.clip(out, 0.0, 1.0))


def predict_saliency_map(
    frame: RgbdFrame,
    proposals: ProposalSet,
    model: TaskModel,
    features: Optional[np.ndarray] = None,
    gaze_homographies: Optional[Sequence[np.ndarray]] = None,
) -> SaliencyMap:
    """Pixelwise saliency for one frame under a saliency or future model."""
    if features is None:
        if model.use_gaze and gaze_homographies is None:
            raise ValueError("future models need the 5-frame gaze homographies")
        features = extract_frame_features(
            frame,
            proposals,
            n_neighbors=model.config.n_neighbors,
            knn=model.config.knn,
            gaze_homographies=gaze_homographies if model.use_gaze else None,
        )
    scores = score_regions(model, features)
    return saliency_map_from_scores(frame.dims, proposals.regions, scores)


def classify_interaction_scores(
    saliency_scores: np.ndarray, touch_probs: np.ndarray
) -> str:
    """Majority vote of the top-15 regions by saliency; ties go to touch."""
    n = saliency_scores.shape[0]
    if n == 0:
        raise EvaluationError("no regions to classify")
    ids = np.arange(n)
    order = np.lexsort((ids, -saliency_scores))
    top = order[: min(TOP_REGIONS_FOR_VOTE, n)]
    touch_votes = int((touch_probs[top] >= 0.5).sum())
    return "touch" if touch_votes * 2 >= top.size else "sight"


def classify_interaction(
    frame: RgbdFrame,
    proposals: ProposalSet,
    saliency_model: TaskModel,
    interaction_model: TaskModel,
    features: Optional[np.ndarray] = None,
) -> str:
    if features is None:
        features = extract_frame_features(
            frame,
            proposals,
            n_neighbors=saliency_model.config.n_neighbors,
            knn=saliency_model.config.knn,
        )
    sal = score_regions(saliency_model, features)
    touch = score_regions(interaction_model, features)
    return classify_interaction_scores(sal, touch)


# ---------------------------------------------------------------------------
# Depth-threshold interaction baseline


@dataclass(frozen=True)
class DepthThresholdBaseline:
    """Classify touch iff the predicted salient region's mean depth is at or
    below the learned threshold."""

    threshold: float

    def classify(self, mean_depth: float) -> str:
        if not np.isfinite(mean_depth):
            return "sight"
        return "touch" if mean_depth <= self.threshold else "sight"


def depth_threshold_baseline(
    samples: Sequence[tuple[float, str]]
) -> DepthThresholdBaseline:
    """Learn the accuracy-maximizing threshold on (mean GT depth, label)
    pairs; candidates are midpoints of the sorted depths, ties resolve to
    the lowest candidate. One-class input degenerates to +-inf."""
    if not samples:
        raise ValueError("need at least one labeled frame")
    labels = {lab for _, lab in samples}
    if labels == {"touch"}:
        return DepthThresholdBaseline(float("inf"))
    if labels == {"sight"}:
        return DepthThresholdBaseline(float("-inf"))
    depths = np.array(sorted(d for d, _ in samples))
    candidates = (depths[:-1] + depths[1:]) / 2.0
    best_thr, best_acc = None, -1.0
    for thr in candidates:
        acc = np.mean(
            [(d <= thr) == (lab == "touch") for d, lab in samples]
        )
        if acc > best_acc + 1e-12:
            best_thr, best_acc = float(thr), float(acc)
    return DepthThresholdBaseline(best_thr)


# ---------------------------------------------------------------------------
# Leave-one-sequence-out evaluation helpers


def eligible_frames(
    manifest: DatasetManifest, sequence_id: str, task: str, horizon: Optional[int] = None
) -> list[int]:
    kind, parsed_h = parse_task(task) if horizon is None else (task, horizon)
    horizon = parsed_h if parsed_h is not None else horizon
    seq = manifest.sequence(sequence_id)
    return [
        e.index for e in seq.frames if _entry_matches_task(e, kind, horizon)
    ]


def evaluate_saliency(
    manifest: DatasetManifest,
    model: TaskModel,
    sequence_id: str,
    cache: FeatureCache,
) -> tuple[float, float]:
    """(MF, AP) over the sequence's frames eligible for the model's task."""
    indices = eligible_frames(manifest, sequence_id, model.task, model.horizon)
    preds, gts = [], []
    for idx in indices:
        data = cache.get(sequence_id, idx)
        feats = data.features
        if model.use_gaze:
            feats = np.concatenate(
                [feats, cache.gaze_matrix(sequence_id, idx)], axis=1
            )
        smap = predict_saliency_map(
            data.frame, data.proposals, model, features=feats
        )
        preds.append(smap)
        gts.append(
            data.gt.mask if data.gt is not None else np.zeros(data.frame.dims, bool)
        )
    curve = pr_curve(preds, gts)
    return max_f_score(curve), average_precision(curve)


def evaluate_interaction(
    manifest: DatasetManifest,
    saliency_model: TaskModel,
    interaction_model: TaskModel,
    sequence_id: str,
    cache: FeatureCache,
) -> tuple[list[str], list[str], list[float]]:
    """(predicted labels, GT labels, top-region mean depths) per frame."""
    indices = eligible_frames(manifest, sequence_id, "interaction")
    preds, gts, top_depths = [], [], []
    for idx in indices:
        data = cache.get(sequence_id, idx)
        sal = score_regions(saliency_model, data.features)
        touch = score_regions(interaction_model, data.features)
        preds.append(classify_interaction_scores(sal, touch))
        gts.append(data.entry.interaction)
        order = np.lexsort((np.arange(sal.shape[0]), -sal))
        top_depths.append(float(data.region_mean_depth[order[0]]))
    return preds, gts, top_depths


def gt_depth_samples(
    manifest: DatasetManifest, sequence_ids: Sequence[str], cache: FeatureCache
) -> list[tuple[float, str]]:
    """(mean GT-region depth, label) pairs for baseline threshold training."""
    samples = []
    for seq_id in sequence_ids:
        for idx in eligible_frames(manifest, seq_id, "interaction"):
            data = cache.get(seq_id, idx)
            if data.gt is None:
                continue
            samples.append(
                (_region_mean_depth(data.gt, data.frame.depth), data.entry.interaction)
            )
    return samples
