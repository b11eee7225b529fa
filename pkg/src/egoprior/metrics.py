"""Precision-recall machinery: Max F-score, Average Precision, interaction
accuracy, and per-sequence report tables.

Pixels are pooled globally across all frames of a sequence before the
confusion counts are taken (not averaged per frame). The default threshold
grid is the 256 values 0, 1/255, ..., 1, which matches 8-bit heatmap
output exactly; precision is defined as 1 when nothing is predicted
positive. AP uses step integration with precision monotonized from high
recall to low.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import RegionMask, SaliencyMap
from .errors import EvaluationError

DEFAULT_THRESHOLDS = np.arange(256) / 255.0


@dataclass(frozen=True, eq=False)
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        p = np.asarray(self.precision, dtype=np.float64)
        r = np.asarray(self.recall, dtype=np.float64)
        if not (t.shape == p.shape == r.shape) or t.ndim != 1 or t.size == 0:
            raise ValueError("curve arrays must be equal-length, 1-D, non-empty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if np.any(np.diff(r) > 1e-12):
            raise ValueError("recall must be non-increasing along thresholds")
        if p.min() < 0 or p.max() > 1 or r.min() < 0 or r.max() > 1:
            raise ValueError("precision/recall must lie in [0, 1]")
        for name, arr in (("thresholds", t), ("precision", p), ("recall", r)):
            object.__setattr__(self, name, arr)


def _scores_of(m) -> np.ndarray:
    return m.scores if isinstance(m, SaliencyMap) else np.asarray(m, dtype=np.float64)


def _mask_of(m) -> np.ndarray:
    return m.mask if isinstance(m, RegionMask) else np.asarray(m, dtype=bool)


def confusion_counts(
    pred_maps: Sequence, gt_masks: Sequence, thresholds: np.ndarray
) -> tuple[np.ndarray, np.ndarray, int]:
    """Pooled (true-positive, predicted-positive) counts per threshold plus
    the total ground-truth positive count."""
    tp = np.zeros(thresholds.size, dtype=np.int64)
    pp = np.zeros(thresholds.size, dtype=np.int64)
    total_gt = 0
    for pred, gt in zip(pred_maps, gt_masks):
        scores = _scores_of(pred).ravel()
        mask = _mask_of(gt).ravel()
        if scores.shape != mask.shape:
            raise ValueError("prediction and ground truth dims differ")
        # Index of the highest threshold each score still passes.
        idx = np.searchsorted(thresholds, scores, side="right") - 1
        pp_hist = np.bincount(idx[idx >= 0], minlength=thresholds.size)
        tp_hist = np.bincount(
            idx[(idx >= 0) & mask], minlength=thresholds.size
        )
        pp += np.cumsum(pp_hist[::-1])[::-1]
        tp += np.cumsum(tp_hist[::-1])[::-1]
        total_gt += int(mask.sum())
    return tp, pp, total_gt


def pr_curve(
    pred_maps: Sequence,
    gt_masks: Sequence,
    thresholds: np.ndarray | None = None,
) -> PrCurve:
    """Precision-recall curve over pixels pooled across all given frames.

    At each threshold t a pixel is positive iff its score >= t. Raises
    EvaluationError when the ground truth has no positive pixel at all.
    """
    if len(pred_maps) != len(gt_masks):
        raise ValueError("pred_maps and gt_masks must pair up")
    thresholds = (
        DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, float)
    )
    tp, pp, total_gt = confusion_counts(pred_maps, gt_masks, thresholds)
    if total_gt == 0:
        raise EvaluationError("ground truth contains no positive pixels")
    precision = np.ones(thresholds.size)
    nz = pp > 0
    precision[nz] = tp[nz] / pp[nz]
    recall = tp / total_gt
    return PrCurve(thresholds=thresholds, precision=precision, recall=recall)


def max_f_score(curve: PrCurve) -> float:
    """Maximum of 2PR/(P+R) along the curve; points with P+R=0 score 0."""
    p, r = curve.precision, curve.recall
    denom = p + r
    f = np.zeros_like(p)
    nz = denom > 0
    f[nz] = 2.0 * p[nz] * r[nz] / denom[nz]
    return float(f.max())


def average_precision(curve: PrCurve) -> float:
    """Step-integrated area under the curve with monotonized precision.

    Points are walked in increasing-recall order; each precision is
    replaced by the maximum precision at greater-or-equal recall before
    summing P_i * (R_i - R_{i-1}) with R_0 = 0.
    """
    order = np.argsort(curve.recall, kind="stable")
    rec = curve.recall[order]
    prec = curve.precision[order]
    prec_mono = np.maximum.accumulate(prec[::-1])[::-1]
    prev = np.concatenate([[0.0], rec[:-1]])
    return float(np.sum(prec_mono * (rec - prev)))


def interaction_accuracy(preds: Sequence[str], gts: Sequence[str]) -> float:
    """Fraction of matching labels."""
    if len(preds) != len(gts):
        raise ValueError("prediction and ground-truth label counts differ")
    if len(preds) == 0:
        raise EvaluationError("no predictions to score")
    return sum(p == g for p, g in zip(preds, gts)) / len(preds)


# ---------------------------------------------------------------------------
# Report rendering


@dataclass(frozen=True)
class EvalReport:
    """One method's per-sequence (MF, AP) scores plus their means."""

    task: str
    method: str
    sequence_scores: tuple[tuple[str, float, float], ...]
    mean_mf: float
    mean_ap: float

    @classmethod
    def build(cls, task, method, scores: Sequence[tuple[str, float, float]]):
        mfs = [s[1] for s in scores]
        aps = [s[2] for s in scores]
        return cls(
            task=task,
            method=method,
            sequence_scores=tuple(scores),
            mean_mf=float(np.mean(mfs)),
            mean_ap=float(np.mean(aps)),
        )


def render_report(
    results: Mapping[str, Mapping[str, tuple[float, float]]],
    task: str = "",
    sequences: Sequence[str] | None = None,
) -> tuple[list[EvalReport], str, str]:
    """Build EvalReports plus CSV and Markdown tables.

    `results` maps method -> sequence -> (MF, AP); values are printed to
    0.1 precision. Columns run MF/AP per sequence then the mean pair.
    """
    if not results:
        raise ValueError("no results to render")
    methods = list(results)
    if sequences is None:
        sequences = list(results[methods[0]])
    reports = []
    for method in methods:
        scores = [
            (seq, *results[method][seq]) for seq in sequences
        ]
        reports.append(EvalReport.build(task, method, scores))

    header = ["method"]
    for seq in sequences:
        header += [f"{seq}_MF", f"{seq}_AP"]
    header += ["mean_MF", "mean_AP"]

    csv_lines = [",".join(header)]
    md_lines = [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
    ]
    for rep in reports:
        cells = [rep.method]
        for _, mf, ap in rep.sequence_scores:
            cells += [f"{mf:.1f}", f"{ap:.1f}"]
        cells += [f"{rep.mean_mf:.1f}", f"{rep.mean_ap:.1f}"]
        csv_lines.append(",".join(cells))
        md_lines.append("| " + " | ".join(cells) + " |")
    return reports, "\n".join(csv_lines) + "\n", "\n".join(md_lines) + "\n"
