"""Homography estimation (Hartley-normalized DLT inside RANSAC) and the
gaze-normalization features built on it.

Frame-to-frame homographies remap the image center of a past frame into
the current one; the distances from a region's centroid to those remapped
centers form the 5 gaze dimensions appended for future-saliency models.
Correspondences may be supplied externally or produced by the simple
block matcher below.
"""

from __future__ import annotations

import numpy as np

from .data import RegionMask
from .errors import EstimationError

RANSAC_THRESHOLD_PX = 3.0
RANSAC_ITERS = 1000
N_GAZE_HISTORY = 5


def _normalize_points(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hartley normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    s = np.sqrt(2.0) / dist if dist > 1e-12 else 1.0
    t = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    homog = np.column_stack([pts, np.ones(len(pts))])
    return (t @ homog.T).T[:, :2], t


def _dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    n = len(src)
    zeros, ones = np.zeros(n), np.ones(n)
    a = np.empty((2 * n, 9))
    a[0::2] = np.column_stack([x, y, ones, zeros, zeros, zeros, -u * x, -u * y, -u])
    a[1::2] = np.column_stack([zeros, zeros, zeros, x, y, ones, -v * x, -v * y, -v])
    _, _, vt = np.linalg.svd(a)
    h = vt[-1].reshape(3, 3)
    if abs(h[2, 2]) < 1e-12:
        return None
    return h / h[2, 2]


def _project(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    homog = np.column_stack([pts, np.ones(len(pts))])
    q = (h @ homog.T).T
    w = q[:, 2]
    w = np.where(np.abs(w) < 1e-12, 1e-12, w)
    return q[:, :2] / w[:, None]


def _has_collinear_triple(pts: np.ndarray, eps: float = 1e-7) -> bool:
    span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1.0)
    for i in range(len(pts)):
        rest = np.delete(pts, i, axis=0)
        u = rest[1] - rest[0]
        v = rest[2] - rest[0]
        area = abs(u[0] * v[1] - u[1] * v[0])
        if area < eps * span * span:
            return True
    return False


def _fit_normalized(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    src_n, t_src = _normalize_points(src)
    dst_n, t_dst = _normalize_points(dst)
    h_n = _dlt(src_n, dst_n)
    if h_n is None:
        return None
    h = np.linalg.inv(t_dst) @ h_n @ t_src
    if abs(h[2, 2]) < 1e-12:
        return None
    return h / h[2, 2]


def estimate_homography(
    correspondences,
    threshold_px: float = RANSAC_THRESHOLD_PX,
    iters: int = RANSAC_ITERS,
    seed: int = 0,
) -> np.ndarray:
    """Fit H mapping (x1, y1) -> (x2, y2) from >= 4 point pairs.

    RANSAC over 4-point DLT models, followed by a Hartley-normalized DLT
    refit on the consensus set. Deterministic for a fixed seed. Raises
    EstimationError for degenerate configurations or < 4 final inliers.
    """
    pairs = np.asarray(correspondences, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 4 or pairs.shape[0] < 4:
        raise ValueError("need an (N, 4) array of [x1, y1, x2, y2] with N >= 4")
    src, dst = pairs[:, :2], pairs[:, 2:]
    n = len(pairs)

    rng = np.random.default_rng(seed)
    best_inliers: np.ndarray | None = None
    best_count = 0
    for _ in range(iters):
        idx = rng.choice(n, size=4, replace=False)
        if _has_collinear_triple(src[idx]) or _has_collinear_triple(dst[idx]):
            continue
        h = _fit_normalized(src[idx], dst[idx])
        if h is None:
            continue
        err = np.linalg.norm(_project(h, src) - dst, axis=1)
        inliers = err <= threshold_px
        count = int(inliers.sum())
        if count > best_count:
            best_count, best_inliers = count, inliers
            if count == n:
                break
    if best_inliers is None or best_count < 4:
        raise EstimationError(
            "homography estimation failed: degenerate points or < 4 inliers"
        )

    h = _fit_normalized(src[best_inliers], dst[best_inliers])
    if h is None:
        raise EstimationError("homography refit failed: degenerate consensus set")
    err = np.linalg.norm(_project(h, src) - dst, axis=1)
    final = err <= threshold_px
    if final.sum() < 4:
        raise EstimationError("homography estimation found < 4 inliers")
    if abs(np.linalg.det(h)) < 1e-9:
        raise EstimationError("estimated homography is singular")
    return h


def match_correspondences(
    img_a: np.ndarray,
    img_b: np.ndarray,
    grid_step: int = 8,
    patch: int = 7,
    search: int = 10,
) -> np.ndarray:
    """Block-match a grid of patches from img_a into img_b.

    Returns an (N, 4) array of [x1, y1, x2, y2]. Plain SAD over square
    patches inside a +-search window; ties resolve to the first offset in
    row-major scan order, so the output is deterministic.
    """
    a = _to_gray(img_a)
    b = _to_gray(img_b)
    if a.shape != b.shape:
        raise ValueError("images must share dims")
    h, w = a.shape
    half = patch // 2
    margin = half + search
    ys = np.arange(margin, h - margin, grid_step)
    xs = np.arange(margin, w - margin, grid_step)
    if len(ys) == 0 or len(xs) == 0:
        raise ValueError("image too small for the matcher configuration")
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    gy, gx = gy.ravel(), gx.ravel()

    offs = patch * patch
    dy_rel, dx_rel = np.mgrid[-half : half + 1, -half : half + 1]
    py = gy[:, None] + dy_rel.ravel()[None, :]
    px = gx[:, None] + dx_rel.ravel()[None, :]
    patches_a = a[py, px]

    best_cost = np.full(len(gy), np.inf)
    best_dy = np.zeros(len(gy), dtype=np.int64)
    best_dx = np.zeros(len(gy), dtype=np.int64)
    for dy in range(-search, search + 1):
        for dx in range(-search, search + 1):
            patches_b = b[py + dy, px + dx]
            cost = np.abs(patches_a - patches_b).sum(axis=1)
            better = cost < best_cost - 1e-12
            best_cost[better] = cost[better]
            best_dy[better] = dy
            best_dx[better] = dx
    return np.column_stack([gx, gy, gx + best_dx, gy + best_dy]).astype(np.float64)


def _to_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img @ np.array([0.299, 0.587, 0.114])
    return img


def gaze_features(
    region: RegionMask, homographies, dims: tuple[int, int]
) -> np.ndarray:
    """Distances from the region centroid to the remapped image centers.

    `homographies` must hold exactly 5 matrices, H mapping frame t-k into
    frame t for k = 1..5 (identity-padded when history is missing). Each
    distance is normalized by the image diagonal.
    """
    if len(homographies) != N_GAZE_HISTORY:
        raise ValueError(f"exactly {N_GAZE_HISTORY} homographies required")
    h, w = dims
    diag = float(np.hypot(h, w))
    center = np.array([w / 2.0, h / 2.0, 1.0])
    cy, cx = region.centroid
    centroid = np.array([cx + 0.5, cy + 0.5])
    out = np.empty(N_GAZE_HISTORY)
    for k, mat in enumerate(homographies):
        mat = np.asarray(mat, dtype=np.float64)
        if abs(np.linalg.det(mat)) < 1e-9:
            raise EstimationError("non-invertible homography in gaze history")
        p = mat @ center
        if abs(p[2]) < 1e-12:
            raise EstimationError("homography maps the image center to infinity")
        out[k] = np.hypot(*(centroid - p[:2] / p[2])) / diag
    return out
