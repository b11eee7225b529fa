"""Stereo depth from rectified pairs: per-scanline DP, coarse-to-fine.

Matching cost is a truncated sum of absolute differences over a 1-D window
along the scanline; each scanline is solved independently by dynamic
programming over disparity states plus an occlusion state, so rows may be
processed in parallel with identical results.

Disparity convention: left pixel at column c matches right pixel at c - d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OCCLUDED = -1  # marker in raw scanline output before back-filling


@dataclass(frozen=True)
class StereoParams:
    d_max: int
    window: int = 5
    trunc: float = 50.0
    occlusion_penalty: float = 60.0
    smoothness_penalty: float = 4.0
    search_band: int = 2


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-pixel disparity; NaN marks invalid (never produced after back-fill)."""

    disparity: np.ndarray

    @property
    def dims(self) -> tuple[int, int]:
        return self.disparity.shape


def matching_cost(
    left_row: np.ndarray,
    right_row: np.ndarray,
    d_max: int,
    window: int = 5,
    trunc: float = 50.0,
) -> np.ndarray:
    """Cost volume row: cost[c, d] of matching left col c to right col c - d.

    Per-pixel absolute differences are truncated at `trunc` and summed over
    a centered window of odd width; window positions that fall outside
    either row, and disparities with c - d < 0, get a large finite penalty.
    """
    left_row = np.asarray(left_row, dtype=np.float64)
    right_row = np.asarray(right_row, dtype=np.float64)
    if left_row.ndim != 1 or left_row.shape != right_row.shape:
        raise ValueError("rows must be 1-D and the same length")
    w = left_row.shape[0]
    if w == 0:
        raise ValueError("rows must be non-empty")
    if d_max >= w:
        raise ValueError(f"d_max {d_max} must be < row length {w}")
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")

    big = window * trunc * 4.0 + 1.0
    half = window // 2
    cols = np.arange(w)
    cost = np.full((w, d_max + 1), big, dtype=np.float64)
    for d in range(d_max + 1):
        # Absolute difference of the overlapping span, truncated.
        diff = np.full(w, trunc, dtype=np.float64)
        if w - d > 0:
            diff[d:] = np.minimum(np.abs(left_row[d:] - right_row[: w - d]), trunc)
        # Windowed sum via cumulative sums with edge positions penalized.
        padded = np.concatenate([np.full(half, trunc), diff, np.full(half, trunc)])
        csum = np.concatenate([[0.0], np.cumsum(padded)])
        wsum = csum[window:] - csum[:-window]
        valid = cols - d >= 0
        cost[valid, d] = wsum[valid]
    return cost


def scanline_dp(
    cost_row: np.ndarray,
    occlusion_penalty: float,
    smoothness_penalty: float,
    bands: np.ndarray | None = None,
) -> np.ndarray:
    """Globally optimal disparity assignment for one scanline.

    Minimizes sum_c unary(c, s_c) + smoothness * sum |d_c - d_{c+1}| where
    unary is the matching cost for disparity states and `occlusion_penalty`
    for the occlusion state; the smoothness term applies only between pixels
    that both carry a disparity. Ties break toward the lowest disparity,
    with occlusion ranked after every disparity.

    `bands` (optional, bool (W, D+1)) restricts the allowed disparities per
    column; disallowed states get infinite unary cost.

    Returns an int array with OCCLUDED (-1) marking occluded pixels.
    """
    cost_row = np.asarray(cost_row, dtype=np.float64)
    if cost_row.ndim != 2 or cost_row.shape[0] == 0:
        raise ValueError("cost_row must be a non-empty (W, D+1) array")
    if occlusion_penalty < 0 or smoothness_penalty < 0:
        raise ValueError("penalties must be >= 0")
    w, n_disp = cost_row.shape

    unary = np.concatenate(
        [cost_row, np.full((w, 1), float(occlusion_penalty))], axis=1
    )
    if bands is not None:
        blocked = ~np.asarray(bands, dtype=bool)
        unary[:, :n_disp][blocked] = np.inf

    disp = np.arange(n_disp, dtype=np.float64)
    trans = smoothness_penalty * np.abs(disp[:, None] - disp[None, :])
    trans = np.pad(trans, ((0, 1), (0, 1)))  # occlusion transitions cost 0

    n_states = n_disp + 1
    acc = unary[0].copy()
    back = np.zeros((w, n_states), dtype=np.int32)
    for c in range(1, w):
        # total[s_prev, s] = acc[s_prev] + trans[s_prev, s]
        total = acc[:, None] + trans
        best_prev = np.argmin(total, axis=0)  # lowest index wins ties
        acc = total[best_prev, np.arange(n_states)] + unary[c]
        back[c] = best_prev

    states = np.empty(w, dtype=np.int32)
    states[-1] = int(np.argmin(acc))
    for c in range(w - 1, 0, -1):
        states[c - 1] = back[c, states[c]]
    out = states.astype(np.int64)
    out[out == n_disp] = OCCLUDED
    return out


def assignment_cost(
    cost_row: np.ndarray,
    states: np.ndarray,
    occlusion_penalty: float,
    smoothness_penalty: float,
) -> float:
    """Objective value of a scanline assignment (OCCLUDED allowed)."""
    states = np.asarray(states)
    total = 0.0
    for c, s in enumerate(states):
        total += occlusion_penalty if s == OCCLUDED else cost_row[c, s]
    for a, b in zip(states, states[1:]):
        if a != OCCLUDED and b != OCCLUDED:
            total += smoothness_penalty * abs(int(a) - int(b))
    return float(total)


def backfill_occlusions(disp_row: np.ndarray) -> np.ndarray:
    """Replace OCCLUDED entries with the nearest valid neighbor to the left
    (falling back to the nearest right neighbor, then 0)."""
    out = disp_row.copy()
    last = None
    for c in range(out.shape[0]):
        if out[c] == OCCLUDED:
            if last is not None:
                out[c] = last
        else:
            last = out[c]
    nxt = None
    for c in range(out.shape[0] - 1, -1, -1):
        if out[c] == OCCLUDED:
            out[c] = 0 if nxt is None else nxt
        else:
            nxt = out[c]
    return out


def _to_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img @ np.array([0.299, 0.587, 0.114])
    return img


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    padded = np.pad(img, ((0, h % 2), (0, w % 2)), mode="edge")
    return 0.25 * (
        padded[0::2, 0::2] + padded[1::2, 0::2] + padded[0::2, 1::2] + padded[1::2, 1::2]
    )


def coarse_to_fine(
    left: np.ndarray, right: np.ndarray, levels: int, params: StereoParams
) -> DisparityMap:
    """Dense disparity via pyramid DP.

    Solves full-range scanline DP at the coarsest level, then at each finer
    level restricts the search to +-search_band around the upsampled coarser
    estimate. With levels=1 this reduces exactly to per-row scanline DP.
    Odd dimensions are edge-padded for downsampling and cropped on the way
    back up; occluded pixels are back-filled so the output is dense.
    """
    gl, gr = _to_gray(left), _to_gray(right)
    if gl.shape != gr.shape:
        raise ValueError("left/right dims differ")
    if levels < 1:
        raise ValueError("levels must be >= 1")

    pyr_l, pyr_r = [gl], [gr]
    for _ in range(levels - 1):
        pyr_l.append(_downsample2(pyr_l[-1]))
        pyr_r.append(_downsample2(pyr_r[-1]))

    d_top = max(1, int(np.ceil(params.d_max / 2 ** (levels - 1))))
    if pyr_l[-1].shape[1] < 2 * d_top:
        raise ValueError(
            "too many levels: coarsest width must be >= 2 * d_max at that level"
        )

    est: np.ndarray | None = None
    for level in range(levels - 1, -1, -1):
        il, ir = pyr_l[level], pyr_r[level]
        h, w = il.shape
        d_lvl = min(max(1, int(np.ceil(params.d_max / 2**level))), w - 1)
        if est is not None:
            est = np.repeat(np.repeat(est, 2, axis=0), 2, axis=1)[:h, :w] * 2
            est = np.clip(est, 0, d_lvl)
        rows = np.empty((h, w), dtype=np.int64)
        for r in range(h):
            cost = matching_cost(il[r], ir[r], d_lvl, params.window, params.trunc)
            bands = None
            if est is not None:
                d_vals = np.arange(d_lvl + 1)
                bands = (
                    np.abs(d_vals[None, :] - est[r][:, None]) <= params.search_band
                )
            raw = scanline_dp(
                cost, params.occlusion_penalty, params.smoothness_penalty, bands
            )
            rows[r] = backfill_occlusions(raw)
        est = rows
    return DisparityMap(disparity=est.astype(np.float64))


def disparity_to_depth(
    dmap: DisparityMap, focal_px: float, baseline_m: float
) -> np.ndarray:
    """depth = focal * baseline / disparity; zero/invalid disparity -> NaN."""
    if focal_px <= 0 or baseline_m <= 0:
        raise ValueError("focal_px and baseline_m must be > 0")
    d = np.asarray(dmap.disparity, dtype=np.float64)
    depth = np.full(d.shape, np.nan)
    valid = np.isfinite(d) & (d > 0)
    depth[valid] = focal_px * baseline_m / d[valid]
    return depth
