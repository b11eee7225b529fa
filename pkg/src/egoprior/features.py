"""Per-region base feature vector: shape, location, size, and depth cues.

The base vector has 77 dimensions with a published index map:

    idx  0-3   shape/1: perimeter/sqrt(area), area/bbox_area,
               major axis, minor axis (axes / image diagonal)
    idx  4-7   shape/2: boundary contour sum, boundary contour mean,
               merge-tree appear threshold, disappear threshold
    idx  8-10  shape/3: eccentricity, orientation (rad, [-pi/2, pi/2]),
               equivalent circle diameter / image diagonal
    idx 11-16  location/1: bbox x0/W, y0/H, x1/W, y1/H, centroid cx/W, cy/H
               (x1/y1 exclusive so a full-frame region reads 1.0)
    idx 17-26  location/2: signed (dx, dy) offsets, normalized by (W, H),
               from the centroid to the image center and to the four border
               midpoints in top, bottom, left, right order
    idx 27-30  size: area/(W*H), perimeter/diagonal, bbox_area/(W*H),
               bbox width/height (cols/rows)
    idx 31-34  depth/1: min, mean, max, population std of valid depths (m)
    idx 35-43  depth/2: 3x3 bbox grid of per-cell mean valid depth, row-major
    idx 44-55  depth/3: 4x3 grid aligned to the major axis (4 bins along it)
    idx 56-64  depth/4: depth/2 grid divided by the region max valid depth
    idx 65-76  depth/5: depth/3 grid divided by the region max valid depth

Pixel centers sit at +0.5, so a pixel at (0, 0) in a 100x100 frame has
normalized centroid (0.005, 0.005). Geometry uses crack-boundary perimeter
and second central moments of pixel coordinates. Regions with no valid
depth produce 46 zeros and a False validity flag rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RegionMask
from .proposals import MergeTree, ucm_bounds

BASE_LAYOUT_ID = "ego77.v1"
BASE_DIM = 77
N_GAZE = 5

BASE_GROUP_SLICES = {
    "shape": slice(0, 11),
    "location": slice(11, 27),
    "size": slice(27, 31),
    "depth": slice(31, 77),
}

GROUP_NAMES = (
    "shape",
    "location",
    "size",
    "depth",
    "shape-ctx",
    "location-ctx",
    "size-ctx",
    "depth-ctx",
)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Fixed-layout numeric vector with its layout version tag."""

    values: np.ndarray
    layout_id: str = BASE_LAYOUT_ID

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("feature values must be 1-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must all be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


def base_feature_names() -> list[str]:
    names = [
        "s1_perimeter_over_sqrt_area",
        "s1_extent",
        "s1_major_axis",
        "s1_minor_axis",
        "s2_boundary_contour_sum",
        "s2_boundary_contour_mean",
        "s2_ucm_appear",
        "s2_ucm_disappear",
        "s3_eccentricity",
        "s3_orientation",
        "s3_equiv_diameter",
        "l1_bbox_x0",
        "l1_bbox_y0",
        "l1_bbox_x1",
        "l1_bbox_y1",
        "l1_centroid_x",
        "l1_centroid_y",
    ]
    for ref in ("center", "top", "bottom", "left", "right"):
        names += [f"l2_{ref}_dx", f"l2_{ref}_dy"]
    names += ["b1_area", "b1_perimeter", "b2_bbox_area", "b2_bbox_aspect"]
    names += ["d1_min", "d1_mean", "d1_max", "d1_std"]
    names += [f"d2_cell_{r}{c}" for r in range(3) for c in range(3)]
    names += [f"d3_cell_{u}{v}" for u in range(4) for v in range(3)]
    names += [f"d4_cell_{r}{c}" for r in range(3) for c in range(3)]
    names += [f"d5_cell_{u}{v}" for u in range(4) for v in range(3)]
    assert len(names) == BASE_DIM
    return names


def base_feature_groups() -> list[str]:
    groups = [""] * BASE_DIM
    for name, sl in BASE_GROUP_SLICES.items():
        for i in range(sl.start, sl.stop):
            groups[i] = name
    return groups


# ---------------------------------------------------------------------------
# Geometry helpers


def crack_perimeter(mask: np.ndarray) -> int:
    """Total length of exposed pixel edges (the crack boundary)."""
    area = int(mask.sum())
    adj_h = int(np.logical_and(mask[:, :-1], mask[:, 1:]).sum())
    adj_v = int(np.logical_and(mask[:-1, :], mask[1:, :]).sum())
    return 4 * area - 2 * (adj_h + adj_v)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Region pixels touching the outside (4-connectivity, frame edge counts)."""
    padded = np.pad(mask, 1, mode="constant")
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def second_moments(region: RegionMask) -> tuple[float, float, float]:
    """Population central moments (var_x, var_y, cov_xy) with x=col, y=row."""
    rr, cc = np.nonzero(region.mask)
    x = cc - cc.mean()
    y = rr - rr.mean()
    n = x.shape[0]
    return float(x @ x / n), float(y @ y / n), float(x @ y / n)


def moment_ellipse(region: RegionMask) -> tuple[float, float, float, float]:
    """(major_len, minor_len, eccentricity, orientation) from second moments.

    Axis lengths follow the moment-matched ellipse (4 * sqrt(eigenvalue)).
    Orientation is the major-axis angle from the +x (column) axis toward +y
    (row), wrapped to [-pi/2, pi/2]; degenerate regions report 0.
    """
    vxx, vyy, vxy = second_moments(region)
    common = np.hypot((vxx - vyy) / 2.0, vxy)
    lam1 = (vxx + vyy) / 2.0 + common
    lam2 = max((vxx + vyy) / 2.0 - common, 0.0)
    if lam1 <= 1e-12:
        return 0.0, 0.0, 0.0, 0.0
    ecc = float(np.sqrt(max(1.0 - lam2 / lam1, 0.0)))
    if abs(vxy) < 1e-12 and abs(vxx - vyy) < 1e-12:
        theta = 0.0
    else:
        theta = 0.5 * np.arctan2(2.0 * vxy, vxx - vyy)
    if theta > np.pi / 2:
        theta -= np.pi
    elif theta <= -np.pi / 2:
        theta += np.pi
    return 4.0 * float(np.sqrt(lam1)), 4.0 * float(np.sqrt(lam2)), ecc, float(theta)


# ---------------------------------------------------------------------------
# Feature blocks


def shape_features(
    region: RegionMask,
    contour: np.ndarray,
    tree: MergeTree,
    node_id: int | None = None,
) -> np.ndarray:
    """11 shape cues; see the module index map (idx 0-10)."""
    h, w = region.dims
    diag = float(np.hypot(h, w))
    perim = crack_perimeter(region.mask)
    top, left, bottom, right = region.bbox
    bbox_area = (bottom - top + 1) * (right - left + 1)
    major, minor, ecc, theta = moment_ellipse(region)
    boundary = boundary_pixels(region.mask)
    csum = float(np.asarray(contour)[boundary].sum())
    cnt = int(boundary.sum())
    appear, disappear = ucm_bounds(region, tree, node_id)
    equiv = 2.0 * np.sqrt(region.area / np.pi)
    return np.array(
        [
            perim / np.sqrt(region.area),
            region.area / bbox_area,
            major / diag,
            minor / diag,
            csum,
            csum / cnt if cnt else 0.0,
            appear,
            disappear,
            ecc,
            theta,
            equiv / diag,
        ]
    )


def location_features(region: RegionMask, dims: tuple[int, int]) -> np.ndarray:
    """16 location cues; see the module index map (idx 11-26)."""
    h, w = dims
    top, left, bottom, right = region.bbox
    cy, cx = region.centroid
    cxn = (cx + 0.5) / w
    cyn = (cy + 0.5) / h
    refs = [
        (0.5, 0.5),  # image center
        (0.5, 0.0),  # top border midpoint
        (0.5, 1.0),  # bottom
        (0.0, 0.5),  # left
        (1.0, 0.5),  # right
    ]
    offsets = []
    for rx, ry in refs:
        offsets += [cxn - rx, cyn - ry]
    return np.array(
        [left / w, top / h, (right + 1) / w, (bottom + 1) / h, cxn, cyn] + offsets
    )


def size_features(region: RegionMask) -> np.ndarray:
    """4 size cues; see the module index map (idx 27-30)."""
    h, w = region.dims
    diag = float(np.hypot(h, w))
    top, left, bottom, right = region.bbox
    bh, bw = bottom - top + 1, right - left + 1
    return np.array(
        [
            region.area / (h * w),
            crack_perimeter(region.mask) / diag,
            (bh * bw) / (h * w),
            bw / bh,
        ]
    )


def _cell_means(
    bins: np.ndarray, depths: np.ndarray, valid: np.ndarray, n_cells: int
) -> np.ndarray:
    sums = np.bincount(bins[valid], weights=depths[valid], minlength=n_cells)
    cnts = np.bincount(bins[valid], minlength=n_cells)
    out = np.zeros(n_cells)
    nz = cnts > 0
    out[nz] = sums[nz] / cnts[nz]
    return out


def depth_features(
    region: RegionMask, depth: np.ndarray
) -> tuple[np.ndarray, bool]:
    """46 depth cues plus a validity flag; see the index map (idx 31-76).

    A region with no valid (finite) depth pixel yields all zeros and False.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != region.dims:
        raise ValueError("depth raster dims do not match region dims")
    rr, cc = np.nonzero(region.mask)
    d = depth[rr, cc]
    valid = np.isfinite(d)
    if not valid.any():
        return np.zeros(46), False

    dv = d[valid]
    stats = np.array([dv.min(), dv.mean(), dv.max(), dv.std()])

    top, left, bottom, right = region.bbox
    bh, bw = bottom - top + 1, right - left + 1
    row_bin = np.minimum((rr - top) * 3 // bh, 2)
    col_bin = np.minimum((cc - left) * 3 // bw, 2)
    grid33 = _cell_means(row_bin * 3 + col_bin, d, valid, 9)

    # Rotate pixel coordinates about the centroid so the major axis lies
    # along u; bins assign each pixel by its rotated coordinate (no depth
    # resampling, so invalid sentinels never mix into the means).
    _, _, _, theta = moment_ellipse(region)
    cy, cx = region.centroid
    ct, st = np.cos(theta), np.sin(theta)
    u = ct * (cc - cx) + st * (rr - cy)
    v = -st * (cc - cx) + ct * (rr - cy)
    grid43 = _cell_means(
        _axis_bins(u, 4) * 3 + _axis_bins(v, 3), d, valid, 12
    )

    dmax = dv.max()
    norm33 = grid33 / dmax if dmax > 0 else np.zeros(9)
    norm43 = grid43 / dmax if dmax > 0 else np.zeros(12)
    return np.concatenate([stats, grid33, grid43, norm33, norm43]), True


def _axis_bins(coords: np.ndarray, n_bins: int) -> np.ndarray:
    lo, hi = coords.min(), coords.max()
    extent = hi - lo
    if extent <= 0:
        return np.zeros(coords.shape, dtype=np.int64)
    return np.minimum(((coords - lo) / extent * n_bins).astype(np.int64), n_bins - 1)


def base_features(
    region: RegionMask,
    contour: np.ndarray,
    tree: MergeTree,
    depth: np.ndarray,
    dims: tuple[int, int],
    node_id: int | None = None,
) -> FeatureVector:
    """Concatenated 77-dim base vector in the published layout order."""
    if region.dims != tuple(dims):
        raise ValueError("region dims do not match frame dims")
    depth_vec, _ = depth_features(region, depth)
    values = np.concatenate(
        [
            shape_features(region, contour, tree, node_id),
            location_features(region, dims),
            size_features(region),
            depth_vec,
        ]
    )
    return FeatureVector(values=values, layout_id=BASE_LAYOUT_ID)


# ---------------------------------------------------------------------------
# Full-layout helpers (base + context + optional gaze)


def full_feature_names(knn: int, gaze: bool = False) -> list[str]:
    base = base_feature_names()
    names = list(base)
    for block in ("ctxmin", "ctxmean", "ctxmax"):
        names += [f"{block}_{n}" for n in base]
    for j in range(1, knn + 1):
        names += [f"ctxnn{j}_{n}" for n in base]
    if gaze:
        names += [f"gaze_d{k}" for k in range(1, N_GAZE + 1)]
    return names


def full_feature_groups(knn: int, gaze: bool = False) -> list[str]:
    """Importance group of every column; gaze dims count as location cues."""
    base = base_feature_groups()
    groups = list(base)
    for _ in range(3 + knn):
        groups += [f"{g}-ctx" for g in base]
    if gaze:
        groups += ["location"] * N_GAZE
    return groups


def full_layout_id(n_neighbors: int, knn: int, gaze: bool = False) -> str:
    tag = f"{BASE_LAYOUT_ID}/ctx{n_neighbors}.{knn}"
    return tag + "/gaze5" if gaze else tag


def full_dim(knn: int, gaze: bool = False) -> int:
    return BASE_DIM * (4 + knn) + (N_GAZE if gaze else 0)
