"""Core value types, dataset manifest IO, raster codecs, and mask IOU.

All types are immutable after construction: array fields are copied and
marked read-only, so instances can be shared freely across threads.

On-disk conventions:
  * dataset manifest: single UTF-8 JSON document (see `load_dataset`),
  * depth rasters: 16-bit grayscale PNG, millimeters, 0 = invalid,
  * region masks: 1-bit PNG, 255 = region,
  * heatmaps: 8-bit grayscale PNG, 255 = score 1.0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .errors import DatasetError

DEPTH_SCALE_M = 0.001  # meters per stored 16-bit unit (millimeter rasters)

VALID_HORIZONS = (2, 4, 6)
INTERACTION_LABELS = ("sight", "touch")


def _frozen_array(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class RgbdFrame:
    """Registered color image plus metric depth map for one video frame.

    `depth` is in meters with non-finite values marking invalid pixels;
    every finite depth must be positive.
    """

    rgb: np.ndarray
    depth: np.ndarray
    sequence_id: str = ""
    frame_index: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        depth = np.asarray(self.depth, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
            raise ValueError("rgb must be an (H, W, 3) uint8 raster")
        if depth.shape != rgb.shape[:2]:
            raise ValueError(
                f"depth dims {depth.shape} do not match rgb dims {rgb.shape[:2]}"
            )
        finite = depth[np.isfinite(depth)]
        if finite.size and finite.min() <= 0:
            raise ValueError("finite depth values must be > 0")
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        object.__setattr__(self, "rgb", _frozen_array(rgb))
        object.__setattr__(self, "depth", _frozen_array(depth))

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return self.rgb.shape[0], self.rgb.shape[1]


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Binary pixel set for one proposal region with cached geometry.

    bbox is (top, left, bottom, right) inclusive; centroid is the mean of
    the member pixel (row, col) coordinates.
    """

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError("mask must be a 2-D boolean raster")
        if not mask.any():
            raise ValueError("region must contain at least one pixel")
        object.__setattr__(self, "mask", _frozen_array(mask))

    @classmethod
    def from_pixels(cls, dims: tuple[int, int], pixels) -> "RegionMask":
        coords = np.atleast_2d(np.asarray(list(pixels), dtype=np.int64))
        h, w = dims
        if coords.size == 0:
            raise ValueError("region must contain at least one pixel")
        if (
            coords[:, 0].min() < 0
            or coords[:, 1].min() < 0
            or coords[:, 0].max() >= h
            or coords[:, 1].max() >= w
        ):
            raise ValueError("pixel outside frame bounds")
        mask = np.zeros(dims, dtype=bool)
        mask[coords[:, 0], coords[:, 1]] = True
        return cls(mask)

    @property
    def dims(self) -> tuple[int, int]:
        return self.mask.shape

    @cached_property
    def area(self) -> int:
        return int(self.mask.sum())

    @cached_property
    def bbox(self) -> tuple[int, int, int, int]:
        rows = np.flatnonzero(self.mask.any(axis=1))
        cols = np.flatnonzero(self.mask.any(axis=0))
        return int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1])

    @cached_property
    def centroid(self) -> tuple[float, float]:
        rr, cc = np.nonzero(self.mask)
        return float(rr.mean()), float(cc.mean())

    def pixel_coords(self) -> np.ndarray:
        """Member pixels as an (N, 2) array of (row, col)."""
        return np.argwhere(self.mask)


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    """Per-pixel score field; every score must lie in [0, 1]."""

    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ValueError("scores must be a 2-D raster")
        if scores.min() < 0.0 or scores.max() > 1.0:
            raise ValueError("saliency scores must lie in [0, 1]")
        object.__setattr__(self, "scores", _frozen_array(scores))

    @property
    def dims(self) -> tuple[int, int]:
        return self.scores.shape


def iou(a: RegionMask, b: RegionMask) -> float:
    """Intersection over union of two masks on the same frame; 0 if disjoint."""
    if a.dims != b.dims:
        raise ValueError(f"mask dims differ: {a.dims} vs {b.dims}")
    inter = int(np.logical_and(a.mask, b.mask).sum())
    if inter == 0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


# ---------------------------------------------------------------------------
# Depth raster codec


def decode_depth(raster: np.ndarray, scale: float = DEPTH_SCALE_M) -> np.ndarray:
    """16-bit raster -> metric depth. Stored 0 decodes to invalid (NaN)."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    raster = np.asarray(raster)
    if raster.dtype != np.uint16:
        raise DatasetError(f"depth raster must be 16-bit, got {raster.dtype}")
    depth = raster.astype(np.float64) * scale
    depth[raster == 0] = np.nan
    return depth


def encode_depth(depth: np.ndarray, scale: float = DEPTH_SCALE_M) -> np.ndarray:
    """Metric depth -> 16-bit raster; invalid (non-finite or <= 0) stores 0."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    depth = np.asarray(depth, dtype=np.float64)
    units = np.zeros(depth.shape, dtype=np.uint16)
    valid = np.isfinite(depth) & (depth > 0)
    units[valid] = np.clip(np.rint(depth[valid] / scale), 0, 65535).astype(np.uint16)
    return units


# ---------------------------------------------------------------------------
# PNG helpers


def read_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_rgb(path, rgb: np.ndarray) -> None:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def read_depth_png(path, scale: float = DEPTH_SCALE_M) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I"):
            raise DatasetError(f"{path}: depth PNG must be 16-bit grayscale")
        raster = np.asarray(im, dtype=np.int64)
    if raster.min() < 0 or raster.max() > 65535:
        raise DatasetError(f"{path}: depth values outside 16-bit range")
    return decode_depth(raster.astype(np.uint16), scale)


def write_depth_png(path, depth: np.ndarray, scale: float = DEPTH_SCALE_M) -> None:
    units = encode_depth(depth, scale)
    Image.fromarray(units).save(path)  # uint16 -> 16-bit grayscale PNG


def read_mask_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


def write_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(np.asarray(mask, dtype=bool)).save(path)


def read_heatmap_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0


def write_heatmap_png(path, scores: np.ndarray) -> None:
    arr = np.clip(np.asarray(scores, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.rint(arr * 255).astype(np.uint8), mode="L").save(path)


# ---------------------------------------------------------------------------
# Dataset manifest


@dataclass(frozen=True)
class FutureLink:
    later_index: int
    horizon_s: int


@dataclass(frozen=True)
class FrameEntry:
    index: int
    rgb: str
    depth: str
    gt_mask: Optional[str] = None
    interaction: Optional[str] = None
    future: Optional[FutureLink] = None


@dataclass(frozen=True)
class SequenceEntry:
    id: str
    frames: tuple[FrameEntry, ...]

    def frame(self, index: int) -> FrameEntry:
        for entry in self.frames:
            if entry.index == index:
                return entry
        raise KeyError(f"sequence {self.id!r} has no frame {index}")


@dataclass(frozen=True)
class DatasetManifest:
    sequences: tuple[SequenceEntry, ...]
    root: Path = field(compare=False, default=Path("."))

    def sequence_ids(self) -> list[str]:
        return [s.id for s in self.sequences]

    def sequence(self, sequence_id: str) -> SequenceEntry:
        for s in self.sequences:
            if s.id == sequence_id:
                return s
        raise KeyError(f"no sequence {sequence_id!r} in manifest")

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath


def _parse_frame(seq_i: int, frame_i: int, obj: dict) -> FrameEntry:
    where = f"sequences[{seq_i}].frames[{frame_i}]"
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: frame entry must be an object")
    for key in ("index", "rgb", "depth"):
        if key not in obj:
            raise DatasetError(f"{where}: missing field '{key}'")
    future = None
    if obj.get("future") is not None:
        fut = obj["future"]
        if not isinstance(fut, dict) or "later_index" not in fut or "horizon_s" not in fut:
            raise DatasetError(f"{where}.future: needs 'later_index' and 'horizon_s'")
        if fut["horizon_s"] not in VALID_HORIZONS:
            raise DatasetError(f"{where}.future: horizon must be 2, 4, or 6")
        future = FutureLink(int(fut["later_index"]), int(fut["horizon_s"]))
    interaction = obj.get("interaction")
    if interaction is not None and interaction not in INTERACTION_LABELS:
        raise DatasetError(f"{where}: interaction must be 'sight' or 'touch'")
    try:
        return FrameEntry(
            index=int(obj["index"]),
            rgb=str(obj["rgb"]),
            depth=str(obj["depth"]),
            gt_mask=None if obj.get("gt_mask") is None else str(obj["gt_mask"]),
            interaction=interaction,
            future=future,
        )
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: {exc}") from exc


def load_dataset(manifest_path) -> DatasetManifest:
    """Load and validate a `dataset.json` manifest.

    Checks schema, frame ordering, future-link targets and horizons, and
    the existence of every referenced file. Raises DatasetError with the
    offending path or field on failure.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("sequences"), list):
        raise DatasetError(f"{manifest_path}: top level must contain 'sequences' list")

    root = manifest_path.parent
    sequences = []
    for seq_i, seq_obj in enumerate(doc["sequences"]):
        if not isinstance(seq_obj, dict) or "id" not in seq_obj or "frames" not in seq_obj:
            raise DatasetError(f"sequences[{seq_i}]: needs 'id' and 'frames'")
        frames = [
            _parse_frame(seq_i, frame_i, f)
            for frame_i, f in enumerate(seq_obj["frames"])
        ]
        indices = [f.index for f in frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise DatasetError(
                f"sequences[{seq_i}]: frames must be strictly ordered by index"
            )
        index_set = set(indices)
        for f in frames:
            if f.future is not None and f.future.later_index not in index_set:
                raise DatasetError(
                    f"sequences[{seq_i}] frame {f.index}: future link targets "
                    f"missing frame {f.future.later_index}"
                )
            for relpath in (f.rgb, f.depth, f.gt_mask):
                if relpath is not None and not (root / relpath).is_file():
                    raise DatasetError(f"referenced file not found: {root / relpath}")
        sequences.append(SequenceEntry(id=str(seq_obj["id"]), frames=tuple(frames)))
    return DatasetManifest(sequences=tuple(sequences), root=root)


def save_dataset(manifest: DatasetManifest, manifest_path) -> None:
    """Write the manifest back to JSON; load(save(m)) is value-identical."""
    doc = {"sequences": []}
    for seq in manifest.sequences:
        frames = []
        for f in seq.frames:
            entry: dict = {"index": f.index, "rgb": f.rgb, "depth": f.depth}
            if f.gt_mask is not None:
                entry["gt_mask"] = f.gt_mask
            if f.interaction is not None:
                entry["interaction"] = f.interaction
            if f.future is not None:
                entry["future"] = {
                    "later_index": f.future.later_index,
                    "horizon_s": f.future.horizon_s,
                }
            frames.append(entry)
        doc["sequences"].append({"id": seq.id, "frames": frames})
    Path(manifest_path).write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8"
    )


def load_frame(
    manifest: DatasetManifest, sequence_id: str, frame_index: int
) -> tuple[RgbdFrame, Optional[RegionMask], FrameEntry]:
    """Materialize one frame entry: rasters from disk plus its GT mask if any."""
    seq = manifest.sequence(sequence_id)
    entry = seq.frame(frame_index)
    rgb = read_rgb(manifest.resolve(entry.rgb))
    depth = read_depth_png(manifest.resolve(entry.depth))
    if depth.shape != rgb.shape[:2]:
        raise DatasetError(
            f"{entry.depth}: depth dims {depth.shape} do not match rgb {rgb.shape[:2]}"
        )
    frame = RgbdFrame(
        rgb=rgb,
        depth=depth,
        sequence_id=sequence_id,
        frame_index=entry.index,
        timestamp=float(entry.index),
    )
    gt = None
    if entry.gt_mask is not None:
        mask = read_mask_png(manifest.resolve(entry.gt_mask))
        if mask.shape != frame.dims:
            raise DatasetError(f"{entry.gt_mask}: mask dims do not match frame")
        # An annotated-but-empty mask stays None; callers treat it as a
        # frame whose every region has zero overlap.
        gt = RegionMask(mask) if mask.any() else None
    return frame, gt, entry
