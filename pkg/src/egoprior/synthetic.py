"""Synthetic RGBD scene and dataset generation for tests and demos.

A scene is a textured background plane plus a handful of flat rectangular
or elliptical objects at fixed depths, exactly one of which is salient.
Everything is deterministic for a fixed seed. The interaction label of a
scene is "touch" iff the salient object sits closer than arm's length
(TOUCH_DEPTH_M); that rule only labels generated data, it is not a claim
about real scenes.

`make_*_dataset` functions write a full on-disk dataset (PNG rasters plus
dataset.json) covering the three prediction tasks at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import (
    DatasetManifest,
    FrameEntry,
    FutureLink,
    RegionMask,
    RgbdFrame,
    SequenceEntry,
    save_dataset,
    write_depth_png,
    write_mask_png,
    write_rgb,
)

TOUCH_DEPTH_M = 0.8


@dataclass(frozen=True)
class SceneObject:
    """One flat object: axis-aligned rect or ellipse at a constant depth."""

    shape: str  # "rect" | "ellipse"
    top: float
    left: float
    height: float
    width: float
    depth_m: float
    color: tuple[int, int, int]
    salient: bool = False
    depth_jitter_m: float = 0.0  # linear left-to-right depth ramp amplitude

    @property
    def center(self) -> tuple[float, float]:
        return self.top + (self.height - 1) / 2.0, self.left + (self.width - 1) / 2.0


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    background_depth_m: float
    objects: tuple[SceneObject, ...]
    background_color: tuple[int, int, int] = (110, 110, 110)
    rgb_noise: float = 12.0
    # Optional world-anchored texture: (canvas, (row_offset, col_offset)).
    # When set, the background RGB is a crop of the canvas so that camera
    # pans translate the texture consistently between frames.
    texture: Optional[tuple[np.ndarray, tuple[int, int]]] = None


def _rasterize(obj: SceneObject, dims: tuple[int, int]) -> np.ndarray:
    h, w = dims
    rr, cc = np.mgrid[0:h, 0:w]
    if obj.shape == "rect":
        return (
        (rr >= obj.top - 1e-9)
        & (rr <= obj.top + obj.height - 1 + 1e-9)
        & (cc >= obj.left - 1e-9)
        & (cc <= obj.left + obj.width - 1 + 1e-9)
        )
    if obj.shape == "ellipse":
        cy, cx = obj.center
        ry = max(obj.height - 1, 1e-9) / 2.0
        rx = max(obj.width - 1, 1e-9) / 2.0
        return ((rr - cy) / ry) ** 2 + ((cc - cx) / rx) ** 2 <= 1.0 + 1e-9
    raise ValueError(f"unknown object shape {obj.shape!r}")


def gen_synthetic_scene(
    spec: SceneSpec, rng_seed: int, sequence_id: str = "synthetic", frame_index: int = 0
) -> tuple[RgbdFrame, RegionMask, str]:
    """Render a scene spec into (frame, ground-truth mask, interaction label).

    Deterministic for a fixed seed; the salient object's depth and centroid
    match the spec exactly. Label is "touch" iff salient depth < 0.8 m.
    """
    salient = [o for o in spec.objects if o.salient]
    if len(salient) != 1:
        raise ValueError("scene must declare exactly one salient object")
    dims = (spec.height, spec.width)
    for obj in spec.objects:
        if (
            obj.top < 0
            or obj.left < 0
            or obj.top + obj.height > spec.height
            or obj.left + obj.width > spec.width
        ):
            raise ValueError(f"object outside {spec.width}x{spec.height} frame: {obj}")

    rng = np.random.default_rng(rng_seed)
    if spec.texture is not None:
        canvas, (r0, c0) = spec.texture
        rgb = canvas[r0 : r0 + spec.height, c0 : c0 + spec.width].astype(np.float64)
        if rgb.shape[:2] != dims:
            raise ValueError("texture canvas crop does not cover the frame")
    else:
        rgb = np.asarray(spec.background_color, dtype=np.float64) + rng.uniform(
            -spec.rgb_noise, spec.rgb_noise, size=(spec.height, spec.width, 3)
        )
    depth = np.full(dims, spec.background_depth_m, dtype=np.float64)

    gt_mask = None
    for obj in spec.objects:
        mask = _rasterize(obj, dims)
        rgb[mask] = obj.color
        obj_depth = np.full(dims, obj.depth_m)
        if obj.depth_jitter_m:
            ramp = np.linspace(-1.0, 1.0, spec.width)[None, :] * obj.depth_jitter_m
            obj_depth = obj_depth + ramp
        depth[mask] = obj_depth[mask]
        if obj.salient:
            gt_mask = RegionMask(mask)

    frame = RgbdFrame(
        rgb=np.clip(rgb, 0, 255).astype(np.uint8),
        depth=depth,
        sequence_id=sequence_id,
        frame_index=frame_index,
        timestamp=float(frame_index),
    )
    label = "touch" if salient[0].depth_m < TOUCH_DEPTH_M else "sight"
    return frame, gt_mask, label


def make_texture_canvas(
    rng: np.random.Generator, height: int, width: int, base: int = 110, noise: int = 26
) -> np.ndarray:
    """Seeded uint8 RGB noise canvas; crops of it act as a panning background."""
    lum = rng.integers(base - noise, base + noise, size=(height, width), dtype=np.int64)
    canvas = np.stack([lum, lum, lum], axis=2) + rng.integers(
        -6, 7, size=(height, width, 3)
    )
    return np.clip(canvas, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Scripted frame plans -> on-disk datasets


@dataclass(frozen=True)
class FramePlan:
    spec: SceneSpec
    future: Optional[FutureLink] = None
    interaction: Optional[str] = None
    gt_object: Optional[SceneObject] = None  # overrides the salient object as GT


def _render_plan(
    plan: FramePlan, seed: int, sequence_id: str, frame_index: int
) -> tuple[RgbdFrame, Optional[RegionMask], Optional[str]]:
    frame, gt, label = gen_synthetic_scene(plan.spec, seed, sequence_id, frame_index)
    if plan.gt_object is not None:
        gt = RegionMask(_rasterize(plan.gt_object, frame.dims))
    return frame, gt, label


def write_planned_dataset(
    out_dir, plans_by_sequence: dict[str, list[FramePlan]], seed: int
) -> DatasetManifest:
    """Render frame plans to PNG files plus dataset.json under `out_dir`."""
    out_dir = Path(out_dir)
    (out_dir / "rgb").mkdir(parents=True, exist_ok=True)
    (out_dir / "depth").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)

    sequences = []
    for seq_id, plans in plans_by_sequence.items():
        entries = []
        for idx, plan in enumerate(plans):
            frame, gt, label = _render_plan(plan, seed, seq_id, idx)
            stem = f"{seq_id}_{idx:04d}"
            rgb_rel = f"rgb/{stem}.png"
            depth_rel = f"depth/{stem}.png"
            write_rgb(out_dir / rgb_rel, frame.rgb)
            write_depth_png(out_dir / depth_rel, frame.depth)
            gt_rel = None
            if gt is not None:
                gt_rel = f"gt/{stem}.png"
                write_mask_png(out_dir / gt_rel, gt.mask)
            entries.append(
                FrameEntry(
                    index=idx,
                    rgb=rgb_rel,
                    depth=depth_rel,
                    gt_mask=gt_rel,
                    interaction=plan.interaction,
                    future=plan.future,
                )
            )
        sequences.append(SequenceEntry(id=seq_id, frames=tuple(entries)))
    manifest = DatasetManifest(sequences=tuple(sequences), root=out_dir)
    save_dataset(manifest, out_dir / "dataset.json")
    return manifest


def _object_size_for_depth(depth_m: float, scale: float = 9.0) -> float:
    """Apparent size shrinks with distance; clamp to keep proposals viable."""
    return float(np.clip(scale / depth_m, 5.0, 18.0))


_COLORS = (
    (40, 70, 190),
    (190, 60, 45),
    (50, 160, 60),
    (200, 170, 40),
    (150, 60, 170),
)


def _clamp_pos(v: float, size: float, limit: int) -> float:
    return float(np.clip(v, 1.0, limit - size - 1.0))


def make_saliency_dataset(
    out_dir,
    seed: int = 0,
    n_sequences: int = 4,
    frames_per_sequence: int = 52,
    size: int = 48,
) -> DatasetManifest:
    """Sequences where the salient object is close (< 0.8 m) and near-center.

    Each frame also contains a far distractor of similar size near the
    center (separable only through depth) and a peripheral distractor, so
    depth features carry real signal.
    """
    rng = np.random.default_rng(seed)
    plans: dict[str, list[FramePlan]] = {}
    for s in range(n_sequences):
        seq_id = f"seq{s}"
        canvas = make_texture_canvas(rng, size + 80, size + 80)
        pan_r, pan_c = 20, 20
        seq_plans = []
        sal_depth = float(rng.uniform(0.4, 0.7))
        for t in range(frames_per_sequence):
            if t % 13 == 0:
                sal_depth = float(rng.uniform(0.4, 0.75))
            drift = rng.integers(-1, 2, size=2)
            pan_r = int(np.clip(pan_r + drift[0], 0, 40))
            pan_c = int(np.clip(pan_c + drift[1], 0, 40))

            sal_size = _object_size_for_depth(sal_depth)
            cy = size / 2 + float(rng.uniform(-6, 6))
            cx = size / 2 + float(rng.uniform(-6, 6))
            salient = SceneObject(
                shape="rect" if rng.random() < 0.5 else "ellipse",
                top=_clamp_pos(cy - sal_size / 2, sal_size, size),
                left=_clamp_pos(cx - sal_size / 2, sal_size, size),
                height=sal_size,
                width=sal_size,
                depth_m=sal_depth,
                color=_COLORS[0],
                salient=True,
            )
            # Near-center far distractor whose position, shape, and size
            # distributions overlap the salient object's: only depth
            # separates them reliably.
            far_depth = float(rng.uniform(1.3, 2.4))
            d_size = sal_size * float(rng.uniform(0.85, 1.15))
            angle = rng.uniform(0, 2 * np.pi)
            lo_radius = max(6.0, (sal_size + d_size) / 2 - 2)
            radius = rng.uniform(lo_radius, max(lo_radius + 1.0, 13.0))
            dy = cy + radius * np.sin(angle)
            dx = cx + radius * np.cos(angle)
            near_distractor = SceneObject(
                shape="rect" if rng.random() < 0.5 else "ellipse",
                top=_clamp_pos(dy - d_size / 2, d_size, size),
                left=_clamp_pos(dx - d_size / 2, d_size, size),
                height=d_size,
                width=d_size,
                depth_m=far_depth,
                color=_COLORS[1],
            )
            p_size = float(rng.uniform(6, 10))
            corner = rng.integers(0, 4)
            p_top = 2.0 if corner < 2 else size - p_size - 2.0
            p_left = 2.0 if corner % 2 == 0 else size - p_size - 2.0
            peripheral = SceneObject(
                shape="ellipse",
                top=p_top,
                left=p_left,
                height=p_size,
                width=p_size,
                depth_m=float(rng.uniform(1.0, 3.0)),
                color=_COLORS[2],
            )
            spec = SceneSpec(
                width=size,
                height=size,
                background_depth_m=3.0,
                objects=(peripheral, near_distractor, salient),
                texture=(canvas, (pan_r, pan_c)),
            )
            seq_plans.append(FramePlan(spec=spec))
        plans[seq_id] = seq_plans
    return write_planned_dataset(out_dir, plans, seed)


def make_future_dataset(
    out_dir,
    seed: int = 0,
    n_sequences: int = 4,
    n_eras: int = 4,
    era_len: int = 13,
    size: int = 48,
    pre_window: int = 9,
    approach_window: int = 7,
) -> DatasetManifest:
    """Sequences whose salient object switches every era, with the camera
    panning toward the next object over the `pre_window` frames before each
    switch, while that object closes in over the last `approach_window`.

    Frames shortly before a switch carry future links at horizons 2/4/6 and
    are annotated with the future object's position at that time; all other
    frames are annotated with the currently salient object.
    """
    if era_len <= pre_window:
        raise ValueError("era_len must exceed pre_window")
    rng = np.random.default_rng(seed + 1)
    plans: dict[str, list[FramePlan]] = {}
    n_frames = n_eras * era_len
    pan_total = 14  # pixels between consecutive gaze anchors

    for s in range(n_sequences):
        seq_id = f"seq{s}"
        canvas = make_texture_canvas(rng, size + 200, size + 200)
        seq_plans = []
        # World positions (row, col) of the per-era salient objects. The pan
        # moves between consecutive anchors, pan_total pixels apart.
        side = int(rng.choice([-1, 1]))
        anchors = []
        base_r, base_c = 90, 60
        for e in range(n_eras):
            anchors.append((base_r, base_c))
            base_c = base_c + side * pan_total
        obj_depths = [float(rng.uniform(0.45, 0.7)) for _ in range(n_eras)]
        idle_depth = [float(rng.uniform(1.0, 1.4)) for _ in range(n_eras)]

        for t in range(n_frames):
            era = t // era_len
            t_in = t % era_len
            frames_to_switch = era_len - t_in  # switch happens at next era start
            drifting = era + 1 < n_eras and frames_to_switch <= pre_window
            # Camera pan: parked at the current anchor, then moving linearly
            # to the next era's anchor so it lands there exactly at the switch.
            cur = np.asarray(anchors[era], dtype=np.float64)
            if drifting:
                nxt = np.asarray(anchors[era + 1], dtype=np.float64)
                frac = (pre_window - frames_to_switch) / pre_window
                pan = cur + (nxt - cur) * frac
            else:
                pan = cur
            pan_r, pan_c = int(round(pan[0])), int(round(pan[1]))

            objects = []
            gt_object = None
            for e in range(n_eras):
                wr, wc = anchors[e]
                # Object position in the current view.
                vr = wr - pan_r + size / 2
                vc = wc - pan_c + size / 2
                active = e == era
                depth_m = obj_depths[e] if active else idle_depth[e]
                if drifting and e == era + 1 and frames_to_switch < approach_window:
                    # The person closes in on the next object as the gaze
                    # drifts toward it.
                    frac = (approach_window - frames_to_switch) / approach_window
                    depth_m = idle_depth[e] + (obj_depths[e] - idle_depth[e]) * frac
                osz = _object_size_for_depth(depth_m)
                top, left = vr - osz / 2, vc - osz / 2
                if (
                    top < 1
                    or left < 1
                    or top + osz > size - 1
                    or left + osz > size - 1
                ):
                    if not active:
                        continue  # out of view; the salient one stays clamped
                    top = _clamp_pos(top, osz, size)
                    left = _clamp_pos(left, osz, size)
                obj = SceneObject(
                    shape="rect",
                    top=top,
                    left=left,
                    height=osz,
                    width=osz,
                    depth_m=depth_m,
                    color=_COLORS[e % len(_COLORS)],
                    salient=active,
                )
                objects.append(obj)
                if drifting and e == era + 1:
                    gt_object = obj
            # Decoy mirrored on the opposite side of the pan direction.
            decoy_c = size / 2 - side * 16
            decoy = SceneObject(
                shape="ellipse",
                top=_clamp_pos(size / 2 - 4, 8, size),
                left=_clamp_pos(decoy_c - 4, 8, size),
                height=8,
                width=8,
                depth_m=1.6,
                color=_COLORS[4],
            )
            objects.append(decoy)

            spec = SceneSpec(
                width=size,
                height=size,
                background_depth_m=3.0,
                objects=tuple(objects),
                texture=(canvas, (pan_r + 60, pan_c)),
            )
            future = None
            horizon = frames_to_switch  # 1 fps: seconds == frames
            if drifting and gt_object is not None and horizon in (2, 4, 6):
                future = FutureLink(later_index=t + horizon, horizon_s=horizon)
            if future is not None:
                seq_plans.append(
                    FramePlan(spec=spec, future=future, gt_object=gt_object)
                )
            else:
                seq_plans.append(FramePlan(spec=spec))
        plans[seq_id] = seq_plans
    return write_planned_dataset(out_dir, plans, seed)


def make_interaction_dataset(
    out_dir,
    seed: int = 0,
    n_sequences: int = 4,
    frames_per_sequence: int = 36,
    size: int = 48,
) -> DatasetManifest:
    """Sequences alternating touch and sight engagements with the salient
    object, labeled per frame.

    Sight-era objects sit just beyond arm's length and carry an internal
    depth ramp, so a fixed depth threshold read off a sub-region is
    unreliable while size and location stay informative.
    """
    rng = np.random.default_rng(seed + 2)
    plans: dict[str, list[FramePlan]] = {}
    block = 6
    for s in range(n_sequences):
        seq_id = f"seq{s}"
        canvas = make_texture_canvas(rng, size + 80, size + 80)
        seq_plans = []
        depth_offset = (-0.05, 0.0, 0.05, 0.1)[s % 4]
        touch_depth = sight_depth = None
        for t in range(frames_per_sequence):
            touching = (t // block) % 2 == 0
            if t % block == 0:
                touch_depth = float(
                    np.clip(rng.uniform(0.45, 0.75) + depth_offset * 0.5, 0.35, 0.78)
                )
                sight_depth = float(
                    np.clip(rng.uniform(0.85, 1.5) + depth_offset, 0.82, 1.8)
                )
            depth_m = touch_depth if touching else sight_depth
            osz = _object_size_for_depth(depth_m)
            cy = size / 2 + float(rng.uniform(-4, 4))
            cx = size / 2 + float(rng.uniform(-4, 4))
            salient = SceneObject(
                shape="rect" if rng.random() < 0.5 else "ellipse",
                top=_clamp_pos(cy - osz / 2, osz, size),
                left=_clamp_pos(cx - osz / 2, osz, size),
                height=osz,
                width=osz,
                depth_m=depth_m,
                color=_COLORS[0],
                salient=True,
                depth_jitter_m=0.0 if touching else 0.22,
            )
            p_size = float(rng.uniform(6, 10))
            corner = rng.integers(0, 4)
            peripheral = SceneObject(
                shape="rect",
                top=2.0 if corner < 2 else size - p_size - 2.0,
                left=2.0 if corner % 2 == 0 else size - p_size - 2.0,
                height=p_size,
                width=p_size,
                depth_m=float(rng.uniform(1.2, 2.6)),
                color=_COLORS[2],
            )
            pan = rng.integers(0, 30, size=2)
            spec = SceneSpec(
                width=size,
                height=size,
                background_depth_m=3.2,
                objects=(peripheral, salient),
                texture=(canvas, (int(pan[0]), int(pan[1]))),
            )
            label = "touch" if depth_m < TOUCH_DEPTH_M else "sight"
            seq_plans.append(FramePlan(spec=spec, interaction=label))
        plans[seq_id] = seq_plans
    return write_planned_dataset(out_dir, plans, seed)


DATASET_BUILDERS = {
    "saliency": make_saliency_dataset,
    "future": make_future_dataset,
    "interaction": make_interaction_dataset,
}
