"""Generate synthetic RGBD scenes and a small multi-task dataset.

Run from the repository root after `pip install -e .`:

    python demos/01_synthetic_scenes.py
"""

from pathlib import Path

import numpy as np

from egoprior import SceneObject, SceneSpec, gen_synthetic_scene, load_dataset
from egoprior.data import write_heatmap_png, write_rgb
from egoprior.synthetic import make_saliency_dataset

OUT = Path("demo_out/scenes")
OUT.mkdir(parents=True, exist_ok=True)

# --- One hand-built scene: a close salient square over a far background ----
spec = SceneSpec(
    width=64,
    height=64,
    background_depth_m=3.0,
    objects=(
        SceneObject(
            shape="ellipse",
            top=8,
            left=40,
            height=12,
            width=12,
            depth_m=1.8,
            color=(60, 170, 70),
        ),
        SceneObject(
            shape="rect",
            top=27,
            left=27,
            height=10,
            width=10,
            depth_m=0.5,
            color=(40, 70, 190),
            salient=True,
        ),
    ),
)
frame, gt, label = gen_synthetic_scene(spec, rng_seed=7)
print(f"scene: {frame.width}x{frame.height}, salient area {gt.area} px, label {label!r}")
print(f"salient centroid {gt.centroid}, depth at centroid {frame.depth[32, 32]:.2f} m")

write_rgb(OUT / "scene_rgb.png", frame.rgb)
write_heatmap_png(OUT / "scene_gt.png", gt.mask.astype(float))
valid = np.isfinite(frame.depth)
norm = np.zeros_like(frame.depth)
norm[valid] = frame.depth[valid] / frame.depth[valid].max()
write_heatmap_png(OUT / "scene_depth.png", norm)
print(f"wrote rgb/gt/depth previews to {OUT}/")

# --- A full dataset on disk: manifest + rasters ----------------------------
ds_dir = OUT / "dataset"
make_saliency_dataset(ds_dir, seed=0, n_sequences=2, frames_per_sequence=6, size=48)
manifest = load_dataset(ds_dir / "dataset.json")
n_frames = sum(len(s.frames) for s in manifest.sequences)
print(f"dataset: {len(manifest.sequences)} sequences, {n_frames} annotated frames")
for seq in manifest.sequences:
    entry = seq.frames[0]
    print(f"  {seq.id}: first frame rgb={entry.rgb} gt={entry.gt_mask}")
