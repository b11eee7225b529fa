"""Propose regions on a frame and inspect the per-region feature vector.

    python demos/03_regions_and_features.py
"""

import numpy as np

from egoprior import SceneObject, SceneSpec, gen_synthetic_scene, iou
from egoprior.features import base_feature_names
from egoprior.pipeline import extract_frame_features
from egoprior.proposals import propose_regions

spec = SceneSpec(
    width=48,
    height=48,
    background_depth_m=3.0,
    objects=(
        SceneObject("rect", 6, 30, 9, 9, 1.6, (190, 60, 45)),
        SceneObject("ellipse", 18, 16, 13, 13, 0.55, (40, 70, 190), salient=True),
    ),
)
frame, gt, _ = gen_synthetic_scene(spec, rng_seed=5)

proposals = propose_regions(frame, n_superpixels=576, max_proposals=600)
print(f"{len(proposals)} proposals from a {frame.width}x{frame.height} frame")
print(f"merge tree: {proposals.tree.n_leaves} leaves, {len(proposals.tree.merges)} merges")

# The hierarchy should contain a region that nails the salient object.
overlaps = [iou(r, gt) for r in proposals.regions]
best = int(np.argmax(overlaps))
print(f"best proposal IOU vs ground truth: {overlaps[best]:.3f}")

feats = extract_frame_features(frame, proposals, n_neighbors=12, knn=2)
print(f"feature matrix: {feats.shape[0]} regions x {feats.shape[1]} dims")

names = base_feature_names()
row = feats[best]
print("\nselected base features of the best-overlap region:")
for key in (
    "s1_extent",
    "s3_eccentricity",
    "l1_centroid_x",
    "l1_centroid_y",
    "b1_area",
    "d1_mean",
    "d4_cell_11",
):
    idx = names.index(key)
    print(f"  {key:<16} = {row[idx]: .4f}")
print("(context dims follow the 77 base dims; run the CLI `features` "
      "subcommand for the full named CSV)")
