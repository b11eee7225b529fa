"""Train the saliency regressor leave-one-sequence-out and score it.

Trains on all but one synthetic sequence, predicts pixelwise saliency on
the held-out one, and reports Max F-score / Average Precision plus the
8-group feature importance ranking.

    python demos/04_saliency_detection.py        (about a minute)
"""

from pathlib import Path

from egoprior.data import write_heatmap_png
from egoprior.features import full_feature_groups
from egoprior.forest import TrainConfig, feature_importance
from egoprior.pipeline import FeatureCache, PipelineConfig, evaluate_saliency, train_task
from egoprior.synthetic import make_saliency_dataset

OUT = Path("demo_out/saliency")
OUT.mkdir(parents=True, exist_ok=True)

ds = OUT / "dataset"
manifest = make_saliency_dataset(ds, seed=0, n_sequences=3, frames_per_sequence=16, size=48)

config = PipelineConfig(
    n_superpixels=576,
    max_proposals=600,
    n_neighbors=12,
    knn=2,
    sample_budget=6000,
    forest=TrainConfig(n_trees=16, rng_seed=0),
)
cache = FeatureCache(manifest, config)

held = "seq2"
model = train_task(manifest, "saliency", held_out=held, config=config, cache=cache)
print(f"trained on {[s for s in manifest.sequence_ids() if s != held]}, testing {held}")

mf, ap = evaluate_saliency(manifest, model, held, cache)
print(f"held-out sequence: MF={mf:.3f}  AP={ap:.3f}")

# Save one heatmap next to its ground truth for eyeballing.
from egoprior.pipeline import predict_saliency_map

data = cache.get(held, 0)
smap = predict_saliency_map(data.frame, data.proposals, model, features=data.features)
write_heatmap_png(OUT / "heatmap_frame0.png", smap.scores)
write_heatmap_png(OUT / "gt_frame0.png", data.gt.mask.astype(float))
print(f"wrote {OUT}/heatmap_frame0.png and gt_frame0.png")

groups = dict(enumerate(full_feature_groups(config.knn)))
ranking = sorted(
    feature_importance(model.forest, groups).items(), key=lambda kv: -kv[1]
)
print("\nfeature-group importance (mean impurity reduction):")
for name, value in ranking:
    print(f"  {name:<14} {value:.5f}")
