"""Predict which object becomes salient 2/4/6 seconds ahead.

The synthetic camera drifts toward the next engaged object before each
switch; the gaze-normalized model (homography-remapped center distances
appended to the features) is compared against the plain saliency model on
the same future-annotated frames.

    python demos/05_future_saliency.py           (a few minutes)
"""

from pathlib import Path

from egoprior.forest import TrainConfig
from egoprior.metrics import max_f_score, pr_curve
from egoprior.pipeline import (
    FeatureCache,
    PipelineConfig,
    eligible_frames,
    evaluate_saliency,
    predict_saliency_map,
    train_task,
)
from egoprior.synthetic import make_future_dataset

OUT = Path("demo_out/future")
OUT.mkdir(parents=True, exist_ok=True)

manifest = make_future_dataset(OUT / "dataset", seed=0, n_sequences=2, n_eras=4, era_len=13, size=48)
config = PipelineConfig(
    n_superpixels=576,
    max_proposals=600,
    n_neighbors=12,
    knn=2,
    sample_budget=6000,
    forest=TrainConfig(n_trees=16, rng_seed=0),
)
cache = FeatureCache(manifest, config)
held = "seq1"

plain = train_task(manifest, "saliency", held_out=held, config=config, cache=cache)

print(f"{'horizon':>8} {'gaze model MF':>14} {'plain model MF':>15}")
for horizon in (2, 4, 6):
    gaze_model = train_task(
        manifest, f"future{horizon}", held_out=held, config=config, cache=cache
    )
    mf_gaze, _ = evaluate_saliency(manifest, gaze_model, held, cache)

    preds, gts = [], []
    for idx in eligible_frames(manifest, held, "future", horizon):
        data = cache.get(held, idx)
        preds.append(
            predict_saliency_map(data.frame, data.proposals, plain, features=data.features)
        )
        gts.append(data.gt.mask)
    mf_plain = max_f_score(pr_curve(preds, gts))
    print(f"{horizon:>7}s {mf_gaze:>14.3f} {mf_plain:>15.3f}")
print("\nthe gaze-featured model should lead at every horizon")
