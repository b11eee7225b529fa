"""Classify frames as sight or touch and compare with the depth baseline.

Ranks regions by predicted saliency, classifies the top 15 with a separate
forest, and takes the majority vote. The baseline thresholds the predicted
salient region's mean depth at a value learned from the training
sequences.

    python demos/06_interaction_classification.py      (about two minutes)
"""

from pathlib import Path

import numpy as np

from egoprior.forest import TrainConfig
from egoprior.metrics import interaction_accuracy
from egoprior.pipeline import (
    FeatureCache,
    PipelineConfig,
    depth_threshold_baseline,
    evaluate_interaction,
    gt_depth_samples,
    train_task,
)
from egoprior.synthetic import make_interaction_dataset

OUT = Path("demo_out/interaction")
OUT.mkdir(parents=True, exist_ok=True)

manifest = make_interaction_dataset(
    OUT / "dataset", seed=0, n_sequences=3, frames_per_sequence=24, size=48
)
config = PipelineConfig(
    n_superpixels=576,
    max_proposals=600,
    n_neighbors=12,
    knn=2,
    sample_budget=6000,
    forest=TrainConfig(n_trees=16, rng_seed=0),
)
cache = FeatureCache(manifest, config)
sequences = manifest.sequence_ids()

vote_acc, base_acc = [], []
for held in sequences:
    saliency = train_task(manifest, "saliency", held_out=held, config=config, cache=cache)
    interaction = train_task(
        manifest, "interaction", held_out=held, config=config, cache=cache
    )
    preds, gts, top_depths = evaluate_interaction(
        manifest, saliency, interaction, held, cache
    )
    baseline = depth_threshold_baseline(
        gt_depth_samples(manifest, [s for s in sequences if s != held], cache)
    )
    base_preds = [baseline.classify(d) for d in top_depths]
    vote_acc.append(interaction_accuracy(preds, gts))
    base_acc.append(interaction_accuracy(base_preds, gts))
    print(
        f"hold out {held}: vote accuracy {vote_acc[-1]:.3f}, "
        f"depth baseline {base_acc[-1]:.3f} (threshold {baseline.threshold:.2f} m)"
    )

print(
    f"\nmean: top-15 vote {np.mean(vote_acc):.3f} vs depth threshold {np.mean(base_acc):.3f}"
)
