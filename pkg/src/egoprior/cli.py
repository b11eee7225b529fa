"""Command-line entry point wiring all subcommands.

Exit codes: 0 success, 1 domain error (one-line diagnostic on stderr),
2 usage error. A config file of `key = value` lines supplies defaults that
flags override; EGOPRIOR_SEED serves as the seed fallback.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import forest as rf
from . import pipeline, synthetic
from .data import (
    load_dataset,
    read_heatmap_png,
    read_mask_png,
    read_rgb,
    write_depth_png,
    write_heatmap_png,
    write_mask_png,
)
from .errors import EgoPriorError
from .features import full_feature_groups, full_feature_names
from .homography import N_GAZE_HISTORY, estimate_homography
from .metrics import (
    average_precision,
    interaction_accuracy,
    max_f_score,
    pr_curve,
    render_report,
)
from .proposals import ProposalSet, load_masks, propose_regions
from .stereo import StereoParams, coarse_to_fine, disparity_to_depth

CONFIG_KEYS = {
    "seed": int,
    "n_superpixels": int,
    "max_proposals": int,
    "n_neighbors": int,
    "knn": int,
    "trees": int,
    "min_leaf": int,
    "budget": int,
    "jobs": int,
    "dmax": int,
    "levels": int,
    "window": int,
}


def _read_config(path) -> dict:
    """Parse a `key = value` config file (comments start with '#')."""
    values = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise EgoPriorError(f"{path}:{line_no}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_KEYS:
            raise EgoPriorError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = CONFIG_KEYS[key](val)
    return values


def _default_seed() -> int:
    return int(os.environ.get("EGOPRIOR_SEED", "0"))


def _build_parser(cfg: dict | None = None) -> argparse.ArgumentParser:
    cfg = cfg or {}

    def d(key, fallback):
        return cfg.get(key, fallback)

    parser = argparse.ArgumentParser(
        prog="egoprior",
        description="Egocentric RGBD saliency pipeline: stereo depth, region "
        "features, forest training, prediction, and evaluation.",
    )
    parser.add_argument("--config", help="key = value config file for defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("depth", help="stereo pair -> 16-bit depth PNG")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--dmax", type=int, required="dmax" not in cfg, default=d("dmax", None))
    p.add_argument("--levels", type=int, default=d("levels", 1))
    p.add_argument("--window", type=int, default=d("window", 5))
    p.add_argument("--occlusion", type=float, default=60.0)
    p.add_argument("--smoothness", type=float, default=4.0)
    p.add_argument("--focal", type=float, required=True)
    p.add_argument("--baseline-mm", type=float, default=100.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("propose", help="frame -> proposal mask directory")
    p.add_argument("--frame", required=True, help="RGB PNG path")
    p.add_argument("--n-superpixels", type=int, default=d("n_superpixels", 256))
    p.add_argument("--max-proposals", type=int, default=d("max_proposals", 2000))
    p.add_argument("--contour", help="external contour map PNG (8-bit)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="frame + masks -> feature CSV")
    p.add_argument("--frame", required=True, help="RGB PNG path")
    p.add_argument("--depth", help="16-bit depth PNG path")
    p.add_argument("--masks", help="mask directory; omit to propose internally")
    p.add_argument("--contour", help="external contour map PNG")
    p.add_argument("--n-superpixels", type=int, default=d("n_superpixels", 256))
    p.add_argument("--max-proposals", type=int, default=d("max_proposals", 2000))
    p.add_argument("--n-neighbors", type=int, default=d("n_neighbors", 32))
    p.add_argument("--knn", type=int, default=d("knn", 3))
    p.add_argument(
        "--correspondences",
        action="append",
        help="JSON file of [x1,y1,x2,y2] pairs; give up to 5 times for the "
        "gaze history (k-th occurrence = frame t-k)",
    )
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a task model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument(
        "--task",
        required=True,
        choices=["saliency", "future2", "future4", "future6", "interaction"],
    )
    p.add_argument("--hold-out", default=None)
    p.add_argument("--seed", type=int, default=d("seed", None))
    p.add_argument("--trees", type=int, default=d("trees", 50))
    p.add_argument("--min-leaf", type=int, default=d("min_leaf", 5))
    p.add_argument("--budget", type=int, default=d("budget", 70000))
    p.add_argument("--n-superpixels", type=int, default=d("n_superpixels", 256))
    p.add_argument("--max-proposals", type=int, default=d("max_proposals", 2000))
    p.add_argument("--n-neighbors", type=int, default=d("n_neighbors", 32))
    p.add_argument("--knn", type=int, default=d("knn", 3))
    p.add_argument("--no-depth", action="store_true", help="drop depth feature groups")
    p.add_argument(
        "--jobs",
        type=int,
        default=d("jobs", os.cpu_count() or 1),
        help="parallel tree builders; results are independent of this",
    )
    p.add_argument("--model", required=True)

    for name, help_text in (
        ("predict", "saliency heatmap for one frame"),
        ("future", "future-saliency heatmap for one frame"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--seq", required=True)
        p.add_argument("--frame", type=int, required=True)
        p.add_argument("--out", required=True)

    p = sub.add_parser("interact", help="classify one frame as sight or touch")
    p.add_argument("--saliency-model", required=True)
    p.add_argument("--interaction-model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seq", required=True)
    p.add_argument("--frame", type=int, required=True)

    p = sub.add_parser("eval", help="heatmap dir vs GT dir -> MF/AP report")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--method", default="ours")
    p.add_argument("--out", required=True)

    p = sub.add_parser("importance", help="8-group feature importance table")
    p.add_argument("--model", required=True)

    p = sub.add_parser("synth", help="generate a synthetic RGBD dataset")
    p.add_argument("--seed", type=int, default=d("seed", None))
    p.add_argument(
        "--scenario",
        default="saliency",
        choices=sorted(synthetic.DATASET_BUILDERS),
    )
    p.add_argument("--sequences", type=int, default=4)
    p.add_argument("--size", type=int, default=48)
    p.add_argument("--out", required=True)
    return parser


def _cmd_depth(args) -> int:
    left = read_rgb(args.left)
    right = read_rgb(args.right)
    params = StereoParams(
        d_max=args.dmax,
        window=args.window,
        occlusion_penalty=args.occlusion,
        smoothness_penalty=args.smoothness,
    )
    dmap = coarse_to_fine(left, right, args.levels, params)
    depth = disparity_to_depth(dmap, args.focal, args.baseline_mm / 1000.0)
    write_depth_png(args.out, depth)
    print(f"wrote {args.out}")
    return 0


def _cmd_propose(args) -> int:
    rgb = read_rgb(args.frame)
    contour = None
    if args.contour:
        contour = np.asarray(read_heatmap_png(args.contour))
    proposals = propose_regions(
        rgb, args.n_superpixels, args.max_proposals, contour=contour
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, region in enumerate(proposals.regions):
        write_mask_png(out_dir / f"mask_{i:05d}.png", region.mask)
    print(f"wrote {len(proposals.regions)} masks to {out_dir}")
    return 0


def _load_frame_rgbd(args):
    from .data import RgbdFrame, read_depth_png

    rgb = read_rgb(args.frame)
    if args.depth:
        depth = read_depth_png(args.depth)
    else:
        depth = np.full(rgb.shape[:2], np.nan)
    return RgbdFrame(rgb=rgb, depth=depth)


def _cmd_features(args) -> int:
    frame = _load_frame_rgbd(args)
    contour = np.asarray(read_heatmap_png(args.contour)) if args.contour else None
    proposals = propose_regions(
        frame, args.n_superpixels, args.max_proposals, contour=contour
    )
    if args.masks:
        regions = load_masks(args.masks, frame)
        proposals = ProposalSet(
            regions=tuple(regions),
            tree=proposals.tree,
            node_ids=tuple([None] * len(regions)),
        )
    gaze_h = None
    if args.correspondences:
        if len(args.correspondences) > N_GAZE_HISTORY:
            raise EgoPriorError("at most 5 correspondence files (one per history frame)")
        gaze_h = []
        for path in args.correspondences:
            pairs = json.loads(Path(path).read_text())
            gaze_h.append(estimate_homography(np.asarray(pairs, dtype=float)))
        while len(gaze_h) < N_GAZE_HISTORY:
            gaze_h.append(np.eye(3))
    feats = pipeline.extract_frame_features(
        frame,
        proposals,
        n_neighbors=args.n_neighbors,
        knn=args.knn,
        gaze_homographies=gaze_h,
        contour=contour,
    )
    names = full_feature_names(args.knn, gaze=gaze_h is not None)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("region," + ",".join(names) + "\n")
        for i, row in enumerate(feats):
            fh.write(f"{i}," + ",".join(f"{v:.9g}" for v in row) + "\n")
    print(f"wrote {feats.shape[0]} x {feats.shape[1]} features to {args.out}")
    return 0


def _cmd_train(args) -> int:
    manifest = load_dataset(args.dataset)
    seed = args.seed if args.seed is not None else _default_seed()
    config = pipeline.PipelineConfig(
        n_superpixels=args.n_superpixels,
        max_proposals=args.max_proposals,
        n_neighbors=args.n_neighbors,
        knn=args.knn,
        sample_budget=args.budget,
        forest=rf.TrainConfig(
            n_trees=args.trees, min_leaf=args.min_leaf, rng_seed=seed
        ),
        exclude_groups=("depth", "depth-ctx") if args.no_depth else (),
        n_jobs=args.jobs,
    )
    model = pipeline.train_task(manifest, args.task, args.hold_out, config)
    rf.save(model.forest, args.model)
    print(
        f"trained {args.task} model on {len(manifest.sequences)} sequences "
        f"(held out: {args.hold_out}) -> {args.model}"
    )
    return 0


def _cmd_predict(args, want_future: bool) -> int:
    manifest = load_dataset(args.dataset)
    model = pipeline.model_from_forest(rf.load(args.model))
    if want_future != (model.task == "future"):
        raise EgoPriorError(
            f"model task is {model.task!r}; use the "
            f"{'future' if model.task == 'future' else 'predict'} subcommand"
        )
    cache = pipeline.FeatureCache(manifest, model.config)
    data = cache.get(args.seq, args.frame)
    feats = data.features
    if model.use_gaze:
        feats = np.concatenate(
            [feats, cache.gaze_matrix(args.seq, args.frame)], axis=1
        )
    smap = pipeline.predict_saliency_map(
        data.frame, data.proposals, model, features=feats
    )
    write_heatmap_png(args.out, smap.scores)
    print(f"wrote {args.out}")
    return 0


def _cmd_interact(args) -> int:
    manifest = load_dataset(args.dataset)
    sal_model = pipeline.model_from_forest(rf.load(args.saliency_model))
    int_model = pipeline.model_from_forest(rf.load(args.interaction_model))
    cache = pipeline.FeatureCache(manifest, sal_model.config)
    data = cache.get(args.seq, args.frame)
    label = pipeline.classify_interaction(
        data.frame, data.proposals, sal_model, int_model, features=data.features
    )
    print(label)
    return 0


def _cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    preds, gts = [], []
    for pred_path in sorted(pred_dir.glob("*.png")):
        gt_path = gt_dir / pred_path.name
        if not gt_path.is_file():
            raise EgoPriorError(f"no ground truth for {pred_path.name}")
        preds.append(read_heatmap_png(pred_path))
        gts.append(read_mask_png(gt_path))
    if not preds:
        raise EgoPriorError(f"no PNG heatmaps found in {pred_dir}")
    curve = pr_curve(preds, gts)
    mf = max_f_score(curve) * 100.0
    ap = average_precision(curve) * 100.0
    _, csv_text, md_text = render_report({args.method: {"all": (mf, ap)}})
    Path(args.out).write_text(csv_text, encoding="utf-8")
    print(md_text, end="")
    return 0


def _cmd_importance(args) -> int:
    loaded = rf.load(args.model)
    if loaded.mode != rf.MODE_REGRESSION:
        return _usage_error("importance requires a regression model file")
    model = pipeline.model_from_forest(loaded)
    groups_list = full_feature_groups(model.config.knn, model.use_gaze)
    if model.column_indices is not None:
        groups_list = [groups_list[i] for i in model.column_indices]
    if len(groups_list) != loaded.feature_dim:
        raise EgoPriorError("model metadata does not match its feature dimension")
    groups = {i: g for i, g in enumerate(groups_list)}
    scores = rf.feature_importance(loaded, groups)
    print(f"{'group':<14} {'mean importance':>16}")
    for name, value in sorted(scores.items(), key=lambda kv: -kv[1]):
        print(f"{name:<14} {value:>16.6g}")
    return 0


def _cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    builder = synthetic.DATASET_BUILDERS[args.scenario]
    manifest = builder(args.out, seed=seed, n_sequences=args.sequences, size=args.size)
    n_frames = sum(len(s.frames) for s in manifest.sequences)
    print(
        f"wrote {args.scenario} dataset: {len(manifest.sequences)} sequences, "
        f"{n_frames} frames -> {args.out}"
    )
    return 0


def _usage_error(message: str) -> int:
    print(f"egoprior: error: {message}", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    # Config file values become parser defaults; flags still win.
    cfg = None
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre_args, _ = pre.parse_known_args(argv)
    if pre_args.config:
        try:
            cfg = _read_config(pre_args.config)
        except (OSError, EgoPriorError) as exc:
            print(f"egoprior: error: {exc}", file=sys.stderr)
            return 1
    parser = _build_parser(cfg)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    handlers = {
        "depth": lambda: _cmd_depth(args),
        "propose": lambda: _cmd_propose(args),
        "features": lambda: _cmd_features(args),
        "train": lambda: _cmd_train(args),
        "predict": lambda: _cmd_predict(args, want_future=False),
        "future": lambda: _cmd_predict(args, want_future=True),
        "interact": lambda: _cmd_interact(args),
        "eval": lambda: _cmd_eval(args),
        "importance": lambda: _cmd_importance(args),
        "synth": lambda: _cmd_synth(args),
    }
    try:
        return handlers[args.command]()
    except SystemExit as exc:
        return int(exc.code or 0)
    except (EgoPriorError, ValueError, OSError) as exc:
        print(f"egoprior: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
