"""Egocentric RGBD region features, forest-based saliency prediction,
scanline-DP stereo, and precision-recall evaluation."""

from .data import (
    DatasetManifest,
    FrameEntry,
    FutureLink,
    RegionMask,
    RgbdFrame,
    SaliencyMap,
    SequenceEntry,
    decode_depth,
    encode_depth,
    iou,
    load_dataset,
    load_frame,
    save_dataset,
)
from .errors import (
    DatasetError,
    EgoPriorError,
    EstimationError,
    EvaluationError,
    ModelFormatError,
    TrainingError,
)
from .features import (
    BASE_DIM,
    BASE_LAYOUT_ID,
    FeatureVector,
    base_feature_names,
    base_features,
    depth_features,
    location_features,
    shape_features,
    size_features,
)
from .context import NeighborSet, context_features, neighbor_set
from .forest import Forest, TrainConfig, balanced_sample, feature_importance, train
from .homography import estimate_homography, gaze_features, match_correspondences
from .metrics import (
    EvalReport,
    PrCurve,
    average_precision,
    interaction_accuracy,
    max_f_score,
    pr_curve,
    render_report,
)
from .pipeline import (
    FeatureCache,
    PipelineConfig,
    TaskModel,
    classify_interaction,
    depth_threshold_baseline,
    extract_frame_features,
    predict_saliency_map,
    train_task,
)
from .proposals import (
    MergeTree,
    ProposalSet,
    contour_strength,
    load_masks,
    propose_regions,
    ucm_bounds,
)
from .stereo import (
    DisparityMap,
    StereoParams,
    coarse_to_fine,
    disparity_to_depth,
    matching_cost,
    scanline_dp,
)
from .synthetic import SceneObject, SceneSpec, gen_synthetic_scene

__version__ = "0.1.0"
