"""Clip-pair similarity and boundary losses for video moment retrieval.

A numpy library covering: positive/negative clip-pair construction with
hard-negative mining, three loss terms with hand-derived analytic
gradients, finite-difference gradient certification, the standard
moment-retrieval evaluation protocol (R1@threshold, mAP averaged over IoU
thresholds), inference window assembly with 1-D NMS, and a synthetic-data
trainer demonstrating the whole pipeline end to end.
"""

from .gradcheck import GradReport, check, finite_diff, run_certification
from .inference import ClipOutputs, assemble_windows, clip_centers, nms_1d
from .losses import (
    BoundaryLabeling,
    aux_boundary_loss,
    average_boundary_loss,
    boundary_loss,
    clip_loss_value,
    clip_similarity_loss,
    cosine_similarity,
    dynamic_margin,
    label_boundary_clips,
    margin_from_length,
    similarity_matrix,
    smooth_l1,
    total_loss,
)
from .metrics import (
    MAP_THRESHOLDS,
    EvalResult,
    average_precision,
    evaluate,
    iou,
    mean_ap,
    recall_at_1,
)
from .pairs import (
    CrossSegmentPolicy,
    PairSets,
    build_pair_sets,
    clip_inside,
    inside_clips,
    mine_hard_negatives,
    segment_to_indices,
)
from .synth import SyntheticDataset, SyntheticDatasetSpec, foreground_clips, generate_dataset
from .trainer import (
    LinearModel,
    evaluate_model,
    init_model,
    mean_boundary_error,
    similarity_gap,
    train,
)
from .types import (
    ClipEmbeddings,
    GroundTruthEntry,
    LossResult,
    LossWeights,
    MarginParams,
    PredictionWindow,
    Segment,
    SegmentIndices,
    validate_ground_truth,
)

__version__ = "0.1.0"
