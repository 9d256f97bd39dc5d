"""Superpixel segmentation and object-proposal refinement toolkit."""

from .classifier import (
    MlpWeights,
    SpxSample,
    SuperpixelClassifier,
    TrainConfig,
    classify,
    forward,
    load_weights,
    save_weights,
    train,
)
from .errors import RasterIOError, RefineBatchError, SpxError, ValidationError
from .fh import (
    EdgeList,
    FhParams,
    FhSegmenter,
    build_edges,
    calibrate,
    delta_cos,
    delta_blended,
    delta_fh,
    segment,
)
from .groundtruth import (
    AffinityLabels,
    GtObject,
    SpxSelection,
    affinity_labels,
    affinity_to_feature_map,
    exhaustive_gt_set,
    greedy_gt_set,
)
from .metrics import (
    MetricsConfig,
    MetricsReport,
    aiou,
    average_recall,
    avg_iou,
    boundary_recall,
    evaluate_dataset,
    oversegmentation_error,
    undersegmentation_error,
)
from .pooling import PooledVector, SuperpixelStats, compute_stats, pool_features, pool_scalar
from .postprocess import PostprocessConfig, nms, open_close, spx_bilateral_filter
from .raster import (
    BinaryMask,
    FeatureMap,
    LabelMap,
    Rect,
    RgbImage,
    load_image,
    load_mask,
    mask_iou,
    read_feature_map,
    read_label_map,
    save_image,
    save_mask,
    write_feature_map,
    write_label_map,
)
from .refine import (
    CoarseProposal,
    LevelBundle,
    RefinedProposal,
    refine,
    refine_batch,
    upsample_window,
)

__version__ = "0.1.0"
