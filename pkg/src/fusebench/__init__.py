"""Visible/infrared image-fusion benchmark: a 15-metric evaluation
suite, segmentation-based scoring (SEA), rank correlation between the
two, reference fusers, and a manifest-driven pipeline with a CLI."""

from .correlation import BASELINE_ROW_NAMES, CorrelationRow, ScoreTable, \
    correlation_table, kendall_tau, metric_direction_adjust
from .errors import ContractError
from .fusers import STRATEGIES, FuserSpec, fuse
from .harness import ClassImprovementResult, DatasetManifest, ManifestMethod, \
    ManifestPair, ManifestPredictor, MethodRun, Report, SeaRun, VisIrDiffResult, \
    analyze_class_improvement, analyze_vis_ir_diff, build_report, \
    count_improvements, emit_report, fuse_to_dir, load_manifest, \
    run_conventional, run_sea, worker_count
from .imaging import IGNORE_LABEL, ImagePlane, PyramidLevels, RgbImage, SegMask, \
    gradient_maps, laplacian_pyramid, load_intensity, load_mask, load_png, \
    pyramid_collapse, save_png, sobel_responses, to_grayscale
from .metrics import LOWER_BETTER, METRIC_ORDER, MetricResult, average_gradient, \
    correlation_coefficient, entropy, evaluate_all, feature_mutual_information, \
    metric_polarity, mutual_information, psnr, q_abf, q_c, q_cb, q_cv, q_viff, \
    scd, spatial_frequency, ssim_fusion, standard_deviation
from .sea import ClassSet, ConfusionMatrix, SeaScore, accumulate, \
    aggregate_predictors, compute_score, per_image_scores

__version__ = "0.1.0"

__all__ = [
    "BASELINE_ROW_NAMES", "ClassImprovementResult", "ClassSet", "ConfusionMatrix",
    "ContractError", "CorrelationRow", "DatasetManifest", "FuserSpec",
    "IGNORE_LABEL", "ImagePlane", "LOWER_BETTER", "METRIC_ORDER", "ManifestMethod",
    "ManifestPair", "ManifestPredictor", "MethodRun", "MetricResult",
    "PyramidLevels", "Report", "RgbImage", "STRATEGIES", "ScoreTable", "SeaRun",
    "SeaScore", "SegMask", "VisIrDiffResult", "accumulate", "aggregate_predictors",
    "analyze_class_improvement", "analyze_vis_ir_diff", "average_gradient",
    "build_report", "compute_score", "correlation_coefficient", "correlation_table",
    "count_improvements", "emit_report", "entropy", "evaluate_all",
    "feature_mutual_information", "fuse", "fuse_to_dir", "gradient_maps",
    "kendall_tau", "laplacian_pyramid", "load_intensity", "load_manifest",
    "load_mask", "load_png", "metric_direction_adjust", "metric_polarity",
    "mutual_information", "per_image_scores", "psnr", "pyramid_collapse", "q_abf",
    "q_c", "q_cb", "q_cv", "q_viff", "run_conventional", "run_sea", "save_png",
    "scd", "sobel_responses", "spatial_frequency", "ssim_fusion",
    "standard_deviation", "to_grayscale", "worker_count",
]
