"""Solar filament detection in H-alpha full-disk images with active contours
without edges, plus Otsu/k-means baselines and confusion-matrix scoring."""

from .acwe import AcweConfig, AcweResult, energy, evolve, filament_mask, init_level_set, region_means
from .baselines import KMeansConfig, kmeans_segment, otsu_threshold
from .core import DiskGeometry, detect_disk, load_image, load_mask, save_image, save_mask
from .evaluation import ConfusionMatrix, MetricsReport, compare_methods, confusion, metrics
from .pipeline import PipelineConfig, run_experiment, run_pipeline, segment_image
from .postprocess import PostprocessConfig, filter_by_area, label_components
from .preprocess import InpaintConfig, build_white_patch_mask, inpaint, log_transform, sharpen
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AcweConfig", "AcweResult", "energy", "evolve", "filament_mask", "init_level_set",
    "region_means",
    "KMeansConfig", "kmeans_segment", "otsu_threshold",
    "DiskGeometry", "detect_disk", "load_image", "load_mask", "save_image", "save_mask",
    "ConfusionMatrix", "MetricsReport", "compare_methods", "confusion", "metrics",
    "PipelineConfig", "run_experiment", "run_pipeline", "segment_image",
    "PostprocessConfig", "filter_by_area", "label_components",
    "InpaintConfig", "build_white_patch_mask", "inpaint", "log_transform", "sharpen",
    "SynthSpec", "generate",
]
