"""Image-to-feature extraction emitting afflabel interchange files.

Runs a pretrained ImageNet classifier with its final fully connected layer
removed over paired RGB/label images, derives scene-level multi-hot
affordance labels from the pixel annotations, and writes the NPY + JSON
Lines files the labeling engine consumes.
"""

from .dataset import ScenePair, discover_pairs
from .extract import ExtractionResult, ExtractorSpec, extract_features
from .labels import LabelAudit, Palette, derive_scene_labels
from .networks import ALIASES, NETWORKS, NetworkInfo, build_feature_extractor, resolve_network
from .preprocess import pad_to_square, standardize_image, to_model_batch

__version__ = "0.1.0"
