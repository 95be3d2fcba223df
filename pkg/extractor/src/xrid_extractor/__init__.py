"""CNN feature extraction into the xrid binary feature format."""

from .backbone import build_backbone
from .errors import (
    ExtractorError,
    LayerNotFound,
    UnknownBackbone,
    UnreadableImage,
    WeightsUnavailable,
)
from .extract import extract, list_images
from .writer import write_feature_file

__version__ = "0.1.0"

__all__ = [
    "ExtractorError",
    "LayerNotFound",
    "UnknownBackbone",
    "UnreadableImage",
    "WeightsUnavailable",
    "build_backbone",
    "extract",
    "list_images",
    "write_feature_file",
    "__version__",
]
