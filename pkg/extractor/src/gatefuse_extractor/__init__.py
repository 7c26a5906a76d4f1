"""gatefuse-extractor: embedding-manifest extraction from raw corpora."""

__version__ = "0.1.0"

from .adapters import SampleSpec, resolve, split_counts
from .backbones import EXPECTED_DIMS, BackboneId
from .extract import extract_audio, extract_text, extract_video
from .jobs import ExtractionError, ExtractionJob, build_manifest
from .media import sample_keyframes

__all__ = [
    "__version__",
    "BackboneId",
    "EXPECTED_DIMS",
    "ExtractionError",
    "ExtractionJob",
    "SampleSpec",
    "build_manifest",
    "extract_audio",
    "extract_text",
    "extract_video",
    "resolve",
    "sample_keyframes",
    "split_counts",
]
