"""Feature exporter: run encoder backbones over a manifest, emit KENYFEAT.

Reads the dataset manifest JSONL and the content-addressed media directory
produced by the harvesting pipeline, pushes each example through an image or
text backbone, and writes the feature file format the fusion trainer loads.
The two sides only meet at those file formats; nothing here imports the
pipeline package.
"""

from .errors import ExportError
from .export import ExportConfig, ExportResult, export_features
from .kenyfeat import MODALITY_IMAGE, MODALITY_TEXT, write_kenyfeat
from .manifest import Manifest, ManifestExample, read_manifest

__version__ = "0.1.0"

__all__ = [
    "ExportConfig",
    "ExportError",
    "ExportResult",
    "Manifest",
    "ManifestExample",
    "MODALITY_IMAGE",
    "MODALITY_TEXT",
    "export_features",
    "read_manifest",
    "write_kenyfeat",
    "__version__",
]
