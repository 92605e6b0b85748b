"""Masked-token encoder embedding export to the SLMX matrix format."""

from .exporter import (
    ExportManifest,
    MaskAlignmentError,
    ModelLoadError,
    export_embeddings,
    manifest_path,
)
from .records import MASK_TOKEN, MaskedRecord, read_masked_records
from .slmx import FormatError, HEADER_SIZE, read_matrix, write_matrix

__all__ = [
    "ExportManifest",
    "FormatError",
    "HEADER_SIZE",
    "MASK_TOKEN",
    "MaskAlignmentError",
    "MaskedRecord",
    "ModelLoadError",
    "export_embeddings",
    "manifest_path",
    "read_masked_records",
    "read_matrix",
    "write_matrix",
]
