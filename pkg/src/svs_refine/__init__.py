"""
svs-refine - Singular Value Scaling for pruned network weights

Rescales the singular values of pruned weight matrices (and their paired
biases) before fine-tuning, reports spectra of checkpoints, and ships a
small benchmark comparing pruned, scaled and random initializations.
"""

from .exceptions import (
    CheckpointError,
    CheckpointParseError,
    ConfigurationError,
    FileOperationError,
    LayerRefineError,
    NothingToRefineError,
    NumericalError,
    ScalerDomainError,
    SelectionError,
    ShapeMismatchError,
    SvsRefineError,
)
from .refine_pipeline import (
    RefineConfig,
    RefineResult,
    pair_weight_bias,
    refine_checkpoint,
    refine_file,
)
from .scaling import ScalerKind, apply_scaler, scale_bias, scale_pair, scale_weight
from .spectrum_report import (
    LayerReport,
    ReportFormat,
    compare_checkpoints,
    compute_stats,
    export_report,
    histogram,
    inspect_checkpoint,
)
from .svd_core import SvdFactors, condition_number, pseudoinverse, reconstruct, svd
from .tensor_store import (
    Checkpoint,
    DType,
    Tensor,
    as_matrix,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
    write_checkpoint,
)
from .validation import ValidationError

__version__ = "1.0.0"
__all__ = [
    "Checkpoint",
    "DType",
    "Tensor",
    "read_checkpoint",
    "write_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "as_matrix",
    "SvdFactors",
    "svd",
    "reconstruct",
    "pseudoinverse",
    "condition_number",
    "ScalerKind",
    "apply_scaler",
    "scale_weight",
    "scale_bias",
    "scale_pair",
    "LayerReport",
    "ReportFormat",
    "compute_stats",
    "histogram",
    "inspect_checkpoint",
    "compare_checkpoints",
    "export_report",
    "RefineConfig",
    "RefineResult",
    "pair_weight_bias",
    "refine_checkpoint",
    "refine_file",
    "ValidationError",
    "SvsRefineError",
    "CheckpointError",
    "CheckpointParseError",
    "NumericalError",
    "ScalerDomainError",
    "LayerRefineError",
    "SelectionError",
    "NothingToRefineError",
    "ShapeMismatchError",
    "ConfigurationError",
    "FileOperationError",
]
