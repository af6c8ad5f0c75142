#!/usr/bin/env python3
"""
Custom exception classes for svs-refine

Domain-specific exceptions carrying the tensor, layer or file they concern.
All exceptions inherit from a single base class so callers (the CLI in
particular) can map whole families onto exit codes.
"""


class SvsRefineError(Exception):
    """Base exception class for all svs-refine errors"""

    def __init__(self, message, details=None, original_error=None):
        """
        Initialize exception with detailed context.

        Args:
            message: Human-readable error message
            details: Dict with additional context (tensor, layer, etc.)
            original_error: Original exception if this is a wrapper
        """
        self.message = message
        self.details = details or {}
        self.original_error = original_error
        super().__init__(self.format_message())

    def format_message(self):
        """Format detailed error message with context"""
        msg = self.message
        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            msg = f"{msg} ({details_str})"
        if self.original_error:
            msg = f"{msg} - Caused by: {str(self.original_error)}"
        return msg


class CheckpointError(SvsRefineError):
    """Raised when checkpoint operations fail"""

    def __init__(self, message, tensor=None, path=None, original_error=None):
        """
        Initialize checkpoint error.

        Args:
            message: Error message
            tensor: Name of the offending tensor
            path: Checkpoint file path
            original_error: Original exception
        """
        details = {}
        if tensor is not None:
            details["tensor"] = tensor
        if path is not None:
            details["path"] = path
        super().__init__(message, details, original_error)


class CheckpointParseError(CheckpointError):
    """Raised when a checkpoint byte sequence cannot be decoded"""

    pass


class MalformedHeaderError(CheckpointParseError):
    """Raised when the JSON header is truncated, invalid or mis-typed"""

    pass


class UnknownDTypeError(CheckpointParseError):
    """Raised when a tensor declares a dtype tag other than F32/F64"""

    pass


class OffsetMismatchError(CheckpointParseError):
    """Raised when data_offsets disagree with shape x byte width"""

    pass


class OverlappingRangeError(CheckpointParseError):
    """Raised when two tensors claim overlapping payload bytes"""

    pass


class OutOfBoundsError(CheckpointParseError):
    """Raised when a payload range extends past the end of the file"""

    pass


class TensorShapeError(CheckpointError):
    """Raised when a tensor cannot be viewed as a matrix"""

    pass


class NumericalError(SvsRefineError):
    """Raised when a numerical routine cannot produce a valid result"""

    def __init__(self, message, layer=None, original_error=None):
        """
        Initialize numerical error.

        Args:
            message: Error message
            layer: Layer (tensor) name being processed
            original_error: Original exception
        """
        details = {}
        if layer is not None:
            details["layer"] = layer
        super().__init__(message, details, original_error)


class NonFiniteMatrixError(NumericalError):
    """Raised when a matrix holds NaN or infinite entries"""

    pass


class SvdConvergenceError(NumericalError):
    """Raised when Jacobi sweeps hit the sweep cap"""

    pass


class RankDeficientError(NumericalError):
    """Raised when the condition number is infinite"""

    pass


class DimensionMismatchError(NumericalError):
    """Raised when SVD factors have incompatible shapes"""

    pass


class ScalerDomainError(NumericalError):
    """Raised when a scaling function is applied outside its domain"""

    pass


class LayerRefineError(NumericalError):
    """Raised when refining a single layer fails"""

    pass


class SelectionError(SvsRefineError):
    """Raised when layer selection patterns are unusable"""

    def __init__(self, message, patterns=None, original_error=None):
        details = {}
        if patterns:
            details["patterns"] = ",".join(patterns)
        super().__init__(message, details, original_error)


class NothingToRefineError(SelectionError):
    """Raised when no weight tensor is selected for refinement"""

    pass


class ShapeMismatchError(SvsRefineError):
    """Raised when same-named layers differ in shape between checkpoints"""

    def __init__(self, message, layer=None, before=None, after=None):
        details = {}
        if layer is not None:
            details["layer"] = layer
        if before is not None:
            details["before"] = "x".join(str(d) for d in before)
        if after is not None:
            details["after"] = "x".join(str(d) for d in after)
        super().__init__(message, details)


class ConfigurationError(SvsRefineError):
    """Raised when configuration is invalid"""

    def __init__(
        self, message, config_key=None, config_value=None, original_error=None
    ):
        """
        Initialize configuration error.

        Args:
            message: Error message
            config_key: Configuration key that failed
            config_value: Invalid configuration value
            original_error: Original exception
        """
        details = {}
        if config_key:
            details["config_key"] = config_key
        if config_value is not None:
            details["config_value"] = config_value
        super().__init__(message, details, original_error)


class FileOperationError(SvsRefineError):
    """Raised when file operations fail"""

    def __init__(self, message, file_path=None, operation=None, original_error=None):
        """
        Initialize file operation error.

        Args:
            message: Error message
            file_path: Path to file that failed
            operation: Operation type (read, write)
            original_error: Original exception
        """
        details = {}
        if file_path:
            details["file_path"] = file_path
        if operation:
            details["operation"] = operation
        super().__init__(message, details, original_error)


class PruningError(SvsRefineError):
    """Raised when channel pruning would leave a layer empty"""

    def __init__(self, message, sparsity=None, layer=None):
        details = {}
        if sparsity is not None:
            details["sparsity"] = sparsity
        if layer is not None:
            details["layer"] = layer
        super().__init__(message, details)


class TrainingError(SvsRefineError):
    """Raised when a benchmark training run is misconfigured"""

    def __init__(self, message, init=None, seed=None, original_error=None):
        details = {}
        if init is not None:
            details["init"] = init
        if seed is not None:
            details["seed"] = seed
        super().__init__(message, details, original_error)
