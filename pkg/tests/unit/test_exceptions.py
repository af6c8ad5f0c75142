#!/usr/bin/env python3
"""
Test custom exception classes
Tests exception hierarchy, context preservation, and message formatting
"""


def test_base_exception():
    """Test base SvsRefineError exception"""
    from svs_refine.exceptions import SvsRefineError

    error = SvsRefineError("Test error")
    assert str(error) == "Test error"
    assert error.message == "Test error"
    assert error.details == {}
    assert error.original_error is None

    error = SvsRefineError("Test error", details={"key": "value", "number": 42})
    assert "key=value" in str(error)
    assert "number=42" in str(error)

    original = ValueError("Original problem")
    error = SvsRefineError("Wrapped error", original_error=original)
    assert "Wrapped error" in str(error)
    assert "Caused by: Original problem" in str(error)


def test_checkpoint_errors():
    """Test CheckpointError and parse subclasses"""
    from svs_refine.exceptions import (
        CheckpointError,
        CheckpointParseError,
        MalformedHeaderError,
        OffsetMismatchError,
        OutOfBoundsError,
        OverlappingRangeError,
        TensorShapeError,
        UnknownDTypeError,
    )

    error = CheckpointError("Cannot read", tensor="l.weight", path="/tmp/m.safetensors")
    assert "tensor=l.weight" in str(error)
    assert "path=/tmp/m.safetensors" in str(error)

    for cls in (
        MalformedHeaderError,
        UnknownDTypeError,
        OffsetMismatchError,
        OverlappingRangeError,
        OutOfBoundsError,
    ):
        assert issubclass(cls, CheckpointParseError)
    assert issubclass(TensorShapeError, CheckpointError)
    assert not issubclass(TensorShapeError, CheckpointParseError)


def test_numerical_errors():
    """Test NumericalError family carries the layer name"""
    from svs_refine.exceptions import (
        LayerRefineError,
        NumericalError,
        ScalerDomainError,
        SvdConvergenceError,
    )

    cause = ScalerDomainError("AbsLog undefined at zero")
    error = LayerRefineError("cannot refine layer", layer="g.weight", original_error=cause)
    assert isinstance(error, NumericalError)
    assert "layer=g.weight" in str(error)
    assert "Caused by: AbsLog undefined at zero" in str(error)
    assert str(SvdConvergenceError("no convergence")) == "no convergence"


def test_shape_mismatch_error():
    """Test ShapeMismatchError formats both shapes"""
    from svs_refine.exceptions import ShapeMismatchError

    error = ShapeMismatchError("shape mismatch", layer="a.weight", before=(4, 3), after=(4, 2))
    assert "layer=a.weight" in str(error)
    assert "before=4x3" in str(error)
    assert "after=4x2" in str(error)


def test_selection_error():
    """Test NothingToRefineError lists the patterns"""
    from svs_refine.exceptions import NothingToRefineError, SelectionError

    error = NothingToRefineError("nothing to refine", patterns=["a.*", "b.*"])
    assert isinstance(error, SelectionError)
    assert "patterns=a.*,b.*" in str(error)


def test_configuration_error():
    """Test ConfigurationError"""
    from svs_refine.exceptions import ConfigurationError

    error = ConfigurationError("Invalid configuration value", config_key="lr", config_value=-1)
    assert "config_key=lr" in str(error)
    assert "config_value=-1" in str(error)


def test_file_operation_error():
    """Test FileOperationError"""
    from svs_refine.exceptions import FileOperationError

    error = FileOperationError(
        "Cannot write report", file_path="/data/report.json", operation="write"
    )
    assert "file_path=/data/report.json" in str(error)
    assert "operation=write" in str(error)


def test_benchmark_errors():
    """Test PruningError and TrainingError"""
    from svs_refine.exceptions import PruningError, TrainingError

    assert "sparsity=1.0" in str(PruningError("bad sparsity", sparsity=1.0))
    error = TrainingError("width mismatch", init="scaled", seed=3)
    assert "init=scaled" in str(error)
    assert "seed=3" in str(error)


def test_exception_hierarchy():
    """Test that all exceptions inherit from base class"""
    from svs_refine.exceptions import (
        CheckpointError,
        ConfigurationError,
        FileOperationError,
        NumericalError,
        PruningError,
        SelectionError,
        ShapeMismatchError,
        SvsRefineError,
        TrainingError,
    )

    for cls in (
        CheckpointError,
        NumericalError,
        SelectionError,
        ShapeMismatchError,
        ConfigurationError,
        FileOperationError,
        PruningError,
        TrainingError,
    ):
        assert issubclass(cls, SvsRefineError)
        assert issubclass(cls, Exception)


def test_exception_chaining():
    """Test that raise ... from keeps the cause"""
    from svs_refine.exceptions import ConfigurationError

    try:
        try:
            raise KeyError("lr")
        except KeyError as e:
            raise ConfigurationError("Missing key", original_error=e) from e
    except ConfigurationError as e:
        assert isinstance(e.__cause__, KeyError)
        assert e.original_error is e.__cause__
