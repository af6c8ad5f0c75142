"""
Checkpoint archive reading and writing.

Archives use the open header-plus-payload layout: an 8-byte little-endian
header length N, N bytes of UTF-8 JSON mapping tensor names to
``{"dtype", "shape", "data_offsets"}`` entries (offsets relative to the first
payload byte), then the packed little-endian payload. An optional
``__metadata__`` entry holds string pairs.

Only F32 and F64 tensors are supported. Payload bytes are kept verbatim so
that tensors nobody touches survive a read/write cycle bit for bit.
"""

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np
import numpy.typing as npt

from .constants import HEADER_ALIGNMENT, METADATA_KEY, atomic_write_bytes
from .exceptions import (
    CheckpointError,
    FileOperationError,
    MalformedHeaderError,
    OffsetMismatchError,
    OutOfBoundsError,
    OverlappingRangeError,
    TensorShapeError,
    UnknownDTypeError,
)

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]

_HEADER_LEN = struct.Struct("<Q")


class DType(str, Enum):
    """Stored element type of a tensor."""

    F32 = "F32"
    F64 = "F64"

    @property
    def itemsize(self) -> int:
        return 4 if self is DType.F32 else 8

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype("<f4") if self is DType.F32 else np.dtype("<f8")


@dataclass(frozen=True)
class Tensor:
    """A named, shaped tensor holding its raw little-endian payload."""

    name: str
    shape: tuple
    dtype: DType
    data: bytes

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        object.__setattr__(self, "dtype", DType(self.dtype))
        if not self.shape or any(d < 1 for d in self.shape):
            raise CheckpointError(
                f"Invalid shape {list(self.shape)}: need rank >= 1 and dims >= 1",
                tensor=self.name,
            )
        expected = self.numel * self.dtype.itemsize
        if len(self.data) != expected:
            raise OffsetMismatchError(
                f"offset range mismatch: {len(self.data)} bytes for shape "
                f"{list(self.shape)} at {self.dtype.value} (expected {expected})",
                tensor=self.name,
            )

    @property
    def numel(self) -> int:
        return math.prod(self.shape)

    @property
    def rank(self) -> int:
        return len(self.shape)

    def to_array(self) -> np.ndarray:
        """Return the values as a float64 array of the tensor's shape."""
        arr = np.frombuffer(self.data, dtype=self.dtype.numpy_dtype)
        return arr.astype(np.float64).reshape(self.shape)

    @classmethod
    def from_array(cls, name: str, values, dtype: DType = DType.F64) -> "Tensor":
        """Build a tensor from numeric values, narrowing to *dtype*.

        float64 -> float32 narrowing rounds to nearest, ties to even.
        """
        dtype = DType(dtype)
        arr = np.ascontiguousarray(np.asarray(values, dtype=dtype.numpy_dtype))
        if arr.ndim == 0:
            arr = arr.reshape(1)
        return cls(name=name, shape=arr.shape, dtype=dtype, data=arr.tobytes())


@dataclass(frozen=True)
class Checkpoint:
    """Immutable name-sorted collection of tensors plus optional metadata."""

    tensors: Mapping[str, Tensor] = field(default_factory=dict)
    metadata: Optional[Mapping[str, str]] = None

    def __post_init__(self):
        ordered = {}
        for name in sorted(self.tensors):
            tensor = self.tensors[name]
            if tensor.name != name:
                raise CheckpointError(
                    f"Tensor keyed as {name!r} is named {tensor.name!r}", tensor=name
                )
            ordered[name] = tensor
        object.__setattr__(self, "tensors", MappingProxyType(ordered))
        if self.metadata is not None:
            for key, value in self.metadata.items():
                if not isinstance(key, str) or not isinstance(value, str):
                    raise CheckpointError("Metadata must map strings to strings")
            object.__setattr__(
                self, "metadata", MappingProxyType(dict(sorted(self.metadata.items())))
            )

    @classmethod
    def from_tensors(cls, tensors, metadata=None) -> "Checkpoint":
        """Build a checkpoint from an iterable of tensors (names must be unique)."""
        by_name = {}
        for tensor in tensors:
            if tensor.name in by_name:
                raise CheckpointError("Duplicate tensor name", tensor=tensor.name)
            by_name[tensor.name] = tensor
        return cls(tensors=by_name, metadata=metadata)

    def names(self) -> list:
        return list(self.tensors)

    def replace(self, updates: Mapping[str, Tensor]) -> "Checkpoint":
        """Return a copy with the given tensors swapped in."""
        merged = dict(self.tensors)
        for name, tensor in updates.items():
            if name not in merged:
                raise CheckpointError("Cannot replace a missing tensor", tensor=name)
            merged[name] = tensor
        return Checkpoint(tensors=merged, metadata=self.metadata)

    def __eq__(self, other):
        if not isinstance(other, Checkpoint):
            return NotImplemented
        mine = dict(self.metadata) if self.metadata is not None else None
        theirs = dict(other.metadata) if other.metadata is not None else None
        return dict(self.tensors) == dict(other.tensors) and mine == theirs


def _parse_entry(name: str, entry) -> tuple:
    if not isinstance(entry, dict):
        raise MalformedHeaderError("Header entry is not an object", tensor=name)
    missing = {"dtype", "shape", "data_offsets"} - set(entry)
    if missing:
        raise MalformedHeaderError(
            f"Header entry lacks {', '.join(sorted(missing))}", tensor=name
        )

    try:
        dtype = DType(entry["dtype"])
    except ValueError:
        raise UnknownDTypeError(
            f"unknown dtype tag {entry['dtype']!r}", tensor=name
        ) from None

    shape = entry["shape"]
    if (
        not isinstance(shape, list)
        or not shape
        or any(isinstance(d, bool) or not isinstance(d, int) or d < 1 for d in shape)
    ):
        raise MalformedHeaderError(f"Invalid shape {shape!r}", tensor=name)

    offsets = entry["data_offsets"]
    if (
        not isinstance(offsets, list)
        or len(offsets) != 2
        or any(isinstance(o, bool) or not isinstance(o, int) or o < 0 for o in offsets)
        or offsets[0] > offsets[1]
    ):
        raise MalformedHeaderError(f"Invalid data_offsets {offsets!r}", tensor=name)

    begin, end = offsets
    expected = math.prod(shape) * dtype.itemsize
    if end - begin != expected:
        raise OffsetMismatchError(
            f"offset range mismatch: [{begin}, {end}) spans {end - begin} bytes, "
            f"shape {shape} at {dtype.value} needs {expected}",
            tensor=name,
        )
    return dtype, tuple(shape), begin, end


def read_checkpoint(data: bytes) -> Checkpoint:
    """Decode a checkpoint archive, validating every payload range."""
    data = bytes(data)
    if len(data) < _HEADER_LEN.size:
        raise MalformedHeaderError("Truncated header length prefix")
    (header_len,) = _HEADER_LEN.unpack_from(data)
    header_end = _HEADER_LEN.size + header_len
    if header_end > len(data):
        raise MalformedHeaderError(
            f"Header length {header_len} exceeds archive size {len(data)}"
        )

    try:
        header = json.loads(data[_HEADER_LEN.size : header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedHeaderError("malformed JSON header", original_error=e) from e
    if not isinstance(header, dict):
        raise MalformedHeaderError("malformed JSON header: not an object")

    metadata = header.pop(METADATA_KEY, None)
    if metadata is not None and (
        not isinstance(metadata, dict)
        or not all(isinstance(k, str) and isinstance(v, str) for k, v in metadata.items())
    ):
        raise MalformedHeaderError("Metadata must map strings to strings")

    payload = memoryview(data)[header_end:]
    entries = []
    for name, entry in header.items():
        dtype, shape, begin, end = _parse_entry(name, entry)
        if end > len(payload):
            raise OutOfBoundsError(
                f"Payload range [{begin}, {end}) past end of payload ({len(payload)} bytes)",
                tensor=name,
            )
        entries.append((begin, end, name, dtype, shape))

    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    previous_end, previous_name = 0, None
    for begin, end, name, _, _ in entries:
        if previous_name is not None and begin < previous_end:
            raise OverlappingRangeError(
                f"Payload range overlaps {previous_name!r}", tensor=name
            )
        previous_end, previous_name = end, name

    tensors = {
        name: Tensor(name, shape, dtype, bytes(payload[begin:end]))
        for begin, end, name, dtype, shape in entries
    }
    logger.debug("Read checkpoint with %d tensors", len(tensors))
    return Checkpoint(tensors=tensors, metadata=metadata)


def write_checkpoint(ckpt: Checkpoint) -> bytes:
    """Encode a checkpoint canonically: name-sorted entries, gap-free payload."""
    header = {}
    if ckpt.metadata is not None:
        header[METADATA_KEY] = dict(ckpt.metadata)

    offset = 0
    chunks = []
    for name, tensor in ckpt.tensors.items():
        size = len(tensor.data)
        header[name] = {
            "dtype": tensor.dtype.value,
            "shape": list(tensor.shape),
            "data_offsets": [offset, offset + size],
        }
        chunks.append(tensor.data)
        offset += size

    encoded = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )
    encoded += b" " * (-len(encoded) % HEADER_ALIGNMENT)
    return _HEADER_LEN.pack(len(encoded)) + encoded + b"".join(chunks)


def as_matrix(t: Tensor) -> Matrix:
    """View a rank >= 2 tensor as a c_out x (product of remaining dims) matrix."""
    if t.rank < 2:
        raise TensorShapeError(
            f"not a matrix-like tensor: rank {t.rank}", tensor=t.name
        )
    rows = t.shape[0]
    return t.to_array().reshape(rows, t.numel // rows)


def load_checkpoint(path) -> Checkpoint:
    """Read and decode a checkpoint file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FileOperationError(
            "Cannot read checkpoint", file_path=str(path), operation="read", original_error=e
        ) from e
    return read_checkpoint(data)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Encode *ckpt* and write it atomically to *path*."""
    path = Path(path)
    try:
        atomic_write_bytes(write_checkpoint(ckpt), path)
    except OSError as e:
        raise FileOperationError(
            "Cannot write checkpoint", file_path=str(path), operation="write", original_error=e
        ) from e
    logger.info("Wrote checkpoint %s (%d tensors)", path, len(ckpt.tensors))
