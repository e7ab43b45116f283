"""
Binary tensor container ``PJXT``.

Layout::

    b"PJXT" | version u8 (= 1) | ndim u8 | ndim x extent u32 LE | float64 LE values (row-major)

Used for spatial features, annotator masks, pointing maps and checkpoints.
"""
from __future__ import absolute_import, division, print_function

import logging
import os
import struct

import numpy as np

from pjx.utils import CorruptTensorFileError, TensorRankError

from typing import Optional, Union

_logger = logging.getLogger(__name__)

MAGIC = b"PJXT"
VERSION = 1
SUFFIX = ".pjxt"
_HEADER = struct.Struct("<4sBB")
_VALUE_DTYPE = np.dtype("<f8")


def encode_tensor(array) -> bytes:
    """Serialize an array to PJXT bytes.

    >>> encode_tensor(np.zeros(2))[:6]
    b'PJXT\\x01\\x01'
    """
    array = np.ascontiguousarray(array, dtype=np.float64)
    if array.ndim > 255:
        raise ValueError("PJXT supports at most 255 dimensions")
    if any(extent >= 2**32 for extent in array.shape):
        raise ValueError("extent too large for PJXT: {}".format(array.shape))
    header = _HEADER.pack(MAGIC, VERSION, array.ndim)
    extents = struct.pack("<{}I".format(array.ndim), *array.shape)
    return header + extents + array.astype(_VALUE_DTYPE, copy=False).tobytes(order="C")


def decode_tensor(data: bytes, expected_rank: Optional[int] = None, source: str = "<bytes>") -> np.ndarray:
    """Parse PJXT bytes.

    Raises
    ------
    CorruptTensorFileError
        bad magic, unknown version, or a payload that is truncated or too long
    TensorRankError
        if ``expected_rank`` is given and differs from the stored rank
    """
    if len(data) < _HEADER.size:
        raise CorruptTensorFileError("{}: truncated header ({} bytes)".format(source, len(data)))
    magic, version, ndim = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptTensorFileError("{}: bad magic {!r}".format(source, magic))
    if version != VERSION:
        raise CorruptTensorFileError("{}: unsupported version {}".format(source, version))
    offset = _HEADER.size
    if len(data) < offset + 4 * ndim:
        raise CorruptTensorFileError("{}: truncated shape".format(source))
    shape = struct.unpack_from("<{}I".format(ndim), data, offset)
    offset += 4 * ndim
    expected_bytes = int(np.prod(shape, dtype=np.int64)) * _VALUE_DTYPE.itemsize
    if len(data) - offset != expected_bytes:
        raise CorruptTensorFileError(
            "{}: payload has {} bytes, shape {} needs {}".format(source, len(data) - offset, shape, expected_bytes)
        )
    if expected_rank is not None and ndim != expected_rank:
        raise TensorRankError("{}: expected rank {}, found rank {}".format(source, expected_rank, ndim))
    values = np.frombuffer(data, dtype=_VALUE_DTYPE, offset=offset, count=expected_bytes // 8)
    return values.astype(np.float64).reshape(shape)


def save_tensor(path: Union[str, os.PathLike], array) -> None:
    with open(path, "wb") as f:
        f.write(encode_tensor(array))
    _logger.debug("wrote tensor %s to %s", np.shape(array), path)


def load_tensor(path: Union[str, os.PathLike], expected_rank: Optional[int] = None) -> np.ndarray:
    """Read a PJXT file; a missing file raises :class:`FileNotFoundError`."""
    with open(path, "rb") as f:
        data = f.read()
    return decode_tensor(data, expected_rank=expected_rank, source=str(path))


__all__ = ["MAGIC", "VERSION", "SUFFIX", "encode_tensor", "decode_tensor", "save_tensor", "load_tensor"]
