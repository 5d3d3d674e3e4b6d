"""Minimal binary tensor format for sample batches.

Layout: 4 magic bytes "WPPT", then five little-endian u32 words (format
version, B, C, H, W), then B*C*H*W little-endian 32-bit floats in row-major
order.  The format stores exactly one batch per file.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import ProtocolError, ShapeError

MAGIC = b"WPPT"
VERSION = 1
_HEADER = struct.Struct("<4s5I")


def write_tensor(path: str, x: np.ndarray) -> None:
    """Writes a (B, C, H, W) batch to `path` as 32-bit floats.

    The file is written to a temporary name in the target directory and
    renamed into place, so readers never observe a partial file.

    Args:
        path: destination file name.
        x: 4-D array; values are cast to float32.

    Raises:
        ShapeError: if x is not 4-D with positive dims that fit in u32.
        OSError: propagated from the filesystem.
    """
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError(f"tensor files hold (B, C, H, W) batches, got {x.shape}")
    if min(x.shape) <= 0 or max(x.shape) > 0xFFFFFFFF:
        raise ShapeError(f"dims must be positive u32 values, got {x.shape}")
    header = _HEADER.pack(MAGIC, VERSION, *x.shape)
    payload = np.ascontiguousarray(x, dtype="<f4").tobytes()
    dest_dir = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dest_dir, suffix=".wppt.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_tensor(path: str) -> np.ndarray:
    """Reads a tensor file back as a float64 (B, C, H, W) array.

    Args:
        path: file to read.

    Returns:
        The stored batch, upcast to float64.

    Raises:
        ProtocolError: if the magic, version, dims, or payload length are
            not exactly as the header demands.
        OSError: propagated from the filesystem.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ProtocolError(f"file too short for a header: {len(raw)} bytes")
    magic, version, b, c, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported format version {version}")
    if min(b, c, h, w) == 0:
        raise ProtocolError(f"header dims must be positive, got {(b, c, h, w)}")
    expected = _HEADER.size + b * c * h * w * 4
    if len(raw) != expected:
        raise ProtocolError(
            f"payload length mismatch: file has {len(raw)} bytes, header "
            f"implies {expected}"
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return flat.reshape(b, c, h, w).astype(np.float64)
