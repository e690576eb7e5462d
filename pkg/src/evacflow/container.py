"""Binary tensor container used for feature tensors and raw accumulators.

File layout (all little-endian):

    bytes 0..3    uint32  H   (rows)
    bytes 4..7    uint32  W   (cols)
    bytes 8..11   uint32  C   (channels)
    bytes 12..    float32 data, channel-major: data[c][h][w]

The container is intentionally dumb: no compression, no metadata. It
exists so regression tests can compare tensors losslessly where PNG
would quantize.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<III")


def write_tensor(path: str | Path, data: np.ndarray) -> None:
    """Write a (C, H, W) or (H, W) float array. 2-D input becomes 1 channel."""
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError(f"expected 2-D or 3-D array, got shape {arr.shape}")
    c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(h, w, c))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a container written by :func:`write_tensor`. Returns (C, H, W) float32."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    h, w, c = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 4 * h * w * c
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(c, h, w).astype(np.float32)
