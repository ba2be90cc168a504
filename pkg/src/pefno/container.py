"""PEFNO1 binary container: the on-disk format for every gridded array.

Layout (little-endian throughout):

    bytes 0..6   magic "PEFNO1\\0"
    byte  7      version (u8, currently 1)
    bytes 8..11  n1 (u32)
    bytes 12..15 n2 (u32)
    bytes 16..19 channel count (u32)
    payload      channels * n1 * n2 float64 values, channel-major,
                 row-major within a channel

The same container carries tensor fields (9 channels), vector fields (3),
material fields (2: E, nu), weight fields, and flattened model parameters.
The cell length `l` is deliberately not part of the header; it travels in
run manifests and defaults to 1.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import TensorField, VectorField
from .grid import GridSpec

MAGIC = b"PEFNO1\x00"
VERSION = 1
_HEADER = struct.Struct("<BIII")  # version, n1, n2, channels


class FormatError(ValueError):
    """Malformed container file; the message names the offending header field."""


def write_channels(path: str | Path, channels: np.ndarray) -> None:
    """Write an (nchan, n1, n2) float64 array as a PEFNO1 container."""
    a = np.ascontiguousarray(channels, dtype=np.float64)
    if a.ndim != 3:
        raise FormatError(f"channels must be a 3-d array (nchan, n1, n2), got shape {a.shape}")
    nchan, n1, n2 = a.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(VERSION, n1, n2, nchan))
        fh.write(a.astype("<f8", copy=False).tobytes())


def read_channels(path: str | Path) -> tuple[int, int, np.ndarray]:
    """Read a PEFNO1 container; returns (n1, n2, channels[nchan, n1, n2])."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic (expected PEFNO1 container)")
    off = len(MAGIC)
    if len(data) < off + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    version, n1, n2, nchan = _HEADER.unpack_from(data, off)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if n1 == 0 or n2 == 0:
        raise FormatError(f"{path}: invalid dimensions n1={n1}, n2={n2}")
    off += _HEADER.size
    expected = nchan * n1 * n2 * 8
    payload = data[off:]
    if len(payload) < expected:
        raise FormatError(
            f"{path}: truncated payload ({len(payload)} bytes, header requires {expected})"
        )
    if len(payload) > expected:
        raise FormatError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f8").reshape(nchan, n1, n2).astype(np.float64)
    return n1, n2, arr


def write_tensor(path: str | Path, f: TensorField) -> None:
    """Store the 9 components of a tensor field, (r, c) row-major channel order."""
    write_channels(path, f.comps.reshape(9, f.grid.n1, f.grid.n2))


def read_tensor(path: str | Path, l: float = 1.0) -> TensorField:
    n1, n2, arr = read_channels(path)
    if arr.shape[0] != 9:
        raise FormatError(f"{path}: channel count {arr.shape[0]} != 9 for a tensor field")
    return TensorField(GridSpec(n1, n2, l), arr.reshape(3, 3, n1, n2))


def write_vector(path: str | Path, f: VectorField) -> None:
    write_channels(path, f.comps)


def read_vector(path: str | Path, l: float = 1.0) -> VectorField:
    n1, n2, arr = read_channels(path)
    if arr.shape[0] != 3:
        raise FormatError(f"{path}: channel count {arr.shape[0]} != 3 for a vector field")
    return VectorField(GridSpec(n1, n2, l), arr)
