"""Binary field format: 32-byte textual header + row-major little-endian f64.

Header layout (ASCII, exactly 32 bytes):

    bytes  0-1   magic "GB"
    byte   2     dimension, '1' or '2'
    bytes  3-8   nodes along axis 0, zero-padded decimal
    bytes  9-14  nodes along axis 1, zero-padded decimal ("000000" in 1D)
    bytes 15-30  time stamp as 16 uppercase hex digits of the IEEE-754 bits
    byte  31     newline

The hex-encoded time keeps the header textual while making round trips
bit-exact. Snapshots and eigenfunction files share this format.
"""
from __future__ import annotations

import struct

import numpy as np

from .grid import Grid

HEADER_BYTES = 32
_MAGIC = b"GB"


class FieldFormatError(ValueError):
    """Malformed header, truncated payload, or grid mismatch."""


def pack_field(u: np.ndarray, t: float) -> bytes:
    u = np.asarray(u, dtype=float)
    if u.ndim not in (1, 2):
        raise FieldFormatError(f"only 1D/2D fields are supported, got ndim={u.ndim}")
    n1 = u.shape[0]
    n2 = u.shape[1] if u.ndim == 2 else 0
    if n1 >= 10**6 or n2 >= 10**6:
        raise FieldFormatError("axis count does not fit the header")
    tbits = struct.unpack("<Q", struct.pack("<d", float(t)))[0]
    header = b"%s%1d%06d%06d%016X\n" % (_MAGIC, u.ndim, n1, n2, tbits)
    assert len(header) == HEADER_BYTES
    payload = np.ascontiguousarray(u, dtype="<f8").tobytes(order="C")
    return header + payload


def unpack_field(data: bytes) -> tuple[np.ndarray, float]:
    if len(data) < HEADER_BYTES:
        raise FieldFormatError("truncated header")
    header = data[:HEADER_BYTES]
    if header[:2] != _MAGIC or header[-1:] != b"\n":
        raise FieldFormatError("bad magic or header terminator")
    try:
        dim = int(header[2:3])
        n1 = int(header[3:9])
        n2 = int(header[9:15])
        tbits = int(header[15:31], 16)
    except ValueError as exc:
        raise FieldFormatError(f"unparseable header: {exc}") from None
    if dim not in (1, 2):
        raise FieldFormatError(f"bad dimension {dim}")
    shape = (n1,) if dim == 1 else (n1, n2)
    count = int(np.prod(shape))
    expected = HEADER_BYTES + 8 * count
    if len(data) != expected:
        raise FieldFormatError(
            f"payload size mismatch: expected {expected} bytes, got {len(data)}"
        )
    t = struct.unpack("<d", struct.pack("<Q", tbits))[0]
    u = np.frombuffer(data[HEADER_BYTES:], dtype="<f8").reshape(shape).copy()
    return u, t


def validate_against_grid(u: np.ndarray, grid: Grid) -> None:
    if u.shape != grid.shape:
        raise FieldFormatError(
            f"grid mismatch: field shape {u.shape}, grid shape {grid.shape}"
        )


def write_field(path, u: np.ndarray, t: float) -> None:
    with open(path, "wb") as f:
        f.write(pack_field(u, t))


def read_field(path) -> tuple[np.ndarray, float]:
    with open(path, "rb") as f:
        return unpack_field(f.read())
