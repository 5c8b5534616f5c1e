"""Snapshot files, CSV tables and trajectory directories.

Snapshot layout (all little-endian)::

    offset  size  field
    0       4     magic b"SGF1"
    4       4     format version (u32, currently 1)
    8       4     m (u32)
    12      4     n_per_axis (u32)
    16      8     period (f64)
    24      4     l (u32)
    28      8     time stamp (f64)
    36      ...   per site in row-major order, the lower triangle of the
                  site matrix row by row, as f64

Writing then reading a field reproduces it bit for bit.
"""

from __future__ import annotations

import csv
import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .fields import SymmetricMatrixField, unpack
from .lattice import LatticeDomain, build_domain

MAGIC = b"SGF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdId")
HEADER_SIZE = _HEADER.size  # 36
_PAYLOAD = np.dtype("<f8")
SNAPSHOT_PATTERN = "snap_{step:06d}.sgf"
_SNAPSHOT_RE = re.compile(r"snap_(\d+)\.sgf$")


@dataclass(frozen=True)
class SnapshotHeader:
    version: int
    m: int
    n_per_axis: int
    period: float
    l: int
    t: float


def encode_snapshot(field: SymmetricMatrixField) -> bytes:
    dom = field.domain
    head = _HEADER.pack(MAGIC, VERSION, dom.m, dom.n_per_axis, float(dom.period), field.l, float(field.t))
    return head + np.ascontiguousarray(field.packed(), dtype=_PAYLOAD).tobytes()


def write_snapshot(field: SymmetricMatrixField, path: str | Path) -> Path:
    """Write ``field`` in the snapshot format."""
    p = Path(path)
    p.write_bytes(encode_snapshot(field))
    return p


def decode_header(buf: bytes) -> SnapshotHeader:
    """Parse and validate the fixed-size header.

    Raises
    ------
    FormatError
        With the byte offset of the first bad field.
    """
    if buf[:4] != MAGIC[: len(buf[:4])]:
        raise FormatError("bad magic bytes", 0)
    if len(buf) < HEADER_SIZE:
        raise FormatError(f"truncated header ({len(buf)} of {HEADER_SIZE} bytes)", len(buf))
    magic, version, m, n, period, l, t = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError("bad magic bytes", 0)
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", 4)
    if m < 2 or m > 16:
        raise FormatError(f"implausible dimension m={m}", 8)
    if n < 4:
        raise FormatError(f"implausible lattice size n={n}", 12)
    if not (math.isfinite(period) and period > 0):
        raise FormatError(f"invalid period {period!r}", 16)
    if l < 1 or l > 64:
        raise FormatError(f"implausible matrix size l={l}", 24)
    if not math.isfinite(t):
        raise FormatError(f"invalid time stamp {t!r}", 28)
    return SnapshotHeader(version, m, n, period, l, t)


def decode_snapshot(buf: bytes, domain: LatticeDomain | None = None) -> SymmetricMatrixField:
    """Inverse of :func:`encode_snapshot`.

    Parameters
    ----------
    domain : LatticeDomain, optional
        If given, the header must match it.
    """
    hdr = decode_header(buf)
    if domain is not None:
        if (hdr.m, hdr.n_per_axis) != (domain.m, domain.n_per_axis):
            raise FormatError(f"header lattice ({hdr.m}, {hdr.n_per_axis}) does not match the domain", 8)
        if hdr.period != domain.period:
            raise FormatError("header period does not match the domain", 16)
    dom = domain or build_domain(hdr.m, hdr.n_per_axis, hdr.period)
    q = hdr.l * (hdr.l + 1) // 2
    expected = HEADER_SIZE + dom.n_sites * q * _PAYLOAD.itemsize
    if len(buf) < expected:
        raise FormatError(f"truncated payload ({len(buf)} of {expected} bytes)", len(buf))
    if len(buf) > expected:
        raise FormatError(f"{len(buf) - expected} trailing bytes", expected)
    packed = np.frombuffer(buf, dtype=_PAYLOAD, offset=HEADER_SIZE).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(packed))
    if bad.size:
        raise FormatError("non-finite matrix entry", HEADER_SIZE + int(bad[0]) * _PAYLOAD.itemsize)
    return SymmetricMatrixField(dom, unpack(packed.reshape(dom.shape + (q,)), hdr.l), hdr.t)


def read_snapshot(path: str | Path, domain: LatticeDomain | None = None) -> SymmetricMatrixField:
    """Read a snapshot file; see :func:`decode_snapshot`."""
    return decode_snapshot(Path(path).read_bytes(), domain)


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, columns, rows) -> Path:
    """Write a header row and data rows; floats use the shortest round-trip form."""
    p = Path(path)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns))
        for r in rows:
            if len(r) != len(columns):
                raise ValueError(f"row has {len(r)} values for {len(columns)} columns")
            w.writerow([_fmt(v) for v in r])
    return p


def read_csv(path: str | Path) -> tuple[list, list]:
    """Return the header and the rows as strings."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV file", 0)
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# Trajectory directories


def snapshot_files(directory: str | Path) -> list[tuple[int, Path]]:
    """``(step, path)`` for every snapshot file in ``directory``, sorted by step."""
    out = []
    for p in Path(directory).iterdir():
        mt = _SNAPSHOT_RE.match(p.name)
        if mt:
            out.append((int(mt.group(1)), p))
    return sorted(out)


def read_snapshots(directory: str | Path) -> tuple[list[int], list[SymmetricMatrixField]]:
    """Read all snapshots of a run directory.

    Raises
    ------
    FileNotFoundError
        If the directory holds no snapshot.
    FormatError
        Naming the offending file when a snapshot is malformed or its lattice differs.
    """
    files = snapshot_files(directory)
    if not files:
        raise FileNotFoundError(f"no snapshot files in {directory}")
    steps, fields = [], []
    dom = None
    for step, p in files:
        try:
            f = read_snapshot(p, dom)
        except FormatError as exc:
            raise FormatError(f"{p.name}: {exc.message}", exc.offset) from exc
        dom = f.domain
        steps.append(step)
        fields.append(f)
    return steps, fields


__all__ = [
    "HEADER_SIZE",
    "MAGIC",
    "SNAPSHOT_PATTERN",
    "SnapshotHeader",
    "VERSION",
    "decode_header",
    "decode_snapshot",
    "encode_snapshot",
    "read_csv",
    "read_snapshot",
    "read_snapshots",
    "snapshot_files",
    "write_csv",
    "write_snapshot",
]
