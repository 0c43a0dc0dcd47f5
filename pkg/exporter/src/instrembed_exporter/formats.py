"""IEBV container I/O and structural verification.

This package deliberately carries its own writer/reader: the binary layout
is the cross-language contract between the exporter and the core toolkit,
so nothing here imports the core package.

Layout (little-endian): magic "IEBV" | u32 version=1 | u32 count | u32 dim |
count x dim float32 row-major | count x (u32 length + UTF-8 id bytes).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"IEBV"
FORMAT_VERSION = 1

NORM_WARN = 1e-3
NORM_INFO = 1e-6


class FormatError(ValueError):
    def __init__(self, path, offset, message):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path} at byte {offset}: {message}")


def write_vectors(ids, rows: np.ndarray, path) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    ids = list(ids)
    if rows.ndim != 2 or rows.shape[0] != len(ids):
        raise ValueError("rows must be (len(ids), dim)")
    parts = [MAGIC, struct.pack("<III", FORMAT_VERSION, len(ids), rows.shape[1])]
    parts.append(rows.tobytes())
    for id_ in ids:
        raw = id_.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_vectors(path):
    """Strict structural read; returns (ids, float32 rows)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise FormatError(path, len(data), "truncated header (need 16 bytes)")
    if data[:4] != MAGIC:
        raise FormatError(path, 0, f"bad magic {data[:4]!r}")
    version, count, dim = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(path, 4, f"unsupported version {version}")
    off = 16
    need = count * dim * 4
    if len(data) - off < need:
        raise FormatError(path, len(data), f"truncated payload: need {need} bytes")
    rows = np.frombuffer(data, dtype="<f4", count=count * dim, offset=off)
    rows = rows.reshape(count, dim).copy()
    off += need
    ids = []
    for i in range(count):
        if len(data) - off < 4:
            raise FormatError(path, off, f"id-count mismatch: {i} of {count} ids")
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        if len(data) - off < ln:
            raise FormatError(path, off, f"truncated id entry {i}")
        ids.append(data[off : off + ln].decode("utf-8"))
        off += ln
    if off != len(data):
        raise FormatError(path, off, f"{len(data) - off} trailing bytes")
    return ids, rows


@dataclass
class FormatReport:
    path: str
    ok: bool
    count: int = 0
    dim: int = 0
    max_norm_drift: float = 0.0
    sha256: str = ""
    warnings: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"


def verify_format(path) -> FormatReport:
    """Re-read a vector file, checking magic, counts, and row norms.

    The digest is the SHA-256 of the file bytes, the same digest the core
    toolkit records in its run manifests.
    """
    ids, rows = read_vectors(path)  # structural errors propagate
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    report = FormatReport(
        path=str(path), ok=True, count=len(ids), dim=int(rows.shape[1]),
        sha256=h.hexdigest(),
    )
    if len(ids) != len(set(ids)):
        report.ok = False
        report.warnings.append("duplicate ids present")
    if len(ids):
        norms = np.linalg.norm(rows.astype(np.float64), axis=1)
        report.max_norm_drift = float(np.abs(norms - 1.0).max())
        if report.max_norm_drift > NORM_WARN:
            report.warnings.append(
                f"row norms drift up to {report.max_norm_drift:.3e} (> {NORM_WARN})"
            )
        elif report.max_norm_drift > NORM_INFO:
            report.warnings.append(
                f"row norms drift up to {report.max_norm_drift:.3e}; core reader "
                "will re-normalize"
            )
    return report
