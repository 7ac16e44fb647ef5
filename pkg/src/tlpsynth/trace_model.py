"""TLP record and trace types plus the CSV trace format.

A trace document looks like::

    # optional comment
    timestamp,dir,bytes
    10,0,4
    20,1,1500

The two-column ``dir,bytes`` header is also accepted when no timestamps are
known. Direction 0 is host to device (TX), 1 is device to host (RX).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import TraceFormatError

TX = 0
RX = 1
MIN_BYTES = 1
MAX_BYTES = 65535
DEFAULT_WIDTH = 512

HEADER_TIMED = "timestamp,dir,bytes"
HEADER_UNTIMED = "dir,bytes"

_UINT = re.compile(r"[0-9]+\Z")
_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class TlpRecord:
    """One TLP transaction: payload size, direction, optional timestamp (ns)."""

    bytes: int
    dir: int
    timestamp: Optional[int] = None

    def __post_init__(self):
        _check_record(self.bytes, self.dir, self.timestamp)


def _check_record(nbytes, direction, timestamp, line=None):
    if not MIN_BYTES <= nbytes <= MAX_BYTES:
        raise TraceFormatError(
            f"bytes must be in {MIN_BYTES}..{MAX_BYTES}, got {nbytes}", line)
    if direction not in (TX, RX):
        raise TraceFormatError(f"dir must be 0 or 1, got {direction}", line)
    if timestamp is not None and not 0 <= timestamp <= _INT64_MAX:
        raise TraceFormatError(f"timestamp out of range: {timestamp}", line)


@dataclass(frozen=True, eq=False)
class Trace:
    """Ordered TLP records stored column-wise.

    ``sizes`` and ``dirs`` are parallel integer arrays; ``timestamps`` is
    either None or a non-decreasing array of the same length. Position in the
    arrays is the logical timestamp. ``source_id`` is provenance only and does
    not take part in equality.
    """

    sizes: np.ndarray
    dirs: np.ndarray
    timestamps: Optional[np.ndarray] = None
    source_id: str = field(default="")

    def __post_init__(self):
        # private copies: freezing must not touch the caller's arrays
        sizes = np.array(self.sizes, dtype=np.int64).reshape(-1)
        dirs = np.array(self.dirs, dtype=np.int64).reshape(-1)
        if sizes.shape != dirs.shape:
            raise TraceFormatError("sizes and dirs differ in length")
        if sizes.size:
            if sizes.min() < MIN_BYTES or sizes.max() > MAX_BYTES:
                raise TraceFormatError(
                    f"bytes must be in {MIN_BYTES}..{MAX_BYTES}")
            if dirs.min() < TX or dirs.max() > RX:
                raise TraceFormatError("dir must be 0 or 1")
        ts = self.timestamps
        if ts is not None:
            ts = np.array(ts, dtype=np.int64).reshape(-1)
            if ts.shape != sizes.shape:
                raise TraceFormatError("timestamps differ in length from records")
            if ts.size and (ts.min() < 0 or np.any(np.diff(ts) < 0)):
                raise TraceFormatError("timestamps must be non-negative and non-decreasing")
            ts.setflags(write=False)
        sizes.setflags(write=False)
        dirs.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "dirs", dirs)
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def from_records(cls, records: Iterable[TlpRecord], source_id: str = "") -> "Trace":
        records = list(records)
        stamps = [r.timestamp for r in records]
        if all(t is None for t in stamps):
            ts = None
        elif any(t is None for t in stamps):
            raise TraceFormatError("timestamps must be given for all records or none")
        else:
            ts = np.array(stamps, dtype=np.int64)
        return cls(
            np.array([r.bytes for r in records], dtype=np.int64),
            np.array([r.dir for r in records], dtype=np.int64),
            ts,
            source_id,
        )

    @classmethod
    def _adopt(cls, sizes: np.ndarray, dirs: np.ndarray, source_id: str = "") -> "Trace":
        """Wrap fresh int64 arrays already known to be valid, skipping copies and checks."""
        sizes.setflags(write=False)
        dirs.setflags(write=False)
        t = object.__new__(cls)
        for name, value in (("sizes", sizes), ("dirs", dirs), ("timestamps", None),
                            ("source_id", source_id)):
            object.__setattr__(t, name, value)
        return t

    @classmethod
    def empty(cls, source_id: str = "") -> "Trace":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), None, source_id)

    @property
    def has_timestamps(self) -> bool:
        return self.timestamps is not None

    @property
    def records(self) -> list:
        return list(self)

    def without_timestamps(self) -> "Trace":
        return Trace(self.sizes, self.dirs, None, self.source_id)

    def __len__(self):
        return int(self.sizes.size)

    def __iter__(self) -> Iterator[TlpRecord]:
        ts = self.timestamps
        for k in range(len(self)):
            yield TlpRecord(int(self.sizes[k]), int(self.dirs[k]),
                            None if ts is None else int(ts[k]))

    def __getitem__(self, k) -> TlpRecord:
        ts = self.timestamps
        return TlpRecord(int(self.sizes[k]), int(self.dirs[k]),
                         None if ts is None else int(ts[k]))

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        if (self.timestamps is None) != (other.timestamps is None):
            return False
        same = (np.array_equal(self.sizes, other.sizes)
                and np.array_equal(self.dirs, other.dirs))
        if same and self.timestamps is not None:
            same = np.array_equal(self.timestamps, other.timestamps)
        return bool(same)

    def __repr__(self):
        return (f"Trace(len={len(self)}, timestamps={self.has_timestamps}, "
                f"source_id={self.source_id!r})")


def _parse_uint(token, line, name):
    if not _UINT.match(token):
        raise TraceFormatError(f"{name} is not a decimal unsigned integer: {token!r}", line)
    return int(token)


def parse_trace_text(text: str, width: Optional[int] = DEFAULT_WIDTH,
                     source_id: str = "") -> Trace:
    """Parse a CSV trace document.

    Rows are validated against the record invariants and never repaired.
    Timestamped traces are stably sorted by timestamp. ``width`` bounds the
    trace length to ``width**2``; pass None to disable the bound.
    """
    header = None
    sizes, dirs, stamps = [], [], []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line or line.startswith("#"):
            continue
        if header is None:
            if line not in (HEADER_TIMED, HEADER_UNTIMED):
                raise TraceFormatError(f"unrecognised header {line!r}", lineno)
            header = line
            continue
        cols = line.split(",")
        if header == HEADER_TIMED:
            if len(cols) != 3:
                raise TraceFormatError(f"expected 3 fields, got {len(cols)}", lineno)
            ts = _parse_uint(cols[0], lineno, "timestamp")
            cols = cols[1:]
        else:
            if len(cols) != 2:
                raise TraceFormatError(f"expected 2 fields, got {len(cols)}", lineno)
            ts = None
        direction = _parse_uint(cols[0], lineno, "dir")
        nbytes = _parse_uint(cols[1], lineno, "bytes")
        _check_record(nbytes, direction, ts, lineno)
        sizes.append(nbytes)
        dirs.append(direction)
        stamps.append(ts)

    if header is None:
        raise TraceFormatError("missing header")
    if width is not None and len(sizes) > width * width:
        raise TraceFormatError(
            f"trace of {len(sizes)} records exceeds {width}x{width} image capacity")

    sizes_a = np.array(sizes, dtype=np.int64)
    dirs_a = np.array(dirs, dtype=np.int64)
    if header == HEADER_TIMED:
        ts_a = np.array(stamps, dtype=np.int64)
        order = np.argsort(ts_a, kind="stable")
        return Trace(sizes_a[order], dirs_a[order], ts_a[order], source_id)
    return Trace(sizes_a, dirs_a, None, source_id)


def write_trace_text(trace: Trace) -> str:
    """Serialise a trace to the CSV format; inverse of :func:`parse_trace_text`."""
    if trace.has_timestamps:
        rows = [HEADER_TIMED]
        rows.extend(f"{t},{d},{b}" for t, d, b in
                    zip(trace.timestamps.tolist(), trace.dirs.tolist(), trace.sizes.tolist()))
    else:
        rows = [HEADER_UNTIMED]
        rows.extend(f"{d},{b}" for d, b in zip(trace.dirs.tolist(), trace.sizes.tolist()))
    return "\n".join(rows) + "\n"


def read_trace(path, width: Optional[int] = DEFAULT_WIDTH) -> Trace:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_trace_text(text, width=width, source_id=str(path))


def write_trace(path, trace: Trace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_trace_text(trace))


def concat(traces: Sequence[Trace]) -> Trace:
    """Join untimed record sequences end to end."""
    if not traces:
        return Trace.empty()
    return Trace(np.concatenate([t.sizes for t in traces]),
                 np.concatenate([t.dirs for t in traces]))
