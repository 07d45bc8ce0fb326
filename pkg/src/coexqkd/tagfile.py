"""QTAG time-tag stream container and its binary file format.

Layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"QTAG"
    4       2     format version (u16, currently 1)
    6       2     channel count (u16)
    8       8     symbol period in ps (u64)
    16      9*N   records: timestamp ps (u64) + channel (u8)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, TruncatedTagFile, UnsortedTimestamps, UnsupportedVersion

MAGIC = b"QTAG"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
RECORD_DTYPE = np.dtype([("timestamp", "<u8"), ("channel", "u1")])

assert HEADER.size == 16 and RECORD_DTYPE.itemsize == 9


@dataclass(frozen=True, eq=False)
class TagStream:
    """Strictly time-ordered detection events.

    ``timestamps`` are picoseconds since run start (uint64) and
    ``channels`` the detector index (uint8, 0 is the quantum SPAD).
    """

    timestamps: np.ndarray
    channels: np.ndarray
    symbol_period_ps: int
    n_channels: int = 1

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps, dtype=np.uint64)
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        if ts.shape != ch.shape or ts.ndim != 1:
            raise ValueError("timestamps and channels must be 1-D arrays of equal length")
        ts.setflags(write=False)
        ch.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", ch)
        bad = first_regression(ts)
        if bad is not None:
            raise UnsortedTimestamps(bad, int(ts[bad - 1]), int(ts[bad]))

    def __len__(self):
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        return (self.symbol_period_ps == other.symbol_period_ps
                and self.n_channels == other.n_channels
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.channels, other.channels))

    @classmethod
    def empty(cls, symbol_period_ps: int, n_channels: int = 1) -> TagStream:
        return cls(np.empty(0, np.uint64), np.empty(0, np.uint8), symbol_period_ps, n_channels)

    def channel(self, ch: int) -> np.ndarray:
        return self.timestamps[self.channels == ch]


def first_regression(timestamps) -> int | None:
    """Index of the first record not strictly later than its predecessor."""
    if len(timestamps) < 2:
        return None
    bad = np.flatnonzero(timestamps[1:] <= timestamps[:-1])
    return int(bad[0]) + 1 if bad.size else None


def to_bytes(stream: TagStream) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, stream.n_channels, stream.symbol_period_ps)
    records = np.empty(len(stream), dtype=RECORD_DTYPE)
    records["timestamp"] = stream.timestamps
    records["channel"] = stream.channels
    return header + records.tobytes()


def from_bytes(data: bytes) -> TagStream:
    if len(data) < HEADER.size:
        raise TruncatedTagFile(
            f"file is {len(data)} bytes, shorter than the {HEADER.size}-byte header",
            offset=len(data))
    magic, version, n_channels, period = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported QTAG version {version}")
    body = len(data) - HEADER.size
    n, rest = divmod(body, RECORD_DTYPE.itemsize)
    if rest:
        offset = HEADER.size + n * RECORD_DTYPE.itemsize
        raise TruncatedTagFile(
            f"truncated record {n} at byte offset {offset} ({rest} of "
            f"{RECORD_DTYPE.itemsize} bytes present)", offset=offset)
    records = np.frombuffer(data, dtype=RECORD_DTYPE, count=n, offset=HEADER.size)
    ts = records["timestamp"].astype(np.uint64)
    bad = first_regression(ts)
    if bad is not None:
        raise UnsortedTimestamps(bad, int(ts[bad - 1]), int(ts[bad]))
    return TagStream(ts, records["channel"].astype(np.uint8), int(period), int(n_channels))


def write_tag_stream(stream: TagStream, path) -> None:
    Path(path).write_bytes(to_bytes(stream))


def read_tag_stream(path) -> TagStream:
    return from_bytes(Path(path).read_bytes())
