"""Binary file formats for photon events and detector clicks.

Event file (.qdev), little-endian throughout:

    bytes 0-3   magic b"QDEV"
    bytes 4-5   format version (u16, currently 1)
    bytes 6-7   reserved (u16, 0)
    bytes 8-15  record count n (u64)
    bytes 16-19 header JSON length m (u32)
    m bytes     UTF-8 JSON: {"line_ids": [...], "duration": ns}
    n records   packed 17-byte records: t (f64 ns), line (u32, index into
                line_ids), pol (u8: 0=H 1=V 2=R 3=L 4=unpolarized),
                trajectory (u32)

Detection file (.qdet): same framing with magic b"QDET", JSON header
{"channel": id, "span": [t0, t1]} and 8-byte f64 timestamp records.

Timestamp text files (one float per line, '#' comments) are also accepted
where detection streams are read.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .detection import DetectionStream
from .trajectory import EVENT_DTYPE, EventStream

_EVENT_MAGIC = b"QDEV"
_DET_MAGIC = b"QDET"
_VERSION = 1


def _write_framed(path, magic, n_records, header: dict, payload: bytes):
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<HHQI", _VERSION, 0, n_records, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def _read_framed(path, magic):
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise ValueError(f"{path}: bad magic {got!r}, expected {magic!r}")
        version, _, n, hlen = struct.unpack("<HHQI", fh.read(16))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        header = json.loads(fh.read(hlen).decode())
        payload = fh.read()
    return n, header, payload


def write_events(stream: EventStream, path):
    header = {"line_ids": list(stream.line_ids), "duration": stream.duration}
    _write_framed(path, _EVENT_MAGIC, len(stream.records), header, stream.records.tobytes())


def read_events(path) -> EventStream:
    n, header, payload = _read_framed(path, _EVENT_MAGIC)
    records = np.frombuffer(payload, dtype=EVENT_DTYPE, count=n).copy()
    return EventStream(
        records=records,
        line_ids=tuple(header["line_ids"]),
        duration=float(header["duration"]),
    )


def write_detection(stream: DetectionStream, path):
    header = {"channel": stream.channel, "span": list(stream.span)}
    payload = np.asarray(stream.times, dtype="<f8").tobytes()
    _write_framed(path, _DET_MAGIC, len(stream.times), header, payload)


def read_detection(path) -> DetectionStream:
    n, header, payload = _read_framed(path, _DET_MAGIC)
    times = np.frombuffer(payload, dtype="<f8", count=n).copy()
    return DetectionStream(
        times=times, channel=header["channel"], span=tuple(header["span"])
    )


def read_timestamps(path) -> DetectionStream:
    """Read a detection stream from .qdet binary or plain-text timestamps."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == _DET_MAGIC:
        return read_detection(path)
    times = np.sort(np.loadtxt(path, dtype=float, comments="#", ndmin=1))
    span = (float(times[0]), float(times[-1])) if len(times) else (0.0, 0.0)
    return DetectionStream(times=times, channel=str(path), span=span)
