"""Reader and writer for a subset of the TDMS binary file format.

Supported: little-endian segments with contiguous (non-interleaved) raw
data, one-dimensional arrays of the standard scalar types, strings,
booleans and timestamps. Big-endian, interleaved and DAQmx raw data are
rejected with ``UnsupportedLayout``. ``*.tdms_index`` files are ignored.

Segment layout::

    lead-in (28 bytes)
        "TDSm" | ToC mask u32 | version u32 | next segment offset u64 | raw data offset u64
    metadata (when kTocMetaData)
        object count u32, then per object:
            path string | raw data index | property count u32 | properties
    raw data (when kTocRawData)
        one or more chunks; each chunk holds every active object's values
        in object order

All integers little-endian; strings are a u32 byte length followed by UTF-8.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Optional, Union

import numpy as np

from .errors import (BadLeadIn, DimensionNotOne, LossyWidening, MalformedPath,
                     MalformedSegment, NonNumericChannel, NotFound, TdmsError,
                     Truncated, UnsupportedDtype, UnsupportedLayout)

TAG = b"TDSm"
LEAD_IN_SIZE = 28
VERSION = 4713
KNOWN_VERSIONS = (4712, 4713)

kTocMetaData = 1 << 1
kTocNewObjList = 1 << 2
kTocRawData = 1 << 3
kTocInterleavedData = 1 << 5
kTocBigEndian = 1 << 6
kTocDAQmxRawData = 1 << 7

NO_RAW_DATA = 0xFFFFFFFF
SAME_AS_PREVIOUS = 0x00000000
DAQMX_INDEX_HEADERS = (0x00001269, 0x00001369, 0x69120000, 0x69130000)
INCOMPLETE_SEGMENT = 0xFFFFFFFFFFFFFFFF

TDMS_EPOCH = datetime(1904, 1, 1, tzinfo=timezone.utc)


class DataType(enum.IntEnum):
    VOID = 0x00
    I8 = 0x01
    I16 = 0x02
    I32 = 0x03
    I64 = 0x04
    U8 = 0x05
    U16 = 0x06
    U32 = 0x07
    U64 = 0x08
    F32 = 0x09
    F64 = 0x0A
    STRING = 0x20
    BOOLEAN = 0x21
    TIMESTAMP = 0x44


TIMESTAMP_DTYPE = np.dtype([("fraction", "<u8"), ("seconds", "<i8")])

NUMPY_DTYPES = {
    DataType.I8: np.dtype("<i1"),
    DataType.I16: np.dtype("<i2"),
    DataType.I32: np.dtype("<i4"),
    DataType.I64: np.dtype("<i8"),
    DataType.U8: np.dtype("<u1"),
    DataType.U16: np.dtype("<u2"),
    DataType.U32: np.dtype("<u4"),
    DataType.U64: np.dtype("<u8"),
    DataType.F32: np.dtype("<f4"),
    DataType.F64: np.dtype("<f8"),
    DataType.BOOLEAN: np.dtype("?"),
    DataType.TIMESTAMP: TIMESTAMP_DTYPE,
}
NUMERIC = frozenset({DataType.I8, DataType.I16, DataType.I32, DataType.I64,
                     DataType.U8, DataType.U16, DataType.U32, DataType.U64,
                     DataType.F32, DataType.F64})
_STRUCT = {
    DataType.I8: "<b", DataType.I16: "<h", DataType.I32: "<i", DataType.I64: "<q",
    DataType.U8: "<B", DataType.U16: "<H", DataType.U32: "<I", DataType.U64: "<Q",
    DataType.F32: "<f", DataType.F64: "<d",
}


class Timestamp(tuple):
    """TDMS timestamp: whole seconds since 1904-01-01 UTC plus 2**-64 fractions."""

    __slots__ = ()

    def __new__(cls, seconds: int, fraction: int = 0):
        return super().__new__(cls, (int(seconds), int(fraction)))

    @property
    def seconds(self) -> int:
        return self[0]

    @property
    def fraction(self) -> int:
        return self[1]

    def to_datetime(self) -> datetime:
        micros = (self.fraction * 1_000_000) >> 64
        return TDMS_EPOCH + timedelta(seconds=self.seconds, microseconds=micros)

    @classmethod
    def from_datetime(cls, dt: datetime) -> "Timestamp":
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        delta = dt - TDMS_EPOCH
        seconds = delta.days * 86400 + delta.seconds
        return cls(seconds, (delta.microseconds << 64) // 1_000_000)

    def __repr__(self):
        return f"Timestamp(seconds={self.seconds}, fraction={self.fraction})"


@dataclass(frozen=True)
class TdmsValue:
    dtype: DataType
    value: Any

    def __post_init__(self):
        if self.dtype not in _STRUCT and self.dtype not in (
                DataType.STRING, DataType.BOOLEAN, DataType.TIMESTAMP):
            raise UnsupportedDtype(f"unsupported property type {self.dtype!r}")

    def __eq__(self, other):
        if not isinstance(other, TdmsValue):
            return NotImplemented
        if other.dtype != self.dtype:
            return False
        if self.dtype in (DataType.F32, DataType.F64):
            fmt = _STRUCT[self.dtype]
            return struct.pack(fmt, self.value) == struct.pack(fmt, other.value)
        return self.value == other.value

    def __hash__(self):
        return hash((self.dtype, repr(self.value)))


def _samples_equal(dtype: DataType, a: np.ndarray, b: np.ndarray) -> bool:
    if len(a) != len(b):
        return False
    if dtype == DataType.STRING:
        return list(a) == list(b)
    return a.tobytes() == b.tobytes()


def _empty_samples(dtype: DataType) -> np.ndarray:
    if dtype in NUMPY_DTYPES:
        return np.empty(0, dtype=NUMPY_DTYPES[dtype])
    if dtype == DataType.STRING:
        return np.empty(0, dtype=object)
    return np.empty(0, dtype=np.float64)


@dataclass(eq=False)
class TdmsChannel:
    name: str
    dtype: DataType
    samples: np.ndarray = None
    properties: dict[str, TdmsValue] = field(default_factory=dict)

    def __post_init__(self):
        self.dtype = DataType(self.dtype)
        if self.samples is None:
            self.samples = _empty_samples(self.dtype)
        elif self.dtype == DataType.STRING:
            self.samples = np.asarray(list(self.samples), dtype=object)
        elif self.dtype in NUMPY_DTYPES:
            self.samples = np.asarray(self.samples, dtype=NUMPY_DTYPES[self.dtype])

    def __eq__(self, other):
        if not isinstance(other, TdmsChannel):
            return NotImplemented
        return (self.name == other.name and self.dtype == other.dtype
                and self.properties == other.properties
                and _samples_equal(self.dtype, self.samples, other.samples))

    def __len__(self):
        return len(self.samples)


@dataclass
class TdmsGroup:
    name: str
    channels: list[TdmsChannel] = field(default_factory=list)
    properties: dict[str, TdmsValue] = field(default_factory=dict)

    def channel(self, name: str) -> TdmsChannel:
        for ch in self.channels:
            if ch.name == name:
                return ch
        raise NotFound(f"channel {name!r} not in group {self.name!r}")


@dataclass
class TdmsFile:
    properties: dict[str, TdmsValue] = field(default_factory=dict)
    groups: list[TdmsGroup] = field(default_factory=list)

    def group(self, name: str) -> TdmsGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise NotFound(f"group {name!r} not found")


# ---------------------------------------------------------------- paths

def encode_path(*components: str) -> str:
    if not components:
        return "/"
    return "".join("/'" + c.replace("'", "''") + "'" for c in components)


def decode_path(path: str) -> tuple[str, ...]:
    """Split an object path into its (0, 1 or 2) name components."""
    if path == "/":
        return ()
    if not path:
        raise MalformedPath("empty object path")
    parts = []
    i, n = 0, len(path)
    while i < n:
        if path[i] != "/" or i + 1 >= n or path[i + 1] != "'":
            raise MalformedPath(f"bad object path {path!r}")
        i += 2
        name = []
        while True:
            if i >= n:
                raise MalformedPath(f"unterminated name in {path!r}")
            c = path[i]
            if c == "'":
                if i + 1 < n and path[i + 1] == "'":
                    name.append("'")
                    i += 2
                    continue
                i += 1
                break
            name.append(c)
            i += 1
        parts.append("".join(name))
    if len(parts) > 2:
        raise MalformedPath(f"path deeper than group/channel: {path!r}")
    return tuple(parts)


# ---------------------------------------------------------------- reading

class _Reader:
    def __init__(self, data: memoryview, pos: int, end: int):
        self.data = data
        self.pos = pos
        self.end = end

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > self.end:
            raise Truncated(f"need {n} bytes at offset {self.pos}, segment ends at {self.end}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def u32(self) -> int:
        return self.unpack("<I")[0]

    def u64(self) -> int:
        return self.unpack("<Q")[0]

    def string(self) -> str:
        length = self.u32()
        raw = self.take(length)
        try:
            return bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedSegment(f"invalid UTF-8 string at offset {self.pos - length}") from exc


def _dtype(code: int) -> DataType:
    try:
        return DataType(code)
    except ValueError:
        raise UnsupportedDtype(f"unsupported data type id 0x{code:X}") from None


def _read_value(r: _Reader, dtype: DataType) -> TdmsValue:
    if dtype == DataType.STRING:
        return TdmsValue(dtype, r.string())
    if dtype == DataType.BOOLEAN:
        return TdmsValue(dtype, r.take(1)[0] != 0)
    if dtype == DataType.TIMESTAMP:
        fraction, seconds = r.unpack("<Qq")
        return TdmsValue(dtype, Timestamp(seconds, fraction))
    if dtype in _STRUCT:
        return TdmsValue(dtype, r.unpack(_STRUCT[dtype])[0])
    raise UnsupportedDtype(f"unsupported property type {dtype!r}")


@dataclass
class _RawIndex:
    dtype: DataType
    count: int
    nbytes: int  # bytes per chunk for this object


@dataclass(eq=False)
class _Object:
    path: str
    components: tuple[str, ...]
    properties: dict[str, TdmsValue] = field(default_factory=dict)
    index: Optional[_RawIndex] = None       # index in effect for the current segment
    last_index: Optional[_RawIndex] = None  # most recent index actually declared
    dtype: Optional[DataType] = None
    pieces: list = field(default_factory=list)


def _read_raw_index(r: _Reader, obj: _Object) -> Optional[_RawIndex]:
    start = r.pos
    header = r.u32()
    if header == NO_RAW_DATA:
        return None
    if header == SAME_AS_PREVIOUS:
        if obj.last_index is None:
            raise MalformedSegment(f"{obj.path}: 'same as previous' index with no previous index")
        return obj.last_index
    if header in DAQMX_INDEX_HEADERS:
        raise UnsupportedLayout(f"{obj.path}: DAQmx raw data index")
    dtype = _dtype(r.u32())
    dimension = r.u32()
    if dimension != 1:
        raise DimensionNotOne(f"{obj.path}: array dimension {dimension}")
    count = r.u64()
    if dtype == DataType.STRING:
        nbytes = r.u64()
    elif dtype in NUMPY_DTYPES:
        nbytes = count * NUMPY_DTYPES[dtype].itemsize
    else:
        raise UnsupportedDtype(f"{obj.path}: cannot read raw data of type {dtype!r}")
    # the declared length counts the length field itself
    if r.pos - start != header:
        raise MalformedSegment(
            f"{obj.path}: raw data index length {header}, read {r.pos - start} bytes")
    if obj.dtype is not None and obj.dtype != dtype and obj.pieces:
        raise MalformedSegment(f"{obj.path}: data type changed from {obj.dtype!r} to {dtype!r}")
    return _RawIndex(dtype, count, nbytes)


def _decode_chunk(r: _Reader, obj: _Object, idx: _RawIndex) -> np.ndarray:
    raw = r.take(idx.nbytes)
    if idx.dtype == DataType.STRING:
        offsets_size = 4 * idx.count
        if offsets_size > len(raw):
            raise Truncated(f"{obj.path}: string offsets exceed raw data size")
        ends = np.frombuffer(raw[:offsets_size], dtype="<u4").astype(np.int64)
        text = bytes(raw[offsets_size:])
        out = np.empty(idx.count, dtype=object)
        prev = 0
        for k, end in enumerate(ends):
            if end < prev or end > len(text):
                raise MalformedSegment(f"{obj.path}: bad string offset {end}")
            try:
                out[k] = text[prev:end].decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedSegment(f"{obj.path}: invalid UTF-8 in string data") from exc
            prev = end
        return out
    if idx.dtype == DataType.BOOLEAN:
        return np.frombuffer(raw, dtype=np.uint8) != 0
    return np.frombuffer(raw, dtype=NUMPY_DTYPES[idx.dtype]).copy()


def parse(data: Union[bytes, bytearray, memoryview]) -> TdmsFile:
    """Decode a complete TDMS byte string into the file/group/channel model."""
    buf = memoryview(bytes(data))
    total = len(buf)
    objects: dict[str, _Object] = {}
    order: list[str] = []
    active: list[_Object] = []
    pos = 0
    while pos < total:
        if total - pos < LEAD_IN_SIZE:
            raise Truncated(f"{total - pos} trailing bytes at {pos}, too short for a lead-in")
        tag, toc, version, next_off, raw_off = struct.unpack_from("<4sIIQQ", buf, pos)
        if tag != TAG:
            raise BadLeadIn(f"segment tag {tag!r} at offset {pos}")
        if toc & kTocBigEndian:
            raise UnsupportedLayout("big-endian segments are not supported")
        if toc & kTocInterleavedData:
            raise UnsupportedLayout("interleaved raw data is not supported")
        if toc & kTocDAQmxRawData:
            raise UnsupportedLayout("DAQmx raw data is not supported")
        if version not in KNOWN_VERSIONS:
            raise UnsupportedLayout(f"unknown TDMS version {version}")
        body = pos + LEAD_IN_SIZE
        if next_off == INCOMPLETE_SEGMENT:
            next_off = total - body
        seg_end = body + next_off
        if seg_end > total:
            raise Truncated(f"segment at {pos} declares {next_off} bytes, {total - body} available")
        if raw_off > next_off:
            raise Truncated(f"raw data offset {raw_off} beyond segment length {next_off}")
        raw_start = body + raw_off

        if toc & kTocMetaData:
            r = _Reader(buf, body, raw_start)
            n_objects = r.u32()
            if toc & kTocNewObjList:
                active = []
            for _ in range(n_objects):
                path = r.string()
                obj = objects.get(path)
                if obj is None:
                    obj = _Object(path, decode_path(path))
                    objects[path] = obj
                    order.append(path)
                obj.index = _read_raw_index(r, obj)
                if obj.index is not None:
                    if len(obj.components) != 2:
                        raise MalformedSegment(f"{path}: raw data on a non-channel object")
                    obj.dtype = obj.index.dtype
                    obj.last_index = obj.index
                for _ in range(r.u32()):
                    name = r.string()
                    obj.properties[name] = _read_value(r, _dtype(r.u32()))
                if all(a is not obj for a in active):
                    active.append(obj)
        elif toc & kTocNewObjList:
            active = []

        if toc & kTocRawData:
            with_data = [o for o in active if o.index is not None]
            chunk_size = sum(o.index.nbytes for o in with_data)
            raw_size = seg_end - raw_start
            if chunk_size > 0 and raw_size > 0:
                if raw_size % chunk_size:
                    raise MalformedSegment(
                        f"segment at {pos}: raw size {raw_size} is not a multiple of "
                        f"chunk size {chunk_size}")
                r = _Reader(buf, raw_start, seg_end)
                for _ in range(raw_size // chunk_size):
                    for o in with_data:
                        o.pieces.append(_decode_chunk(r, o, o.index))
        pos = seg_end

    return _build_model(objects, order)


def _build_model(objects: dict[str, _Object], order: list[str]) -> TdmsFile:
    model = TdmsFile()
    groups: dict[str, TdmsGroup] = {}

    def group(name: str) -> TdmsGroup:
        if name not in groups:
            groups[name] = TdmsGroup(name)
            model.groups.append(groups[name])
        return groups[name]

    for path in order:
        obj = objects[path]
        comps = obj.components
        if not comps:
            model.properties.update(obj.properties)
        elif len(comps) == 1:
            group(comps[0]).properties.update(obj.properties)
        else:
            dtype = obj.dtype if obj.dtype is not None else DataType.VOID
            if obj.pieces:
                samples = np.concatenate(obj.pieces) if len(obj.pieces) > 1 else obj.pieces[0]
            else:
                samples = None
            group(comps[0]).channels.append(
                TdmsChannel(comps[1], dtype, samples, dict(obj.properties)))
    return model


def read(path) -> TdmsFile:
    with open(path, "rb") as f:
        return parse(f.read())


# ---------------------------------------------------------------- writing

def _pack_string(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def _pack_value(v: TdmsValue) -> bytes:
    if v.dtype == DataType.STRING:
        return _pack_string(v.value)
    if v.dtype == DataType.BOOLEAN:
        return b"\x01" if v.value else b"\x00"
    if v.dtype == DataType.TIMESTAMP:
        ts = v.value if isinstance(v.value, Timestamp) else Timestamp.from_datetime(v.value)
        return struct.pack("<Qq", ts.fraction, ts.seconds)
    try:
        return struct.pack(_STRUCT[v.dtype], v.value)
    except KeyError:
        raise UnsupportedDtype(f"unsupported property type {v.dtype!r}") from None
    except struct.error as exc:
        raise UnsupportedDtype(f"value {v.value!r} does not fit {v.dtype.name}") from exc


def _pack_properties(props: dict[str, TdmsValue]) -> bytes:
    out = [struct.pack("<I", len(props))]
    for name, v in props.items():
        if not name:
            raise TdmsError("property names must be non-empty")
        out.append(_pack_string(name))
        out.append(struct.pack("<I", int(v.dtype)))
        out.append(_pack_value(v))
    return b"".join(out)


def _encode_samples(ch: TdmsChannel, samples) -> tuple[bytes, int, int]:
    """Raw bytes, value count, and (for strings) total byte size."""
    count = len(samples)
    if ch.dtype == DataType.STRING:
        encoded = [str(s).encode("utf-8") for s in samples]
        ends = np.cumsum([len(e) for e in encoded], dtype=np.int64)
        if count and ends[-1] > 0xFFFFFFFF:
            raise TdmsError(f"string channel {ch.name!r} too large")
        raw = ends.astype("<u4").tobytes() + b"".join(encoded)
        return raw, count, len(raw)
    if ch.dtype == DataType.BOOLEAN:
        raw = np.asarray(samples, dtype=bool).astype(np.uint8).tobytes()
        return raw, count, len(raw)
    if ch.dtype in NUMPY_DTYPES:
        raw = np.ascontiguousarray(samples, dtype=NUMPY_DTYPES[ch.dtype]).tobytes()
        return raw, count, len(raw)
    raise UnsupportedDtype(f"channel {ch.name!r}: unsupported data type {ch.dtype!r}")


def _raw_index(ch: TdmsChannel, count: int, nbytes: int) -> bytes:
    if ch.dtype == DataType.STRING:
        return struct.pack("<IIIQQ", 28, int(ch.dtype), 1, count, nbytes)
    return struct.pack("<IIIQ", 20, int(ch.dtype), 1, count)


def _segment(toc: int, meta: bytes, raw: bytes) -> bytes:
    lead = struct.pack("<4sIIQQ", TAG, toc, VERSION, len(meta) + len(raw), len(meta))
    return lead + meta + raw


def _validate(model: TdmsFile) -> None:
    seen_groups = set()
    for g in model.groups:
        if g.name in seen_groups:
            raise TdmsError(f"duplicate group name {g.name!r}")
        seen_groups.add(g.name)
        seen = set()
        for ch in g.channels:
            if ch.name in seen:
                raise TdmsError(f"duplicate channel {ch.name!r} in group {g.name!r}")
            seen.add(ch.name)
            if ch.dtype == DataType.VOID:
                if len(ch.samples):
                    raise UnsupportedDtype(f"channel {ch.name!r}: samples without a data type")
            elif ch.dtype not in NUMPY_DTYPES and ch.dtype != DataType.STRING:
                raise UnsupportedDtype(f"channel {ch.name!r}: unsupported data type {ch.dtype!r}")


def write(model: TdmsFile, segment_size: Optional[int] = None) -> bytes:
    """Encode ``model`` as little-endian, non-interleaved TDMS.

    With ``segment_size`` set, channel data is split into segments of at
    most that many values per channel; later segments reuse the previous
    object list and raw data indices where possible.
    """
    _validate(model)
    channels = [(g, ch) for g in model.groups for ch in g.channels]
    n_segments = 1
    if segment_size is not None:
        if segment_size < 1:
            raise ValueError("segment_size must be >= 1")
        longest = max((len(ch.samples) for _, ch in channels), default=0)
        n_segments = max(1, -(-longest // segment_size))

    def piece(ch: TdmsChannel, k: int):
        if segment_size is None:
            return ch.samples
        return ch.samples[k * segment_size:(k + 1) * segment_size]

    # first segment: full metadata for every object
    meta_objs = [(encode_path(), b"\xff\xff\xff\xff" + _pack_properties(model.properties))]
    raw_parts = []
    prev_index: dict[str, bytes] = {}
    for g in model.groups:
        meta_objs.append((encode_path(g.name),
                          b"\xff\xff\xff\xff" + _pack_properties(g.properties)))
        for ch in g.channels:
            path = encode_path(g.name, ch.name)
            if ch.dtype == DataType.VOID:
                index = b"\xff\xff\xff\xff"
            else:
                raw, count, nbytes = _encode_samples(ch, piece(ch, 0))
                index = _raw_index(ch, count, nbytes)
                raw_parts.append(raw)
                prev_index[path] = index
            meta_objs.append((path, index + _pack_properties(ch.properties)))
    meta = struct.pack("<I", len(meta_objs)) + b"".join(
        _pack_string(p) + rest for p, rest in meta_objs)
    raw = b"".join(raw_parts)
    toc = kTocMetaData | kTocNewObjList | (kTocRawData if prev_index else 0)
    out = [_segment(toc, meta, raw)]
    active = list(prev_index)

    for k in range(1, n_segments):
        seg_objs, raw_parts, seg_active = [], [], []
        for g, ch in channels:
            if ch.dtype == DataType.VOID:
                continue
            part = piece(ch, k)
            if len(part) == 0:
                continue
            path = encode_path(g.name, ch.name)
            data, count, nbytes = _encode_samples(ch, part)
            index = _raw_index(ch, count, nbytes)
            seg_active.append(path)
            raw_parts.append(data)
            seg_objs.append((path, index))
        raw = b"".join(raw_parts)
        if seg_active == active and all(prev_index[p] == i for p, i in seg_objs):
            out.append(_segment(kTocRawData, b"", raw))
            continue
        entries = []
        for path, index in seg_objs:
            marker = struct.pack("<I", SAME_AS_PREVIOUS) if prev_index.get(path) == index else index
            entries.append(_pack_string(path) + marker + struct.pack("<I", 0))
            prev_index[path] = index
        meta = struct.pack("<I", len(entries)) + b"".join(entries)
        out.append(_segment(kTocMetaData | kTocNewObjList | kTocRawData, meta, raw))
        active = seg_active
    return b"".join(out)


# ---------------------------------------------------------------- queries

def channel_data(file: TdmsFile, group: str, channel: str) -> np.ndarray:
    """Samples of a numeric channel widened losslessly to float64."""
    ch = file.group(group).channel(channel)
    if ch.dtype not in NUMERIC:
        raise NonNumericChannel(f"{group}/{channel} has type {ch.dtype.name}")
    s = ch.samples
    if ch.dtype in (DataType.I64, DataType.U64) and len(s):
        limit = 1 << 53
        if ch.dtype == DataType.U64:
            too_big = bool(np.any(s > np.uint64(limit)))
        else:
            too_big = bool(np.any((s > limit) | (s < -limit)))
        if too_big:
            raise LossyWidening(f"{group}/{channel} holds integers beyond 2**53")
    return s.astype(np.float64)


def numeric_channels(file: TdmsFile) -> list[tuple[str, str]]:
    return [(g.name, ch.name) for g in file.groups for ch in g.channels
            if ch.dtype in NUMERIC]


def hierarchy(file: TdmsFile) -> list[str]:
    """One line for the file, then one per group and one per channel, in file order."""
    def names(props):
        return ",".join(props) if props else "-"

    lines = [f"file groups={len(file.groups)} properties={names(file.properties)}"]
    for g in file.groups:
        lines.append(f"group {g.name!r} channels={len(g.channels)} properties={names(g.properties)}")
        for ch in g.channels:
            lines.append(f"  channel {g.name!r}/{ch.name!r} dtype={ch.dtype.name} "
                         f"samples={len(ch.samples)} properties={names(ch.properties)}")
    return lines
