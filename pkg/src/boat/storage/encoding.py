"""Byte-level primitives and the per-block columnar record codec.

All integers are unsigned LEB128 varints; signed quantities are zig-zag
mapped first. Numeric fields are stored as fixed-point integers at
``10**precision`` scale, delta-encoded in record order. See docs/format.md.
"""
from __future__ import annotations

import struct
import zlib
from typing import Optional

from boat.domain import SECONDS_PER_DAY, SpeedRecord, WeatherRecord

CODEC_IDENTITY = 0
CODEC_DEFLATE = 1
CODECS = {CODEC_IDENTITY: "identity", CODEC_DEFLATE: "deflate"}

# Column tags inside a block payload.
TAG_TIME = 1
WEATHER_COLUMNS = (  # (tag, field, kind)
    (2, "tmpc", "num"), (3, "wawa", "str"), (4, "ptype", "str"), (5, "dwpc", "num"),
    (6, "smps", "num"), (7, "drct", "num"), (8, "vsby", "num"), (9, "roadtmpc", "num"),
    (10, "srad", "num"), (11, "snwd", "num"), (12, "pcpn", "num"),
)
SPEED_COLUMNS = (
    (2, "detectorcode", "str"), (3, "vtype", "str"), (4, "speed", "num"),
    (5, "reference", "num"), (6, "roadname", "str"),
)

_DENSE = 0
_SPARSE = 1


class DecodeError(ValueError):
    pass


def write_varint(out: bytearray, value: int) -> None:
    if value < 0:
        raise ValueError(f"varint cannot encode negative value {value}")
    while value >= 0x80:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)


def read_varint(buf, pos: int) -> tuple[int, int]:
    result = shift = 0
    n = len(buf)
    while True:
        if pos >= n:
            raise DecodeError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if b < 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise DecodeError("varint longer than 10 bytes")


def zigzag(n: int) -> int:
    return (n << 1) if n >= 0 else ((-n << 1) - 1)


def unzigzag(z: int) -> int:
    return (z >> 1) if not z & 1 else -((z + 1) >> 1)


def read_varints(buf, pos: int, count: int) -> tuple[list[int], int]:
    out = []
    append = out.append
    n = len(buf)
    for _ in range(count):
        result = shift = 0
        while True:
            if pos >= n:
                raise DecodeError("truncated varint stream")
            b = buf[pos]
            pos += 1
            if b < 0x80:
                result |= b << shift
                break
            result |= (b & 0x7F) << shift
            shift += 7
        append(result)
    return out, pos


def write_bytes(out: bytearray, data: bytes) -> None:
    write_varint(out, len(data))
    out += data


def write_str(out: bytearray, text: str) -> None:
    write_bytes(out, text.encode("utf-8"))


def read_str(buf, pos: int) -> tuple[str, int]:
    n, pos = read_varint(buf, pos)
    if pos + n > len(buf):
        raise DecodeError("truncated string")
    return bytes(buf[pos:pos + n]).decode("utf-8"), pos + n


def write_f64(out: bytearray, x: float) -> None:
    out += struct.pack("<d", x)


def read_f64(buf, pos: int) -> tuple[float, int]:
    if pos + 8 > len(buf):
        raise DecodeError("truncated float")
    return struct.unpack_from("<d", buf, pos)[0], pos + 8


# -- columns -------------------------------------------------------------

def to_fixed(x: float, scale: int) -> int:
    return round(x * scale)


def _encode_numeric(values: list, scale: int) -> bytes:
    out = bytearray()
    present = [v is not None for v in values]
    if all(present):
        out.append(_DENSE)
    else:
        out.append(_SPARSE)
        bitmap = bytearray((len(values) + 7) // 8)
        for i, p in enumerate(present):
            if p:
                bitmap[i >> 3] |= 1 << (i & 7)
        out += bitmap
    prev = 0
    for v in values:
        if v is None:
            continue
        q = to_fixed(v, scale)
        write_varint(out, zigzag(q - prev))
        prev = q
    return bytes(out)


def _decode_numeric(buf, count: int, scale: int) -> list:
    if not buf:
        raise DecodeError("empty numeric column")
    mode = buf[0]
    pos = 1
    if mode == _DENSE:
        mask = None
        n_present = count
    elif mode == _SPARSE:
        nbytes = (count + 7) // 8
        mask = buf[pos:pos + nbytes]
        if len(mask) != nbytes:
            raise DecodeError("truncated presence bitmap")
        pos += nbytes
        n_present = sum(bin(b).count("1") for b in mask)
    else:
        raise DecodeError(f"unknown numeric column mode {mode}")
    deltas, pos = read_varints(buf, pos, n_present)
    if pos != len(buf):
        raise DecodeError("trailing bytes in numeric column")
    vals = []
    acc = 0
    for z in deltas:
        acc += (z >> 1) if not z & 1 else -((z + 1) >> 1)
        vals.append(acc / scale)
    if mask is None:
        return vals
    out = [None] * count
    it = iter(vals)
    for i in range(count):
        if mask[i >> 3] >> (i & 7) & 1:
            out[i] = next(it)
    return out


def _encode_strings(values: list) -> bytes:
    out = bytearray()
    ids: dict[str, int] = {}
    order = []
    for v in values:
        if v not in ids:
            ids[v] = len(order)
            order.append(v)
    write_varint(out, len(order))
    for v in order:
        write_str(out, v)
    for v in values:
        write_varint(out, ids[v])
    return bytes(out)


def _decode_strings(buf, count: int) -> list:
    size, pos = read_varint(buf, 0)
    words = []
    for _ in range(size):
        w, pos = read_str(buf, pos)
        words.append(w)
    ids, pos = read_varints(buf, pos, count)
    if pos != len(buf):
        raise DecodeError("trailing bytes in string column")
    try:
        return [words[i] for i in ids]
    except IndexError:
        raise DecodeError("string id outside dictionary") from None


def _encode_times(times: list, day: int) -> bytes:
    out = bytearray()
    prev = day * SECONDS_PER_DAY
    for t in times:
        d = t - prev
        if d < 0:
            raise ValueError("timestamps must be non-decreasing and inside the block's day")
        write_varint(out, d)
        prev = t
    return bytes(out)


def _decode_times(buf, count: int, day: int) -> list:
    deltas, pos = read_varints(buf, 0, count)
    if pos != len(buf):
        raise DecodeError("trailing bytes in time column")
    out = []
    acc = day * SECONDS_PER_DAY
    for d in deltas:
        acc += d
        out.append(acc)
    return out


def _columns(kind: str):
    return WEATHER_COLUMNS if kind == "weather" else SPEED_COLUMNS


def encode_block(kind: str, day: int, records: list, precision: int = 2) -> bytes:
    """Encode time-sorted records of one (grid, day) into a raw payload."""
    scale = 10 ** precision
    out = bytearray()
    write_varint(out, len(records))
    sections = [(TAG_TIME, _encode_times([r.time for r in records], day))]
    for tag, name, ckind in _columns(kind):
        values = [getattr(r, name) for r in records]
        if ckind == "num":
            sections.append((tag, _encode_numeric(values, scale)))
        else:
            sections.append((tag, _encode_strings(values)))
    for tag, body in sections:
        write_varint(out, tag)
        write_bytes(out, body)
    return bytes(out)


def decode_block(kind: str, day: int, payload, precision: int = 2) -> list:
    scale = 10 ** precision
    count, pos = read_varint(payload, 0)
    sections = {}
    n = len(payload)
    while pos < n:
        tag, pos = read_varint(payload, pos)
        length, pos = read_varint(payload, pos)
        if pos + length > n:
            raise DecodeError(f"column tag {tag} overruns block")
        sections[tag] = payload[pos:pos + length]
        pos += length
    if TAG_TIME not in sections:
        raise DecodeError("block lacks a time column")
    cols = [_decode_times(sections[TAG_TIME], count, day)]
    names = ["time"]
    for tag, name, ckind in _columns(kind):
        body = sections.get(tag)
        if body is None:
            raise DecodeError(f"block lacks column {name}")
        cols.append(_decode_numeric(body, count, scale) if ckind == "num"
                    else _decode_strings(body, count))
        names.append(name)
    cls = WeatherRecord if kind == "weather" else SpeedRecord
    order = cls._fields
    if tuple(names) != order:
        index = {nm: i for i, nm in enumerate(names)}
        cols = [cols[index[f]] for f in order]
    make = cls._make
    return [make(row) for row in zip(*cols)]


def compress(payload: bytes, codec: int) -> bytes:
    if codec == CODEC_IDENTITY:
        return payload
    if codec == CODEC_DEFLATE:
        return zlib.compress(payload, 9)
    raise ValueError(f"unknown codec {codec}")


def decompress(data: bytes, codec: int) -> bytes:
    if codec == CODEC_IDENTITY:
        return data
    if codec == CODEC_DEFLATE:
        try:
            return zlib.decompress(data)
        except zlib.error as exc:
            raise DecodeError(f"deflate stream corrupt: {exc}") from None
    raise DecodeError(f"unknown codec {codec}")


def quantize(x: Optional[float], precision: int = 2) -> Optional[float]:
    """The value a field takes after a storage round trip."""
    if x is None:
        return None
    scale = 10 ** precision
    return to_fixed(x, scale) / scale
