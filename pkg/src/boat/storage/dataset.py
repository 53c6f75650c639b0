"""Dataset files: ``manifest.btd`` plus one data file per record kind.

Each file opens with a 12-byte header::

    magic "BTD1" | u16 version | u8 file kind | u8 reserved | u32 crc32(body)

The manifest is verified in full at open time. Data files are only checked
for their header; each block carries its own CRC in the manifest index and is
verified when read, so opening never touches record bytes.
"""
from __future__ import annotations

import bisect
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from boat.domain import (SECONDS_PER_DAY, BlockLink, County, Grid, SpeedRecord,
                         WeatherRecord, validate_dataset)
from boat.storage import encoding as enc

MAGIC = b"BTD1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHBBI")
SCHEMA_VERSION = "boat-transport/1"
KINDS = ("weather", "speed")
FILE_KIND = {"manifest": 0, "weather": 1, "speed": 2}
FILE_NAME = {"manifest": "manifest.btd", "weather": "weather.btd", "speed": "speed.btd"}

# Manifest TLV tags.
T_INFO = 1
T_COUNTY = 2
T_GRID = 3
T_INDEX = 4
T_RAW_BYTES = 5
T_DATAFILE = 6


class StorageError(Exception):
    pass


class FormatError(StorageError):
    """Bad magic, unsupported version or a structurally corrupt manifest."""


class BlockReadError(StorageError):
    def __init__(self, kind: str, grid_id: int, day: int, reason: str):
        self.kind, self.grid_id, self.day = kind, grid_id, day
        super().__init__(f"{kind} block (grid {grid_id}, day {day}): {reason}")


@dataclass(frozen=True)
class IndexEntry:
    grid_id: int
    day: int
    offset: int
    length: int
    count: int
    codec: int
    crc: int


@dataclass
class KindStats:
    file_bytes: int
    blocks: int
    records: int
    raw_bytes: Optional[int] = None

    @property
    def ratio(self) -> Optional[float]:
        if not self.raw_bytes or not self.file_bytes:
            return None
        return self.raw_bytes / self.file_bytes


@dataclass
class DatasetStats:
    manifest_bytes: int
    kinds: dict
    county_count: int
    grid_count: int

    @property
    def total_bytes(self) -> int:
        return self.manifest_bytes + sum(k.file_bytes for k in self.kinds.values())

    @property
    def total_records(self) -> int:
        return sum(k.records for k in self.kinds.values())

    @property
    def raw_bytes(self) -> Optional[int]:
        raws = [k.raw_bytes for k in self.kinds.values()]
        if any(r is None for r in raws):
            return None
        return sum(raws)

    @property
    def ratio(self) -> Optional[float]:
        raw = self.raw_bytes
        return raw / self.total_bytes if raw else None


@dataclass
class IOCounters:
    blocks: dict = field(default_factory=lambda: {k: 0 for k in KINDS})
    bytes: dict = field(default_factory=lambda: {k: 0 for k in KINDS})

    def reset(self) -> None:
        for k in KINDS:
            self.blocks[k] = 0
            self.bytes[k] = 0


def _header(kind: str, body: bytes) -> bytes:
    return HEADER.pack(MAGIC, FORMAT_VERSION, FILE_KIND[kind], 0, zlib.crc32(body))


def _check_header(raw: bytes, kind: str, path: Path) -> int:
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: file too short for a header")
    magic, version, fkind, _, crc = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if fkind != FILE_KIND[kind]:
        raise FormatError(f"{path}: file kind {fkind} where {kind} was expected")
    return crc


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _group(kind: str, records: Iterable, known: set) -> dict:
    blocks: dict[tuple[int, int], list] = {}
    for grid_id, rec in records:
        if grid_id not in known:
            raise StorageError(f"{kind} record references unknown grid id {grid_id}")
        key = (grid_id, rec.time // SECONDS_PER_DAY)
        blocks.setdefault(key, []).append(rec)
    for recs in blocks.values():
        recs.sort(key=lambda r: r.time)
    return blocks


def _encode_data(kind: str, blocks: dict, precision: int, codec: int):
    body = bytearray()
    index = []
    for (grid_id, day) in sorted(blocks):
        payload = enc.compress(enc.encode_block(kind, day, blocks[(grid_id, day)], precision), codec)
        index.append(IndexEntry(grid_id, day, HEADER.size + len(body), len(payload),
                                len(blocks[(grid_id, day)]), codec, zlib.crc32(payload)))
        body += payload
    return bytes(body), index


def _encode_manifest(counties, indexes: dict, precision: int, raw_bytes: dict,
                     datafiles: dict) -> bytes:
    body = bytearray()

    def section(tag: int, payload: bytearray) -> None:
        enc.write_varint(body, tag)
        enc.write_bytes(body, bytes(payload))

    info = bytearray()
    enc.write_str(info, SCHEMA_VERSION)
    enc.write_varint(info, precision)
    section(T_INFO, info)
    for c in counties:
        p = bytearray()
        enc.write_str(p, c.code)
        enc.write_str(p, c.name)
        section(T_COUNTY, p)
        for g in c.grids:
            p = bytearray()
            enc.write_varint(p, g.id)
            enc.write_f64(p, g.latitude)
            enc.write_f64(p, g.longitude)
            enc.write_str(p, c.code)
            section(T_GRID, p)
    for kind in KINDS:
        p = bytearray()
        enc.write_varint(p, FILE_KIND[kind])
        size, crc = datafiles[kind]
        enc.write_varint(p, size)
        p += struct.pack("<I", crc)
        section(T_DATAFILE, p)
        p = bytearray()
        enc.write_varint(p, FILE_KIND[kind])
        entries = indexes[kind]
        enc.write_varint(p, len(entries))
        for e in entries:
            enc.write_varint(p, e.grid_id)
            enc.write_varint(p, enc.zigzag(e.day))
            enc.write_varint(p, e.offset)
            enc.write_varint(p, e.length)
            enc.write_varint(p, e.count)
            p.append(e.codec)
            p += struct.pack("<I", e.crc)
        section(T_INDEX, p)
        if raw_bytes.get(kind) is not None:
            p = bytearray()
            enc.write_varint(p, FILE_KIND[kind])
            enc.write_varint(p, raw_bytes[kind])
            section(T_RAW_BYTES, p)
    return bytes(body)


def write_dataset(path, counties: list[County], weather: Iterable = (), speed: Iterable = (), *,
                  precision: int = 2, codec: int = enc.CODEC_DEFLATE,
                  raw_bytes: Optional[dict] = None) -> Path:
    """Write a dataset directory.

    ``weather`` and ``speed`` are iterables of ``(grid_id, record)`` pairs in
    any order. Files are written to temporaries and renamed into place, the
    manifest last.
    """
    path = Path(path)
    counties = list(counties)
    problems = validate_dataset(counties)
    if problems:
        raise StorageError("invalid county table: " + "; ".join(map(str, problems)))
    known = {g.id for c in counties for g in c.grids}
    grouped = {"weather": _group("weather", weather, known), "speed": _group("speed", speed, known)}
    path.mkdir(parents=True, exist_ok=True)
    indexes, datafiles = {}, {}
    for kind in KINDS:
        body, index = _encode_data(kind, grouped[kind], precision, codec)
        data = _header(kind, body) + body
        _atomic_write(path / FILE_NAME[kind], data)
        indexes[kind] = index
        datafiles[kind] = (len(data), zlib.crc32(data))
    manifest = _encode_manifest(counties, indexes, precision, raw_bytes or {}, datafiles)
    _atomic_write(path / FILE_NAME["manifest"], _header("manifest", manifest) + manifest)
    return path


def extend_dataset(path, *, weather: Iterable = (), speed: Iterable = (),
                   raw_bytes: Optional[dict] = None, codec: int = enc.CODEC_DEFLATE) -> Path:
    """Fuse a new record kind into an existing dataset.

    Only kinds that currently hold no blocks may be added; files of the
    other kinds are left byte-for-byte untouched.
    """
    path = Path(path)
    ds = open_dataset(path)
    try:
        counties = [County(c.code, c.name, tuple(Grid(g.id, g.latitude, g.longitude) for g in c.grids))
                    for c in ds.counties]
        known = {g.id for c in counties for g in c.grids}
        incoming = {"weather": _group("weather", weather, known), "speed": _group("speed", speed, known)}
        indexes = dict(ds.index)
        datafiles = dict(ds.datafiles)
        raws = dict(ds.raw_bytes)
        for kind in KINDS:
            if not incoming[kind]:
                continue
            if indexes[kind]:
                raise StorageError(f"dataset already holds {kind} data; fusion only adds new kinds")
            body, index = _encode_data(kind, incoming[kind], ds.precision, codec)
            data = _header(kind, body) + body
            _atomic_write(path / FILE_NAME[kind], data)
            indexes[kind] = index
            datafiles[kind] = (len(data), zlib.crc32(data))
            if raw_bytes and raw_bytes.get(kind) is not None:
                raws[kind] = raw_bytes[kind]
        manifest = _encode_manifest(counties, indexes, ds.precision, raws, datafiles)
    finally:
        ds.close()
    _atomic_write(path / FILE_NAME["manifest"], _header("manifest", manifest) + manifest)
    return path


class Dataset:
    """Open, read-only dataset handle. Record blocks are read on demand."""

    def __init__(self, path: Path, counties, index, precision, raw_bytes, datafiles, schema_version):
        self.path = path
        self.counties: tuple[County, ...] = counties
        self.index = index
        self.precision = precision
        self.raw_bytes = raw_bytes
        self.datafiles = datafiles
        self.schema_version = schema_version
        self.io = IOCounters()
        self.county_by_code = {c.code: c for c in counties}
        self.grid_by_id = {g.id: g for c in counties for g in c.grids}
        self._keys = {k: [(e.grid_id, e.day) for e in index[k]] for k in KINDS}
        self._fds: dict[str, int] = {}

    # Handles are sent to worker processes by path and reopened there.
    def __getstate__(self):
        return {"path": str(self.path)}

    def __setstate__(self, state):
        other = open_dataset(state["path"])
        self.__dict__.update(other.__dict__)

    def _fd(self, kind: str) -> int:
        fd = self._fds.get(kind)
        if fd is None:
            fd = self._fds[kind] = os.open(self.path / FILE_NAME[kind], os.O_RDONLY)
        return fd

    def close(self) -> None:
        for fd in self._fds.values():
            os.close(fd)
        self._fds.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def find(self, kind: str, grid_id: int, day: int) -> Optional[IndexEntry]:
        keys = self._keys[kind]
        i = bisect.bisect_left(keys, (grid_id, day))
        if i < len(keys) and keys[i] == (grid_id, day):
            return self.index[kind][i]
        return None

    def read_at(self, kind: str, offset: int, length: int) -> bytes:
        data = os.pread(self._fd(kind), length, offset)
        self.io.blocks[kind] += 1
        self.io.bytes[kind] += len(data)
        return data

    def _records(self, kind: str, grid_id: int, day: int) -> list:
        entry = self.find(kind, grid_id, day)
        if entry is None:
            return []
        data = self.read_at(kind, entry.offset, entry.length)
        if len(data) != entry.length:
            raise BlockReadError(kind, grid_id, day,
                                 f"short read: {len(data)} of {entry.length} bytes (file truncated?)")
        if zlib.crc32(data) != entry.crc:
            raise BlockReadError(kind, grid_id, day, "checksum mismatch")
        try:
            records = enc.decode_block(kind, day, enc.decompress(data, entry.codec), self.precision)
        except enc.DecodeError as exc:
            raise BlockReadError(kind, grid_id, day, str(exc)) from None
        if len(records) != entry.count:
            raise BlockReadError(kind, grid_id, day,
                                 f"decoded {len(records)} records, index says {entry.count}")
        return records

    def get_weather(self, grid_id: int, day: int) -> list[WeatherRecord]:
        return self._records("weather", grid_id, day)

    def get_speed(self, grid_id: int, day: int) -> list[SpeedRecord]:
        return self._records("speed", grid_id, day)

    def block_bytes(self, kind: str) -> dict:
        """Raw stored bytes of every block of one kind, keyed by (grid, day)."""
        out = {}
        with open(self.path / FILE_NAME[kind], "rb") as fh:
            for e in self.index[kind]:
                fh.seek(e.offset)
                out[(e.grid_id, e.day)] = fh.read(e.length)
        return out

    def verify(self) -> None:
        """Full consistency check of every data file (reads everything)."""
        for kind in KINDS:
            p = self.path / FILE_NAME[kind]
            raw = p.read_bytes()
            crc = _check_header(raw, kind, p)
            if zlib.crc32(raw[HEADER.size:]) != crc:
                raise FormatError(f"{p}: body checksum mismatch")
            size, file_crc = self.datafiles[kind]
            if len(raw) != size or zlib.crc32(raw) != file_crc:
                raise FormatError(f"{p}: does not match the manifest")
            end = HEADER.size
            for e in self.index[kind]:
                if e.offset < end:
                    raise FormatError(f"{p}: overlapping block at offset {e.offset}")
                end = e.offset + e.length
                self._records(kind, e.grid_id, e.day)

    def stats(self) -> DatasetStats:
        kinds = {}
        for kind in KINDS:
            entries = self.index[kind]
            kinds[kind] = KindStats(
                file_bytes=os.path.getsize(self.path / FILE_NAME[kind]),
                blocks=len(entries),
                records=sum(e.count for e in entries),
                raw_bytes=self.raw_bytes.get(kind),
            )
        return DatasetStats(os.path.getsize(self.path / FILE_NAME["manifest"]), kinds,
                            len(self.counties), len(self.grid_by_id))


def dataset_stats(handle: Dataset, raw_bytes: Optional[dict] = None) -> DatasetStats:
    """Sizes and counts; ``raw_bytes`` (per kind) overrides recorded raw sizes."""
    st = handle.stats()
    for kind, n in (raw_bytes or {}).items():
        st.kinds[kind].raw_bytes = n
    return st


def _parse_manifest(body: bytes, path: Path):
    pos = 0
    counties: list[tuple[str, str]] = []
    grids: dict[str, list] = {}
    index = {k: [] for k in KINDS}
    raw_bytes, datafiles = {}, {}
    schema_version, precision = None, None
    kind_of = {v: k for k, v in FILE_KIND.items()}
    while pos < len(body):
        tag, pos = enc.read_varint(body, pos)
        length, pos = enc.read_varint(body, pos)
        sec = body[pos:pos + length]
        if len(sec) != length:
            raise FormatError(f"{path}: truncated manifest section")
        pos += length
        p = 0
        if tag == T_INFO:
            schema_version, p = enc.read_str(sec, p)
            precision, p = enc.read_varint(sec, p)
        elif tag == T_COUNTY:
            code, p = enc.read_str(sec, p)
            name, p = enc.read_str(sec, p)
            counties.append((code, name))
            grids.setdefault(code, [])
        elif tag == T_GRID:
            gid, p = enc.read_varint(sec, p)
            lat, p = enc.read_f64(sec, p)
            lon, p = enc.read_f64(sec, p)
            code, p = enc.read_str(sec, p)
            if code not in grids:
                raise FormatError(f"{path}: grid {gid} belongs to undeclared county {code!r}")
            grids[code].append((gid, lat, lon))
        elif tag in (T_INDEX, T_RAW_BYTES, T_DATAFILE):
            fk, p = enc.read_varint(sec, p)
            kind = kind_of.get(fk)
            if kind not in KINDS:
                raise FormatError(f"{path}: unknown data kind {fk}")
            if tag == T_RAW_BYTES:
                raw_bytes[kind], p = enc.read_varint(sec, p)
            elif tag == T_DATAFILE:
                size, p = enc.read_varint(sec, p)
                datafiles[kind] = (size, struct.unpack_from("<I", sec, p)[0])
            else:
                n, p = enc.read_varint(sec, p)
                entries = []
                for _ in range(n):
                    gid, p = enc.read_varint(sec, p)
                    zday, p = enc.read_varint(sec, p)
                    off, p = enc.read_varint(sec, p)
                    ln, p = enc.read_varint(sec, p)
                    cnt, p = enc.read_varint(sec, p)
                    codec = sec[p]
                    crc = struct.unpack_from("<I", sec, p + 1)[0]
                    p += 5
                    entries.append(IndexEntry(gid, enc.unzigzag(zday), off, ln, cnt, codec, crc))
                index[kind] = entries
        # Unknown tags are skipped for forward compatibility.
    if schema_version is None:
        raise FormatError(f"{path}: manifest lacks an info section")
    return schema_version, precision, counties, grids, index, raw_bytes, datafiles


def open_dataset(path) -> Dataset:
    """Load and verify the manifest; no record block is read."""
    path = Path(path)
    mpath = path / FILE_NAME["manifest"]
    try:
        raw = mpath.read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot open dataset at {path}: {exc}") from None
    crc = _check_header(raw, "manifest", mpath)
    body = raw[HEADER.size:]
    if zlib.crc32(body) != crc:
        raise FormatError(f"{mpath}: manifest checksum mismatch")
    try:
        schema_version, precision, ctable, gtable, index, raw_bytes, datafiles = \
            _parse_manifest(body, mpath)
    except (enc.DecodeError, IndexError, struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"{mpath}: corrupt manifest: {exc}") from None
    for kind in KINDS:
        p = path / FILE_NAME[kind]
        try:
            with open(p, "rb") as fh:
                _check_header(fh.read(HEADER.size), kind, p)
        except OSError as exc:
            raise StorageError(f"cannot open {p}: {exc}") from None
        keys = [(e.grid_id, e.day) for e in index[kind]]
        if keys != sorted(keys) or len(set(keys)) != len(keys):
            raise FormatError(f"{mpath}: {kind} index is not strictly sorted")
    days = {k: {} for k in KINDS}
    for kind in KINDS:
        for e in index[kind]:
            days[kind].setdefault(e.grid_id, []).append(e.day)
    counties = []
    known = set()
    for code, name in ctable:
        grids = []
        for gid, lat, lon in gtable[code]:
            known.add(gid)
            w = days["weather"].get(gid)
            s = days["speed"].get(gid)
            grids.append(Grid(gid, lat, lon,
                              BlockLink("weather", gid, tuple(w)) if w else None,
                              BlockLink("speed", gid, tuple(s)) if s else None))
        counties.append(County(code, name, tuple(grids)))
    for kind in KINDS:
        stray = set(days[kind]) - known
        if stray:
            raise FormatError(f"{mpath}: {kind} index references unknown grid {min(stray)}")
    return Dataset(path, tuple(counties), index, precision, raw_bytes, datafiles, schema_version)
