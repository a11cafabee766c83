"""Minimal ZISRAW (CZI) container reader and fixture writer.

Only uncompressed Gray8/Gray16 subblocks holding single 2-D planes are
supported. Segment layout (all integers little-endian)::

    16s  segment id, NUL padded ("ZISRAWFILE", "ZISRAWSUBBLOCK", ...)
    q    allocated size of the payload
    q    used size of the payload

Subblocks are resolved through the ZISRAWDIRECTORY segment when the file
header points at one, otherwise by scanning ZISRAWSUBBLOCK segments.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..imaging import ChannelImage

__all__ = [
    "CziError",
    "MalformedHeader",
    "MalformedSegment",
    "TruncatedFile",
    "UnsupportedPixelType",
    "UnsupportedCompression",
    "UnsupportedDimension",
    "UnknownMarker",
    "MissingChannel",
    "EmptyInput",
    "DimensionMismatch",
    "ZeroDimension",
    "SegmentEntry",
    "DimensionEntry",
    "SubblockEntry",
    "ContainerIndex",
    "parse_container",
    "extract_channel",
    "write_fixture",
]


class CziError(ValueError):
    pass


class MalformedHeader(CziError):
    pass


class MalformedSegment(CziError):
    pass


class TruncatedFile(CziError):
    pass


class UnsupportedPixelType(CziError):
    pass


class UnsupportedCompression(CziError):
    pass


class UnsupportedDimension(CziError):
    pass


class UnknownMarker(CziError):
    pass


class MissingChannel(CziError):
    pass


class EmptyInput(CziError):
    pass


class DimensionMismatch(CziError):
    pass


class ZeroDimension(CziError):
    pass


FILE_TAG = b"ZISRAWFILE"
DIRECTORY_TAG = b"ZISRAWDIRECTORY"
SUBBLOCK_TAG = b"ZISRAWSUBBLOCK"
KNOWN_TAGS = {
    FILE_TAG,
    DIRECTORY_TAG,
    SUBBLOCK_TAG,
    b"ZISRAWMETADATA",
    b"ZISRAWATTDIR",
    b"ZISRAWATTACH",
    b"DELETED",
}

SEGMENT_HEADER = struct.Struct("<16sqq")
FILE_HEADER = struct.Struct("<iiii16s16siqqiq")
SUBBLOCK_HEADER = struct.Struct("<iiq")
DIRECTORY_HEADER = struct.Struct("<i124x")
ENTRY_DV = struct.Struct("<2siqiiBB4si")
DIMENSION_DV = struct.Struct("<4siifi")

# pixel-type code -> (name, bytes per pixel, numpy dtype)
PIXEL_TYPES = {0: ("Gray8", 1, np.dtype("<u1")), 1: ("Gray16", 2, np.dtype("<u2"))}
FILE_HEADER_ALLOC = 512
SUBBLOCK_FIXED = 256  # subblock header + directory entry + fill


@dataclass(frozen=True)
class SegmentEntry:
    segment_id: str
    offset: int
    allocated_size: int
    used_size: int
    raw_id: bytes = b""

    @property
    def data_offset(self) -> int:
        return self.offset + SEGMENT_HEADER.size


@dataclass(frozen=True)
class DimensionEntry:
    dimension: str
    start: int
    size: int


@dataclass(frozen=True)
class SubblockEntry:
    pixel_type: str
    dims: tuple[DimensionEntry, ...]
    channel_index: int
    data_offset: int
    data_size: int
    segment_offset: int

    def dim(self, tag: str) -> DimensionEntry | None:
        for d in self.dims:
            if d.dimension == tag:
                return d
        return None

    @property
    def width(self) -> int:
        return self.dim("X").size

    @property
    def height(self) -> int:
        return self.dim("Y").size


@dataclass(frozen=True)
class ContainerIndex:
    file_version: tuple[int, int]
    segments: tuple[SegmentEntry, ...]
    subblocks: tuple[SubblockEntry, ...] = field(default_factory=tuple)
    directory_position: int = 0
    metadata_position: int = 0

    def channels(self) -> list[int]:
        return sorted(sb.channel_index for sb in self.subblocks)

    def subblock_for_channel(self, channel_index: int) -> SubblockEntry | None:
        for sb in self.subblocks:
            if sb.channel_index == channel_index:
                return sb
        return None


def _unpack(st: struct.Struct, data: bytes, pos: int, limit: int):
    if pos < 0 or pos + st.size > limit:
        raise TruncatedFile(f"need {st.size} bytes at offset {pos}, limit {limit}")
    return st.unpack_from(data, pos)


def _scan_segments(data: bytes) -> list[SegmentEntry]:
    segments = []
    pos = 0
    n = len(data)
    while pos < n:
        raw, allocated, used = _unpack(SEGMENT_HEADER, data, pos, n)
        raw = raw.rstrip(b"\x00")
        if allocated < 0 or used < 0 or used > allocated:
            raise MalformedSegment(f"bad segment sizes at offset {pos}")
        end = pos + SEGMENT_HEADER.size + allocated
        if end > n:
            raise TruncatedFile(
                f"segment at {pos} declares {allocated} bytes, only {n - pos - 32} present"
            )
        name = raw.decode("ascii", "replace") if raw in KNOWN_TAGS else "unknown"
        segments.append(SegmentEntry(name, pos, allocated, used, raw))
        pos = end
    return segments


def _read_entry_dv(data: bytes, pos: int, limit: int):
    (schema, pixel_type, file_position, _part, compression,
     _pyramid, _r1, _r2, ndims) = _unpack(ENTRY_DV, data, pos, limit)
    if schema != b"DV":
        raise MalformedSegment(f"unsupported directory-entry schema {schema!r}")
    if ndims < 0 or ndims > 64:
        raise MalformedSegment(f"implausible dimension count {ndims}")
    pos += ENTRY_DV.size
    dims = []
    for _ in range(ndims):
        tag, start, size, _coord, stored = _unpack(DIMENSION_DV, data, pos, limit)
        pos += DIMENSION_DV.size
        tag = tag.rstrip(b"\x00").decode("ascii", "replace")
        if size <= 0:
            raise MalformedSegment(f"dimension {tag!r} has size {size}")
        if stored not in (0, size):
            raise UnsupportedDimension(f"subsampled dimension {tag!r} not supported")
        dims.append(DimensionEntry(tag, start, size))
    if pixel_type not in PIXEL_TYPES:
        raise UnsupportedPixelType(f"pixel type code {pixel_type} not supported")
    if compression != 0:
        raise UnsupportedCompression(f"compression code {compression} not supported")
    return pixel_type, file_position, tuple(dims), pos


def _check_dims(dims: Sequence[DimensionEntry]) -> int:
    tags = [d.dimension for d in dims]
    if tags.count("X") != 1 or tags.count("Y") != 1:
        raise MalformedSegment(f"subblock needs exactly one X and one Y, got {tags}")
    if tags.count("C") > 1:
        raise MalformedSegment("subblock has more than one C dimension")
    channel = 0
    for d in dims:
        if d.dimension == "C":
            if d.size != 1:
                raise UnsupportedDimension("a subblock must hold a single channel")
            if d.start < 0:
                raise MalformedSegment("negative channel index")
            channel = d.start
        elif d.dimension not in ("X", "Y") and d.size != 1:
            raise UnsupportedDimension(
                f"dimension {d.dimension!r} of size {d.size} not supported"
            )
    return channel


def _read_subblock(data: bytes, seg: SegmentEntry) -> SubblockEntry:
    limit = seg.data_offset + seg.used_size
    pos = seg.data_offset
    meta_size, attach_size, data_size = _unpack(SUBBLOCK_HEADER, data, pos, limit)
    if meta_size < 0 or attach_size < 0 or data_size < 0:
        raise MalformedSegment(f"negative sizes in subblock at {seg.offset}")
    entry_start = pos + SUBBLOCK_HEADER.size
    pixel_type, _fp, dims, entry_end = _read_entry_dv(data, entry_start, limit)
    fixed = max(SUBBLOCK_FIXED - SUBBLOCK_HEADER.size, entry_end - entry_start)
    pixel_offset = entry_start + fixed + meta_size
    if pixel_offset + data_size + attach_size > limit:
        raise TruncatedFile(f"subblock at {seg.offset} overruns its segment")
    channel = _check_dims(dims)
    name, bpp, _ = PIXEL_TYPES[pixel_type]
    x = next(d for d in dims if d.dimension == "X").size
    y = next(d for d in dims if d.dimension == "Y").size
    if data_size != x * y * bpp:
        raise MalformedSegment(
            f"subblock data size {data_size} != {x}x{y}x{bpp}"
        )
    return SubblockEntry(name, dims, channel, pixel_offset, data_size, seg.offset)


def parse_container(data) -> ContainerIndex:
    """Index every segment and resolve the subblock planes.

    ``data`` may be ``bytes``-like or a binary stream.
    """
    if hasattr(data, "read"):
        data = data.read()
    data = bytes(data)
    if len(data) < SEGMENT_HEADER.size:
        raise TruncatedFile(f"input of {len(data)} bytes is shorter than a segment header")
    if data[:16].rstrip(b"\x00") != FILE_TAG:
        raise MalformedHeader("file does not start with a ZISRAWFILE segment")
    segments = _scan_segments(data)
    header = segments[0]
    if header.used_size < FILE_HEADER.size:
        raise MalformedHeader("file header segment too small")
    (major, minor, _r1, _r2, _g1, _g2, _part, dir_pos, meta_pos,
     _pending, _att) = FILE_HEADER.unpack_from(data, header.data_offset)

    by_offset = {s.offset: s for s in segments}
    for pos in (dir_pos, meta_pos):
        if pos and pos >= len(data):
            raise TruncatedFile(f"header points at offset {pos} beyond end of file")

    if dir_pos:
        seg = by_offset.get(dir_pos)
        if seg is None or seg.raw_id != DIRECTORY_TAG:
            raise MalformedSegment(f"no directory segment at offset {dir_pos}")
        positions = _directory_positions(data, seg)
        subblock_segs = []
        for fp in positions:
            sb = by_offset.get(fp)
            if sb is None or sb.raw_id != SUBBLOCK_TAG:
                raise MalformedSegment(f"directory entry points at {fp}, not a subblock")
            subblock_segs.append(sb)
    else:
        subblock_segs = [s for s in segments if s.raw_id == SUBBLOCK_TAG]

    subblocks = tuple(_read_subblock(data, s) for s in subblock_segs)
    seen = set()
    for sb in subblocks:
        if sb.channel_index in seen:
            raise UnsupportedDimension(
                f"channel {sb.channel_index} has more than one plane"
            )
        seen.add(sb.channel_index)
    return ContainerIndex((major, minor), tuple(segments), subblocks, dir_pos, meta_pos)


def _directory_positions(data: bytes, seg: SegmentEntry) -> list[int]:
    limit = seg.data_offset + seg.used_size
    (count,) = _unpack(DIRECTORY_HEADER, data, seg.data_offset, limit)
    if count < 0:
        raise MalformedSegment("negative directory entry count")
    pos = seg.data_offset + DIRECTORY_HEADER.size
    positions = []
    for _ in range(count):
        _pt, file_position, _dims, pos = _read_entry_dv(data, pos, limit)
        positions.append(file_position)
    return positions


def extract_channel(
    index: ContainerIndex, data, marker: str, mapping: Mapping[str, int]
) -> ChannelImage:
    """Return the plane mapped to ``marker``, pixel values untouched."""
    if marker not in mapping:
        raise UnknownMarker(f"marker {marker!r} not in channel mapping {sorted(mapping)}")
    channel = mapping[marker]
    sb = index.subblock_for_channel(channel)
    if sb is None:
        raise MissingChannel(f"no plane for channel {channel} (marker {marker!r})")
    if hasattr(data, "read"):
        data = data.read()
    _, bpp, dtype = next(v for v in PIXEL_TYPES.values() if v[0] == sb.pixel_type)
    if sb.data_offset + sb.data_size > len(data):
        raise TruncatedFile("plane data lies beyond the supplied bytes")
    arr = np.frombuffer(data, dtype=dtype, count=sb.width * sb.height, offset=sb.data_offset)
    arr = arr.reshape(sb.height, sb.width).astype(dtype.newbyteorder("="))
    return ChannelImage(arr, 8 * bpp, marker)


def _segment(tag: bytes, payload: bytes) -> bytes:
    return SEGMENT_HEADER.pack(tag, len(payload), len(payload)) + payload


def _entry_dv(pixel_code: int, file_position: int, image: ChannelImage, channel: int) -> bytes:
    dims = [("X", 0, image.width), ("Y", 0, image.height), ("C", channel, 1)]
    out = ENTRY_DV.pack(b"DV", pixel_code, file_position, 0, 0, 0, 0, b"", len(dims))
    for tag, start, size in dims:
        out += DIMENSION_DV.pack(tag.encode(), start, size, float(start), size)
    return out


def write_fixture(planes: Sequence[ChannelImage]) -> bytes:
    """Serialise planes as channels 0..n-1 of a minimal container.

    Output is the file header, one subblock per plane, then the directory.
    Identical input gives identical bytes.
    """
    planes = list(planes)
    if not planes:
        raise EmptyInput("need at least one plane")
    if len(planes) > 8:
        raise DimensionMismatch("at most 8 planes are supported")
    h, w = planes[0].height, planes[0].width
    for p in planes:
        if p.width == 0 or p.height == 0:
            raise ZeroDimension("planes must have non-zero width and height")
        if (p.height, p.width) != (h, w):
            raise DimensionMismatch("all planes must share width and height")

    pos = SEGMENT_HEADER.size + FILE_HEADER_ALLOC
    blocks, entries = [], []
    for channel, p in enumerate(planes):
        code = 0 if p.bit_depth == 8 else 1
        pixels = p.pixels.astype(PIXEL_TYPES[code][2]).tobytes()
        entry = _entry_dv(code, pos, p, channel)
        head = SUBBLOCK_HEADER.pack(0, 0, len(pixels)) + entry
        head += b"\x00" * (SUBBLOCK_FIXED - len(head))
        seg = _segment(SUBBLOCK_TAG, head + pixels)
        blocks.append(seg)
        entries.append(entry)
        pos += len(seg)

    directory = _segment(
        DIRECTORY_TAG, DIRECTORY_HEADER.pack(len(entries)) + b"".join(entries)
    )
    header = FILE_HEADER.pack(1, 0, 0, 0, b"\x00" * 16, b"\x00" * 16, 0, pos, 0, 0, 0)
    header += b"\x00" * (FILE_HEADER_ALLOC - len(header))
    return _segment(FILE_TAG, header) + b"".join(blocks) + directory
