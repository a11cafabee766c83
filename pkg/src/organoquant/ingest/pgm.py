"""Binary portable graymap (P5) reader and writer.

16-bit samples are big-endian, as the format requires.
"""
from __future__ import annotations

import re

import numpy as np

from ..imaging import ChannelImage

__all__ = [
    "PgmError",
    "BadMagic",
    "BadMaxval",
    "TruncatedPixels",
    "ingest_raster_fallback",
    "write_pgm",
]


class PgmError(ValueError):
    pass


class BadMagic(PgmError):
    pass


class BadMaxval(PgmError):
    pass


class TruncatedPixels(PgmError):
    pass


# magic, width, height, maxval; comments may sit between tokens.
_TOKEN = re.compile(rb"(?:\s|#[^\n\r]*[\n\r])*(\d+)")


def ingest_raster_fallback(data: bytes, marker: str = "") -> ChannelImage:
    data = bytes(data)
    if data[:2] != b"P5":
        raise BadMagic(f"expected P5 graymap, got {data[:2]!r}")
    pos = 2
    values = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PgmError("malformed P5 header")
        values.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = values
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise TruncatedPixels("header not terminated by a single whitespace byte")
    pos += 1
    if maxval == 255:
        dtype, depth = np.dtype(">u1"), 8
    elif maxval == 65535:
        dtype, depth = np.dtype(">u2"), 16
    else:
        raise BadMaxval(f"maxval {maxval} not supported (use 255 or 65535)")
    if width == 0 or height == 0:
        raise PgmError("zero-sized graymap")
    need = width * height * dtype.itemsize
    if len(data) - pos < need:
        raise TruncatedPixels(f"need {need} pixel bytes, found {len(data) - pos}")
    arr = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return ChannelImage(arr.reshape(height, width), depth, marker)


def write_pgm(image: ChannelImage) -> bytes:
    maxval = 255 if image.bit_depth == 8 else 65535
    dtype = ">u1" if image.bit_depth == 8 else ">u2"
    header = b"P5\n%d %d\n%d\n" % (image.width, image.height, maxval)
    return header + image.pixels.astype(dtype).tobytes()
