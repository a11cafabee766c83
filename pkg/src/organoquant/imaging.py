"""Raster primitives shared by the contour and cell pipelines.

Masks are plain boolean ``numpy`` arrays of shape ``(height, width)``;
channel planes are wrapped in :class:`ChannelImage` so the bit depth and
marker label travel with the pixels.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

__all__ = [
    "ChannelImage",
    "LabelMap",
    "Fixed",
    "OTSU",
    "ImagingError",
    "WrongBitDepth",
    "DegenerateHistogram",
    "to_8bit",
    "binarize",
    "otsu_threshold",
    "morph_open",
    "label_components",
    "EIGHT_CONNECTED",
]

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class ImagingError(ValueError):
    pass


class WrongBitDepth(ImagingError):
    pass


class DegenerateHistogram(ImagingError):
    pass


@dataclass(frozen=True)
class ChannelImage:
    """One 2-D fluorescence plane.

    ``pixels`` is a read-only ``(height, width)`` array of dtype ``uint8``
    or ``uint16`` matching ``bit_depth``.
    """

    pixels: np.ndarray
    bit_depth: int
    marker: str = ""

    def __post_init__(self):
        if self.bit_depth not in (8, 16):
            raise ValueError(f"bit_depth must be 8 or 16, got {self.bit_depth}")
        dtype = np.uint8 if self.bit_depth == 8 else np.uint16
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if arr.dtype != dtype:
            if arr.size and (arr.min() < 0 or arr.max() >= 2**self.bit_depth):
                raise ValueError(f"pixel values do not fit in {self.bit_depth} bits")
            arr = arr.astype(dtype)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ChannelImage):
            return NotImplemented
        return (
            self.bit_depth == other.bit_depth
            and self.marker == other.marker
            and self.pixels.shape == other.pixels.shape
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray  # int32, 0 = background
    component_count: int

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class Fixed:
    """Fixed threshold: foreground iff pixel > t."""

    t: int


class _Otsu:
    def __repr__(self):
        return "OTSU"

    def __reduce__(self):
        return "OTSU"


OTSU = _Otsu()
ThresholdMethod = Union[Fixed, _Otsu]


def to_8bit(image: ChannelImage, mode: str = "full_scale") -> ChannelImage:
    """Convert a 16-bit plane to 8 bits with round-half-up.

    ``full_scale`` maps 0..65535 onto 0..255; ``minmax`` stretches the
    plane's own range onto 0..255 (constant planes become all zero).
    Integer arithmetic keeps the result bit-exact.
    """
    if image.bit_depth != 16:
        raise WrongBitDepth(f"expected a 16-bit image, got {image.bit_depth}-bit")
    v = image.pixels.astype(np.int64)
    if mode == "full_scale":
        out = (v * 510 + 65535) // (2 * 65535)
    elif mode == "minmax":
        lo, hi = int(v.min()), int(v.max())
        span = hi - lo
        if span == 0:
            out = np.zeros_like(v)
        else:
            out = ((v - lo) * 510 + span) // (2 * span)
    else:
        raise ValueError(f"unknown conversion mode {mode!r}")
    return ChannelImage(out.astype(np.uint8), 8, image.marker)


def otsu_threshold(pixels: np.ndarray) -> int:
    """Threshold t in 0..254 maximising between-class variance.

    Class 0 is ``pixel <= t``. The criterion is compared exactly as the
    rational ``(s0*N - S*n0)**2 / (n0*n1)``; the lowest t wins ties.
    """
    hist = np.bincount(np.asarray(pixels, dtype=np.int64).ravel(), minlength=256)[:256]
    hist = [int(h) for h in hist]
    total = sum(hist)
    total_sum = sum(i * h for i, h in enumerate(hist))
    best_t, best = None, Fraction(0)
    n0 = s0 = 0
    for t in range(255):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        score = Fraction((s0 * total - total_sum * n0) ** 2, n0 * n1)
        if score > best:
            best_t, best = t, score
    if best_t is None:
        raise DegenerateHistogram("Otsu threshold undefined for a constant image")
    return best_t


def binarize(image: ChannelImage, method: ThresholdMethod = OTSU) -> np.ndarray:
    if image.bit_depth != 8:
        raise WrongBitDepth(f"expected an 8-bit image, got {image.bit_depth}-bit")
    if isinstance(method, Fixed):
        t = method.t
    elif method is OTSU:
        t = otsu_threshold(image.pixels)
    else:
        raise TypeError(f"unknown threshold method {method!r}")
    return image.pixels > t


def _window_reduce(mask: np.ndarray, radius: int, pad_value: bool, op) -> np.ndarray:
    padded = np.pad(mask, radius, constant_values=pad_value)
    win = sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1))
    return op(win, axis=(2, 3))


def morph_open(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Binary opening with a (2r+1)x(2r+1) square; outside counts as background."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return mask.copy()
    eroded = _window_reduce(mask, radius, False, np.all)
    return _window_reduce(eroded, radius, False, np.any)


def label_components(mask: np.ndarray, min_area: int = 0) -> LabelMap:
    """8-connected labelling with small components dropped.

    Surviving labels are renumbered 1..k in the raster-scan order of each
    component's first pixel.
    """
    if min_area < 0:
        raise ValueError("min_area must be >= 0")
    mask = np.asarray(mask, dtype=bool)
    raw, _ = ndimage.label(mask, structure=EIGHT_CONNECTED)
    flat = raw.ravel()
    ids, first, areas = np.unique(flat, return_index=True, return_counts=True)
    keep = (ids != 0) & (areas >= min_area)
    ids, first = ids[keep], first[keep]
    order = np.argsort(first, kind="stable")
    lut = np.zeros(int(flat.max()) + 1 if flat.size else 1, dtype=np.int32)
    lut[ids[order]] = np.arange(1, len(ids) + 1, dtype=np.int32)
    labels = lut[raw] if raw.size else raw.astype(np.int32)
    return LabelMap(labels.astype(np.int32), int(len(ids)))
