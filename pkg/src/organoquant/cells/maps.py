"""Per-pixel object probability and radial-distance maps.

Maps either come from an external predictor (ORGQMAP1 files) or are
synthesised from a binary mask: distances by marching each ray until it
leaves the pixel's component, probability from the Euclidean distance
transform normalised per component.

ORGQMAP1 layout, little-endian::

    8s   b"ORGQMAP1"
    3I   width, height, n_rays
    f*   prob, height*width row-major
    f*   dist, n_rays planes of height*width
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..imaging import label_components

__all__ = [
    "DetectionMaps",
    "MapFormatError",
    "BadMagic",
    "DimensionOverflow",
    "TruncatedPayload",
    "ValueOutOfRange",
    "ray_angles",
    "synthesize_maps",
    "save_maps",
    "load_maps",
]

MAGIC = b"ORGQMAP1"
_HEADER = struct.Struct("<8s3I")
MAX_ELEMENTS = 1 << 28


class MapFormatError(ValueError):
    pass


class BadMagic(MapFormatError):
    pass


class DimensionOverflow(MapFormatError):
    pass


class TruncatedPayload(MapFormatError):
    pass


class ValueOutOfRange(MapFormatError):
    pass


def ray_angles(n_rays: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_rays) / n_rays


@dataclass(frozen=True, eq=False)
class DetectionMaps:
    prob: np.ndarray  # (h, w) float32 in [0, 1]
    dist: np.ndarray  # (n_rays, h, w) float32 >= 0

    def __post_init__(self):
        prob = np.ascontiguousarray(self.prob, dtype=np.float32)
        dist = np.ascontiguousarray(self.dist, dtype=np.float32)
        if prob.ndim != 2 or dist.ndim != 3 or dist.shape[1:] != prob.shape:
            raise ValueError("prob must be (h, w) and dist (n_rays, h, w)")
        if dist.shape[0] < 3:
            raise ValueError("need at least 3 rays")
        if not np.all((prob >= 0) & (prob <= 1)):
            raise ValueError("prob values must lie in [0, 1]")
        if not np.all(np.isfinite(dist) & (dist >= 0)):
            raise ValueError("dist values must be finite and >= 0")
        for a in (prob, dist):
            a.setflags(write=False)
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "dist", dist)

    @property
    def width(self) -> int:
        return self.prob.shape[1]

    @property
    def height(self) -> int:
        return self.prob.shape[0]

    @property
    def n_rays(self) -> int:
        return self.dist.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DetectionMaps):
            return NotImplemented
        return np.array_equal(self.prob, other.prob) and np.array_equal(self.dist, other.dist)

    __hash__ = None


def _round_half_up(v: np.ndarray) -> np.ndarray:
    return np.floor(v + 0.5).astype(np.int64)


def synthesize_maps(mask: np.ndarray, n_rays: int = 32) -> DetectionMaps:
    """Deterministic stand-in for network output on a binary mask."""
    if n_rays < 3:
        raise ValueError("n_rays must be >= 3")
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    prob = np.zeros((h, w), dtype=np.float64)
    dist = np.zeros((n_rays, h, w), dtype=np.float32)
    labels = label_components(mask).labels
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return DetectionMaps(prob, dist)

    edt = ndimage.distance_transform_edt(np.pad(mask, 1))[1:-1, 1:-1]
    peak = ndimage.maximum(edt, labels, np.arange(labels.max() + 1))
    prob[ys, xs] = edt[ys, xs] / peak[labels[ys, xs]]

    own = labels[ys, xs]
    for k, a in enumerate(ray_angles(n_rays)):
        ca, sa = np.cos(a), np.sin(a)
        steps = np.zeros(len(ys), dtype=np.int64)
        active = np.ones(len(ys), dtype=bool)
        t = 0
        while active.any():
            t += 1
            idx = np.nonzero(active)[0]
            px = _round_half_up(xs[idx] + t * ca)
            py = _round_half_up(ys[idx] + t * sa)
            ok = (px >= 0) & (px < w) & (py >= 0) & (py < h)
            inside = np.zeros(len(idx), dtype=bool)
            inside[ok] = labels[py[ok], px[ok]] == own[idx[ok]]
            steps[idx[inside]] = t
            active[idx[~inside]] = False
        dist[k, ys, xs] = steps
    return DetectionMaps(prob, dist)


def save_maps(maps: DetectionMaps) -> bytes:
    return (
        _HEADER.pack(MAGIC, maps.width, maps.height, maps.n_rays)
        + maps.prob.astype("<f4").tobytes()
        + maps.dist.astype("<f4").tobytes()
    )


def load_maps(data: bytes) -> DetectionMaps:
    data = bytes(data)
    if len(data) < 8 or data[:8] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r} magic")
    if len(data) < _HEADER.size:
        raise TruncatedPayload("header incomplete")
    _, width, height, n_rays = _HEADER.unpack_from(data)
    if width == 0 or height == 0 or n_rays < 3:
        raise DimensionOverflow(f"invalid dimensions {width}x{height}, {n_rays} rays")
    count = width * height * (1 + n_rays)
    if count > MAX_ELEMENTS:
        raise DimensionOverflow(f"{count} values exceeds the {MAX_ELEMENTS} limit")
    need = _HEADER.size + 4 * count
    if len(data) < need:
        raise TruncatedPayload(f"need {need} bytes, got {len(data)}")
    if len(data) > need:
        raise MapFormatError(f"{len(data) - need} trailing bytes after payload")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=_HEADER.size)
    prob = values[: width * height].reshape(height, width)
    dist = values[width * height:].reshape(n_rays, height, width)
    if not np.all((prob >= 0) & (prob <= 1)):
        raise ValueOutOfRange("prob values must lie in [0, 1]")
    if not np.all(np.isfinite(dist) & (dist >= 0)):
        raise ValueOutOfRange("dist values must be finite and >= 0")
    return DetectionMaps(prob.astype(np.float32), dist.astype(np.float32))
