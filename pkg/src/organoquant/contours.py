"""Marker-contour tracing and contour-count statistics.

Each labelled component contributes one outer boundary, traced by
Moore-neighbour following (clockwise, y pointing down) from the
component's first raster-scan pixel. Tracing stops (Jacob's criterion)
when the walk is back at the start pixel and about to repeat its first
move, so pixels on one-pixel-wide spurs are visited on both passes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import ndimage

from .imaging import (
    OTSU,
    ChannelImage,
    DegenerateHistogram,
    Fixed,
    LabelMap,
    ThresholdMethod,
    binarize,
    label_components,
    morph_open,
    otsu_threshold,
    to_8bit,
)

__all__ = [
    "UNDEFINED",
    "Contour",
    "ContourStats",
    "ContourParams",
    "trace_boundaries",
    "trace_component",
    "contour_stats",
    "analyze_contours",
]

# Contour ratio when no contour exceeds theta.
UNDEFINED = math.inf

# Clockwise on screen, starting west.
_DIRS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


@dataclass(frozen=True)
class Contour:
    points: tuple[tuple[int, int], ...]  # (x, y)
    closed: bool

    @property
    def point_count(self) -> int:
        """Distinct boundary pixels; a pixel revisited by the trace counts once."""
        return len(set(self.points))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ContourStats:
    total: int
    n1: int
    n2: int
    theta: int
    cr: float
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def cr_defined(self) -> bool:
        return self.n1 > 0


@dataclass(frozen=True)
class ContourParams:
    theta: int = 200
    threshold: ThresholdMethod = OTSU
    morph_radius: int = 1
    min_area: int = 20
    bit_mode: str = "full_scale"


def trace_component(component: np.ndarray, start: tuple[int, int]) -> Contour:
    """Trace the outer boundary of the foreground blob in ``component``.

    ``start`` must be the blob's first pixel in raster-scan order, so its
    west neighbour is background.
    """
    h, w = component.shape

    def fg(x, y):
        return 0 <= x < w and 0 <= y < h and component[y, x]

    s = start
    p, b = s, (s[0] - 1, s[1])
    points = [s]
    second = None
    seen = set()
    while True:
        d = _DIR_INDEX[(b[0] - p[0], b[1] - p[1])]
        for i in range(1, 9):
            dx, dy = _DIRS[(d + i) % 8]
            c = (p[0] + dx, p[1] + dy)
            if fg(*c):
                break
        else:
            return Contour((s,), closed=False)
        if second is None:
            second = c
        elif p == s and c == second:
            points.pop()
            break
        bx, by = _DIRS[(d + i - 1) % 8]
        b = (p[0] + bx, p[1] + by)
        if (c, b) in seen:
            # the stopping move is always reached first; guard against cycling
            break
        seen.add((c, b))
        p = c
        points.append(p)
    return Contour(tuple(points), closed=True)


def trace_boundaries(labels: LabelMap) -> list[Contour]:
    """One outer contour per component, ordered by label."""
    lab = labels.labels
    if labels.component_count == 0:
        return []
    flat = lab.ravel()
    ids, first = np.unique(flat, return_index=True)
    starts = {int(i): int(f) for i, f in zip(ids, first) if i != 0}
    objects = ndimage.find_objects(lab)
    contours = []
    w = lab.shape[1]
    for k in range(1, labels.component_count + 1):
        sl = objects[k - 1]
        y0, x0 = sl[0].start, sl[1].start
        sub = lab[sl] == k
        fy, fx = divmod(starts[k], w)
        c = trace_component(sub, (fx - x0, fy - y0))
        contours.append(
            Contour(tuple((x + x0, y + y0) for x, y in c.points), c.closed)
        )
    return contours


def contour_stats(contours: Iterable[Contour | int], theta: int = 200) -> ContourStats:
    """Split contours at ``theta`` points and form the contour ratio.

    ``n1`` counts contours with more than ``theta`` points, ``n2`` those
    with at most ``theta``; ``cr = n2 / n1``, or :data:`UNDEFINED` when
    ``n1 == 0``. Plain integers are accepted as point counts.
    """
    if theta < 1:
        raise ValueError("theta must be >= 1")
    n1 = n2 = 0
    for c in contours:
        m = c if isinstance(c, int) else c.point_count
        if m > theta:
            n1 += 1
        else:
            n2 += 1
    cr = n2 / n1 if n1 else UNDEFINED
    return ContourStats(n1 + n2, n1, n2, theta, cr)


def _hole_count(lab: np.ndarray) -> int:
    background, n = ndimage.label(lab == 0)
    if n == 0:
        return 0
    border = np.unique(
        np.concatenate([background[0], background[-1], background[:, 0], background[:, -1]])
    )
    return int(n - np.count_nonzero(border))


def analyze_contours(image: ChannelImage, params: ContourParams = ContourParams()) -> ContourStats:
    """Full N-cad contour procedure on one plane.

    8-bit conversion, threshold, opening, small-component removal,
    boundary tracing, then :func:`contour_stats`. Intermediate counts are
    attached as ``diagnostics``.
    """
    img8 = to_8bit(image, params.bit_mode) if image.bit_depth == 16 else image
    diag: dict = {"bit_mode": params.bit_mode if image.bit_depth == 16 else None}
    try:
        method = params.threshold
        if method is OTSU:
            method = Fixed(otsu_threshold(img8.pixels))
        mask = binarize(img8, method)
        diag["threshold"] = method.t
    except DegenerateHistogram:
        mask = np.zeros(img8.pixels.shape, dtype=bool)
        diag["threshold"] = None
    diag["foreground_pixels"] = int(mask.sum())
    if params.morph_radius > 0:
        mask = morph_open(mask, params.morph_radius)
    diag["opened_pixels"] = int(mask.sum())
    diag["components_before_filter"] = label_components(mask, 0).component_count
    labels = label_components(mask, params.min_area)
    diag["components"] = labels.component_count
    diag["holes_untraced"] = _hole_count(labels.labels)
    contours = trace_boundaries(labels)
    stats = contour_stats(contours, params.theta)
    diag["point_counts"] = [c.point_count for c in contours]
    return ContourStats(stats.total, stats.n1, stats.n2, stats.theta, stats.cr, diag)

