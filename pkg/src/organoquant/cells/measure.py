"""Per-cell intensity, batch normalisation and detection scoring."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..imaging import ChannelImage
from .polygons import CellInstance, pixel_iou

__all__ = [
    "CellStats",
    "ApResult",
    "EmptyInstanceSet",
    "measure_intensity",
    "normalize_intensities",
    "average_precision",
]


class EmptyInstanceSet(ValueError):
    pass


@dataclass(frozen=True)
class CellStats:
    cell_count: int
    per_cell_means: tuple[float, ...]
    i_avg: float
    normalized: tuple[float, ...] | None = None
    mode: str = "mean"


@dataclass(frozen=True)
class ApResult:
    tp: int
    fn: int
    fp: int
    ap: float
    matches: tuple[tuple[int, int, float], ...] = ()  # (pred id, truth id, IoU)


def measure_intensity(
    instances: Sequence[CellInstance], image: ChannelImage, mode: str = "mean"
) -> CellStats:
    """Average cell intensity over the detected instances.

    ``mode="mean"`` takes each cell's pixel mean and averages those over
    cells. ``mode="sum"`` keeps the per-cell pixel *sums* instead (the
    unnormalised per-cell total), still divided by the cell count.
    """
    if not instances:
        raise EmptyInstanceSet("no cells to measure")
    if mode not in ("mean", "sum"):
        raise ValueError(f"unknown intensity mode {mode!r}")
    flat = image.pixels.ravel().astype(np.float64)
    values = []
    for inst in instances:
        if inst.shape != image.pixels.shape:
            raise ValueError("instance shape does not match the image")
        v = flat[inst.pixels]
        values.append(math.fsum(v) / len(v) if mode == "mean" else math.fsum(v))
    return CellStats(len(values), tuple(values), math.fsum(values) / len(values), mode=mode)


def normalize_intensities(values: Sequence[float]) -> list[float]:
    """Affine rescale of a batch so its minimum is 0 and maximum 100."""
    if len(values) == 0:
        raise ValueError("need at least one value")
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0:
        return [0.0 for _ in values]
    # divide first so that hi maps to exactly 100
    return [(v - lo) / span * 100.0 for v in values]


def average_precision(
    predicted: Sequence[CellInstance],
    truth: Sequence[CellInstance],
    iou_thresh: float = 0.5,
) -> ApResult:
    """TP / (TP + FN + FP) under greedy IoU matching.

    Predictions are taken in descending score order; each claims the
    still-unmatched truth instance of highest IoU (lowest index on ties)
    when that IoU is at least ``iou_thresh``.
    """
    if not 0 < iou_thresh <= 1:
        raise ValueError("iou_thresh must lie in (0, 1]")
    order = sorted(range(len(predicted)), key=lambda i: -predicted[i].score)
    free = list(range(len(truth)))
    matches = []
    for i in order:
        best, best_iou = None, -1.0
        for j in free:
            iou = pixel_iou(predicted[i].pixels, truth[j].pixels)
            if iou > best_iou:
                best, best_iou = j, iou
        if best is not None and best_iou >= iou_thresh:
            free.remove(best)
            matches.append((predicted[i].id, truth[best].id, best_iou))
    tp = len(matches)
    fp = len(predicted) - tp
    fn = len(truth) - tp
    denom = tp + fn + fp
    ap = tp / denom if denom else 1.0
    return ApResult(tp, fn, fp, ap, tuple(matches))
