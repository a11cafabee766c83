"""Cell detection with star-convex polygons and intensity measurement."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..imaging import (
    OTSU,
    ChannelImage,
    DegenerateHistogram,
    ThresholdMethod,
    binarize,
    label_components,
    morph_open,
    to_8bit,
)
from .maps import *  # noqa: F401,F403
from .maps import DetectionMaps, synthesize_maps
from .measure import *  # noqa: F401,F403
from .measure import CellStats, EmptyInstanceSet, measure_intensity
from .polygons import *  # noqa: F401,F403
from .polygons import CellInstance, extract_candidates, polygon_nms


@dataclass(frozen=True)
class CellParams:
    n_rays: int = 32
    prob_thresh: float = 0.5
    nms_thresh: float = 0.4
    threshold: ThresholdMethod = OTSU
    morph_radius: int = 1
    min_area: int = 20
    bit_mode: str = "full_scale"
    intensity_mode: str = "mean"


def cell_mask(image8: ChannelImage, params: CellParams) -> np.ndarray:
    """Foreground used to synthesise maps when no predictions are supplied."""
    try:
        mask = binarize(image8, params.threshold)
    except DegenerateHistogram:
        return np.zeros(image8.pixels.shape, dtype=bool)
    if params.morph_radius > 0:
        mask = morph_open(mask, params.morph_radius)
    return label_components(mask, params.min_area).labels > 0


def detect_cells(
    image: ChannelImage,
    params: CellParams = CellParams(),
    maps: DetectionMaps | None = None,
) -> tuple[list[CellInstance], CellStats | None, dict]:
    """Detect cells on a PAX6 plane and measure their intensity.

    Returns the instances (carrying per-cell means), the stats (``None``
    when nothing was detected) and a diagnostics dict.
    """
    img8 = to_8bit(image, params.bit_mode) if image.bit_depth == 16 else image
    diag = {}
    if maps is None:
        maps = synthesize_maps(cell_mask(img8, params), params.n_rays)
        diag["maps_source"] = "synthesized"
    else:
        if maps.prob.shape != img8.pixels.shape:
            raise ValueError(
                f"maps are {maps.width}x{maps.height}, image is {img8.width}x{img8.height}"
            )
        diag["maps_source"] = "external"
    candidates = extract_candidates(maps, params.prob_thresh)
    instances = polygon_nms(candidates, params.nms_thresh, img8.pixels.shape)
    diag["candidates"] = len(candidates)
    diag["instances"] = len(instances)
    try:
        stats = measure_intensity(instances, img8, params.intensity_mode)
    except EmptyInstanceSet:
        return instances, None, diag
    instances = [
        replace(inst, mean_intensity=m) for inst, m in zip(instances, stats.per_cell_means)
    ]
    return instances, stats, diag
