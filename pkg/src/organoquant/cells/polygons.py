"""Star-convex polygon candidates, rasterisation and greedy NMS.

Overlap between polygons is measured on their rasterised pixel sets. A
pixel is covered when its centre is inside the polygon under the
even-odd rule, or coincides exactly with a vertex.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maps import DetectionMaps, ray_angles

__all__ = [
    "PolygonCandidate",
    "CellInstance",
    "extract_candidates",
    "rasterize",
    "pixel_iou",
    "polygon_nms",
    "instances_to_json",
    "instances_from_json",
    "rle_encode",
    "rle_decode",
]


@dataclass(frozen=True)
class PolygonCandidate:
    center: tuple[int, int]  # (x, y)
    score: float
    radii: tuple[float, ...]

    @property
    def n_rays(self) -> int:
        return len(self.radii)

    def vertices(self) -> np.ndarray:
        """(n_rays, 2) array of (x, y) vertices."""
        a = ray_angles(self.n_rays)
        r = np.asarray(self.radii, dtype=np.float64)
        return np.stack(
            [self.center[0] + r * np.cos(a), self.center[1] + r * np.sin(a)], axis=1
        )


@dataclass(frozen=True, eq=False)
class CellInstance:
    id: int
    candidate: PolygonCandidate
    pixels: np.ndarray  # sorted flat indices into the (h, w) image
    shape: tuple[int, int]
    mean_intensity: float | None = None

    @property
    def area(self) -> int:
        return len(self.pixels)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        m[self.pixels] = True
        return m.reshape(self.shape)

    @property
    def score(self) -> float:
        return self.candidate.score


def extract_candidates(maps: DetectionMaps, prob_thresh: float = 0.5) -> list[PolygonCandidate]:
    """One candidate per pixel with prob > ``prob_thresh``.

    Sorted by descending score; equal scores keep raster-scan order.
    """
    if not 0 <= prob_thresh <= 1:
        raise ValueError("prob_thresh must lie in [0, 1]")
    flat = maps.prob.ravel()
    idx = np.flatnonzero(flat > prob_thresh)
    order = idx[np.lexsort((idx, -flat[idx].astype(np.float64)))]
    w = maps.width
    dist = maps.dist.reshape(maps.n_rays, -1)
    return [
        PolygonCandidate(
            (int(i % w), int(i // w)),
            float(flat[i]),
            tuple(float(r) for r in dist[:, i]),
        )
        for i in order
    ]


def rasterize(candidate: PolygonCandidate, shape: tuple[int, int]) -> np.ndarray:
    """Sorted flat indices of in-bounds pixels covered by the polygon.

    Even-odd rule on pixel centres; a pixel that coincides with a vertex
    is always inside.
    """
    h, w = shape
    v = candidate.vertices()
    x0 = max(int(np.floor(v[:, 0].min())), 0)
    x1 = min(int(np.ceil(v[:, 0].max())), w - 1)
    y0 = max(int(np.floor(v[:, 1].min())), 0)
    y1 = min(int(np.ceil(v[:, 1].max())), h - 1)
    if x0 > x1 or y0 > y1:
        return np.zeros(0, dtype=np.int64)
    px = np.arange(x0, x1 + 1, dtype=np.float64)
    py = np.arange(y0, y1 + 1, dtype=np.float64)[None, :]
    xi, yi = v[:, 0, None], v[:, 1, None]
    prev = np.arange(-1, len(v) - 1)
    xj, yj = xi[prev], yi[prev]
    # edge k crosses row r; x_at is where, per (edge, row)
    crosses = (yi > py) != (yj > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_at = (xj - xi) * (py - yi) / (yj - yi) + xi
    x_at[~crosses] = -np.inf
    inside = (np.count_nonzero(px < x_at[:, :, None], axis=0) % 2).astype(bool)
    on_grid = (v == np.floor(v)).all(axis=1)
    for cx, cy in v[on_grid].astype(np.int64):
        if x0 <= cx <= x1 and y0 <= cy <= y1:
            inside[cy - y0, cx - x0] = True
    yy, xx = np.nonzero(inside)
    return ((yy + y0) * w + (xx + x0)).astype(np.int64)


def pixel_iou(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 and len(b) == 0:
        return 0.0
    inter = len(np.intersect1d(a, b, assume_unique=True))
    return inter / (len(a) + len(b) - inter)


def _bbox(pixels: np.ndarray, w: int):
    if len(pixels) == 0:
        return None
    ys, xs = np.divmod(pixels, w)
    return xs.min(), xs.max(), ys.min(), ys.max()


def _boxes_meet(p, q) -> bool:
    return not (p[1] < q[0] or q[1] < p[0] or p[3] < q[2] or q[3] < p[2])


def polygon_nms(
    candidates: list[PolygonCandidate],
    overlap_thresh: float = 0.4,
    shape: tuple[int, int] = None,
) -> list[CellInstance]:
    """Greedy suppression in the given (descending-score) order.

    A candidate is accepted unless its pixel-set IoU with an already
    accepted instance exceeds ``overlap_thresh``. Candidates that cover no
    in-bounds pixel are dropped.
    """
    if shape is None:
        raise ValueError("image shape is required")
    w = shape[1]
    accepted: list[tuple[np.ndarray, tuple]] = []
    out = []
    for cand in candidates:
        pix = rasterize(cand, shape)
        if len(pix) == 0:
            continue
        box = _bbox(pix, w)
        if any(
            _boxes_meet(box, abox) and pixel_iou(pix, apix) > overlap_thresh
            for apix, abox in accepted
        ):
            continue
        accepted.append((pix, box))
        pix.setflags(write=False)
        out.append(CellInstance(len(out) + 1, cand, pix, tuple(shape)))
    return out


def rle_encode(pixels: np.ndarray) -> list[list[int]]:
    """[[start, length], ...] runs over sorted flat indices."""
    pixels = np.asarray(pixels, dtype=np.int64)
    if len(pixels) == 0:
        return []
    breaks = np.flatnonzero(np.diff(pixels) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [len(pixels)]])
    return [[int(pixels[s]), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(runs) -> np.ndarray:
    if not runs:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([np.arange(s, s + n, dtype=np.int64) for s, n in runs])


def instances_to_json(instances: list[CellInstance], shape: tuple[int, int]) -> dict:
    return {
        "format": "organoquant-instances",
        "version": 1,
        "height": int(shape[0]),
        "width": int(shape[1]),
        "instances": [
            {
                "id": inst.id,
                "center": list(inst.candidate.center),
                "score": inst.candidate.score,
                "radii": list(inst.candidate.radii),
                "mean_intensity": inst.mean_intensity,
                "pixels_rle": rle_encode(inst.pixels),
            }
            for inst in instances
        ],
    }


def instances_from_json(doc: dict) -> tuple[list[CellInstance], tuple[int, int]]:
    """Inverse of :func:`instances_to_json`.

    Truth files may omit ``score``/``radii``/``center``; only ``id`` and
    ``pixels_rle`` are required.
    """
    shape = (int(doc["height"]), int(doc["width"]))
    n = shape[0] * shape[1]
    out = []
    for item in doc["instances"]:
        pix = np.unique(rle_decode(item["pixels_rle"]))
        if len(pix) and (pix[0] < 0 or pix[-1] >= n):
            raise ValueError(f"instance {item.get('id')} has pixels outside the image")
        pix.setflags(write=False)
        cand = PolygonCandidate(
            tuple(item.get("center", (0, 0))),
            float(item.get("score", 0.0)),
            tuple(item.get("radii", ())),
        )
        out.append(
            CellInstance(int(item["id"]), cand, pix, shape, item.get("mean_intensity"))
        )
    return out, shape
