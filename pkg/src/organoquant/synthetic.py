"""Deterministic synthetic organoid planes for tests and demo runs.

WT-like N-cad planes carry one continuous ring; MT-like planes carry
many small disconnected annuli plus a couple of large ones. PAX6 planes
carry non-overlapping disk cells whose brightness separates the groups.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .imaging import ChannelImage
from .ingest import write_fixture

__all__ = [
    "MARKERS",
    "DEFAULT_MAPPING",
    "ring_plane",
    "fragments_plane",
    "cells_plane",
    "write_fixture_set",
]

MARKERS = ("N-cad", "PAX6", "E-cad", "DAPI")
DEFAULT_MAPPING = {m: i for i, m in enumerate(MARKERS)}

SIZE = 384
BACKGROUND = 1000
SIGNAL = 30000


def _grid(size: int):
    yy, xx = np.mgrid[0:size, 0:size]
    return xx, yy


def _annulus(xx, yy, cx, cy, r_in, r_out):
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    return (d2 <= r_out ** 2) & (d2 >= r_in ** 2)


def _render(shape_mask: np.ndarray, level: int, rng, salt: int = 25) -> np.ndarray:
    img = rng.normal(BACKGROUND, 150, shape_mask.shape)
    img[shape_mask] = rng.normal(level, 800, int(shape_mask.sum()))
    # isolated specks, removed by a radius-1 opening
    h, w = shape_mask.shape
    for _ in range(salt):
        x, y = rng.integers(2, w - 2), rng.integers(2, h - 2)
        if not shape_mask[y - 2:y + 3, x - 2:x + 3].any():
            img[y, x] = level
    return np.clip(np.rint(img), 0, 65535).astype(np.uint16)


def ring_plane(seed: int = 0, size: int = SIZE, extra_blobs: int = 0, marker: str = "N-cad"):
    """One continuous bright ring, optionally with a few small solid blobs.

    Returns ``(image, component_count)``.
    """
    rng = np.random.default_rng(seed)
    xx, yy = _grid(size)
    c = size / 2
    mask = _annulus(xx, yy, c, c, size * 0.30, size * 0.30 + 9)
    for k in range(extra_blobs):
        bx = size * 0.5 + (k - (extra_blobs - 1) / 2) * 30
        mask |= _annulus(xx, yy, bx, c, 0, 6)
    return ChannelImage(_render(mask, SIGNAL, rng), 16, marker), 1 + extra_blobs


def fragments_plane(
    n: int = 48, n_large: int = 2, seed: int = 0, size: int = SIZE, marker: str = "N-cad"
):
    """``n`` disjoint annuli, ``n_large`` of them big enough to exceed 200
    boundary points and the rest small. Returns ``(image, n)``."""
    if not 0 <= n_large <= 2 or n < n_large:
        raise ValueError("need 0 <= n_large <= 2 <= n")
    rng = np.random.default_rng(seed)
    xx, yy = _grid(size)
    mask = np.zeros((size, size), dtype=bool)
    for k in range(n_large):
        mask |= _annulus(xx, yy, 60 + 110 * k, 60, 38, 45)
    spacing = 26
    slots = [
        (x, y)
        for y in range(130, size - 14, spacing)
        for x in range(16, size - 14, spacing)
    ]
    n_small = n - n_large
    if n_small > len(slots):
        raise ValueError(f"at most {len(slots) + n_large} fragments fit")
    chosen = sorted(rng.choice(len(slots), size=n_small, replace=False))
    for i in chosen:
        x, y = slots[i]
        x += rng.integers(-2, 3)
        y += rng.integers(-2, 3)
        mask |= _annulus(xx, yy, x, y, 3.5, 9)
    return ChannelImage(_render(mask, SIGNAL, rng), 16, marker), n


def cells_plane(
    n_cells: int = 40,
    brightness: int = 40000,
    seed: int = 0,
    size: int = SIZE,
    radius: tuple[int, int] = (6, 9),
    marker: str = "PAX6",
):
    """Non-overlapping disk cells of a given mean 16-bit brightness.

    Returns ``(image, truth)`` where ``truth`` is a list of sorted flat
    pixel-index arrays, one per cell.
    """
    rng = np.random.default_rng(seed)
    xx, yy = _grid(size)
    placed: list[tuple[float, float, int]] = []
    tries = 0
    while len(placed) < n_cells:
        tries += 1
        if tries > 100000:
            raise ValueError("could not place all cells")
        r = int(rng.integers(radius[0], radius[1] + 1))
        x = int(rng.integers(r + 3, size - r - 3))
        y = int(rng.integers(r + 3, size - r - 3))
        if all((x - px) ** 2 + (y - py) ** 2 > (r + pr + 4) ** 2 for px, py, pr in placed):
            placed.append((x, y, r))
    mask = np.zeros((size, size), dtype=bool)
    truth = []
    for x, y, r in placed:
        disk = _annulus(xx, yy, x, y, 0, r)
        mask |= disk
        truth.append(np.flatnonzero(disk.ravel()))
    return ChannelImage(_render(mask, brightness, rng), 16, marker), truth


def _filler(seed: int, marker: str) -> ChannelImage:
    rng = np.random.default_rng(seed)
    img = rng.normal(BACKGROUND, 150, (SIZE, SIZE))
    return ChannelImage(np.clip(np.rint(img), 0, 65535).astype(np.uint16), 16, marker)


def write_fixture_set(out_dir, n_per_group: int = 3, seed: int = 0) -> dict:
    """Write WT-like and FKO-like four-channel containers plus a run config.

    Returns the config document (also written as ``config.json``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = []
    for g, name in enumerate(("WT", "FKO")):
        files = []
        for i in range(n_per_group):
            s = seed + 100 * g + i
            if name == "WT":
                ncad, _ = ring_plane(seed=s, extra_blobs=i % 3)
                pax6, truth = cells_plane(40 + i, 40000, seed=s)
            else:
                ncad, _ = fragments_plane(48 + 6 * i, seed=s)
                pax6, truth = cells_plane(40 + i, 14000, seed=s)
            planes = {"N-cad": ncad, "PAX6": pax6}
            ordered = [
                planes.get(m) or _filler(s * 10 + j, m) for j, m in enumerate(MARKERS)
            ]
            path = out / f"{name}{i + 1}.czi"
            path.write_bytes(write_fixture(ordered))
            truth_doc = {
                "format": "organoquant-instances",
                "version": 1,
                "height": SIZE,
                "width": SIZE,
                "instances": [
                    {"id": k + 1, "pixels_rle": _rle(t)} for k, t in enumerate(truth)
                ],
            }
            (out / f"{name}{i + 1}.truth.json").write_text(json.dumps(truth_doc) + "\n")
            files.append(path.name)
        groups.append({"name": name, "files": files})
    config = {"groups": groups, "marker_mapping": dict(DEFAULT_MAPPING)}
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    return config


def _rle(pixels):
    from .cells.polygons import rle_encode

    return rle_encode(pixels)
