"""Per-image values published for the 7 WT and 7 FKO organoids.

Contour counts and ratios come from the N-cad channel, cell counts and
normalized intensities from PAX6. Ratios and intensities are printed to
one decimal place.
"""
from __future__ import annotations

from .report import GroupRow

# image id -> (contour no., CR)
CONTOURS = {
    "WT1": (11, 4.5), "WT2": (11, 10.0), "WT3": (4, 3.0), "WT4": (3, 2.0),
    "WT5": (19, 18.0), "WT6": (10, 9.0), "WT7": (15, 14.0),
    "FKO1": (48, 47.0), "FKO2": (72, 17.0), "FKO3": (102, 50.0), "FKO4": (101, 24.3),
    "FKO5": (136, 44.3), "FKO6": (81, 80.0), "FKO7": (131, 20.8),
}

# image id -> (cell no., average intensity)
CELLS = {
    "WT1": (104, 100.0), "WT2": (102, 95.0), "WT3": (83, 72.6), "WT4": (89, 42.5),
    "WT5": (112, 35.1), "WT6": (67, 50.9), "WT7": (73, 68.7),
    "FKO1": (81, 21.8), "FKO2": (98, 16.5), "FKO3": (76, 16.7), "FKO4": (105, 28.0),
    "FKO5": (103, 30.1), "FKO6": (87, 2.3), "FKO7": (94, 1.0),
}


def group_of(image_id: str) -> str:
    return image_id.rstrip("0123456789")


def published_rows() -> list[GroupRow]:
    """All 14 images as report rows, WT first."""
    return [
        GroupRow(group_of(k), k, CONTOURS[k][0], CONTOURS[k][1], CELLS[k][0], CELLS[k][1])
        for k in CONTOURS
    ]
