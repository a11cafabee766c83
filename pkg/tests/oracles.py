"""Independent reference implementations used only by the tests.

Each oracle takes a different route from the library code it checks:
plain-Python loops, exact rationals, set arithmetic.
"""
from collections import deque
from fractions import Fraction
import math


def flood_fill_components(mask):
    """8-connected components by BFS, numbered in raster order of first pixel.

    Returns (labels as list of lists, list of pixel sets).
    """
    h = len(mask)
    w = len(mask[0]) if h else 0
    labels = [[0] * w for _ in range(h)]
    comps = []
    for y in range(h):
        for x in range(w):
            if mask[y][x] and not labels[y][x]:
                k = len(comps) + 1
                labels[y][x] = k
                q = deque([(x, y)])
                pix = set()
                while q:
                    cx, cy = q.popleft()
                    pix.add((cx, cy))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            nx, ny = cx + dx, cy + dy
                            if 0 <= nx < w and 0 <= ny < h and mask[ny][nx] and not labels[ny][nx]:
                                labels[ny][nx] = k
                                q.append((nx, ny))
                comps.append(pix)
    return labels, comps


def filtered_components(mask, min_area):
    """Flood-fill oracle with small components dropped and renumbered."""
    _, comps = flood_fill_components(mask)
    h = len(mask)
    w = len(mask[0]) if h else 0
    kept = [c for c in comps if len(c) >= min_area]
    labels = [[0] * w for _ in range(h)]
    for k, c in enumerate(kept, 1):
        for x, y in c:
            labels[y][x] = k
    return labels, kept


def erode_dilate_open(mask, r):
    """Opening by explicit neighbourhood loops, outside = background."""
    h, w = len(mask), len(mask[0])

    def at(m, x, y):
        return 0 <= x < w and 0 <= y < h and m[y][x]

    er = [[all(at(mask, x + dx, y + dy) for dx in range(-r, r + 1) for dy in range(-r, r + 1))
           for x in range(w)] for y in range(h)]
    return [[any(at(er, x + dx, y + dy) for dx in range(-r, r + 1) for dy in range(-r, r + 1))
             for x in range(w)] for y in range(h)]


def otsu_scan(values):
    """Exhaustive between-class variance scan with exact rationals.

    Uses the textbook w0*w1*(mu0-mu1)^2 form; lowest t wins ties.
    """
    n = len(values)
    best_t, best = None, Fraction(-1)
    for t in range(255):
        c0 = [v for v in values if v <= t]
        c1 = [v for v in values if v > t]
        if not c0 or not c1:
            continue
        w0, w1 = Fraction(len(c0), n), Fraction(len(c1), n)
        mu0, mu1 = Fraction(sum(c0), len(c0)), Fraction(sum(c1), len(c1))
        score = w0 * w1 * (mu0 - mu1) ** 2
        if score > best:
            best_t, best = t, score
    return best_t


def point_in_polygon(px, py, verts):
    """Crossing-number test for one point, with the vertex-coincidence rule."""
    for vx, vy in verts:
        if vx == px and vy == py:
            return True
    inside = False
    n = len(verts)
    for i in range(n):
        xi, yi = verts[i]
        xj, yj = verts[i - 1]
        if (yi > py) != (yj > py):
            if px < (xj - xi) * (py - yi) / (yj - yi) + xi:
                inside = not inside
    return inside


def raster_set(candidate, shape):
    h, w = shape
    verts = [(float(x), float(y)) for x, y in candidate.vertices()]
    return {
        (x, y)
        for y in range(h)
        for x in range(w)
        if point_in_polygon(float(x), float(y), verts)
    }


def set_iou(a, b):
    if not a and not b:
        return 0.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def greedy_nms_oracle(candidates, thresh, shape):
    """Pick-best-then-discard NMS over a precomputed pairwise IoU matrix.

    ``candidates`` must already be in priority order. Returns indices kept.
    """
    sets = [raster_set(c, shape) for c in candidates]
    n = len(sets)
    iou = [[set_iou(sets[i], sets[j]) for j in range(n)] for i in range(n)]
    remaining = [i for i in range(n) if sets[i]]
    kept = []
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        remaining = [j for j in remaining if iou[best][j] <= thresh]
    return kept


def exact_mean_std(values, ddof=1):
    """Two-pass mean and std with exact rational accumulation."""
    vals = [Fraction(v) for v in values]
    n = len(vals)
    mean = sum(vals) / n
    if n == 1:
        return float(mean), 0.0
    var = sum((v - mean) ** 2 for v in vals) / (n - ddof)
    return float(mean), math.sqrt(var)


def ray_march(mask, x, y, angle):
    """Unit steps along a ray until the pixel leaves the 8-connected blob of (x, y)."""
    labels, _ = flood_fill_components(mask)
    h, w = len(mask), len(mask[0])
    own = labels[y][x]
    t = 0
    while True:
        nx = math.floor(x + (t + 1) * math.cos(angle) + 0.5)
        ny = math.floor(y + (t + 1) * math.sin(angle) + 0.5)
        if not (0 <= nx < w and 0 <= ny < h) or labels[ny][nx] != own:
            return t
        t += 1
