"""Planar polygon / polyline primitives used by the DOA boundary."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .integrator import Window


def shoelace_area(poly: np.ndarray) -> float:
    """Unsigned area of a closed polygon given as an (n, 2) vertex array."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _edges(poly: np.ndarray):
    a = np.asarray(poly, dtype=float)
    b = np.roll(a, -1, axis=0)
    return a, b


def distance_to_polygon(poly: np.ndarray, x: float, y: float) -> float:
    """Euclidean distance from (x, y) to the polygon outline."""
    a, b = _edges(poly)
    ab = b - a
    ap = np.array([x, y]) - a
    denom = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(denom > 0, np.einsum("ij,ij->i", ap, ab) / denom, 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.min(np.hypot(closest[:, 0] - x, closest[:, 1] - y)))


def point_in_polygon(poly: np.ndarray, x: float, y: float, tol: float = 1e-9) -> bool:
    """Even-odd ray casting; points within ``tol`` of an edge count as inside."""
    a, b = _edges(poly)
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddle = (ay > y) != (by > y)
    with np.errstate(invalid="ignore", divide="ignore"):
        xcross = ax + (y - ay) * (bx - ax) / (by - ay)
    crossings = int(np.count_nonzero(straddle & (x < xcross)))
    if crossings % 2 == 1:
        return True
    return distance_to_polygon(poly, x, y) <= tol


def points_in_polygon(poly: np.ndarray, pts: np.ndarray, tol: float = 1e-9,
                      chunk: int = 2048) -> np.ndarray:
    """Vectorised :func:`point_in_polygon` over an (n, 2) array of points."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    a, b = _edges(poly)
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    out = np.empty(len(pts), dtype=bool)
    for lo in range(0, len(pts), chunk):
        x = pts[lo:lo + chunk, 0:1]
        y = pts[lo:lo + chunk, 1:2]
        straddle = (ay > y) != (by > y)
        with np.errstate(invalid="ignore", divide="ignore"):
            xcross = ax + (y - ay) * (bx - ax) / (by - ay)
        out[lo:lo + chunk] = np.count_nonzero(straddle & (x < xcross), axis=1) % 2 == 1
    for i in np.nonzero(~out)[0]:
        out[i] = distance_to_polygon(poly, pts[i, 0], pts[i, 1]) <= tol
    return out


def segment_intersection(p1, p2, q1, q2) -> Optional[float]:
    """Parameter s in [0, 1] along p1->p2 where it meets segment q1->q2, else None."""
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))
    r = p2 - p1
    s = q2 - q1
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0.0:
        return None
    qp = q1 - p1
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return float(t)
    return None


def _segments_cross(p1, p2, others_a, others_b) -> np.ndarray:
    """Proper crossings of segment p1-p2 with each segment others_a[i]-others_b[i]."""
    r = p2 - p1
    s = others_b - others_a
    denom = r[0] * s[:, 1] - r[1] * s[:, 0]
    qp = others_a - p1
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
        u = (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / denom
    eps = 1e-12
    return (denom != 0.0) & (t > eps) & (t < 1 - eps) & (u > eps) & (u < 1 - eps)


def polyline_self_intersects(line: np.ndarray, closed: bool = False) -> bool:
    """True if any two non-adjacent segments of the polyline cross."""
    pts = np.asarray(line, dtype=float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    a, b = pts[:-1], pts[1:]
    n = len(a)
    for i in range(n - 2):
        hits = _segments_cross(a[i], b[i], a[i + 2:], b[i + 2:])
        if closed and i == 0:
            hits[-1] = False
        if hits.any():
            return True
    return False


def polylines_cross(first: np.ndarray, second: np.ndarray) -> bool:
    a1, b1 = first[:-1], first[1:]
    a2, b2 = np.asarray(second[:-1], dtype=float), np.asarray(second[1:], dtype=float)
    for i in range(len(a1)):
        if _segments_cross(a1[i], b1[i], a2, b2).any():
            return True
    return False


def clip_to_window(line: np.ndarray, window: Window) -> tuple[np.ndarray, bool]:
    """Truncate a polyline at its first exit from ``window``.

    Returns the clipped polyline (ending exactly on the window edge when an exit
    occurs) and whether it reached the edge.
    """
    pts = np.asarray(line, dtype=float)
    inside = ((window.delta_min <= pts[:, 0]) & (pts[:, 0] <= window.delta_max)
              & (window.domega_min <= pts[:, 1]) & (pts[:, 1] <= window.domega_max))
    if inside.all():
        return pts.copy(), False
    k = int(np.argmin(inside))
    if k == 0:
        raise ValueError("polyline starts outside the window")
    p, q = pts[k - 1], pts[k]
    frac = 1.0
    for lo, hi, pi, qi in ((window.delta_min, window.delta_max, p[0], q[0]),
                           (window.domega_min, window.domega_max, p[1], q[1])):
        if qi > hi:
            frac = min(frac, (hi - pi) / (qi - pi))
        elif qi < lo:
            frac = min(frac, (lo - pi) / (qi - pi))
    edge = p + frac * (q - p)
    edge[0] = min(max(edge[0], window.delta_min), window.delta_max)
    edge[1] = min(max(edge[1], window.domega_min), window.domega_max)
    return np.vstack([pts[:k], edge]), True
