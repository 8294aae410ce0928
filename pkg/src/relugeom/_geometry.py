"""Convex polygon helpers (counterclockwise vertex arrays of shape (k, 2)) and the
Chebyshev-center LP used for region feasibility."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

COLLINEAR_TOL = 1e-12


def clip_halfplane(poly: np.ndarray, a, b: float, tol: float = COLLINEAR_TOL) -> np.ndarray:
    """Intersect a convex polygon with ``{x : a . x <= b}``.

    The line is normalized first; vertices within ``tol`` of it count as on
    it. Returns an empty (0, 2) array when nothing of positive area remains.
    """
    return clip_labeled(poly, None, a, b, -1, tol)[0]


def clip_labeled(poly: np.ndarray, labels, a, b: float, label: int,
                 tol: float = COLLINEAR_TOL):
    """:func:`clip_halfplane` that also tracks edge labels.

    ``labels[k]`` names the constraint supporting edge ``poly[k] -> poly[k+1]``;
    edges created by this clip get ``label``. Returns ``(poly, labels)``.
    """
    empty = (np.empty((0, 2)), np.empty(0, dtype=np.int64))
    if labels is None:
        labels = np.full(len(poly), -1, dtype=np.int64)
    a = np.asarray(a, dtype=np.float64)
    norm = np.hypot(a[0], a[1])
    if norm == 0.0:
        return (poly, labels) if b >= 0 else empty
    a = a / norm
    b = b / norm
    if len(poly) == 0:
        return empty
    s = poly @ a - b  # > 0 outside
    s[np.abs(s) <= tol] = 0.0
    if np.all(s <= 0):
        return poly, labels
    if np.all(s >= 0):
        return empty
    out, lab = [], []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        sp, sq = s[i], s[(i + 1) % k]
        if sp <= 0:
            out.append(p)
            lab.append(label if (sp == 0 and sq > 0) else labels[i])
        if sp < 0 < sq:
            out.append(p + sp / (sp - sq) * (q - p))
            lab.append(label)
        elif sq < 0 < sp:
            out.append(p + sp / (sp - sq) * (q - p))
            lab.append(labels[i])
    return _cull(np.array(out), np.array(lab, dtype=np.int64))


def _cull(poly: np.ndarray, labels: np.ndarray, tol: float = 1e-14):
    """Drop zero-length edges; return empty if the area vanished."""
    empty = (np.empty((0, 2)), np.empty(0, dtype=np.int64))
    if len(poly) < 3:
        return empty
    keep, lab = [poly[0]], [labels[0]]
    for p, l in zip(poly[1:], labels[1:]):
        if np.max(np.abs(p - keep[-1])) > tol:
            keep.append(p)
            lab.append(l)
        else:
            lab[-1] = l  # the zero-length edge's successor carries on
    if len(keep) > 1 and np.max(np.abs(keep[0] - keep[-1])) <= tol:
        keep.pop()
        lab.pop()
    if len(keep) < 3:
        return empty
    poly = np.array(keep)
    if polygon_area(poly) <= 0.0:
        return empty
    return poly, np.array(lab, dtype=np.int64)


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return poly.mean(axis=0)
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * area)


def half_sq_dist_integral(poly: np.ndarray, y) -> float:
    """Exact ``∫_poly ½‖x − y‖² dx`` via a fan from the centroid.

    Edge-midpoint quadrature is exact for quadratics on each triangle.
    """
    if len(poly) < 3:
        return 0.0
    y = np.asarray(y, dtype=np.float64)
    c = polygon_centroid(poly)
    p = poly - y
    c = c - y
    q = np.roll(p, -1, axis=0)
    cross = (p[:, 0] - c[0]) * (q[:, 1] - c[1]) - (p[:, 1] - c[1]) * (q[:, 0] - c[0])
    areas = 0.5 * cross

    def f(z):
        return 0.5 * np.einsum("ij,ij->i", z, z)

    vals = (f((c + p) / 2) + f((p + q) / 2) + f((q + c) / 2)) / 3.0
    return float(np.dot(areas, vals))


def box_polygon(xmin, xmax, ymin, ymax) -> np.ndarray:
    return np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], dtype=np.float64)


def check_convex_ccw(poly) -> np.ndarray:
    """Validate a simple convex counterclockwise polygon with positive area."""
    poly = np.asarray(poly, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise ValueError("polygon needs at least 3 vertices in the plane")
    e = np.roll(poly, -1, axis=0) - poly
    turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if polygon_area(poly) <= 0:
        raise ValueError("polygon must be counterclockwise with positive area")
    if np.any(turn < -1e-12 * np.max(np.abs(e)) ** 2):
        raise ValueError("polygon is not convex")
    return poly


def halfplanes_of(poly: np.ndarray):
    """H-representation (G, h) with ``G x <= h`` of a convex ccw polygon."""
    e = np.roll(poly, -1, axis=0) - poly
    G = np.column_stack([e[:, 1], -e[:, 0]])  # outward normals for ccw order
    h = np.einsum("ij,ij->i", G, poly)
    return G, h


def points_in_polygon(poly: np.ndarray, X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    G, h = halfplanes_of(poly)
    scale = np.linalg.norm(G, axis=1)
    return np.all((X @ G.T - h) <= tol * scale, axis=1)


def chebyshev_center(G, h):
    """Largest ball inside ``{x : G x <= h}``.

    Returns ``(center, radius)``; a negative radius means the polyhedron is
    empty (the value is how far the most violated constraint must move).
    The polyhedron must be bounded (include box faces).
    """
    G = np.asarray(G, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    norms = np.linalg.norm(G, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero constraint normal")
    G = G / norms[:, None]
    h = h / norms
    d = G.shape[1]
    cost = np.zeros(d + 1)
    cost[-1] = -1.0  # maximize t in  G x + t <= h
    res = linprog(cost, A_ub=np.hstack([G, np.ones((len(G), 1))]), b_ub=h,
                  bounds=[(None, None)] * (d + 1), method="highs")
    if res.status != 0:
        raise RuntimeError(f"Chebyshev LP failed: {res.message}")
    return res.x[:d], float(-res.fun)
