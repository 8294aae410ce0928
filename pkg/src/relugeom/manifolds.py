"""Sampled manifolds and their rectified-linear complexity.

A polyline chart is linear rectifiable when one affine projection onto a
line is injective on it, i.e. all of its segment directions lie in an open
half-circle (half-space in 3-d). Charts of an atlas are open, so
consecutive charts overlap: they share at least the segment that contains
the junction point.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._geometry import chebyshev_center
from ._validation import DimensionError, check_points
from .complexity import network_bound
from .net import as_arch

SLACK = 1e-9
MAX_PEANO_VERTICES = 4 ** 10


@dataclass(frozen=True)
class Polyline:
    vertices: np.ndarray
    closed: bool = False
    params: np.ndarray | None = None

    def __post_init__(self):
        V = check_points(self.vertices, name="vertices")
        if V.shape[1] not in (2, 3):
            raise DimensionError("polylines live in R^2 or R^3")
        if len(V) < 2:
            raise ValueError("a polyline needs at least 2 vertices")
        V.flags.writeable = False
        object.__setattr__(self, "vertices", V)
        if np.any(np.all(self.segments() == 0.0, axis=1)):
            raise ValueError("consecutive vertices must be distinct")
        if self.params is not None:
            t = np.asarray(self.params, dtype=np.float64).reshape(-1)
            if t.shape[0] != len(V):
                raise ValueError("need one parameter per vertex")
            if np.any(np.diff(t) <= 0):
                raise ValueError("parameters must be strictly increasing")
            t.flags.writeable = False
            object.__setattr__(self, "params", t)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return len(self.vertices)

    def segments(self) -> np.ndarray:
        """Segment vectors; for closed polylines the last one returns to the start."""
        V = self.vertices
        if self.closed:
            return np.roll(V, -1, axis=0) - V
        return np.diff(V, axis=0)

    @property
    def n_segments(self) -> int:
        return len(self.vertices) if self.closed else len(self.vertices) - 1

    def directions(self) -> np.ndarray:
        S = self.segments()
        return S / np.linalg.norm(S, axis=1)[:, None]

    def length(self) -> float:
        return float(np.linalg.norm(self.segments(), axis=1).sum())

    def subpolyline(self, start: int, stop: int) -> "Polyline":
        """Segments ``start..stop-1`` (indices taken cyclically for closed curves)."""
        n = len(self.vertices)
        idx = np.arange(start, stop + 1) % n
        params = None if self.params is None or self.closed else self.params[idx]
        return Polyline(self.vertices[idx], closed=False, params=params)


@dataclass
class PointCloud:
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.points = check_points(self.points, name="points")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != len(self.points):
                raise ValueError("need one weight per point")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")
            self.weights = w

    @classmethod
    def uniform(cls, points) -> "PointCloud":
        points = check_points(points, name="points")
        return cls(points, np.full(len(points), 1.0 / len(points)))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# generators


def spiral(a: float = 1.0, b: float = 0.2, w: float = 1.0, T: float = 4 * np.pi,
           n_samples: int = 2000) -> Polyline:
    """Archimedean spiral ``(a + b θ) e^{i w θ}`` sampled at uniform θ in (0, T]."""
    if a <= 0 or b <= 0 or w <= 0 or T <= 0:
        raise ValueError("spiral constants a, b, w, T must be positive")
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    theta = T * np.arange(1, n_samples + 1) / n_samples
    r = a + b * theta
    V = np.column_stack([r * np.cos(w * theta), r * np.sin(w * theta)])
    return Polyline(V, params=theta)


def _hilbert_d2xy(order: int, d: np.ndarray):
    """Vectorized index -> cell coordinates of the order-``order`` Hilbert curve."""
    x = np.zeros_like(d)
    y = np.zeros_like(d)
    t = d.copy()
    s = 1
    while s < (1 << order):
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        # rotate the quadrant
        flip = (ry == 0) & (rx == 1)
        x = np.where(flip, s - 1 - x, x)
        y = np.where(flip, s - 1 - y, y)
        swap = ry == 0
        x, y = np.where(swap, y, x), np.where(swap, x, y)
        x = x + s * rx
        y = y + s * ry
        t //= 4
        s *= 2
    return x, y


def peano_curve(order: int, max_vertices: int = MAX_PEANO_VERTICES) -> Polyline:
    """Hilbert plane-filling polyline through the 4**order cell centers of [0,1]^2."""
    if order < 1:
        raise ValueError("order must be >= 1")
    n = 4 ** order
    if n > max_vertices:
        raise ValueError(f"order {order} needs {n} vertices, cap is {max_vertices}")
    x, y = _hilbert_d2xy(order, np.arange(n))
    side = 1 << order
    V = (np.column_stack([x, y]) + 0.5) / side
    return Polyline(V, params=np.arange(n, dtype=np.float64))


def segment(p, q) -> Polyline:
    return Polyline(np.array([p, q], dtype=np.float64))


def regular_polygon(k: int, radius: float = 1.0) -> Polyline:
    t = 2 * np.pi * np.arange(k) / k
    return Polyline(radius * np.column_stack([np.cos(t), np.sin(t)]), closed=True)


# ---------------------------------------------------------------------------
# rectifiability


def _witness_2d(D: np.ndarray):
    """Unit v with min_i <d_i, v> > SLACK, or None."""
    ang = np.sort(np.mod(np.arctan2(D[:, 1], D[:, 0]), 2 * np.pi))
    gaps = np.diff(np.append(ang, ang[0] + 2 * np.pi))
    i = int(np.argmax(gaps))
    spread = 2 * np.pi - gaps[i]  # arc occupied by the directions
    start = ang[(i + 1) % len(ang)]
    mid = start + spread / 2
    v = np.array([np.cos(mid), np.sin(mid)])
    if spread >= np.pi or np.min(D @ v) <= SLACK:
        return None
    return v


def _witness_3d(D: np.ndarray):
    d = D.shape[1]
    eye = np.eye(d)
    G = np.vstack([-D, eye, -eye])
    h = np.concatenate([np.zeros(len(D)), np.ones(2 * d)])
    center, radius = chebyshev_center(G, h)
    if radius <= SLACK:
        return None
    v = center / np.linalg.norm(center)
    if np.min(D @ v) <= SLACK:
        return None
    return v


def is_linear_rectifiable(polyline: Polyline):
    """``(True, v)`` if projecting onto ``v`` is strictly monotone along the curve."""
    D = polyline.directions()
    v = _witness_2d(D) if polyline.dim == 2 else _witness_3d(D)
    return (v is not None), v


@dataclass
class RectifiableCover:
    """Segment intervals ``[start, stop)`` (cyclic for closed curves) with witnesses."""

    intervals: list[tuple[int, int]]
    witnesses: list[np.ndarray] = field(default_factory=list)
    n_segments: int = 0
    closed: bool = False

    def __len__(self):
        return len(self.intervals)

    def covered_segments(self) -> set[int]:
        out = set()
        for start, stop in self.intervals:
            out.update(i % self.n_segments for i in range(start, stop))
        return out


class _RunGrower:
    """Incrementally test whether a run of 2-d directions fits an open half-circle.

    Turning angles between consecutive directions are unwrapped; the run fits
    iff the unwrapped range stays below π (minus the slack margin).
    """

    def __init__(self, D: np.ndarray):
        self.ang = np.arctan2(D[:, 1], D[:, 0])
        n = len(D)
        turn = np.diff(np.append(self.ang, self.ang[0]))
        self.turn = (turn + np.pi) % (2 * np.pi) - np.pi  # turn[i]: segment i -> i+1
        self.reversal = np.isclose(np.abs(self.turn), np.pi, rtol=0, atol=1e-15)
        self.n = n
        self.limit = np.pi - 2 * SLACK

    def furthest(self, start: int, cap: int) -> int:
        """Largest ``e`` (``start <= e < start + cap``) such that segments start..e fit."""
        lo = hi = cur = 0.0
        e = start
        while e + 1 < start + cap:
            j = e % self.n
            if self.reversal[j]:
                break
            cur += self.turn[j]
            lo, hi = min(lo, cur), max(hi, cur)
            if hi - lo >= self.limit:
                break
            e += 1
        return e


def _furthest_generic(polyline: Polyline, D: np.ndarray, start: int, cap: int) -> int:
    e = start
    n = len(D)
    while e + 1 < start + cap:
        idx = np.arange(start, e + 2) % n
        if _witness_3d(D[idx]) is None:
            break
        e += 1
    return e


def _greedy(furthest, start: int, total: int, closed: bool):
    """Greedy chain of overlapping runs; returns list of inclusive (s, e)."""
    runs = []
    s = start
    end = start + total  # open curve: need e == total - 1; closed: reach start + total
    target = end - 1 if not closed else end
    cap = total + 1 if closed else total
    while True:
        e = furthest(s, min(cap, target - s + 1))
        runs.append((s, e))
        if e >= target:
            return runs
        # next chart overlaps inside segment e; a reversal at e forbids any overlap
        s = e if e > s else e + 1


def rl_complexity_polyline(polyline: Polyline):
    """Fewest overlapping linear-rectifiable arcs covering the polyline.

    Greedy extension of each arc is optimal on a path because rectifiability
    passes to sub-arcs. Closed curves are minimized over every start segment.
    Returns ``(count, RectifiableCover)``.
    """
    D = polyline.directions()
    n = len(D)
    if polyline.dim == 2:
        grower = _RunGrower(D)
        furthest = grower.furthest
    else:
        def furthest(s, cap):
            return _furthest_generic(polyline, D, s, cap)

    if not polyline.closed:
        runs = _greedy(furthest, 0, n, closed=False)
    else:
        runs = None
        for s in range(n):
            cand = _greedy(furthest, s, n, closed=True)
            if runs is None or len(cand) < len(runs):
                runs = cand
    intervals = [(s, e + 1) for s, e in runs]
    witnesses = []
    for s, e in runs:
        idx = np.arange(s, e + 1) % n
        v = _witness_2d(D[idx]) if polyline.dim == 2 else _witness_3d(D[idx])
        witnesses.append(v)
    cover = RectifiableCover(intervals, witnesses, n, polyline.closed)
    return len(intervals), cover


def exhaustive_min_cover(polyline: Polyline) -> int:
    """Minimum overlapping-run cover by breadth-first search (open polylines).

    Independent of the greedy scan: every rectifiable run ``[s, e]`` is
    precomputed from scratch and runs are chained in all possible ways.
    """
    if polyline.closed:
        raise ValueError("exhaustive search is for open polylines")
    D = polyline.directions()
    n = len(D)
    ok = np.zeros((n, n), dtype=bool)
    for s in range(n):
        for e in range(s, n):
            ok[s, e] = (_witness_2d(D[s:e + 1]) if polyline.dim == 2
                        else _witness_3d(D[s:e + 1])) is not None
    # state: last covered segment index; a new run must start at or before it
    best = {-1: 0}
    frontier = [-1]
    depth = 0
    while frontier:
        depth += 1
        nxt = []
        for last in frontier:
            for s in range(0, max(last, 0) + 1 if last >= 0 else 1):
                if last >= 0 and s > last:
                    continue
                for e in range(max(s, last + 1), n):
                    if not ok[s, e]:
                        continue
                    if e == n - 1:
                        return depth
                    if e not in best:
                        best[e] = depth
                        nxt.append(e)
        frontier = nxt
    raise ValueError("polyline cannot be covered (segment reversal)")


def direction_coverage(polyline: Polyline):
    """Union of tangent directions swept along the curve, on the projective line.

    Each vertex sweeps the turn between its two segments. Returns
    ``(covered, fraction)`` where ``covered`` means every line direction in
    [0, π) is attained.
    """
    if polyline.dim != 2:
        raise DimensionError("direction coverage is defined for plane curves")
    D = polyline.directions()
    ang = np.arctan2(D[:, 1], D[:, 0])
    n = len(D)
    n_turns = n if polyline.closed else n - 1
    arcs = []
    for i in range(n_turns):
        a0 = ang[i]
        t = (ang[(i + 1) % n] - a0 + np.pi) % (2 * np.pi) - np.pi
        if np.isclose(abs(t), np.pi, rtol=0, atol=1e-15):
            return True, 1.0  # a cusp turns through every direction
        lo, hi = (a0, a0 + t) if t >= 0 else (a0 + t, a0)
        arcs.append((lo, hi))
    for a in ang:
        arcs.append((a, a))
    # map onto [0, π), splitting arcs that wrap
    pieces = []
    for lo, hi in arcs:
        length = hi - lo
        if length >= np.pi:
            return True, 1.0
        start = lo % np.pi
        stop = start + length
        if stop <= np.pi:
            pieces.append((start, stop))
        else:
            pieces.append((start, np.pi))
            pieces.append((0.0, stop - np.pi))
    pieces.sort()
    total = 0.0
    gap_free = pieces[0][0] <= 1e-12
    cur_lo, cur_hi = pieces[0]
    for lo, hi in pieces[1:]:
        if lo <= cur_hi + 1e-12:
            cur_hi = max(cur_hi, hi)
        else:
            total += cur_hi - cur_lo
            gap_free = False
            cur_lo, cur_hi = lo, hi
    total += cur_hi - cur_lo
    covered = gap_free and cur_hi >= np.pi - 1e-12
    return bool(covered), float(min(total / np.pi, 1.0))


class Verdict(enum.Enum):
    PROVABLY_NOT_ENCODABLE = "ProvablyNotEncodable"
    NOT_DECIDED_BY_BOUND = "NotDecidedByBound"

    def __str__(self):
        return self.value


def can_encode(arch, polyline: Polyline) -> Verdict:
    """Compare the curve's complexity with the architecture's piece bound.

    Only the negative direction is decidable: more charts needed than the
    network can have pieces means no parameter setting encodes the curve.
    """
    arch = as_arch(arch)
    if arch.input_dim != polyline.dim:
        raise DimensionError(f"network input dim {arch.input_dim} != curve dim {polyline.dim}")
    if arch.output_dim != 1:
        raise DimensionError("curve encoders need a 1-d latent space")
    complexity, _ = rl_complexity_polyline(polyline)
    if complexity > network_bound(arch).value:
        return Verdict.PROVABLY_NOT_ENCODABLE
    return Verdict.NOT_DECIDED_BY_BOUND


def verdict_report(arch, polyline: Polyline) -> dict:
    complexity, _ = rl_complexity_polyline(polyline)
    bound = network_bound(arch)
    return {
        "complexity": complexity,
        "bound": str(bound.value),
        "verdict": str(can_encode(arch, polyline)),
    }


# ---------------------------------------------------------------------------
# point clouds and files


def sample_polyline(polyline: Polyline, n: int, seed: int = 0) -> PointCloud:
    """``n`` points uniform in arclength along the curve."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    S = polyline.segments()
    lengths = np.linalg.norm(S, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = rng.uniform(0.0, cum[-1], size=n)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(S) - 1)
    frac = (s - cum[idx]) / lengths[idx]
    pts = polyline.vertices[idx] + frac[:, None] * S[idx]
    return PointCloud.uniform(pts)


@dataclass
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray  # (m, 3) triangle indices

    def sample_surface(self, n: int, seed: int = 0) -> PointCloud:
        """Area-uniform samples on the triangles."""
        rng = np.random.default_rng(seed)
        tri = self.vertices[self.faces]
        area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        pick = rng.choice(len(tri), size=n, p=area / area.sum())
        u, v = rng.uniform(size=(2, n))
        flip = u + v > 1
        u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
        t = tri[pick]
        return PointCloud.uniform(t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0])
                                  + v[:, None] * (t[:, 2] - t[:, 0]))


def _off_tokens(path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line


def read_off(path) -> Mesh:
    lines = _off_tokens(path)
    try:
        header = next(lines)
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    rest = header[3:].split() if header.startswith("OFF") else None
    if rest is None:
        raise ValueError(f"{path}: missing OFF header")
    try:
        counts = rest if rest else next(lines).split()
        n_vert, n_face = int(counts[0]), int(counts[1])
        verts = np.array([[float(v) for v in next(lines).split()[:3]] for _ in range(n_vert)])
        faces = []
        for _ in range(n_face):
            tok = [int(v) for v in next(lines).split()]
            k, idx = tok[0], tok[1:1 + tok[0]]
            if len(idx) != k:
                raise ValueError
            # fan-triangulate polygons
            faces.extend((idx[0], idx[i], idx[i + 1]) for i in range(1, k - 1))
    except (StopIteration, ValueError, IndexError):
        raise ValueError(f"{path}: malformed OFF file") from None
    if n_vert == 0:
        raise ValueError(f"{path}: mesh has no vertices")
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= n_vert):
        raise ValueError(f"{path}: face index out of range")
    return Mesh(verts.reshape(-1, 3), faces)


def load_off(path) -> PointCloud:
    """Vertices of an OFF mesh as a uniformly weighted cloud."""
    return PointCloud.uniform(read_off(path).vertices)


def write_off(path, points, faces=None) -> None:
    P = check_points(points, 3, name="points")
    faces = np.empty((0, 3), dtype=np.int64) if faces is None else np.asarray(faces)
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(P)} {len(faces)} 0\n")
        for p in P:
            fh.write(" ".join(repr(float(v)) for v in p) + "\n")
        for f in faces:
            fh.write(f"{len(f)} " + " ".join(str(int(i)) for i in f) + "\n")


def write_points_csv(path, points) -> None:
    P = check_points(points, name="points")
    with open(path, "w") as fh:
        for p in P:
            fh.write(",".join(repr(float(v)) for v in p) + "\n")


def read_points_csv(path) -> np.ndarray:
    P = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if P.size == 0:
        raise ValueError(f"{path}: no points")
    return P


def height_field_mesh(n_side: int = 40, amplitude: float = 0.3) -> Mesh:
    """A wavy square patch z = A sin(πx) cos(πy) over [-1, 1]^2, triangulated."""
    t = np.linspace(-1.0, 1.0, n_side)
    X, Y = np.meshgrid(t, t, indexing="ij")
    Z = amplitude * np.sin(np.pi * X) * np.cos(np.pi * Y)
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    faces = []
    for i in range(n_side - 1):
        for j in range(n_side - 1):
            a, b = i * n_side + j, (i + 1) * n_side + j
            faces.append((a, b, b + 1))
            faces.append((a, b + 1, a + 1))
    return Mesh(verts, np.array(faces, dtype=np.int64))
