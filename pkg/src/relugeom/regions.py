"""Linear regions (cells) a ReLU network induces on a bounding box.

Exact enumeration subdivides the box layer by layer: inside a cell whose
pattern prefix is fixed, every neuron of the next layer has an affine
pre-activation, i.e. a hyperplane that may split the cell. Children are kept
only if they contain a ball of radius greater than ``tol`` (certified by the
Chebyshev-center LP), which suppresses floating-point slivers.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _geometry
from ._geometry import chebyshev_center
from ._validation import DimensionError, check_points
from .complexity import network_bound
from .net import ActivationPattern, Mlp, activation_patterns

logger = logging.getLogger(__name__)

MAX_EXACT_DIM = 3


@dataclass(frozen=True)
class Halfspace:
    """``{x : normal . x <= offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float


def as_box(box, dim: int | None = None) -> np.ndarray:
    """Box as a (d, 2) array of ``[lo, hi]`` rows.

    Accepts ``[(lo, hi), ...]`` or the flat CLI form ``xmin,xmax,ymin,ymax``.
    """
    if isinstance(box, str):
        box = [float(v) for v in box.split(",")]
    box = np.asarray(box, dtype=np.float64)
    if box.ndim == 1:
        if box.size % 2:
            raise ValueError("flat box needs lo,hi pairs")
        box = box.reshape(-1, 2)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ValueError("box must be a sequence of (lo, hi) pairs")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must have hi > lo on every axis")
    if dim is not None and box.shape[0] != dim:
        raise DimensionError(f"box has {box.shape[0]} axes, network input has {dim}")
    return box


def _box_constraints(box):
    d = box.shape[0]
    eye = np.eye(d)
    G = np.vstack([eye, -eye])
    h = np.concatenate([box[:, 1], -box[:, 0]])
    return G, h


@dataclass
class LinearRegion:
    pattern: ActivationPattern
    G: np.ndarray  # constraint rows, unit norm, G x <= h
    h: np.ndarray
    A: np.ndarray  # output = A x + c on the region
    c: np.ndarray
    center: np.ndarray
    radius: float

    @property
    def constraints(self) -> list[Halfspace]:
        return [Halfspace(g, float(b)) for g, b in zip(self.G, self.h)]

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all(X @ self.G.T - self.h <= tol, axis=1)

    def affine(self, X) -> np.ndarray:
        return np.atleast_2d(X) @ self.A.T + self.c

    def polygon(self, box) -> np.ndarray:
        """Vertices (ccw) of a 2-d region."""
        if self.G.shape[1] != 2:
            raise DimensionError("polygon() needs a 2-d region")
        box = as_box(box, 2)
        poly = _geometry.box_polygon(*box.reshape(-1))
        for g, b in zip(self.G, self.h):
            poly = _geometry.clip_halfplane(poly, g, b)
        return poly

    def sample_interior(self, n: int, rng, margin: float = 0.0) -> np.ndarray:
        """Hit-and-run samples strictly inside the region.

        ``margin`` shrinks every constraint; the default stays a small
        fraction of the inscribed radius away from the boundary.
        """
        if margin <= 0.0:
            margin = 1e-3 * self.radius
        x = self.center.copy()
        d = x.shape[0]
        out = np.empty((n, d))
        for i in range(n):
            for _ in range(3):
                u = rng.standard_normal(d)
                u /= np.linalg.norm(u)
                gu = self.G @ u
                slack = self.h - margin - self.G @ x
                with np.errstate(divide="ignore"):
                    steps = slack / gu
                hi = np.min(steps[gu > 0], initial=np.inf)
                lo = np.max(steps[gu < 0], initial=-np.inf)
                if np.isfinite(lo) and np.isfinite(hi) and hi > lo:
                    x = x + rng.uniform(lo, hi) * u
            out[i] = x
        return out


@dataclass
class CellDecomposition:
    mlp: Mlp
    box: np.ndarray
    regions: list[LinearRegion]
    tol: float
    degenerate: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.regions)

    def __len__(self):
        return len(self.regions)

    def pattern_index(self) -> dict[tuple, int]:
        return {r.pattern.bits: i for i, r in enumerate(self.regions)}

    def labels(self, X) -> np.ndarray:
        """Region index of each sample by pattern lookup; -1 if no region has it."""
        index = self.pattern_index()
        P = activation_patterns(self.mlp, X)
        return np.array([index.get(tuple(row), -1) for row in P.tolist()], dtype=np.int64)

    def to_dict(self) -> dict:
        bound = network_bound(self.mlp.arch)
        return {
            "count": self.count,
            "bound": str(bound.value),
            "bound_log10": bound.log10,
            "within_bound": self.count <= bound.value,
            "box": self.box.tolist(),
            "tol": self.tol,
            "degenerate": list(self.degenerate),
        }

    def write_csv(self, path) -> None:
        """One row per 2-d cell: pattern id, then x1,y1,x2,y2,..."""
        with open(path, "w") as fh:
            fh.write("pattern,vertices\n")
            for region in self.regions:
                poly = region.polygon(self.box)
                coords = ",".join(repr(float(v)) for v in poly.reshape(-1))
                fh.write(f"{region.pattern.key()},{coords}\n")


@dataclass
class _Piece:
    bits: list[bool]
    G: np.ndarray
    h: np.ndarray
    center: np.ndarray
    radius: float
    M: np.ndarray  # current layer pre-activations: M x + m
    m: np.ndarray


def _child(piece: _Piece, g, b):
    G = np.vstack([piece.G, g])
    h = np.append(piece.h, b)
    center, radius = chebyshev_center(G, h)
    return G, h, center, radius


def _split(piece: _Piece, j: int, tol: float, degenerate: list):
    """Children ``(bit, G, h, center, radius)`` of ``piece`` cut by neuron ``j``."""
    a = piece.M[j]
    b = piece.m[j]
    norm = np.linalg.norm(a)
    if norm <= 1e-14:
        # pre-activation constant on the piece
        return [(bool(b > 0), piece.G, piece.h, piece.center, piece.radius)]
    a_n, b_n = a / norm, b / norm
    # active:   a.x + b > 0   <=>  -a_n . x <= b_n
    # inactive: a.x + b <= 0  <=>   a_n . x <= -b_n
    side = {True: (-a_n, b_n), False: (a_n, -b_n)}
    dist = float(a_n @ piece.center + b_n)
    near = bool(dist > 0)
    out = []
    g_far, hb_far = side[not near]
    G_far, h_far, c_far, r_far = _child(piece, g_far, hb_far)
    g, hb = side[near]
    if r_far < 0:
        # plane misses the piece entirely: the constraint would be redundant
        out.append((near, piece.G, piece.h, piece.center, piece.radius))
    elif abs(dist) >= piece.radius:
        # plane misses the inscribed ball: the near child keeps it
        out.append((near, np.vstack([piece.G, g]), np.append(piece.h, hb),
                    piece.center, piece.radius))
    else:
        G, h, c, r = _child(piece, g, hb)
        if r > tol:
            out.append((near, G, h, c, r))
    if r_far > tol:
        out.append((not near, G_far, h_far, c_far, r_far))
    if not out:
        degenerate.append(
            f"cell {''.join('1' if v else '0' for v in piece.bits)} has no child with "
            f"slack > {tol:g} at neuron {j}; kept on the center's side")
        g, hb = side[near]
        out.append((near, np.vstack([piece.G, g]), np.append(piece.h, hb),
                    piece.center, piece.radius))
    return out


def enumerate_regions(mlp: Mlp, box, tol: float = 1e-7) -> CellDecomposition:
    """Exact cell decomposition of ``mlp`` restricted to ``box`` (input dim <= 3)."""
    d = mlp.arch.input_dim
    if d > MAX_EXACT_DIM:
        raise DimensionError(f"exact enumeration supports input dim <= {MAX_EXACT_DIM}, got {d}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    box = as_box(box, d)
    G, h = _box_constraints(box)
    center = box.mean(axis=1)
    radius = float(np.min(box[:, 1] - box[:, 0]) / 2)
    pieces = [_Piece([], G, h, center, radius, mlp.weights[0], mlp.biases[0])]
    degenerate: list[str] = []

    n_hidden = mlp.n_layers - 1
    for layer in range(n_hidden):
        width = mlp.arch.widths[layer + 1]
        for j in range(width):
            new = []
            for piece in pieces:
                for bit, G2, h2, c2, r2 in _split(piece, j, tol, degenerate):
                    new.append(_Piece(piece.bits + [bit], G2, h2, c2, r2, piece.M, piece.m))
            pieces = new
        W_next, b_next = mlp.weights[layer + 1], mlp.biases[layer + 1]
        for piece in pieces:
            mask = np.array(piece.bits[-width:], dtype=np.float64)
            piece.M = W_next @ (mask[:, None] * piece.M)
            piece.m = W_next @ (mask * piece.m) + b_next

    regions = []
    for piece in pieces:
        pattern = ActivationPattern.from_bits(piece.bits, mlp.arch)
        regions.append(LinearRegion(pattern, piece.G, piece.h, piece.M, piece.m,
                                    piece.center, piece.radius))
    regions.sort(key=lambda r: r.pattern.bits)
    for msg in degenerate:
        logger.warning(msg)
    return CellDecomposition(mlp, box, regions, tol, degenerate)


def grid_points(box, resolution: int) -> np.ndarray:
    box = as_box(box)
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def distinct_patterns(mlp: Mlp, X, chunk: int = 1 << 16) -> np.ndarray:
    """Unique activation patterns among the rows of X, as packed bytes rows."""
    X = check_points(X, mlp.arch.input_dim)
    seen = []
    for start in range(0, len(X), chunk):
        packed = np.packbits(activation_patterns(mlp, X[start:start + chunk]), axis=1)
        seen.append(np.unique(packed, axis=0))
    if not seen:
        return np.empty((0, 0), dtype=np.uint8)
    return np.unique(np.vstack(seen), axis=0)


def count_regions_sampled(mlp: Mlp, box=None, resolution: int = 512, points=None) -> int:
    """Distinct activation patterns over a grid on ``box`` or over ``points``."""
    if points is None:
        if box is None:
            raise ValueError("need a box or a point set")
        points = grid_points(as_box(box, mlp.arch.input_dim), resolution)
    return len(distinct_patterns(mlp, points))


def region_affine(mlp: Mlp, pattern: ActivationPattern):
    """``(A, c)`` of the affine map the network computes under ``pattern``."""
    if len(pattern.layers) != mlp.n_layers - 1:
        raise DimensionError("pattern layer count does not match network")
    A = np.eye(mlp.arch.input_dim)
    c = np.zeros(mlp.arch.input_dim)
    for layer, bits in enumerate(pattern.layers):
        W, b = mlp.weights[layer], mlp.biases[layer]
        mask = np.array(bits, dtype=np.float64)
        if mask.shape[0] != W.shape[0]:
            raise DimensionError(f"pattern layer {layer} has wrong width")
        A = mask[:, None] * (W @ A)
        c = mask * (W @ c + b)
    A = mlp.weights[-1] @ A
    c = mlp.weights[-1] @ c + mlp.biases[-1]
    return A, c


def cell_labels(decomposition, X) -> np.ndarray:
    """Integer cell id per sample for an Mlp or a CellDecomposition."""
    if isinstance(decomposition, CellDecomposition):
        return decomposition.labels(X)
    if isinstance(decomposition, Mlp):
        packed = np.packbits(activation_patterns(decomposition, X), axis=1)
        _, inverse = np.unique(packed, axis=0, return_inverse=True)
        return inverse.reshape(-1)
    raise TypeError(f"cannot take cell labels from {type(decomposition).__name__}")


def refines(fine, coarse, samples) -> bool:
    """True iff no two samples sharing a fine cell fall in different coarse cells.

    Samples with no matching enumerated region (label -1) are ignored.
    """
    fl = cell_labels(fine, samples)
    cl = cell_labels(coarse, samples)
    keep = (fl >= 0) & (cl >= 0)
    fl, cl = fl[keep], cl[keep]
    if fl.size == 0:
        return True
    pairs = np.unique(np.column_stack([fl, cl]), axis=0)
    return len(np.unique(pairs[:, 0])) == len(pairs)


def pattern_color(pattern: ActivationPattern) -> str:
    digest = hashlib.sha1(pattern.key().encode()).digest()
    return "#{:02x}{:02x}{:02x}".format(*(96 + (c % 160) for c in digest[:3]))


def decomposition_svg(cells: CellDecomposition, path=None, size: int = 512) -> str:
    """Render a 2-d decomposition; returns the SVG text and writes it if ``path``."""
    from .svg import SvgCanvas

    if cells.box.shape[0] != 2:
        raise DimensionError("SVG rendering needs a 2-d input space")
    canvas = SvgCanvas(cells.box, size=size)
    for region in cells.regions:
        canvas.polygon(region.polygon(cells.box), fill=pattern_color(region.pattern),
                       stroke="#202020", title=region.pattern.key())
    text = canvas.render()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def regions_report(cells: CellDecomposition, sampled: int | None = None) -> str:
    data = cells.to_dict()
    if sampled is not None:
        data["sampled_count"] = sampled
    return json.dumps(data, indent=2)
