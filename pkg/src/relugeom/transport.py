"""Semi-discrete quadratic optimal transport on a convex polygon.

The source is the uniform measure ζ on a convex polygon Ω; the target is a
finite set of sites ``y_i`` with masses ``ν_i``. The Brenier potential is
``u_h(x) = max_i (<x, y_i> + h_i)`` and its gradient sends the power cell
``W_i`` (where site i attains the max) to ``y_i``. Heights solve the convex
problem

    min_h  E(h) = ∫_Ω u_h dζ − Σ_i h_i ν_i,      ∂E/∂h_i = ζ(W_i) − ν_i,

so at the optimum every cell carries exactly its target mass.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import MatrixRankWarning, spsolve
from scipy.spatial import ConvexHull, QhullError
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _geometry as geo
from ._validation import DimensionError, NotConvergedError, check_points

logger = logging.getLogger(__name__)

PRUNE_THRESHOLD = 8


class DuplicateSiteError(ValueError):
    pass


@dataclass(frozen=True)
class SourceDomain:
    """Convex counterclockwise polygon carrying the uniform probability measure."""

    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", geo.check_convex_ccw(self.vertices))

    @classmethod
    def box(cls, xmin, xmax, ymin, ymax) -> "SourceDomain":
        return cls(geo.box_polygon(xmin, xmax, ymin, ymax))

    @classmethod
    def unit_square(cls, centered: bool = False) -> "SourceDomain":
        return cls.box(-0.5, 0.5, -0.5, 0.5) if centered else cls.box(0.0, 1.0, 0.0, 1.0)

    @property
    def area(self) -> float:
        return geo.polygon_area(self.vertices)

    def contains(self, X, tol: float = 1e-12) -> np.ndarray:
        return geo.points_in_polygon(self.vertices, np.atleast_2d(X), tol)

    def sample(self, n: int, rng) -> np.ndarray:
        """Uniform samples by rejection from the bounding box."""
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        out = []
        need = n
        while need > 0:
            X = rng.uniform(lo, hi, size=(max(2 * need, 64), 2))
            X = X[self.contains(X, tol=0.0)]
            out.append(X[:need])
            need -= len(out[-1])
        return np.vstack(out)


def as_domain(domain) -> SourceDomain:
    if domain is None:
        return SourceDomain.unit_square()
    if isinstance(domain, SourceDomain):
        return domain
    return SourceDomain(np.asarray(domain, dtype=np.float64))


def _check_duplicates(sites, h):
    _, inverse, counts = np.unique(sites, axis=0, return_inverse=True, return_counts=True)
    for group in np.flatnonzero(counts > 1):
        members = np.flatnonzero(inverse.reshape(-1) == group)
        if len(np.unique(h[members])) < len(members):
            raise DuplicateSiteError(
                f"sites {members.tolist()} coincide with equal heights; perturb them")


def _lower_hull_neighbors(sites, h):
    """Adjacency of the unrestricted power diagram from the lifted lower hull."""
    lifted = np.column_stack([sites, -2.0 * h])
    hull = ConvexHull(lifted)
    nbrs = [set() for _ in range(len(sites))]
    for simplex, eq in zip(hull.simplices, hull.equations):
        if eq[2] >= 0:  # upper or vertical facet
            continue
        for a in simplex:
            for b in simplex:
                if a != b:
                    nbrs[a].add(int(b))
    on_hull = np.zeros(len(sites), dtype=bool)
    for simplex, eq in zip(hull.simplices, hull.equations):
        if eq[2] < 0:
            on_hull[simplex] = True
    return nbrs, on_hull


def power_cells(sites, h, domain=None, prune: bool | None = None) -> list[np.ndarray]:
    """Cells ``W_i = {x in Ω : <x, y_i> + h_i >= <x, y_j> + h_j for all j}``.

    Each cell is Ω clipped by the half-planes ``<x, y_j − y_i> <= h_i − h_j``.
    With many sites only the neighbours in the lifted lower convex hull are
    used (the other half-planes are redundant). Empty cells are (0, 2) arrays.
    """
    sites = check_points(sites, 2, name="sites")
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    if h.shape[0] != sites.shape[0]:
        raise DimensionError("need one height per site")
    return _labeled_cells(sites, h, as_domain(domain), prune)[0]


def _labeled_cells(sites, h, dom, prune=None):
    """Cells plus, per cell, the index of the site across each edge (-1 on ∂Ω)."""
    m = len(sites)
    if m == 1:
        return [dom.vertices.copy()], [np.full(len(dom.vertices), -1)]
    _check_duplicates(sites, h)

    candidates = None
    if prune or (prune is None and m > PRUNE_THRESHOLD):
        try:
            nbrs, on_hull = _lower_hull_neighbors(sites, h)
            candidates = [sorted(nbrs[i]) if on_hull[i] else [] for i in range(m)]
            dead = ~on_hull
        except (QhullError, ValueError):
            candidates = None  # degenerate lifting (e.g. collinear sites)

    cells, labels = [], []
    for i in range(m):
        if candidates is not None:
            if dead[i]:
                cells.append(np.empty((0, 2)))
                labels.append(np.empty(0, dtype=np.int64))
                continue
            others = candidates[i]
        else:
            others = [j for j in range(m) if j != i]
        poly, lab = dom.vertices, None
        for j in others:
            poly, lab = geo.clip_labeled(poly, lab, sites[j] - sites[i], h[i] - h[j], j)
            if len(poly) == 0:
                break
        if lab is None:
            lab = np.full(len(poly), -1, dtype=np.int64)
        cells.append(poly)
        labels.append(lab)
    return cells, labels


def _cell_stats(cells):
    areas = np.array([geo.polygon_area(c) if len(c) else 0.0 for c in cells])
    moments = np.array([geo.polygon_centroid(c) * a if a > 0 else np.zeros(2)
                        for c, a in zip(cells, areas)])
    return areas, moments


def brenier_energy(sites, h, masses, domain=None, cells=None) -> float:
    """``E(h) = ∫_Ω u_h dζ − Σ h_i ν_i`` with cells integrated exactly."""
    dom = as_domain(domain)
    if cells is None:
        cells = power_cells(sites, h, dom)
    areas, moments = _cell_stats(cells)
    integral = float(np.sum(np.einsum("ij,ij->i", moments, sites)) + np.dot(areas, h))
    return integral / dom.area - float(np.dot(h, masses))


def _shared_edges(cells, labels):
    """``(i, j, length)`` for every edge of cell i lying on the bisector with site j."""
    out = []
    for i, (poly, lab) in enumerate(zip(cells, labels)):
        if len(poly) < 3:
            continue
        lengths = np.linalg.norm(np.roll(poly, -1, axis=0) - poly, axis=1)
        for j, length in zip(lab, lengths):
            if j >= 0 and length > 0:
                out.append((i, int(j), float(length)))
    return out


def initial_heights(sites, domain=None) -> np.ndarray:
    """Heights whose power diagram is the Voronoi diagram of the sites shrunk into Ω.

    With ``p_i = c + λ (y_i − c)`` for the centroid c and λ small enough that
    every ``p_i`` lies inside Ω, ``h_i = −|p_i|² / (2λ)`` makes ``W_i`` the
    Voronoi cell of ``p_i``, so every cell starts with positive area.
    """
    dom = as_domain(domain)
    sites = check_points(sites, 2, name="sites")
    c = geo.polygon_centroid(dom.vertices)
    G, b = geo.halfplanes_of(dom.vertices)
    slack = b - G @ c  # > 0 for an interior centroid
    reach = (sites - c) @ G.T
    with np.errstate(divide="ignore"):
        limits = np.where(reach > 0, slack / reach, np.inf)
    lam = min(1.0, 0.9 * float(limits.min()))
    p = c + lam * (sites - c)
    return -0.5 * np.einsum("ij,ij->i", p, p) / lam


@dataclass
class OtSolveReport:
    iterations: int = 0
    max_area_error: float = float("inf")
    energy_trace: list[float] = field(default_factory=list)
    damping_events: int = 0
    converged: bool = False
    method: str = "gradient"

    def to_dict(self) -> dict:
        return asdict(self)


class SemiDiscreteOT(BaseEstimator):
    """Semi-discrete L² transport from the uniform measure on ``domain`` to weighted sites.

    ``fit(sites, masses)`` solves for the heights; ``predict`` is the transport
    map (site index of the power cell containing each point).

    Parameters
    ----------
    domain : SourceDomain or (k, 2) array, optional
        Convex ccw polygon; defaults to the unit square.
    tol : float
        Stop when ``max_i |ζ(W_i) − ν_i| <= tol``.
    method : {"gradient", "newton"}
        Gradient descent with backtracking, or damped Newton with the
        shared-edge Hessian.
    """

    def __init__(self, domain=None, tol=1e-6, max_iter=1000, method="newton"):
        self.domain = domain
        self.tol = tol
        self.max_iter = max_iter
        self.method = method

    def fit(self, sites, masses=None, h0=None):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.method not in ("gradient", "newton"):
            raise ValueError(f"unknown method {self.method!r}")
        sites = check_points(sites, 2, name="sites")
        m = len(sites)
        if masses is None:
            masses = np.full(m, 1.0 / m)
        masses = np.asarray(masses, dtype=np.float64).reshape(-1)
        if masses.shape[0] != m:
            raise DimensionError("need one mass per site")
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        if abs(masses.sum() - 1.0) > 1e-9:
            raise ValueError(f"masses must sum to 1 (got {masses.sum()!r})")
        if len(np.unique(sites, axis=0)) < m:
            raise DuplicateSiteError("duplicate sites cannot all carry mass; merge them first")
        dom = as_domain(self.domain)
        h = initial_heights(sites, dom) if h0 is None else np.asarray(h0, dtype=np.float64).copy()
        h -= h[0]

        self.domain_ = dom
        self.sites_ = sites
        self.masses_ = masses
        solve = self._newton if self.method == "newton" else self._gradient
        h, (cells, labels), report = solve(sites, masses, dom, h)
        self.heights_ = h
        self.cells_ = cells
        self.neighbors_ = labels
        self.areas_ = _cell_stats(cells)[0] / dom.area
        self.report_ = report
        if not report.converged:
            logger.warning("transport solve stopped at max area error %.3g after %d iterations",
                           report.max_area_error, report.iterations)
        return self

    # solvers -------------------------------------------------------------
    @staticmethod
    def _evaluate(sites, h, masses, dom):
        cells = _labeled_cells(sites, h, dom)
        areas, moments = _cell_stats(cells[0])
        energy = (float(np.sum(np.einsum("ij,ij->i", moments, sites)) + np.dot(areas, h))
                  / dom.area - float(np.dot(h, masses)))
        return cells, energy, areas / dom.area - masses

    def _gradient(self, sites, masses, dom, h):
        """Gradient descent with Armijo backtracking from Barzilai-Borwein trial steps;
        steps that empty a cell are halved."""
        report = OtSolveReport(method="gradient")
        cells, energy, grad = self._evaluate(sites, h, masses, dom)
        report.energy_trace.append(energy)
        step = 1.0
        for it in range(self.max_iter):
            report.iterations = it
            report.max_area_error = float(np.max(np.abs(grad)))
            if report.max_area_error <= self.tol:
                report.converged = True
                return h, cells, report
            g2 = float(np.dot(grad, grad))
            noise = 4 * np.finfo(float).eps * max(abs(energy), 1.0)
            while True:
                trial = h - step * grad
                trial -= trial[0]
                t_cells, t_energy, t_grad = self._evaluate(sites, trial, masses, dom)
                if any(len(c) == 0 for c in t_cells[0]):
                    report.damping_events += 1
                elif t_energy <= energy - 1e-4 * step * g2:
                    break
                elif (t_energy <= energy + noise
                      and float(np.dot(t_grad, t_grad)) < g2):
                    break  # energy change below roundoff: judge by the gradient instead
                step *= 0.5
                if step < 1e-30:
                    return h, cells, report
            s_k, y_k = trial - h, t_grad - grad
            h, cells, energy, grad = trial, t_cells, t_energy, t_grad
            report.energy_trace.append(energy)
            # Barzilai-Borwein guess for the next trial step; backtracking keeps descent
            sy = float(np.dot(s_k, y_k))
            step = float(np.dot(s_k, s_k)) / sy if sy > 0 else 2.0 * step
        report.iterations = self.max_iter
        report.max_area_error = float(np.max(np.abs(grad)))
        report.converged = report.max_area_error <= self.tol
        return h, cells, report

    @staticmethod
    def _hessian(sites, cells, area):
        """``∂²E/∂h_i∂h_j = −|W_i ∩ W_j| / (|Ω| |y_i − y_j|)``, rows summing to zero."""
        m = len(sites)
        rows, cols, vals = [], [], []
        for i, j, length in _shared_edges(*cells):
            # each shared edge is seen from both cells, so each side adds half
            w = 0.5 * length / (np.linalg.norm(sites[i] - sites[j]) * area)
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [-w, -w, w, w]
        return coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsc()

    def _newton(self, sites, masses, dom, h):
        """Damped Newton: shrink the step until every cell keeps a fixed fraction
        of mass and the gradient norm decreases enough."""
        report = OtSolveReport(method="newton")
        cells, energy, grad = self._evaluate(sites, h, masses, dom)
        report.energy_trace.append(energy)
        floor = 0.5 * min(masses.min(), (grad + masses).min())
        if floor <= 0:
            logger.info("initial heights leave a cell empty; falling back to gradient descent")
            return self._gradient(sites, masses, dom, h)
        for it in range(self.max_iter):
            report.iterations = it
            report.max_area_error = float(np.max(np.abs(grad)))
            if report.max_area_error <= self.tol:
                report.converged = True
                return h, cells, report
            d = np.zeros(len(h))
            with warnings.catch_warnings():
                warnings.simplefilter("error", MatrixRankWarning)
                try:
                    d[1:] = spsolve(self._hessian(sites, cells, dom.area)[1:, 1:], -grad[1:])
                except (MatrixRankWarning, RuntimeError):
                    d[:] = -grad
            if not np.all(np.isfinite(d)):
                d[:] = -grad
            gnorm = np.linalg.norm(grad)
            t = 1.0
            while True:
                trial = h + t * d
                trial -= trial[0]
                t_cells, t_energy, t_grad = self._evaluate(sites, trial, masses, dom)
                if ((t_grad + masses).min() >= floor
                        and np.linalg.norm(t_grad) <= (1 - t / 2) * gnorm):
                    break
                report.damping_events += 1
                t *= 0.5
                if t < 1e-12:
                    return h, cells, report
            h, cells, energy, grad = trial, t_cells, t_energy, t_grad
            report.energy_trace.append(energy)
        report.iterations = self.max_iter
        report.max_area_error = float(np.max(np.abs(grad)))
        report.converged = report.max_area_error <= self.tol
        return h, cells, report

    # evaluation ----------------------------------------------------------
    def _check_inside(self, X):
        X = check_points(np.atleast_2d(X), 2)
        inside = self.domain_.contains(X)
        if not inside.all():
            raise ValueError(f"{np.count_nonzero(~inside)} point(s) lie outside the domain")
        return X

    def brenier_potential(self, X) -> np.ndarray:
        """``u_h(x) = max_i (<x, y_i> + h_i)``."""
        check_is_fitted(self, "heights_")
        X = check_points(np.atleast_2d(X), 2)
        return np.max(X @ self.sites_.T + self.heights_, axis=1)

    def kantorovich_potential(self, X) -> np.ndarray:
        """``f(x) = ½|x|² − u_h(x)`` on Ω."""
        X = self._check_inside(X)
        return 0.5 * np.einsum("ij,ij->i", X, X) - self.brenier_potential(X)

    def predict(self, X) -> np.ndarray:
        """Index of the site each point is transported to (lowest index on ties)."""
        check_is_fitted(self, "heights_")
        X = self._check_inside(X)
        return np.argmax(X @ self.sites_.T + self.heights_, axis=1)

    def transform(self, X) -> np.ndarray:
        """``∇u_h(x)``: the site each point is sent to."""
        return self.sites_[self.predict(X)]

    @property
    def solved(self) -> bool:
        return self.report_.max_area_error <= self.tol

    def wasserstein2(self) -> float:
        """``Σ_i ∫_{W_i} ½|x − y_i|² dζ``, integrated exactly per cell."""
        check_is_fitted(self, "heights_")
        if not self.solved:
            raise NotConvergedError("transport instance is not solved", result=self)
        total = sum(geo.half_sq_dist_integral(c, y) for c, y in zip(self.cells_, self.sites_)
                    if len(c))
        return total / self.domain_.area

    def result_dict(self) -> dict:
        check_is_fitted(self, "heights_")
        out = {
            "h": self.heights_.tolist(),
            "areas": self.areas_.tolist(),
            "iterations": self.report_.iterations,
            "max_area_error": self.report_.max_area_error,
            "converged": self.report_.converged,
            "damping_events": self.report_.damping_events,
        }
        out["cost"] = self.wasserstein2() if self.solved else None
        return out


# functional API --------------------------------------------------------------


def solve_sdot(sites, masses, domain=None, tol=1e-6, max_iter=1000, method="newton"):
    """Solve for Brenier heights; returns ``(SemiDiscreteOT, OtSolveReport)``.

    Non-convergence is not raised: check ``report.converged``.
    """
    ot = SemiDiscreteOT(domain, tol=tol, max_iter=max_iter, method=method).fit(sites, masses)
    return ot, ot.report_


def transport(ot: SemiDiscreteOT, z):
    """``(index, y_index)`` for a single point of Ω."""
    i = int(ot.predict(np.asarray(z, dtype=np.float64)[None, :])[0])
    return i, ot.sites_[i]


def wasserstein2(ot: SemiDiscreteOT) -> float:
    return ot.wasserstein2()


def kantorovich_potential(ot: SemiDiscreteOT, x) -> float:
    return float(ot.kantorovich_potential(np.asarray(x, dtype=np.float64)[None, :])[0])


# instance files ----------------------------------------------------------------


def load_instance(path):
    """Read ``{"domain": [[x, y], ...], "sites": [...], "masses": [...]}``."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        sites = np.asarray(data["sites"], dtype=np.float64)
        masses = data.get("masses")
        masses = None if masses is None else np.asarray(masses, dtype=np.float64)
        domain = data.get("domain")
        domain = None if domain is None else SourceDomain(np.asarray(domain, dtype=np.float64))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed transport instance ({exc})") from None
    return sites, masses, domain


def power_diagram_svg(ot: SemiDiscreteOT, path=None, size: int = 512) -> str:
    from .svg import SvgCanvas, categorical_color

    V = ot.domain_.vertices
    box = np.array([[V[:, 0].min(), V[:, 0].max()], [V[:, 1].min(), V[:, 1].max()]])
    canvas = SvgCanvas(box, size=size)
    for i, cell in enumerate(ot.cells_):
        if len(cell):
            canvas.polygon(cell, fill=categorical_color(i), stroke="#202020", title=f"site {i}")
    canvas.polygon(V, fill="none", stroke="#000000")
    for i, y in enumerate(ot.sites_):
        canvas.circle(y, r=3, fill="#000000", title=f"site {i}")
    text = canvas.render()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# autoencoder + transport -------------------------------------------------------


def latent_domain(codes, inflate: float = 0.05) -> SourceDomain:
    """Bounding box of the codes, widened by ``inflate`` of its extent per axis."""
    lo, hi = codes.min(axis=0), codes.max(axis=0)
    extent = hi - lo
    pad = np.maximum(extent * inflate / 2, 1e-6 * (1.0 + np.abs(np.concatenate([lo, hi])).max()))
    return SourceDomain.box(lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])


def ae_omt_generate(ae, n: int, seed: int = 0, data=None, tol: float = 1e-6,
                    method: str = "newton", return_sites: bool = False):
    """Generate ``n`` ambient samples by transporting uniform latent noise.

    Latent sites are the (deduplicated) codes of the training data with
    uniform empirical masses; Ω is their bounding box widened by 5%. Uniform
    samples of Ω are mapped to their power cell's site and decoded.
    """
    from .manifolds import PointCloud

    if ae.latent_dim != 2:
        raise DimensionError("latent transport needs a 2-d latent space")
    if data is None:
        raise ValueError("training data is needed to build the latent measure")
    X = data.points if isinstance(data, PointCloud) else check_points(data, ae.n_features_in_)
    codes = ae.transform(X)
    sites, inverse = np.unique(codes, axis=0, return_inverse=True)
    masses = np.bincount(inverse.reshape(-1), minlength=len(sites)) / len(codes)
    dom = latent_domain(sites)
    ot = SemiDiscreteOT(dom, tol=tol, method=method).fit(sites, masses)
    if not ot.report_.converged:
        raise NotConvergedError(
            f"latent transport did not converge (max area error {ot.report_.max_area_error:.3g})",
            result=ot)
    rng = np.random.default_rng(seed)
    Z = dom.sample(n, rng)
    idx = ot.predict(Z)
    out = PointCloud(ae.inverse_transform(sites[idx]))
    if return_sites:
        return out, idx, ot
    return out
