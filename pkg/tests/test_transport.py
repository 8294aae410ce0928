import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import argmax_labels, monte_carlo_fractions, square_integral_half_sq
from relugeom import DimensionError, NotConvergedError
from relugeom._geometry import (clip_halfplane, half_sq_dist_integral, polygon_area,
                                polygon_centroid)
from relugeom.autoencoder import ReluAutoencoder
from relugeom.transport import (DuplicateSiteError, SemiDiscreteOT, SourceDomain,
                                ae_omt_generate, brenier_energy, initial_heights,
                                kantorovich_potential, latent_domain, load_instance,
                                power_cells, power_diagram_svg, solve_sdot, transport,
                                wasserstein2)

CENTERED = SourceDomain.unit_square(centered=True)
SYM_SITES = np.array([[-0.25, 0.0], [0.25, 0.0]])
EX3_SITES = np.array([[0.2, 0.2], [0.8, 0.3], [0.5, 0.8]])
EX3_MASSES = np.array([0.5, 0.3, 0.2])


def random_instance(rng, m, lo=0.0, hi=1.0):
    sites = rng.uniform(lo, hi, size=(m, 2))
    masses = rng.uniform(0.5, 2.0, m)
    return sites, masses / masses.sum()


# polygon helpers ------------------------------------------------------------------


def test_clip_halfplane_basic():
    sq = SourceDomain.unit_square().vertices
    half = clip_halfplane(sq, [1.0, 0.0], 0.5)
    assert polygon_area(half) == pytest.approx(0.5)
    assert clip_halfplane(sq, [1.0, 0.0], -1.0).shape == (0, 2)
    assert clip_halfplane(sq, [1.0, 0.0], 2.0) is sq
    # a line through a vertex within tolerance leaves the polygon intact
    assert polygon_area(clip_halfplane(sq, [1.0, 1.0], 2.0 + 1e-13)) == pytest.approx(1.0)


def test_half_sq_dist_integral_closed_form(rng):
    sq = CENTERED.vertices
    for _ in range(20):
        y = rng.uniform(-1, 1, 2)
        assert half_sq_dist_integral(sq, y) == pytest.approx(square_integral_half_sq(y), rel=1e-12)
    tri = np.array([[0, 0], [1, 0], [0, 1.0]])
    # ∫ ½(x² + y²) over the unit right triangle = 1/12
    assert half_sq_dist_integral(tri, [0, 0]) == pytest.approx(1 / 12, rel=1e-12)
    assert polygon_centroid(tri) == pytest.approx([1 / 3, 1 / 3])


def test_source_domain_validation():
    with pytest.raises(ValueError):
        SourceDomain(np.array([[0, 0], [0, 1], [1, 1], [1, 0.0]]))  # clockwise
    with pytest.raises(ValueError):
        SourceDomain(np.array([[0, 0], [2, 0], [1, 0.2], [1, 1.0]]))  # not convex
    with pytest.raises(ValueError):
        SourceDomain(np.array([[0, 0], [1, 0.0]]))


# power cells ------------------------------------------------------------------------


def test_single_site_cell_is_domain():
    cells = power_cells([[5.0, 5.0]], [3.0], CENTERED)
    assert np.array_equal(cells[0], CENTERED.vertices)


def test_symmetric_cells_are_half_squares():
    cells = power_cells(SYM_SITES, [0.0, 0.0], CENTERED)
    assert [polygon_area(c) for c in cells] == pytest.approx([0.5, 0.5])
    assert cells[0][:, 0].max() == pytest.approx(0.0)
    assert cells[1][:, 0].min() == pytest.approx(0.0)


def test_cell_membership_matches_argmax(rng):
    from relugeom._geometry import points_in_polygon

    sites = rng.normal(size=(10, 2))
    h = np.zeros(10)
    cells = power_cells(sites, h)
    X = rng.uniform(0, 1, size=(10_000, 2))
    labels = argmax_labels(sites, h, X)
    for i, cell in enumerate(cells):
        inside = points_in_polygon(cell, X, tol=-1e-9) if len(cell) else np.zeros(len(X), bool)
        assert np.all(labels[inside] == i)


@pytest.mark.parametrize("m", [3, 12, 60])
def test_pruned_cells_match_brute_force(rng, m):
    for _ in range(5):
        sites = rng.uniform(-0.2, 1.2, size=(m, 2))
        h = rng.normal(0, 0.1, m)
        full = power_cells(sites, h, prune=False)
        pruned = power_cells(sites, h, prune=True)
        for a, b in zip(full, pruned):
            assert polygon_area(a) == pytest.approx(polygon_area(b), abs=1e-14)


def test_cells_partition_domain(rng):
    for m in (2, 7, 40):
        sites = rng.normal(size=(m, 2))
        h = rng.normal(0, 0.3, m)
        assert sum(polygon_area(c) for c in power_cells(sites, h)) == pytest.approx(1.0, abs=1e-9)


def test_duplicate_sites_with_equal_heights_are_rejected():
    with pytest.raises(DuplicateSiteError):
        power_cells([[0.5, 0.5], [0.5, 0.5]], [0.0, 0.0])
    cells = power_cells([[0.5, 0.5], [0.5, 0.5]], [0.0, 1.0])
    assert len(cells[0]) == 0 and polygon_area(cells[1]) == pytest.approx(1.0)


def test_translation_invariance(rng):
    sites = rng.normal(size=(6, 2))
    h = rng.normal(0, 0.2, 6)
    a = power_cells(sites, h)
    b = power_cells(sites, h + 3.7)
    for p, q in zip(a, b):
        assert polygon_area(p) == pytest.approx(polygon_area(q), abs=1e-12)
    X = rng.uniform(0, 1, (500, 2))
    assert np.array_equal(argmax_labels(sites, h, X), argmax_labels(sites, h + 3.7, X))


def test_initial_heights_give_nonempty_cells(rng):
    for _ in range(10):
        sites = rng.normal(5, 3, size=(15, 2))  # mostly outside the domain
        cells = power_cells(sites, initial_heights(sites))
        assert min(polygon_area(c) for c in cells) > 0


# energy and solver ----------------------------------------------------------------


def test_energy_gradient_matches_finite_differences(rng):
    sites, masses = random_instance(rng, 6)
    h = rng.normal(0, 0.05, 6)
    cells = power_cells(sites, h)
    grad = np.array([polygon_area(c) for c in cells]) - masses
    step = 1e-6
    for i in range(6):
        e = np.zeros(6)
        e[i] = step
        fd = (brenier_energy(sites, h + e, masses) - brenier_energy(sites, h - e, masses)) / (2 * step)
        assert fd == pytest.approx(grad[i], abs=1e-5)


def test_hessian_matches_finite_differences_of_areas(rng):
    sites, masses = random_instance(rng, 5)
    h = initial_heights(sites)
    ot = SemiDiscreteOT()
    dom = SourceDomain.unit_square()
    cells, _, _ = ot._evaluate(sites, h, masses, dom)
    H = ot._hessian(sites, cells, dom.area).toarray()
    step = 1e-7
    for i in range(5):
        e = np.zeros(5)
        e[i] = step
        up = np.array([polygon_area(c) for c in power_cells(sites, h + e)])
        down = np.array([polygon_area(c) for c in power_cells(sites, h - e)])
        np.testing.assert_allclose(H[:, i], (up - down) / (2 * step), atol=1e-6)


@pytest.mark.parametrize("method", ["newton", "gradient"])
def test_single_site_converges_immediately(method):
    ot, report = solve_sdot([[0.3, 0.3]], [1.0], method=method)
    assert report.converged and report.iterations == 0
    assert np.array_equal(ot.cells_[0], SourceDomain.unit_square().vertices)


@pytest.mark.parametrize("method", ["newton", "gradient"])
def test_symmetric_two_sites(method):
    ot, report = solve_sdot(SYM_SITES, [0.5, 0.5], CENTERED, tol=1e-10, method=method)
    assert report.converged
    assert abs(ot.heights_[1] - ot.heights_[0]) <= 1e-8
    assert ot.areas_ == pytest.approx([0.5, 0.5], abs=1e-10)
    assert transport(ot, [-0.25, 0.0])[0] == 0
    assert transport(ot, [0.25, 0.0])[0] == 1
    assert transport(ot, [0.0, 0.1])[0] == 0  # tie goes to the lower index


@pytest.mark.parametrize("method", ["newton", "gradient"])
def test_three_site_example_areas_and_monte_carlo(method):
    ot, report = solve_sdot(EX3_SITES, EX3_MASSES, tol=1e-8, method=method)
    assert report.converged and report.max_area_error <= 1e-6
    assert ot.heights_[0] == 0.0
    assert np.all(np.diff(report.energy_trace) <= 1e-15)
    frac = monte_carlo_fractions(ot.sites_, ot.heights_, 3, 10 ** 6, np.random.default_rng(0))
    sigma = np.sqrt(EX3_MASSES * (1 - EX3_MASSES) / 10 ** 6)
    assert np.all(np.abs(frac - ot.areas_) <= 3 * sigma)


def test_newton_and_gradient_agree(rng):
    sites, masses = random_instance(rng, 6)
    a = SemiDiscreteOT(tol=1e-10, method="newton").fit(sites, masses)
    b = SemiDiscreteOT(tol=1e-9, method="gradient", max_iter=5000).fit(sites, masses)
    np.testing.assert_allclose(a.heights_, b.heights_, atol=1e-6)
    assert a.wasserstein2() == pytest.approx(b.wasserstein2(), abs=1e-8)


def test_sites_outside_domain_and_clustered(rng):
    sites = rng.normal(3.0, 0.01, size=(10, 2))
    ot = SemiDiscreteOT(tol=1e-9).fit(sites, np.full(10, 0.1))
    assert ot.report_.converged and ot.areas_ == pytest.approx(np.full(10, 0.1), abs=1e-9)


def test_many_sites_newton(rng):
    sites, masses = random_instance(rng, 150)
    ot = SemiDiscreteOT(tol=1e-9).fit(sites, masses)
    assert ot.report_.converged and ot.report_.iterations < 30


def test_partition_at_every_iterate(rng):
    sites, masses = random_instance(rng, 5)
    ot = SemiDiscreteOT(tol=1e-9, method="gradient", max_iter=3).fit(sites, masses)
    assert sum(polygon_area(c) for c in ot.cells_) == pytest.approx(1.0, abs=1e-9)


def test_non_convergence_is_reported_not_raised(rng, caplog):
    sites, masses = random_instance(rng, 8)
    ot, report = solve_sdot(sites, masses, tol=1e-12, max_iter=1)
    assert not report.converged and report.iterations == 1
    assert np.isfinite(report.max_area_error)
    with pytest.raises(NotConvergedError):
        ot.wasserstein2()
    assert ot.result_dict()["cost"] is None


@pytest.mark.parametrize("masses,err", [([0.5, 0.6], ValueError), ([1.0, 0.0], ValueError),
                                        ([1.0], DimensionError)])
def test_mass_validation(masses, err):
    with pytest.raises(err):
        SemiDiscreteOT().fit(SYM_SITES + 0.5, masses)


def test_other_validation():
    with pytest.raises(ValueError):
        SemiDiscreteOT(tol=0).fit(SYM_SITES, [0.5, 0.5])
    with pytest.raises(ValueError):
        SemiDiscreteOT(method="magic").fit(SYM_SITES, [0.5, 0.5])
    with pytest.raises(DuplicateSiteError):
        SemiDiscreteOT().fit([[0.1, 0.1], [0.1, 0.1]], [0.5, 0.5])


# evaluation ------------------------------------------------------------------------


def test_transport_requires_points_in_domain():
    ot = SemiDiscreteOT(CENTERED).fit(SYM_SITES, [0.5, 0.5])
    with pytest.raises(ValueError):
        transport(ot, [2.0, 0.0])
    with pytest.raises(ValueError):
        kantorovich_potential(ot, [0.0, 0.9])
    assert transport(SemiDiscreteOT().fit([[3.0, 3.0]], [1.0]), [0.5, 0.5])[0] == 0


def test_single_central_site_cost():
    ot = SemiDiscreteOT(CENTERED).fit([[0.0, 0.0]], [1.0])
    assert wasserstein2(ot) == pytest.approx(1 / 12, abs=1e-12)


def test_cost_positive_and_matches_monte_carlo():
    ot = SemiDiscreteOT(CENTERED, tol=1e-10).fit(SYM_SITES, [0.5, 0.5])
    cost = ot.wasserstein2()
    rng = np.random.default_rng(2)
    X = rng.uniform(-0.5, 0.5, size=(10 ** 6, 2))
    Y = ot.sites_[argmax_labels(ot.sites_, ot.heights_, X)]
    vals = 0.5 * np.sum((X - Y) ** 2, axis=1)
    assert cost > 0
    assert abs(vals.mean() - cost) <= 3 * vals.std() / np.sqrt(len(vals))


def test_brenier_potential_is_convex(rng):
    sites, masses = random_instance(rng, 5)
    ot = SemiDiscreteOT().fit(sites, masses)
    X, Y = rng.uniform(0, 1, (2, 1000, 2))
    u = ot.brenier_potential
    assert np.all(u((X + Y) / 2) <= (u(X) + u(Y)) / 2 + 1e-12)


def test_kantorovich_identity_when_u_is_half_square():
    # u(x) = ½|x|² cannot be a finite max of affine maps; f vanishes at the sites instead
    ot = SemiDiscreteOT(CENTERED).fit(SYM_SITES, [0.5, 0.5])
    tangent = SemiDiscreteOT(CENTERED).fit([[0.0, 0.0]], [1.0])
    assert kantorovich_potential(tangent, [0.0, 0.0]) == 0.0
    assert np.isfinite(kantorovich_potential(ot, [0.1, 0.1]))



def test_kantorovich_recomposition_within_rounding(rng):
    # two roundings separate u from ½|x|² − f, so agreement is to the last place only
    sites, masses = random_instance(rng, 6)
    ot = SemiDiscreteOT().fit(sites, masses)
    X = rng.uniform(0, 1, (10 ** 4, 2))
    u = ot.brenier_potential(X)
    q = 0.5 * np.sum(X * X, axis=1)
    residual = np.abs(u - (q - ot.kantorovich_potential(X)))
    assert np.all(residual <= np.spacing(np.maximum(np.abs(u), q)))

def test_kantorovich_potential_is_c_concave(rng):
    sites, masses = random_instance(rng, 5)
    ot = SemiDiscreteOT(tol=1e-10).fit(sites, masses)
    g = (np.arange(400) + 0.5) / 400
    grid = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    f_grid = ot.kantorovich_potential(grid)
    # f^c(y_i) = inf_x ½|x − y_i|² − f(x) equals ½|y_i|² + h_i on a nonempty cell
    for y, h in zip(ot.sites_, ot.heights_):
        fc = np.min(0.5 * np.sum((grid - y) ** 2, axis=1) - f_grid)
        assert fc == pytest.approx(0.5 * y @ y + h, abs=1e-4)
    X = rng.uniform(0, 1, (1000, 2))
    f = ot.kantorovich_potential(X)
    fc = 0.5 * np.sum(ot.sites_ ** 2, axis=1) + ot.heights_
    k = rng.integers(0, 5, 1000)
    assert np.all(f <= 0.5 * np.sum((X - ot.sites_[k]) ** 2, axis=1) - fc[k] + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_solved_areas_match_masses(m, seed):
    rng = np.random.default_rng(seed)
    sites, masses = random_instance(rng, m, -0.5, 1.5)
    if np.min(np.linalg.norm(sites[:, None] - sites[None], axis=2) + np.eye(m)) < 1e-3:
        return
    ot = SemiDiscreteOT(tol=1e-9).fit(sites, masses)
    assert ot.report_.converged
    assert np.max(np.abs(ot.areas_ - masses)) <= 1e-9


# files and generation -------------------------------------------------------------


def test_instance_file_and_svg(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text(json.dumps({"domain": CENTERED.vertices.tolist(),
                                "sites": SYM_SITES.tolist(), "masses": [0.5, 0.5]}))
    sites, masses, domain = load_instance(path)
    ot = SemiDiscreteOT(domain).fit(sites, masses)
    svg = power_diagram_svg(ot, tmp_path / "p.svg")
    assert svg == (tmp_path / "p.svg").read_text()
    assert svg.count("<polygon") == 3 and svg.count("<circle") == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"masses": [1]}')
    with pytest.raises(ValueError):
        load_instance(bad)
    result = ot.result_dict()
    assert set(result) >= {"h", "areas", "cost", "iterations"}


def _toy_ae(latent=2, seed=0):
    X = np.random.default_rng(seed).normal(size=(60, 3))
    ae = ReluAutoencoder((3, 8, latent), (latent, 8, 3), epochs=3, random_state=seed).fit(X)
    return ae, X


def test_ae_omt_generate_uses_sites_uniformly():
    ae, X = _toy_ae()
    cloud, idx, ot = ae_omt_generate(ae, 20_000, seed=1, data=X, return_sites=True)
    assert cloud.points.shape == (20_000, 3)
    codes = ae.transform(X)
    np.testing.assert_array_equal(cloud.points, ae.inverse_transform(ot.sites_[idx]))
    assert len(ot.sites_) == len(np.unique(codes, axis=0))
    freq = np.bincount(idx, minlength=len(ot.sites_)) / 20_000
    sigma = np.sqrt(ot.masses_ * (1 - ot.masses_) / 20_000)
    assert np.all(np.abs(freq - ot.masses_) <= 4 * sigma + 1e-6)
    again = ae_omt_generate(ae, 20_000, seed=1, data=X)
    assert np.array_equal(again.points, cloud.points)


def test_ae_omt_generate_single_site_and_errors():
    ae, X = _toy_ae()
    out = ae_omt_generate(ae, 10, data=np.repeat(X[:1], 5, axis=0))
    assert np.all(out.points == out.points[0])
    with pytest.raises(ValueError):
        ae_omt_generate(ae, 10)
    ae1, X1 = _toy_ae(latent=1)
    with pytest.raises(DimensionError):
        ae_omt_generate(ae1, 10, data=X1)


def test_latent_domain_inflation():
    dom = latent_domain(np.array([[0.0, 0.0], [1.0, 2.0]]))
    V = dom.vertices
    assert V.min(axis=0) == pytest.approx([-0.025, -0.05])
    assert V.max(axis=0) == pytest.approx([1.025, 2.05])
