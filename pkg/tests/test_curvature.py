import math

import numpy as np
import pytest

from conftest import riemann_fd
from curvcert.curvature import (
    CurvatureSite, bach_tensor, conformal_bundle, convention_self_test, cotton_tensor,
    curvature_bundle, d_tensor, sectional_curvature, weyl_tensor,
)
from curvcert.errors import DegeneratePlaneError, DimensionError, MissingPotentialError
from curvcert.geometry import metric_jet
from curvcert.models import sample_points


def amax(t):
    return float(np.max(np.abs(t.values)))


def test_convention_self_test_passes():
    assert convention_self_test()


# --- Riemann, Ricci, scalar ----------------------------------------------------

@pytest.mark.parametrize("name", ["random_perturb", "warped_test", "product_r2s2"])
def test_riemann_matches_finite_difference_oracle(models, name):
    m = models[name]
    p = sample_points(m, 2, seed=21).points[1]
    rm = CurvatureSite(m, p, order=2).riemann.values
    oracle = riemann_fd(m, p)
    assert np.max(np.abs(rm - oracle)) <= 1e-6
    assert np.max(np.abs(oracle)) > 1e-2


@pytest.mark.parametrize("name", ["random_perturb", "warped_test", "sphere4", "cylinder5"])
def test_riemann_algebraic_symmetries(models, name):
    m = models[name]
    for p in sample_points(m, 4, seed=22):
        rm = CurvatureSite(m, p, order=2).riemann.values
        assert np.max(np.abs(rm + rm.transpose(1, 0, 2, 3))) <= 1e-10
        assert np.max(np.abs(rm + rm.transpose(0, 1, 3, 2))) <= 1e-10
        assert np.max(np.abs(rm - rm.transpose(2, 3, 0, 1))) <= 1e-10
        cyc = rm + rm.transpose(0, 2, 3, 1) + rm.transpose(0, 3, 1, 2)
        assert np.max(np.abs(cyc)) <= 1e-10


def test_flat_curvature_vanishes(models):
    b = curvature_bundle(models["gaussian4"], (0.5, -1.0, 0.2, 1.5), 2)
    assert not np.any(b.riemann.data)
    assert b.scalar.value == 0.0


def test_cylinder_ricci_spectrum(models):
    m = models["cylinder_r1s3"]
    site = CurvatureSite(m, (0.4, 1.0, 2.0, 0.5), order=2)
    mixed = np.linalg.solve(site.metric.values, site.ricci.values)
    assert sorted(np.linalg.eigvals(mixed).real) == pytest.approx([0, 0.5, 0.5, 0.5], abs=1e-12)
    assert float(site.scalar.values) == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("name, scalar", [("sphere3", 1.5), ("sphere4", 2.0), ("sphere5", 2.5),
                                          ("cylinder3", 1.0), ("cylinder5", 2.0), ("product_r2s2", 1.0)])
def test_catalog_scalar_curvature(models, name, scalar):
    m = models[name]
    for p in sample_points(m, 3, seed=23):
        assert float(CurvatureSite(m, p, order=2).scalar.values) == pytest.approx(scalar, abs=1e-11)


def test_sphere4_is_einstein(models):
    site = CurvatureSite(models["sphere4"], (1.0, 2.0, 0.7, 4.0), order=2)
    assert site.ricci.values == pytest.approx(0.5 * site.metric.values, abs=1e-12)


def test_bundle_order_budget(models):
    with pytest.raises(ValueError):
        curvature_bundle(models["gaussian4"], (0.0,) * 4, 5)


# --- sectional curvature -------------------------------------------------------

def test_sectional_flat(models):
    assert sectional_curvature(models["gaussian4"], (0.1,) * 4, [1, 0, 0, 0], [0, 1, 1, 0]) == 0.0


def test_sectional_sphere4(models):
    m = models["sphere4"]
    rng = np.random.default_rng(5)
    for _ in range(5):
        u, v = rng.normal(size=4), rng.normal(size=4)
        assert sectional_curvature(m, (1.0, 1.2, 2.0, 0.3), u, v) == pytest.approx(1 / 6, abs=1e-12)


def test_sectional_cylinder_blocks(models):
    m = models["cylinder_r1s3"]
    p = (0.3, 1.1, 1.9, 2.2)
    assert sectional_curvature(m, p, [1, 0, 0, 0], [0, 1, 0, 0]) == pytest.approx(0.0, abs=1e-13)
    assert sectional_curvature(m, p, [0, 1, 0, 0], [0, 0, 1, 0]) == pytest.approx(0.25, abs=1e-13)


def test_sectional_is_orientation_independent(models):
    m = models["random_perturb"]
    p = (0.2, 0.5, -0.4, 0.1)
    u, v = [1, 2, 0, 0], [0, 1, -1, 3]
    k = sectional_curvature(m, p, u, v)
    assert sectional_curvature(m, p, v, u) == pytest.approx(k, rel=1e-12)
    assert sectional_curvature(m, p, u, [-x for x in v]) == pytest.approx(k, rel=1e-12)


def test_degenerate_plane(models):
    with pytest.raises(DegeneratePlaneError):
        sectional_curvature(models["sphere4"], (1.0, 1.0, 1.0, 1.0), [1, 0, 0, 0], [2, 0, 0, 0])
    with pytest.raises(DegeneratePlaneError):
        sectional_curvature(models["sphere4"], (1.0, 1.0, 1.0, 1.0), [0, 0, 0, 0], [1, 0, 0, 0])


# --- Weyl ----------------------------------------------------------------------

def test_weyl_product_norm(models):
    m = models["product_r2s2"]
    for p in sample_points(m, 5, seed=24):
        site = CurvatureSite(m, p, order=2)
        assert float(site.norm2(site.weyl).values) == pytest.approx(1 / 3, abs=1e-12)
    # orthonormal frame at th = pi/2: W_xyxy = (k1 + k2)/3, W_x th x th = -(k1 + k2)/6 / |d th|^2
    w = CurvatureSite(m, (0.0, 0.0, math.pi / 2, 0.0), order=2).weyl.values
    assert w[0, 1, 0, 1] == pytest.approx(1 / 6, abs=1e-13)
    assert w[0, 2, 0, 2] == pytest.approx(-1 / 12 * 2, abs=1e-13)


@pytest.mark.parametrize("name", ["sphere3", "cylinder3", "warped3"])
def test_weyl_vanishes_in_dimension_three(models, name):
    m = models[name]
    for p in sample_points(m, 5, seed=25):
        assert amax(CurvatureSite(m, p, order=2).weyl) <= 1e-9


@pytest.mark.parametrize("name", ["cylinder_r1s3", "cylinder5", "warped_test", "sphere4"])
def test_weyl_vanishes_on_conformally_flat_models(models, name):
    m = models[name]
    for p in sample_points(m, 3, seed=26):
        assert amax(CurvatureSite(m, p, order=2).weyl) <= 1e-9


def test_weyl_trace_free_and_symmetric(models):
    m = models["random_perturb"]
    for p in sample_points(m, 4, seed=27):
        site = CurvatureSite(m, p, order=2)
        w = site.weyl
        assert amax(w) > 1e-3
        for a, b in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]:
            assert amax(site.contract(w, a, b)) <= 1e-9
        v = w.values
        assert np.max(np.abs(v - v.transpose(2, 3, 0, 1))) <= 1e-10


def test_weyl_from_bundle_matches_site(models):
    m = models["random_perturb"]
    p = (0.1, 0.2, -0.3, 0.4)
    b = curvature_bundle(m, p, 1)
    w = weyl_tensor(b, metric_jet(m, p, 3))
    assert np.max(np.abs(w.data - CurvatureSite(m, p, order=3).weyl.data)) <= 1e-13


def test_weyl_needs_three_dimensions(polar):
    with pytest.raises(DimensionError):
        CurvatureSite(polar, (1.0, 0.5), order=2).weyl


# --- Cotton, Bach, D -----------------------------------------------------------

@pytest.mark.parametrize("name", ["sphere4", "sphere3", "product_r2s2", "cylinder_r1s3"])
def test_cotton_vanishes_on_parallel_ricci(models, name):
    m = models[name]
    p = sample_points(m, 2, seed=28).points[1]
    assert amax(cotton_tensor(m, p)) <= 1e-10


def test_cotton_structure_on_generic_metric(models):
    m = models["random_perturb"]
    for p in sample_points(m, 3, seed=29):
        site = CurvatureSite(m, p, order=3)
        c = site.cotton
        assert amax(c) > 1e-3
        assert np.max(np.abs(c.values + c.values.transpose(1, 0, 2))) <= 1e-10
        assert amax(site.contract(c, 0, 2)) <= 1e-9
        assert amax(site.contract(c, 1, 2)) <= 1e-9


def test_cotton_vanishes_on_warped_but_divergence_does_not(models):
    # dt^2 + phi(t)^2 |dx|^2 is conformally flat, so C = 0 while div Rm != 0
    m = models["warped_test"]
    site = CurvatureSite(m, (1.0, 0.0, 0.2, -0.3), order=3)
    assert amax(site.cotton) <= 1e-12
    assert amax(site.contract(site.nabla_riemann, 0, 4)) > 1e-2


def test_bach_product_hand_oracle(models):
    # locally symmetric: B_ij = R^kl W_ikjl / (n-2); orthonormal B = diag(-1, -1, 1, 1)/24
    m = models["product_r2s2"]
    th = 1.1
    b = bach_tensor(m, (0.5, -0.7, th, 2.0)).values
    expected = np.diag([-1 / 24, -1 / 24, 2 / 24, 2 * math.sin(th) ** 2 / 24])
    assert np.max(np.abs(b - expected)) <= 1e-10
    assert np.max(np.abs(b)) >= 1e-3


@pytest.mark.parametrize("name", ["gaussian4", "cylinder_r1s3", "sphere4"])
def test_bach_vanishes_on_conformally_flat_shrinkers(models, name):
    m = models[name]
    for p in sample_points(m, 3, seed=30):
        assert amax(bach_tensor(m, p)) <= 1e-9


def test_bach_symmetric_on_generic_metric(models):
    m = models["random_perturb"]
    b = bach_tensor(m, (0.3, -0.2, 0.6, 0.0)).values
    assert np.max(np.abs(b)) > 1e-3
    assert np.max(np.abs(b - b.T)) <= 1e-9


def test_bach_refuses_dimension_three(models):
    with pytest.raises(DimensionError):
        bach_tensor(models["sphere3"], (1.0, 1.0, 1.0))


def test_d_tensor_examples(models):
    assert amax(d_tensor(models["gaussian4"], (0.3, 0.4, -1.0, 0.2))) <= 1e-14
    assert amax(d_tensor(models["cylinder_r1s3"], (1.2, 1.0, 1.3, 0.4))) <= 1e-10


def test_d_equals_cotton_plus_weyl_gradient(models):
    m = models["product_r2s2"]
    for p in sample_points(m, 4, seed=31):
        site = CurvatureSite(m, p, order=3)
        dt = site.d_tensor
        rhs = site.cotton + site.along(site.grad_f_vector, site.weyl, 3)
        assert np.max(np.abs((dt - rhs).values)) <= 1e-9
        assert np.max(np.abs(dt.values + dt.values.transpose(1, 0, 2))) <= 1e-12
    site = CurvatureSite(m, (1.0, 0.5, 1.0, 0.0), order=3)
    assert amax(site.d_tensor) > 1e-2


def test_d_tensor_needs_potential(models):
    with pytest.raises(MissingPotentialError):
        d_tensor(models["random_perturb"], (0.0,) * 4)


def test_conformal_bundle_fields(models):
    site = CurvatureSite(models["sphere3"], (1.0, 1.0, 1.0), order=4)
    cb = conformal_bundle(site)
    assert cb.bach is None and cb.d_tensor is not None
    assert cb.weyl.rank == 4 and cb.cotton.rank == 3


# --- identities that hold on every metric --------------------------------------

@pytest.mark.parametrize("name", ["random_perturb", "warped_test", "warped3", "product_r2s2"])
def test_contracted_bianchi(models, name):
    m = models[name]
    for p in sample_points(m, 3, seed=32):
        site = CurvatureSite(m, p, order=3)
        div = site.contract(site.nabla_riemann, 0, 4)
        dric = site.nabla_ricci
        rhs = dric.transpose(1, 0, 2) - dric  # nabla_j R_ik - nabla_i R_jk
        assert np.max(np.abs((div - rhs).values)) <= 1e-9
        traced = site.contract(dric, 0, 1)
        assert np.max(np.abs(site.nabla_scalar.values - 2 * traced.values)) <= 1e-9


def test_trace_bound(models):
    m = models["random_perturb"]
    for p in sample_points(m, 5, seed=33):
        site = CurvatureSite(m, p, order=3)
        lhs = float(site.norm2(site.nabla_scalar).values)
        rhs = m.dimension * float(site.norm2(site.nabla_ricci).values)
        assert lhs <= rhs + 1e-10
