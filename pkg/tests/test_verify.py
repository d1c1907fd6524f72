import json

import numpy as np
import pytest

from curvcert.curvature import CurvatureSite
from curvcert.divchain import div_chain
from curvcert.errors import (
    DimensionError, MissingPotentialError, NotApplicableError, PointEvaluationError, UnknownNameError,
)
from curvcert.models import build_model, catalog, sample_points
from curvcert.verify import (
    CASES, DEFAULT_TOL, FAIL, NOT_A_SOLITON, NOT_APPLICABLE, PASS, classify_dim4, excess,
    get_check, list_checks, reports_to_json, reports_to_text, residual, run_check, run_checks,
    run_tier, summary,
)

GOLDEN = [
    "A.bach_sym", "A.bianchi1", "A.bianchi2c", "A.bianchi2t", "A.c6_33", "A.contract_commute",
    "A.cotton_sym", "A.div2_paths", "A.div_w_vs_cotton", "A.hessian_sym", "A.metric_compat",
    "A.p6_29", "A.p6_30", "A.p6_31", "A.p6_32", "A.riemann_sym", "A.torsion_free",
    "A.trace_bound", "A.weyl_dim3", "A.weyl_tracefree",
    "B.c6_34", "B.c6_35", "B.c6_36", "B.c6_37", "B.d_tensor", "B.grad_bound", "B.p2_10",
    "B.p2_12", "B.p2_13", "B.p2_14", "B.p2_15", "B.p2_3", "B.p2_4", "B.p2_5", "B.p2_6",
    "B.p2_7", "B.p2_8", "B.p2_9", "B.rem2_1", "B.rem2_1_div3", "B.rem2_1_div4", "B.rem8_39",
    "B.rem8_40", "B.scalar_nonneg", "B.soliton", "B.thm5_1",
    "C.classify", "C.const_scalar", "C.radial_flat", "C.ricci_norm", "C.rigid_div3rm_f",
    "C.rigid_div3w_f", "C.rigid_div4rm", "C.rigid_div4w",
]

REPORT_KEYS = {"check_id", "model", "points", "max_residual", "mean_residual", "argmax_point",
               "pass", "tolerance", "status", "detail"}


# --- registry ------------------------------------------------------------------

def test_registry_matches_golden_manifest():
    assert [c.id for c in list_checks()] == GOLDEN


def test_registry_shape():
    specs = list_checks()
    assert len(specs) >= 25
    assert len({c.id for c in specs}) == len(specs)
    for c in specs:
        assert c.id.startswith(c.tier + ".")
        if c.tier == "B":
            assert c.requires_potential
    assert [c.id for c in list_checks("B")] == [i for i in GOLDEN if i.startswith("B.")]
    assert list_checks("all") == specs


def test_unknown_ids_and_tiers():
    with pytest.raises(UnknownNameError):
        get_check("B.nope")
    with pytest.raises(ValueError):
        list_checks("D")


def test_applicability_predicates(models):
    assert not get_check("B.p2_13").applicable(models["random_perturb"])
    assert get_check("B.p2_13").applicable(models["warped_test"])  # gated later by the residual
    assert not get_check("A.bach_sym").applicable(models["sphere3"])
    assert get_check("A.weyl_dim3").applicable(models["sphere3"])
    assert not get_check("A.weyl_dim3").applicable(models["sphere4"])
    assert not get_check("C.classify").applicable(models["cylinder5"])


# --- residual definitions ------------------------------------------------------

def test_residual_normalisation():
    assert residual(np.array([1.0, 2.0]), np.array([1.0, 2.5])) == pytest.approx(0.5 / 3.5)
    assert residual(0.0, 0.0) == 0.0
    assert residual(np.array([-4.0]), np.array([-4.0 + 1e-9])) == pytest.approx(1e-9 / 5, rel=1e-6)


def test_excess_is_one_sided():
    assert excess(1.0, 2.0) == 0.0
    assert excess(3.0, 2.0) == pytest.approx(1.0 / 4.0)


# --- runner --------------------------------------------------------------------

def test_theorem_5_1_on_cylinder(models):
    m = models["cylinder_r1s3"]
    plan = sample_points(m, 50, seed=7)
    rep = run_check("B.thm5_1", m, plan)
    assert rep.passed and rep.status == PASS and rep.max_residual <= 1e-8
    assert rep.points == 50 and rep.tolerance == DEFAULT_TOL
    for p in plan.points[:5]:
        site = CurvatureSite(m, p, order=3)
        d1 = div_chain(m, p, "Rm", 1, site=site).level(1)
        assert float(np.max(np.abs(d1.values))) <= 1e-9


def test_weyl_divergence_check(models):
    rep = run_check("A.div_w_vs_cotton", models["warped_test"], sample_points(models["warped_test"], 10))
    assert rep.passed
    # the guard needs a metric that is not conformally flat
    m = models["random_perturb"]
    plan = sample_points(m, 10, seed=1)
    rep = run_check("A.div_w_vs_cotton", m, plan)
    assert rep.passed and rep.max_residual <= 1e-9
    dw = max(float(np.max(np.abs(div_chain(m, p, "W", 1, site=CurvatureSite(m, p, order=3))
                                 .level(1).values))) for p in plan)
    assert dw >= 1e-3


def test_soliton_check_on_non_soliton_is_not_applicable(models):
    m = models["warped_test"]
    with pytest.raises(NotApplicableError):
        run_check("B.p2_13", m, sample_points(m, 5))
    with pytest.raises(NotApplicableError):
        run_check("B.p2_13", models["random_perturb"], sample_points(models["random_perturb"], 5))


def test_skip_rows_explain_themselves(models):
    rows = run_checks(["B.p2_13", "A.bach_sym", "A.bianchi2c"], models["warped3"],
                      sample_points(models["warped3"], 3))
    assert [r.status for r in rows] == [NOT_APPLICABLE, NOT_APPLICABLE, PASS]
    assert rows[0].detail == "model has no potential"
    assert rows[1].detail == "needs n >= 4"
    gated = run_checks(["B.p2_3"], models["warped_test"], sample_points(models["warped_test"], 3))[0]
    assert gated.status == NOT_APPLICABLE and gated.detail.startswith("soliton gate")


def test_tier_b_on_product(models):
    m = models["product_r2s2"]
    reports = run_tier("B", m, sample_points(m, 4, seed=2))
    assert all(r.status == PASS for r in reports), [r for r in reports if r.status != PASS]
    assert len(reports) == len(list_checks("B"))


@pytest.mark.parametrize("name", list(catalog()))
def test_tier_a_on_catalog(models, name):
    m = models[name]
    reports = run_tier("A", m, sample_points(m, 2, seed=3))
    assert not [r for r in reports if r.status == FAIL]
    assert any(r.status == PASS for r in reports)


def test_tier_c_on_non_soliton_is_one_row(models):
    rows = run_tier("C", models["warped_test"], sample_points(models["warped_test"], 3))
    assert len(rows) == 1
    assert rows[0].check_id == "C.classify" and rows[0].status == NOT_A_SOLITON


def test_tier_all_on_non_soliton(models):
    rows = run_tier("all", models["warped_test"], sample_points(models["warped_test"], 2))
    ids = [r.check_id for r in rows]
    assert ids[-1] == "C.classify" and not any(i.startswith("C.") for i in ids[:-1])
    assert summary(rows)[FAIL] == 0


def test_tier_c_on_shrinkers(models):
    for name in ("gaussian4", "sphere4", "cylinder5"):
        m = models[name]
        rows = run_tier("C", m, sample_points(m, 2, seed=4))
        assert all(r.status in (PASS, NOT_APPLICABLE) for r in rows), rows


def test_rigid_checks_at_the_sampling_corner(models):
    # the worst-conditioned corner of the sampled box on the 5-sphere chart
    m = models["sphere5"]
    a = 0.5
    for p in [(a, a, a, a, 1.0), (a, np.pi - a, a, np.pi - a, 3.0)]:
        rows = run_checks(["C.rigid_div4rm", "C.rigid_div4w"], m, [p])
        assert all(r.status == PASS and r.max_residual <= 1e-9 for r in rows)


def test_reports_are_deterministic(models):
    m = models["random_perturb"]
    plan = sample_points(m, 6, seed=9)
    ids = ["A.bianchi2c", "A.p6_31", "A.trace_bound"]
    a = run_checks(ids, m, plan)
    b = run_checks(ids, m, plan)
    assert a == b
    rev = run_checks(ids, m, list(reversed(plan.points)))
    assert [r.max_residual for r in rev] == [r.max_residual for r in a]


def test_parallel_matches_serial(models):
    m = models["product_r2s2"]
    plan = sample_points(m, 4, seed=5)
    ids = ["B.p2_13", "B.d_tensor"]
    assert run_checks(ids, m, plan, workers=2) == run_checks(ids, m, plan)


def test_forced_failure(models):
    m = models["random_perturb"]
    rep = run_check("A.bianchi2c", m, sample_points(m, 3), tol=1e-30)
    assert rep.status == FAIL and rep.passed is False
    assert rep.max_residual > 1e-30


def test_point_errors_carry_the_point():
    m = build_model("edge", ["x", "y"], ["1", "sqrt(x)"], domain=[(0.0, 1.0), (0.0, 1.0)])
    with pytest.raises(PointEvaluationError) as info:
        run_checks(["A.metric_compat"], m, [(0.5, 0.5), (-0.5, 0.5)])
    assert info.value.point == (-0.5, 0.5)


def test_serialisation(models):
    m = models["warped_test"]
    rows = run_checks(["A.bianchi2c", "B.p2_13"], m, sample_points(m, 3))
    doc = json.loads(reports_to_json(rows))
    assert [set(d) for d in doc] == [REPORT_KEYS] * 2
    assert doc[0]["pass"] is True and doc[1]["pass"] is None
    text = reports_to_text(rows)
    assert repr(rows[0].max_residual) in text
    assert "not_applicable" in text and "1 passed, 0 failed, 1 not applicable" in text


# --- classifier ----------------------------------------------------------------

@pytest.mark.parametrize("name, verdict, ratio", [
    ("gaussian4", "Gaussian_R4", 0), ("product_r2s2", "R2xS2", 2),
    ("cylinder_r1s3", "RxS3", 3), ("sphere4", "Einstein", 4),
])
def test_classifier_on_catalog(models, name, verdict, ratio):
    m = models[name]
    res = classify_dim4(m, sample_points(m, 10, seed=6))
    assert res.verdict == verdict and res.definite
    assert res.snapped_ratio == ratio and res.scalar_ratio == pytest.approx(ratio, abs=0.05)
    assert res.eigenvalues == pytest.approx(CASES[ratio][1], abs=0.05)
    assert sum(CASES[ratio][1]) == ratio
    assert res.ricci_norm_gap <= 1e-8


def test_classifier_rejects_non_soliton(models):
    res = classify_dim4(models["warped_test"], sample_points(models["warped_test"], 3))
    assert res.verdict == "NotASoliton" and not res.definite
    assert res.soliton_gate > 0.1


def test_classifier_on_einstein_product():
    # S^2 x S^2 with both radii^2 = 2 is Einstein with Ric = g / 2
    m = build_model("s2s2", ["a", "b", "c", "d"], ["2", "2*sin(a)^2", "2", "2*sin(c)^2"],
                    potential="0", lam=0.5,
                    domain=[(0, np.pi), (0, 2 * np.pi), (0, np.pi), (0, 2 * np.pi)],
                    margins=[0.25, 0, 0.25, 0])
    res = classify_dim4(m, sample_points(m, 5))
    assert res.verdict == "Einstein"


def test_classifier_preconditions(models):
    with pytest.raises(DimensionError):
        classify_dim4(models["sphere3"], sample_points(models["sphere3"], 2))
    with pytest.raises(MissingPotentialError):
        classify_dim4(models["random_perturb"], sample_points(models["random_perturb"], 2))


def test_classification_row(models):
    m = models["product_r2s2"]
    row = run_checks(["C.classify"], m, sample_points(m, 3))[0]
    assert row.status == PASS and row.detail == "R2xS2"
    row = run_checks(["C.classify"], models["cylinder3"], sample_points(models["cylinder3"], 2))[0]
    assert row.status == NOT_APPLICABLE
