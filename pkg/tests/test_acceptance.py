"""Acceptance criteria, each at 100 seeded points and its stated tolerance.

Every test records one PASS/FAIL line; ``conftest.py`` prints them in the
terminal summary.  Run standalone with ``python3 tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from conftest import _d5
from curvcert.cli import main
from curvcert.curvature import CurvatureSite
from curvcert.divchain import div_chain
from curvcert.expr import differentiate, evaluate, jet_evaluate
from curvcert.models import catalog, sample_points
from curvcert.verify import (
    CASES, DEFAULT_TOL, PASS, classify_dim4, run_checks, run_tier, soliton_gate_value,
)

POINTS = 100
SHRINKERS = ["gaussian4", "cylinder_r1s3", "product_r2s2", "sphere4",
             "sphere3", "sphere5", "cylinder3", "cylinder5"]
ALL_MODELS = sorted(catalog())

RESULTS = {}


def record(k, ok, detail):
    RESULTS[k] = (bool(ok), detail)
    assert ok, detail


def model(name):
    return catalog()[name].model


def plan(name, seed=0):
    return sample_points(model(name), POINTS, seed=seed)


def amax(t):
    return float(np.max(np.abs(t.values)))


def test_criterion_1_soliton_gate():
    gates = {name: soliton_gate_value(model(name), plan(name)) for name in SHRINKERS}
    worst = max(gates, key=gates.get)
    record(1, all(v <= 1e-9 for v in gates.values()),
           f"max soliton residual {gates[worst]:.2e} ({worst}) over {len(gates)} shrinkers")


def test_criterion_2_convention_lock():
    worst, where = 0.0, ""
    for name in ALL_MODELS:
        for rep in run_checks(["A.bianchi2c", "A.bianchi2t"], model(name), plan(name), tol=1e-9):
            assert rep.status == PASS, rep
            if rep.max_residual > worst:
                worst, where = rep.max_residual, f"{rep.check_id} on {name}"
    m = model("warped_test")
    guard = max(amax(div_chain(m, p, "Rm", 1, site=CurvatureSite(m, p, order=3)).level(1))
                for p in plan("warped_test"))
    record(2, worst <= 1e-9 and guard >= 1e-3,
           f"max residual {worst:.2e} ({where}); warped_test max|div Rm| = {guard:.3g}")


TIER_B_FAMILIES = ["B.p2_3", "B.p2_4", "B.p2_5", "B.p2_6", "B.p2_7", "B.p2_8", "B.p2_9",
                   "B.p2_10", "B.p2_12", "B.p2_13", "B.p2_14", "B.p2_15", "B.rem2_1",
                   "B.rem2_1_div3", "B.rem2_1_div4", "B.thm5_1", "B.c6_34", "B.c6_35",
                   "B.c6_36", "B.c6_37", "B.d_tensor", "B.rem8_39", "B.rem8_40"]
TIER_A_WEYL = ["A.p6_29", "A.p6_30", "A.p6_31", "A.p6_32", "A.c6_33"]


def test_criterion_3_tier_b_suite():
    lines, ok = [], True
    for name in ("cylinder_r1s3", "product_r2s2"):
        m = model(name)
        pl = plan(name, seed=7)
        reps = run_tier("B", m, pl) + run_checks(TIER_A_WEYL, m, pl)
        ran = {r.check_id for r in reps if r.status == PASS}
        missing = [c for c in TIER_B_FAMILIES + TIER_A_WEYL if c not in ran]
        worst = max(reps, key=lambda r: r.max_residual or 0.0)
        guard = 0.0
        for p in pl.points[:20]:
            site = CurvatureSite(m, p, order=2)
            guard = max(guard, amax(site.ricci * (2 * m.lam)))
        ok = ok and not missing and all(r.status == PASS for r in reps) \
            and worst.max_residual <= DEFAULT_TOL and guard >= 0.4 * m.lam ** 2
        lines.append(f"{name}: {len(reps)} checks, worst {worst.max_residual:.2e} "
                     f"({worst.check_id}), max|2 lam Ric| = {guard:.3g}"
                     + (f", missing {missing}" if missing else ""))
    record(3, ok, "; ".join(lines))


RIGID = ["C.rigid_div4rm", "C.rigid_div3rm_f", "C.rigid_div4w", "C.rigid_div3w_f"]


def test_criterion_4_rigid_hypotheses():
    worst, where = 0.0, ""
    for name in SHRINKERS:
        for rep in run_checks(RIGID, model(name), plan(name)):
            assert rep.status == PASS, rep
            if rep.max_residual > worst:
                worst, where = rep.max_residual, f"{rep.check_id} on {name}"
    record(4, worst <= DEFAULT_TOL, f"max |value| {worst:.2e} ({where})")


def test_criterion_5_classification():
    expected = {"gaussian4": ("Gaussian_R4", 0), "product_r2s2": ("R2xS2", 2),
                "cylinder_r1s3": ("RxS3", 3), "sphere4": ("Einstein", 4)}
    ok, parts = True, []
    for name, (verdict, ratio) in expected.items():
        res = classify_dim4(model(name), plan(name))
        good = (res.verdict == verdict and res.snapped_ratio == ratio and res.snap_gap <= 0.05
                and res.eig_gap <= 0.05 and res.ricci_norm_gap <= 1e-8
                and np.allclose(res.eigenvalues, CASES[ratio][1], atol=0.05))
        ok = ok and good
        parts.append(f"{name}->{res.verdict}")
    record(5, ok, ", ".join(parts))


def test_criterion_6_weyl_structure():
    flat_names = ["sphere3", "cylinder3", "warped3", "cylinder_r1s3", "cylinder5"]
    w_max = max(amax(CurvatureSite(model(n), p, order=2).weyl) for n in flat_names for p in plan(n))
    m = model("product_r2s2")
    norm_gap = max(abs(float(CurvatureSite(m, p, order=2).norm2(CurvatureSite(m, p, order=2).weyl)
                             .values) - 1 / 3) for p in plan("product_r2s2"))
    bach_zero = max(amax(CurvatureSite(model(n), p, order=4).bach)
                    for n in ("gaussian4", "cylinder_r1s3") for p in plan(n))
    bach_prod = max(amax(CurvatureSite(m, p, order=4).bach) for p in plan("product_r2s2"))
    record(6, w_max <= 1e-9 and norm_gap <= 1e-6 and bach_zero <= 1e-9 and bach_prod >= 1e-3,
           f"max|W| on LCF/3-d {w_max:.1e}; ||W|^2 - 1/3| {norm_gap:.1e}; "
           f"Bach flat models {bach_zero:.1e}; Bach product {bach_prod:.3g}")


def test_criterion_7_derivative_backbone():
    rng = np.random.default_rng(2024)
    names = ALL_MODELS
    worst = 0.0
    for _ in range(1000):
        m = model(names[rng.integers(len(names))])
        n = m.dimension
        i, j, c = rng.integers(n), rng.integers(n), int(rng.integers(n))
        p = np.array(sample_points(m, 1 + int(rng.integers(50)), seed=int(rng.integers(1 << 30))).points[-1])
        e = m.metric[i][j]
        sym = evaluate(differentiate(e, c), p)
        alpha = tuple(1 if k == c else 0 for k in range(n))
        jet = jet_evaluate(e, p, 1)[alpha]
        fd = _d5(lambda y: evaluate(e, y), p, c, 1e-4)
        gap = max(abs(sym - fd), abs(jet - fd)) / (1 + abs(sym))
        worst = max(worst, gap)
    record(7, worst <= 1e-6, f"max relative gap {worst:.2e} over 1000 probes")


def test_criterion_8_inequalities():
    r_min = math.inf
    trace_excess = -math.inf
    grad_excess = -math.inf
    for name in ALL_MODELS:
        m = model(name)
        for p in plan(name):
            site = CurvatureSite(m, p, order=3)
            d_r = float(site.norm2(site.nabla_scalar).values)
            trace_excess = max(trace_excess, d_r - m.dimension * float(site.norm2(site.nabla_ricci).values))
            if name in SHRINKERS:
                r_min = min(r_min, float(site.scalar.values))
                bound = 4 * float(site.norm2(site.ricci).values) * float(site.norm2(site.grad_f).values)
                grad_excess = max(grad_excess, d_r - bound)
    record(8, r_min >= -1e-10 and trace_excess <= 1e-10 and grad_excess <= 1e-10,
           f"min R {r_min:.3g}; max(|dR|^2 - n|dRic|^2) {trace_excess:.2e}; "
           f"max(|dR|^2 - 4|Ric|^2|df|^2) {grad_excess:.2e}")


def test_criterion_9_cli_determinism(tmp_path):
    argv = ["verify", "--model", "product_r2s2", "--tier", "B", "--points", "100", "--seed", "7",
            "--format", "json"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code_a = main(argv + ["--out", str(a)])
    code_b = main(argv + ["--out", str(b)])
    identical = a.read_bytes() == b.read_bytes()
    code_fail = main(["verify", "--model", "product_r2s2", "--tier", "B", "--points", "5",
                      "--tol", "1e-15", "--out", str(tmp_path / "c.txt")])
    code_usage = main(["verify", "--model", "product_r2s2", "--tier", "Q"])
    record(9, identical and (code_a, code_b, code_fail, code_usage) == (0, 0, 1, 2),
           f"byte-identical json: {identical}; exit codes pass={code_a}/{code_b} "
           f"forced-failure={code_fail} usage={code_usage}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
