"""Check registry, runner and the four-dimensional classifier.

Every check evaluates ``(lhs, rhs)`` pairs at one point from a shared
:class:`~curvcert.curvature.CurvatureSite` and reduces them to the normalised
residual ``max|lhs - rhs| / (1 + max(max|lhs|, max|rhs|))``.  Inequality
checks ``lhs <= rhs`` use ``max(0, lhs - rhs)`` with the same normalisation.

Tier A identities hold on every metric.  Tier B identities hold on gradient
shrinking solitons and only run when the model carries a potential and passes
the soliton gate at every planned point.  Tier C collects consequences of
rigidity and the classification.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from . import divchain as dc
from .curvature import CurvatureSite, sectional_curvature
from .errors import (
    CurvcertError,
    DimensionError,
    MissingPotentialError,
    NotApplicableError,
    PointEvaluationError,
    UnknownNameError,
)
from .geometry import DEFAULT_ORDER, ModelSpec, TensorJet, multiply, raise_all, raise_index, scalar_jet
from .jets import compose
from .models import SamplePlan, soliton_residual

DEFAULT_TOL = 1e-8
SOLITON_GATE = 1e-9
SNAP_GAP = 0.05
EIG_SNAP = 0.05
TIERS = ("A", "B", "C")

DEFINITE = ("Einstein", "Gaussian_R4", "R2xS2", "RxS3")
CASES = {
    0: ("Gaussian_R4", (0.0, 0.0, 0.0, 0.0)),
    2: ("R2xS2", (0.0, 0.0, 1.0, 1.0)),
    3: ("RxS3", (0.0, 1.0, 1.0, 1.0)),
    4: ("Einstein", (1.0, 1.0, 1.0, 1.0)),
}


# --- residuals ------------------------------------------------------------------

def _vals(x) -> np.ndarray:
    if isinstance(x, TensorJet):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float)


def residual(lhs, rhs) -> float:
    a, b = _vals(lhs), _vals(rhs)
    scale = 1.0 + max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def excess(lhs, rhs) -> float:
    """Normalised violation of ``lhs <= rhs``."""
    a, b = _vals(lhs), _vals(rhs)
    scale = 1.0 + max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return max(0.0, float(np.max(a - b))) / scale


# --- shared building blocks (memoised on the site) -------------------------------

def _weight(site: CurvatureSite) -> TensorJet:
    """Jet of ``exp(-f)``."""
    def build():
        f = site.potential
        e0 = math.exp(-float(f.values))
        derivs = [e0 * (-1) ** k for k in range(f.order + 1)]
        return scalar_jet(compose(f.data, derivs, f.space), f.order, site.point)
    return site.cached("exp(-f)", build)


def _ric_sq(site) -> TensorJet:
    # (Ric^2)_ik = R_ij g^jl R_lk
    def build():
        mixed = multiply(site.ricci, site.inverse_metric, "IJ,JL->IL")
        return multiply(mixed, site.ricci, "IL,LK->IK")
    return site.cached("ric^2", build)


def _rm_ric(site) -> TensorJet:
    # R_ijkl R_jl with both pairs contracted through the metric
    return site.cached("rm.ric", lambda: multiply(site.riemann, site.ricci_up, "IJKL,JL->IK"))


def _hess_r(site) -> TensorJet:
    return site.cached("hessR", lambda: site.nabla(site.nabla_scalar))


def _nabla2_ric(site) -> TensorJet:
    return site.cached("nabla2Ric", lambda: site.nabla(site.nabla_ricci))


def _level(site, family, k):
    return dc.iterated_divergence(site, family, dc.CANONICAL[:k])


def _ric_dot_grad_r(site):
    # R_ik nabla_k R, a covector
    def build():
        grad_r = raise_index(site.nabla_scalar, 0, site.inverse_metric)
        return site.along(grad_r, site.ricci, 1)
    return site.cached("ric.gradR", build)


def _n_coeffs(n):
    a = (n - 3) / (n - 2)
    k = (n - 3) / (2 * (n - 1) * (n - 2))
    return a, k


# --- Tier A evaluators ----------------------------------------------------------

def _a_metric_compat(s):
    return [(s.nabla(s.metric), 0.0)]


def _a_torsion_free(s):
    g = s.christoffel
    return [(g, g.transpose(0, 2, 1))]


def _a_hessian_sym(s):
    h = _hess_r(s)
    return [(h, h.transpose(1, 0))]


def _a_contract_commute(s):
    # nabla(tr_02 Rm) vs tr_13(nabla Rm)
    return [(s.nabla(s.ricci), s.contract(s.nabla_riemann, 1, 3))]


def _a_riemann_sym(s):
    rm = s.riemann
    return [(rm, -rm.transpose(1, 0, 2, 3)), (rm, -rm.transpose(0, 1, 3, 2)),
            (rm, rm.transpose(2, 3, 0, 1))]


def _a_bianchi1(s):
    rm = s.riemann
    # R_ijkl + R_iklj + R_iljk
    total = rm + rm.transpose(0, 2, 3, 1) + rm.transpose(0, 3, 1, 2)
    return [(total, 0.0)]


def _a_bianchi2c(s):
    dric = s.nabla_ricci  # [a, i, k]
    rhs = dric.transpose(1, 0, 2) - dric  # nabla_j R_ik - nabla_i R_jk, slots (i, j, k)
    return [(_level(s, "Rm", 1), rhs)]


def _a_bianchi2t(s):
    div_ric = s.contract(s.nabla_ricci, 0, 1)
    return [(s.nabla_scalar, div_ric * 2.0)]


def _a_trace_bound(s):
    return [(s.norm2(s.nabla_scalar), s.norm2(s.nabla_ricci) * float(s.n))]


def _a_weyl_tracefree(s):
    w = s.weyl
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    return [(s.contract(w, a, b), 0.0) for a, b in pairs]


def _a_weyl_dim3(s):
    return [(s.weyl, 0.0)]


def _a_cotton_sym(s):
    c = s.cotton
    return [(c, -c.transpose(1, 0, 2)), (s.contract(c, 0, 1), 0.0), (s.contract(c, 1, 2), 0.0)]


def _a_div_w_vs_cotton(s):
    a, _ = _n_coeffs(s.n)
    return [(_level(s, "W", 1), s.cotton * (-a))]


def _a_bach_sym(s):
    b = s.bach
    return [(b, b.transpose(1, 0))]


def _a_div2_paths(s):
    for fam in ("Rm",) + (("W",) if s.n >= 3 else ()):
        full = dc.second_derivative(s, fam)
        canonical = s.contract(s.contract(full, 0, 3), 0, 3)
        yield (_level(s, fam, 2), canonical)


def _gr_terms(s):
    # g_ik nabla_j R - g_jk nabla_i R, slots (i, j, k)
    d_r, g = s.nabla_scalar, s.metric
    return multiply(d_r, g, "J,IK->IJK") - multiply(d_r, g, "I,JK->IJK")


def _a_p6_29(s):
    a, k = _n_coeffs(s.n)
    return [(_level(s, "W", 1), _level(s, "Rm", 1) * a - _gr_terms(s) * k)]


def _a_p6_30(s):
    a, k = _n_coeffs(s.n)
    lap_r = s.contract(_hess_r(s), 0, 1)
    corr = multiply(lap_r, s.metric, ",IK->IK") - _hess_r(s).transpose(1, 0)
    return [(_level(s, "W", 2), _level(s, "Rm", 2) * a - corr * k)]


def _a_p6_31(s):
    a, k = _n_coeffs(s.n)
    return [(_level(s, "W", 3), _level(s, "Rm", 3) * a + _ric_dot_grad_r(s) * k)]


def _ric_hess_r(s):
    return multiply(s.ricci_up, _hess_r(s), "IK,IK->")


def _a_p6_32(s):
    a, k = _n_coeffs(s.n)
    extra = s.norm2(s.nabla_scalar) * 0.5 + _ric_hess_r(s)
    return [(_level(s, "W", 4), _level(s, "Rm", 4) * a + extra * k)]


def _a_c6_33(s):
    a, k = _n_coeffs(s.n)
    dric = s.nabla_ricci
    return [(_level(s, "W", 1), (dric.transpose(1, 0, 2) - dric) * a - _gr_terms(s) * k)]


# --- Tier B evaluators ----------------------------------------------------------

def _b_soliton(s):
    return [(soliton_residual(s.model, s.point, site=s), 0.0)]


def _b_p2_3(s):
    return [(s.along(s.grad_f_vector, s.riemann, 3), _level(s, "Rm", 1))]


def _b_p2_4(s):
    # e^{f} nabla_l (R_ijkl e^{-f}) through the genuine weighted tensor
    w = _weight(s)
    weighted = multiply(w, s.riemann, ",IJKL->IJKL")
    div = s.contract(s.nabla(weighted), 0, 4)
    return [(div * math.exp(float(s.potential.values)), 0.0)]


def _b_p2_5(s):
    return [(s.along(s.grad_f_vector, s.ricci, 1), s.contract(s.nabla_ricci, 0, 2))]


def _b_p2_6(s):
    w = _weight(s)
    weighted = multiply(w, s.ricci, ",IJ->IJ")
    div = s.contract(s.nabla(weighted), 0, 2)
    return [(div * math.exp(float(s.potential.values)), 0.0)]


def _b_p2_7(s):
    return [(s.nabla_scalar, s.along(s.grad_f_vector, s.ricci, 1) * 2.0)]


def _b_p2_8(s):
    lam = s.lam
    return [(s.weighted_laplacian(s.ricci), s.ricci * (2 * lam) - _rm_ric(s) * 2.0)]


def _b_p2_9(s):
    lam = s.lam
    ric2 = s.norm2(s.ricci)
    return [(s.weighted_laplacian(s.scalar), s.scalar * (2 * lam) - ric2 * 2.0)]


def _rm_ric_ric(s):
    return multiply(_rm_ric(s), s.ricci_up, "IK,IK->")


def _b_p2_10(s):
    lam = s.lam
    ric2 = s.norm2(s.ricci)
    rhs = ric2 * (4 * lam) - _rm_ric_ric(s) * 4.0 + s.norm2(s.nabla_ricci) * 2.0
    return [(s.weighted_laplacian(ric2), rhs)]


def _b_p2_12(s):
    q = s.scalar + s.norm2(s.grad_f) - s.potential * (2 * s.lam)
    return [(s.nabla(q), 0.0)]


def _p2_13_rhs(s):
    lam = s.lam
    drift = s.along(s.grad_f_vector, s.nabla_ricci, 0)
    return (s.ricci * (2 * lam) + drift - _hess_r(s) * 0.5
            - _ric_sq(s) - _rm_ric(s))


def _b_p2_13(s):
    return [(_level(s, "Rm", 2), _p2_13_rhs(s))]


def _p2_14_rhs(s):
    d_up = raise_all(s.nabla_ricci, s.inverse_metric)
    return -multiply(s.riemann, d_up, "IJKL,KJL->I")


def _b_p2_14(s):
    return [(_level(s, "Rm", 3), _p2_14_rhs(s))]


def _p2_15_rhs(s):
    dric = s.nabla_ricci
    cross = s.inner(dric, dric.transpose(2, 1, 0))
    rm_up = raise_all(s.riemann, s.inverse_metric)
    last = multiply(rm_up, _nabla2_ric(s), "IJKL,IKJL->")
    return cross - s.norm2(dric) - last


def _b_p2_15(s):
    return [(_level(s, "Rm", 4), _p2_15_rhs(s))]


def _b_rem2_1(s):
    canonical, swapped = dc.div2_ordering_variants(s.model, s.point, "Rm", site=s)
    return [(canonical, swapped), (canonical, canonical.transpose(1, 0))]


def _b_rem2_1_div3(s):
    ref = _level(s, "Rm", 3)
    return [(ref, dc.iterated_divergence(s, "Rm", o)) for o in dc.DIV3_VARIANTS.values()]


def _b_rem2_1_div4(s):
    ref = _level(s, "Rm", 4)
    return [(ref, dc.iterated_divergence(s, "Rm", o)) for o in dc.DIV4_VARIANTS.values()]


def _b_thm5_1(s):
    lhs = dc.div3_radial(s.model, s.point, "Rm", site=s)
    return [(lhs, -0.5 * float(s.norm2(_level(s, "Rm", 1)).values))]


def _b_c6_34(s):
    n, lam = s.n, s.lam
    a, k = _n_coeffs(n)
    drift_ric = s.along(s.grad_f_vector, s.nabla_ricci, 0)
    core = (s.ricci * (2 * lam) + drift_ric - _ric_sq(s)
            - _rm_ric(s))
    drift_r = s.along(s.grad_f_vector, s.nabla_scalar, 0)
    sc = drift_r + s.scalar * (2 * lam) - s.norm2(s.ricci) * 2.0
    rhs = (core * a - _hess_r(s) * ((n - 3) / (2 * (n - 1)))
           - multiply(sc, s.metric, ",IK->IK") * k)
    return [(_level(s, "W", 2), rhs)]


def _b_c6_35(s):
    a, k = _n_coeffs(s.n)
    rhs = _p2_14_rhs(s) * a
    extra = _ric_dot_grad_r(s)
    return [(_level(s, "W", 3), rhs + extra * k)]


def _b_c6_36(s):
    a, k = _n_coeffs(s.n)
    extra = s.norm2(s.nabla_scalar) * 0.5 + _ric_hess_r(s)
    rhs = _p2_15_rhs(s)
    return [(_level(s, "W", 4), rhs * a + extra * k)]


def _b_c6_37(s):
    n = s.n
    a, k = _n_coeffs(n)
    lhs = dc.div3_radial(s.model, s.point, "W", site=s)
    div_sq = float(s.norm2(_level(s, "Rm", 1)).values)
    grad_sq = float(s.norm2(s.nabla_scalar).values)
    rhs = -(n - 3) / (2 * (n - 2)) * div_sq + k / 2 * grad_sq
    return [(lhs, rhs)]


def _b_d_tensor(s):
    return [(s.d_tensor, s.cotton + s.along(s.grad_f_vector, s.weyl, 3))]


def _b_rem8_39(s):
    alt = dc.catino_div4_w(s.model, s.point, site=s)
    perm = dc.iterated_divergence(s, "W", dc.DIV4_VARIANTS["i k l j R_ijkl"])
    return [(alt, -float(_level(s, "W", 4).values)), (alt, -float(perm.values))]


def _b_rem8_40(s):
    canonical, swapped = dc.div2_ordering_variants(s.model, s.point, "W", site=s)
    return [(canonical, swapped)]


def _b_grad_bound(s):
    lhs = s.norm2(s.nabla_scalar)
    rhs = 4.0 * float(s.norm2(s.ricci).values) * float(s.norm2(s.grad_f).values)
    return [(lhs, rhs)]


def _b_scalar_nonneg(s):
    return [(-float(s.scalar.values), 0.0)]


# --- Tier C evaluators ----------------------------------------------------------

def _c_const_scalar(s):
    return [(s.nabla_scalar, 0.0)]


def _c_ricci_norm(s):
    return [(s.norm2(s.ricci), s.scalar * s.lam)]


RADIAL_PROBES = 8


def _c_radial_flat(s):
    g = s.metric.values
    grad = np.asarray(s.grad_f_vector.values, dtype=float)
    if math.sqrt(max(grad @ g @ grad, 0.0)) <= 1e-6:
        return [(0.0, 0.0)]
    rng = np.random.default_rng(0)
    out = []
    for _ in range(RADIAL_PROBES):
        e = rng.standard_normal(s.n)
        e = e - (e @ g @ grad) / (grad @ g @ grad) * grad
        out.append((sectional_curvature(s.model, s.point, e, grad, site=s), 0.0))
    return out


def _c_rigid_div4rm(s):
    return [(_level(s, "Rm", 4), 0.0)]


def _c_rigid_div3rm_f(s):
    return [(dc.div3_radial(s.model, s.point, "Rm", site=s), 0.0)]


def _c_rigid_div4w(s):
    return [(_level(s, "W", 4), 0.0)]


def _c_rigid_div3w_f(s):
    return [(dc.div3_radial(s.model, s.point, "W", site=s), 0.0)]


# --- registry -------------------------------------------------------------------

@dataclass(frozen=True)
class CheckSpec:
    id: str
    tier: str
    description: str
    evaluator: Callable = field(repr=False, compare=False)
    requires_potential: bool = False
    min_dim: int = 2
    exact_dim: Optional[int] = None
    inequality: bool = False
    order: int = DEFAULT_ORDER  # metric jet order the evaluator consumes

    def applicable(self, model: ModelSpec) -> bool:
        n = model.dimension
        if self.requires_potential and model.potential is None:
            return False
        if n < self.min_dim:
            return False
        return self.exact_dim is None or n == self.exact_dim

    def evaluate(self, site: CurvatureSite) -> float:
        pairs = self.evaluator(site)
        f = excess if self.inequality else residual
        return max(f(lhs, rhs) for lhs, rhs in pairs)


def _spec(id, order, description, fn, **kw):
    tier = id[0]
    if tier in "BC":
        kw.setdefault("requires_potential", True)
    return CheckSpec(id, tier, description, fn, order=order, **kw)


_REGISTRY = [
    _spec("A.metric_compat", 1, "nabla g = 0", _a_metric_compat),
    _spec("A.torsion_free", 1, "Gamma^k_ij = Gamma^k_ji", _a_torsion_free),
    _spec("A.hessian_sym", 4, "nabla_a nabla_b R symmetric", _a_hessian_sym),
    _spec("A.contract_commute", 3, "contraction commutes with nabla on Rm", _a_contract_commute),
    _spec("A.riemann_sym", 2, "R_ijkl = -R_jikl = -R_ijlk = R_klij", _a_riemann_sym),
    _spec("A.bianchi1", 2, "R_ijkl + R_iklj + R_iljk = 0", _a_bianchi1),
    _spec("A.bianchi2c", 3, "nabla_l R_ijkl = nabla_j R_ik - nabla_i R_jk", _a_bianchi2c),
    _spec("A.bianchi2t", 3, "nabla R = 2 div Ric", _a_bianchi2t),
    _spec("A.trace_bound", 3, "|nabla R|^2 <= n |nabla Ric|^2", _a_trace_bound, inequality=True),
    _spec("A.weyl_tracefree", 2, "every trace of W vanishes", _a_weyl_tracefree, min_dim=3),
    _spec("A.weyl_dim3", 2, "W = 0 in dimension 3", _a_weyl_dim3, exact_dim=3),
    _spec("A.cotton_sym", 3, "C_ijk = -C_jik, C trace-free", _a_cotton_sym, min_dim=3),
    _spec("A.div_w_vs_cotton", 3, "div W = -((n-3)/(n-2)) C", _a_div_w_vs_cotton, min_dim=3),
    _spec("A.bach_sym", 4, "B_ij = B_ji", _a_bach_sym, min_dim=4),
    _spec("A.div2_paths", 4, "derive-then-contract div^2 = contraction of nabla nabla T",
          lambda s: list(_a_div2_paths(s)), min_dim=3),
    _spec("A.p6_29", 3, "div W in terms of div Rm and nabla R", _a_p6_29, min_dim=3),
    _spec("A.p6_30", 4, "div^2 W in terms of div^2 Rm and nabla nabla R", _a_p6_30, min_dim=3),
    _spec("A.p6_31", 5, "div^3 W = a div^3 Rm + k Ric(nabla R)", _a_p6_31, min_dim=3),
    _spec("A.p6_32", 6, "div^4 W = a div^4 Rm + k (|nabla R|^2/2 + Ric . nabla nabla R)", _a_p6_32,
          min_dim=3),
    _spec("A.c6_33", 3, "div W in terms of nabla Ric and nabla R", _a_c6_33, min_dim=3),
    _spec("B.soliton", 2, "Ric + nabla^2 f = lambda g", _b_soliton),
    _spec("B.p2_3", 3, "R_ijkl nabla_l f = nabla_l R_ijkl", _b_p2_3),
    _spec("B.p2_4", 3, "nabla_l (R_ijkl e^{-f}) = 0", _b_p2_4),
    _spec("B.p2_5", 3, "R_jl nabla_l f = nabla_l R_jl", _b_p2_5),
    _spec("B.p2_6", 3, "nabla_l (R_jl e^{-f}) = 0", _b_p2_6),
    _spec("B.p2_7", 3, "nabla R = 2 Ric(nabla f, .)", _b_p2_7),
    _spec("B.p2_8", 4, "Delta_f Ric = 2 lambda Ric - 2 Rm(Ric)", _b_p2_8),
    _spec("B.p2_9", 4, "Delta_f R = 2 lambda R - 2 |Ric|^2", _b_p2_9),
    _spec("B.p2_10", 4, "Delta_f |Ric|^2 = 4 lambda |Ric|^2 - 4 Rm(Ric, Ric) + 2 |nabla Ric|^2",
          _b_p2_10),
    _spec("B.p2_12", 3, "nabla (R + |nabla f|^2 - 2 lambda f) = 0", _b_p2_12),
    _spec("B.p2_13", 4, "div^2 Rm closed form", _b_p2_13),
    _spec("B.p2_14", 5, "div^3 Rm = -R_ijkl nabla_k R_jl", _b_p2_14),
    _spec("B.p2_15", 6, "div^4 Rm closed form", _b_p2_15),
    _spec("B.rem2_1", 4, "div^2 Rm ordering equality and symmetry", _b_rem2_1),
    _spec("B.rem2_1_div3", 5, "div^3 Rm ordering equalities", _b_rem2_1_div3),
    _spec("B.rem2_1_div4", 6, "div^4 Rm ordering equalities", _b_rem2_1_div4),
    _spec("B.thm5_1", 5, "div^3 Rm(nabla f) = -|div Rm|^2 / 2", _b_thm5_1),
    _spec("B.c6_34", 4, "div^2 W closed form", _b_c6_34, min_dim=3),
    _spec("B.c6_35", 5, "div^3 W closed form", _b_c6_35, min_dim=3),
    _spec("B.c6_36", 6, "div^4 W closed form", _b_c6_36, min_dim=3),
    _spec("B.c6_37", 5, "div^3 W(nabla f) in terms of |div Rm|^2 and |nabla R|^2", _b_c6_37,
          min_dim=3),
    _spec("B.d_tensor", 3, "D = C + W(., ., ., nabla f)", _b_d_tensor, min_dim=3),
    _spec("B.rem8_39", 6, "alternative div^4 W = -div^4 W", _b_rem8_39, min_dim=4),
    _spec("B.rem8_40", 4, "div^2 W ordering equality", _b_rem8_40, min_dim=4),
    _spec("B.grad_bound", 3, "|nabla R|^2 <= 4 |Ric|^2 |nabla f|^2", _b_grad_bound, inequality=True),
    _spec("B.scalar_nonneg", 2, "R >= 0", _b_scalar_nonneg, inequality=True),
    _spec("C.const_scalar", 3, "nabla R = 0", _c_const_scalar),
    _spec("C.radial_flat", 2, "sec(E, nabla f) = 0 for E orthogonal to nabla f", _c_radial_flat),
    _spec("C.ricci_norm", 2, "|Ric|^2 = lambda R", _c_ricci_norm),
    _spec("C.rigid_div4rm", 6, "div^4 Rm = 0", _c_rigid_div4rm),
    _spec("C.rigid_div3rm_f", 5, "div^3 Rm(nabla f) = 0", _c_rigid_div3rm_f),
    _spec("C.rigid_div4w", 6, "div^4 W = 0", _c_rigid_div4w, min_dim=3),
    _spec("C.rigid_div3w_f", 5, "div^3 W(nabla f) = 0", _c_rigid_div3w_f, min_dim=3),
    _spec("C.classify", 3, "four-dimensional classification verdict", None, exact_dim=4),
]

_BY_ID = {c.id: c for c in _REGISTRY}
assert len(_BY_ID) == len(_REGISTRY), "duplicate check ids"


def list_checks(tier: Optional[str] = None) -> list:
    """All check specs sorted by id, optionally restricted to one tier."""
    out = sorted(_REGISTRY, key=lambda c: c.id)
    if tier not in (None, "all"):
        if tier not in TIERS:
            raise ValueError(f"unknown tier {tier!r}")
        out = [c for c in out if c.tier == tier]
    return out


def get_check(check_id: str) -> CheckSpec:
    try:
        return _BY_ID[check_id]
    except KeyError:
        raise UnknownNameError(f"unknown check id {check_id!r}") from None


# --- reports --------------------------------------------------------------------

PASS, FAIL, NOT_APPLICABLE, NOT_A_SOLITON = "pass", "fail", "not_applicable", "not_a_soliton"


@dataclass(frozen=True)
class CheckReport:
    check_id: str
    model: str
    points: int
    max_residual: Optional[float]
    mean_residual: Optional[float]
    argmax_point: Optional[tuple]
    passed: Optional[bool]
    tolerance: float
    status: str
    detail: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "model": self.model,
            "points": self.points,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "argmax_point": list(self.argmax_point) if self.argmax_point is not None else None,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "status": self.status,
            "detail": self.detail,
        }

    @property
    def counts_as_failure(self) -> bool:
        return self.status == FAIL


def _skip(spec_id, model, tol, status, detail):
    return CheckReport(spec_id, model.name, 0, None, None, None, None, tol, status, detail)


def _summarise(check_id, model, points, values, tol, detail=None):
    arr = np.asarray(values, dtype=float)
    k = int(np.argmax(arr))  # first maximiser, so ties resolve by plan order
    worst = float(arr[k])
    ok = bool(worst <= tol)
    return CheckReport(check_id, model.name, len(points), worst, float(np.mean(arr)),
                       tuple(points[k]), ok, tol, PASS if ok else FAIL, detail)


# --- evaluation -----------------------------------------------------------------

def _eval_point(args):
    model, point, ids = args
    # one site per point at the largest order any selected check needs
    order = max(_BY_ID[c].order for c in ids)
    site = CurvatureSite(model, point, order=order)
    out = []
    for cid in ids:
        try:
            out.append(_BY_ID[cid].evaluate(site))
        except CurvcertError as exc:
            raise PointEvaluationError(cid, point, exc) from exc
    return out


def _evaluate(model, points, ids, workers=1):
    """``values[k][j]``: residual of ``ids[j]`` at ``points[k]``."""
    jobs = [(model, p, ids) for p in points]
    if workers and workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_eval_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_eval_point(j) for j in jobs]


def soliton_gate_value(model: ModelSpec, points) -> float:
    if model.potential is None or model.lam is None:
        return math.inf
    worst = 0.0
    for p in points:
        worst = max(worst, float(np.max(np.abs(soliton_residual(model, p).values))))
    return worst


def _points(plan) -> list:
    return list(plan.points if isinstance(plan, SamplePlan) else plan)


def run_checks(ids: Sequence[str], model: ModelSpec, plan, tol: float = DEFAULT_TOL,
               workers: int = 1) -> list:
    """Reports for ``ids`` (in the given order); inapplicable ones become skip rows."""
    points = _points(plan)
    specs = [get_check(i) for i in ids]
    gate = None
    runnable, rows = [], {}
    for spec in specs:
        if spec.id == "C.classify":
            continue
        if not spec.applicable(model):
            rows[spec.id] = _skip(spec.id, model, tol, NOT_APPLICABLE, _why(spec, model))
            continue
        if spec.tier in "BC":
            if gate is None:
                gate = soliton_gate_value(model, points)
            if gate > SOLITON_GATE:
                rows[spec.id] = _skip(spec.id, model, tol, NOT_APPLICABLE,
                                      f"soliton gate {gate:.3g} > {SOLITON_GATE:g}")
                continue
        runnable.append(spec.id)
    if runnable:
        values = _evaluate(model, points, runnable, workers)
        for j, cid in enumerate(runnable):
            rows[cid] = _summarise(cid, model, points, [v[j] for v in values], tol)
    if any(s.id == "C.classify" for s in specs):
        rows["C.classify"] = _classify_row(model, points, tol)
    return [rows[s.id] for s in specs]


def _why(spec, model):
    if spec.requires_potential and model.potential is None:
        return "model has no potential"
    if spec.exact_dim is not None and model.dimension != spec.exact_dim:
        return f"needs n = {spec.exact_dim}"
    return f"needs n >= {spec.min_dim}"


def run_check(check_id: str, model: ModelSpec, plan, tol: float = DEFAULT_TOL,
              workers: int = 1) -> CheckReport:
    """Run one check; raises :class:`NotApplicableError` when it does not apply to ``model``."""
    report = run_checks([check_id], model, plan, tol, workers)[0]
    if report.status == NOT_APPLICABLE:
        raise NotApplicableError(f"{check_id} does not apply to {model.name}: {report.detail}")
    return report


def run_tier(tier: str, model: ModelSpec, plan, tol: float = DEFAULT_TOL,
             workers: int = 1) -> list:
    """Every check of ``tier`` (or ``"all"``); inapplicable checks are reported, never dropped.

    Tier C on a model that fails the soliton gate collapses to a single
    ``C.classify`` row with status ``not_a_soliton``.
    """
    specs = list_checks(tier)
    points = _points(plan)
    ids = [s.id for s in specs]
    if tier in ("C", "all"):
        gate = soliton_gate_value(model, points)
        if gate > SOLITON_GATE:
            c_row = CheckReport("C.classify", model.name, len(points), None, None, None, None,
                                tol, NOT_A_SOLITON, "NotASoliton")
            others = [i for i in ids if not i.startswith("C.")]
            return run_checks(others, model, points, tol, workers) + [c_row]
    return run_checks(ids, model, points, tol, workers)


def summary(reports) -> dict:
    out = {PASS: 0, FAIL: 0, NOT_APPLICABLE: 0, NOT_A_SOLITON: 0}
    for r in reports:
        out[r.status] += 1
    return out


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


def _fmt(v):
    return "-" if v is None else repr(v)


def reports_to_text(reports) -> str:
    header = ("check_id", "model", "points", "max_residual", "mean_residual", "tolerance",
              "status", "argmax_point")
    rows = [header]
    for r in reports:
        pt = "-" if r.argmax_point is None else "(" + ", ".join(f"{x:.6g}" for x in r.argmax_point) + ")"
        status = r.status if r.detail is None or r.status in (PASS, FAIL) else f"{r.status} ({r.detail})"
        if r.check_id == "C.classify" and r.detail:
            status = f"{r.status} ({r.detail})"
        rows.append((r.check_id, r.model, str(r.points), _fmt(r.max_residual),
                     _fmt(r.mean_residual), repr(r.tolerance), status, pt))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header) - 1)]
    lines = []
    for row in rows:
        cells = [c.ljust(w) for c, w in zip(row[:-1], widths)] + [row[-1]]
        lines.append("  ".join(cells).rstrip())
    s = summary(reports)
    lines.append("")
    lines.append(f"{s[PASS]} passed, {s[FAIL]} failed, {s[NOT_APPLICABLE]} not applicable"
                 + (f", {s[NOT_A_SOLITON]} not a soliton" if s[NOT_A_SOLITON] else ""))
    return "\n".join(lines) + "\n"


# --- classification -------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationResult:
    model: str
    verdict: str
    scalar_ratio: Optional[float]
    snapped_ratio: Optional[int]
    eigenvalues: Optional[tuple]  # mean sorted Ricci eigenvalues in units of lambda
    grad_r_max: Optional[float]
    soliton_gate: float
    ricci_norm_gap: Optional[float]
    snap_gap: Optional[float]
    eig_gap: Optional[float]
    points: int
    reason: str = ""

    @property
    def definite(self) -> bool:
        return self.verdict in DEFINITE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eigenvalues"] = list(self.eigenvalues) if self.eigenvalues is not None else None
        return d


def _site_data(args):
    model, p = args
    site = CurvatureSite(model, p, order=3)
    g = site.metric.values
    ric = site.ricci.values
    eig = scipy.linalg.eigh(ric, g, eigvals_only=True)
    d_r = site.nabla_scalar
    return (float(site.scalar.values), tuple(float(x) for x in np.sort(eig)),
            math.sqrt(max(float(site.norm2(d_r).values), 0.0)),
            residual(site.norm2(site.ricci), site.scalar * model.lam))


def classify_dim4(model: ModelSpec, plan, tol: float = DEFAULT_TOL) -> ClassificationResult:
    """Catalog-style classification of a four-dimensional shrinker."""
    if model.dimension != 4:
        raise DimensionError(f"classification needs n = 4, {model.name} has n = {model.dimension}")
    if model.potential is None or model.lam is None:
        raise MissingPotentialError(f"model {model.name} has no potential")
    points = _points(plan)
    lam = model.lam
    gate = soliton_gate_value(model, points)
    base = dict(model=model.name, soliton_gate=gate, points=len(points))
    if gate > SOLITON_GATE:
        return ClassificationResult(verdict="NotASoliton", scalar_ratio=None, snapped_ratio=None,
                                    eigenvalues=None, grad_r_max=None, ricci_norm_gap=None,
                                    snap_gap=None, eig_gap=None,
                                    reason=f"soliton residual {gate:.3g} exceeds {SOLITON_GATE:g}",
                                    **base)
    data = [_site_data((model, p)) for p in points]
    scal = np.array([d[0] for d in data])
    eigs = np.array([d[1] for d in data]) / lam
    grad_r = max(d[2] for d in data)
    norm_gap = max(d[3] for d in data)
    ratios = scal / lam
    ratio = float(np.mean(ratios))
    info = dict(scalar_ratio=ratio, eigenvalues=tuple(float(x) for x in eigs.mean(axis=0)),
                grad_r_max=grad_r, ricci_norm_gap=norm_gap, **base)

    def unknown(reason, snapped=None, snap_gap=None, eig_gap=None):
        return ClassificationResult(verdict="NotRigidOrUnknown", snapped_ratio=snapped,
                                    snap_gap=snap_gap, eig_gap=eig_gap, reason=reason, **info)

    if grad_r > tol * lam:
        return unknown(f"scalar curvature not constant: max |grad R| = {grad_r:.3g}")
    snapped = int(round(ratio))
    snap_gap = float(np.max(np.abs(ratios - snapped)))
    if snap_gap > SNAP_GAP or snapped not in range(0, 5):
        return unknown(f"R/lambda = {ratio:.6g} is not quantised", snap_gap=snap_gap)
    if snapped == 1:
        return unknown("R = lambda is excluded", snapped, snap_gap)
    if norm_gap > tol:
        return unknown(f"|Ric|^2 - lambda R residual {norm_gap:.3g} exceeds {tol:g}", snapped,
                       snap_gap)
    verdict, tuple_ = CASES[snapped]
    eig_gap = float(np.max(np.abs(eigs - np.array(tuple_))))
    if eig_gap > EIG_SNAP:
        return unknown(f"Ricci eigenvalues do not match {tuple_}", snapped, snap_gap, eig_gap)
    assert abs(sum(tuple_) - snapped) < 1e-12
    return ClassificationResult(verdict=verdict, snapped_ratio=snapped, snap_gap=snap_gap,
                                eig_gap=eig_gap, reason="", **info)


def _classify_row(model, points, tol) -> CheckReport:
    if model.dimension != 4:
        return _skip("C.classify", model, tol, NOT_APPLICABLE, "needs n = 4")
    if model.potential is None:
        return _skip("C.classify", model, tol, NOT_APPLICABLE, "model has no potential")
    res = classify_dim4(model, points, tol)
    if res.verdict == "NotASoliton":
        return CheckReport("C.classify", model.name, len(points), None, None, None, None, tol,
                           NOT_A_SOLITON, res.verdict)
    expected = model.expected_class
    ok = res.definite and (expected is None or res.verdict == expected)
    gap = max(res.snap_gap or 0.0, res.eig_gap or 0.0) if res.snap_gap is not None else 1.0
    value = gap if ok else max(1.0, gap)
    ok = ok and value <= tol
    detail = res.verdict if expected is None or ok else f"{res.verdict} (expected {expected})"
    return CheckReport("C.classify", model.name, len(points), value, value, None, ok, tol,
                       PASS if ok else FAIL, detail)
