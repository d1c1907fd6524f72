"""Riemann, Ricci, scalar and sectional curvature; Weyl, Cotton, Bach and D tensors.

Sign convention (checked by :func:`convention_self_test`):

* ``R_{ijkl} = g_{im} R^m_{jkl}`` with
  ``R^m_{jkl} = d_k Gamma^m_{lj} - d_l Gamma^m_{kj} + Gamma^m_{ke} Gamma^e_{lj} - Gamma^m_{le} Gamma^e_{kj}``;
* ``R_{jl} = g^{ik} R_{ijkl}``, ``R = g^{jl} R_{jl}``;
* a round sphere of radius ``a`` has ``R_{ijkl} = (g_ik g_jl - g_il g_jk) / a^2``;
* ``nabla_l R_{ijkl} = nabla_j R_{ik} - nabla_i R_{jk}`` holds on every metric.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jets
from .errors import DegeneratePlaneError, DimensionError, MissingPotentialError
from .geometry import (
    COV,
    DEFAULT_ORDER,
    LocalGeometry,
    ModelSpec,
    TensorJet,
    multiply,
    raise_all,
    scalar_jet,
)


@dataclass(frozen=True)
class CurvatureBundle:
    riemann: TensorJet
    ricci: TensorJet
    scalar: jets.Jet
    order: int


@dataclass(frozen=True)
class ConformalBundle:
    weyl: TensorJet
    cotton: TensorJet
    bach: TensorJet | None
    d_tensor: TensorJet | None


def _riemann_from(geo: LocalGeometry) -> TensorJet:
    gamma = geo.christoffel
    r = gamma.order - 1
    low = jets.jet_space(geo.n, r)
    dg = jets.jet_derivatives(gamma.data, gamma.space)  # dg[c, m, a, b] = d_c Gamma^m_ab
    g = jets.truncate(gamma.data, gamma.space, r)
    t1 = np.einsum("kmlj...->mjkl...", dg)
    t2 = np.einsum("lmkj...->mjkl...", dg)
    t3 = jets.jet_einsum("mke,elj->mjkl", g, g, low)
    t4 = jets.jet_einsum("mle,ekj->mjkl", g, g, low)
    up = t1 - t2 + t3 - t4
    metric = jets.truncate(geo.metric.data, geo.metric.space, r)
    down = jets.jet_einsum("im,mjkl->ijkl", metric, up, low)
    return TensorJet(down, (COV,) * 4, r, geo.point)


class CurvatureSite(LocalGeometry):
    """Per-point cache of curvature quantities on top of :class:`LocalGeometry`."""

    def __init__(self, model: ModelSpec, point: Sequence[float], order: int = DEFAULT_ORDER):
        super().__init__(model, point, order)
        self.memo = {}

    def cached(self, key, build):
        hit = self.memo.get(key)
        if hit is None:
            hit = self.memo[key] = build()
        return hit

    @functools.cached_property
    def riemann(self) -> TensorJet:
        return _riemann_from(self)

    @functools.cached_property
    def ricci(self) -> TensorJet:
        return self.contract(self.riemann, 0, 2)

    @functools.cached_property
    def scalar(self) -> TensorJet:
        return self.contract(self.ricci, 0, 1)

    @functools.cached_property
    def ricci_up(self) -> TensorJet:
        return raise_all(self.ricci, self.inverse_metric)

    @functools.cached_property
    def nabla_ricci(self) -> TensorJet:
        return self.nabla(self.ricci)

    @functools.cached_property
    def nabla_scalar(self) -> TensorJet:
        return self.nabla(self.scalar)

    @functools.cached_property
    def nabla_riemann(self) -> TensorJet:
        return self.nabla(self.riemann)

    @functools.cached_property
    def weyl(self) -> TensorJet:
        return _weyl(self.riemann, self.ricci, self.scalar, self.metric)

    @functools.cached_property
    def cotton(self) -> TensorJet:
        n = self.n
        if n < 3:
            raise DimensionError("Cotton tensor needs n >= 3")
        dric = self.nabla_ricci
        d_r = self.nabla_scalar
        g = self.metric
        t = dric - dric.transpose(1, 0, 2)
        corr = multiply(d_r, g, "I,JK->IJK") - multiply(d_r, g, "J,IK->IJK")
        return t - corr * (1.0 / (2 * (n - 1)))

    @functools.cached_property
    def bach(self) -> TensorJet:
        n = self.n
        if n <= 3:
            raise DimensionError("Bach tensor needs n >= 4")
        w = self.weyl
        # nabla_k nabla_l W_{ikjl}: divergence on slot l, then on slot k
        d1 = self.contract(self.nabla(w), 0, 4)  # (i, k, j)
        d2 = self.contract(self.nabla(d1), 0, 2)  # (i, j)
        rw = multiply(self.ricci_up, w, "KL,IKJL->IJ")
        return d2 * (1.0 / (n - 3)) + rw * (1.0 / (n - 2))

    @functools.cached_property
    def d_tensor(self) -> TensorJet:
        n = self.n
        if n < 3:
            raise DimensionError("D tensor needs n >= 3")
        if self.model.potential is None:
            raise MissingPotentialError(f"model {self.model.name} has no potential")
        df = self.grad_f
        ric = self.ricci
        d_r = self.nabla_scalar
        g = self.metric
        r_s = self.scalar
        a = multiply(df, ric, "I,JK->IJK") - multiply(df, ric, "J,IK->IJK")
        b = multiply(d_r, g, "I,JK->IJK") - multiply(d_r, g, "J,IK->IJK")
        c = multiply(df, g, "I,JK->IJK") - multiply(df, g, "J,IK->IJK")
        c = multiply(r_s, c, ",IJK->IJK")
        return (a * (1.0 / (n - 2)) + b * (1.0 / (2 * (n - 1) * (n - 2)))
                - c * (1.0 / ((n - 1) * (n - 2))))

    def bundle(self, order: int | None = None) -> CurvatureBundle:
        r = self.riemann.order if order is None else order
        s = self.scalar.truncate(r)
        return CurvatureBundle(self.riemann.truncate(r), self.ricci.truncate(r),
                               jets.Jet(self.point, r, s.data), r)


def _weyl(rm: TensorJet, ric: TensorJet, scal: TensorJet, g: TensorJet) -> TensorJet:
    n = rm.dim
    if n < 3:
        raise DimensionError("Weyl tensor needs n >= 3")
    gr = (multiply(g, ric, "IK,JL->IJKL") - multiply(g, ric, "IL,JK->IJKL")
          - multiply(g, ric, "JK,IL->IJKL") + multiply(g, ric, "JL,IK->IJKL"))
    gg = multiply(g, g, "IK,JL->IJKL") - multiply(g, g, "IL,JK->IJKL")
    rgg = multiply(scal, gg, ",IJKL->IJKL")
    return rm - gr * (1.0 / (n - 2)) + rgg * (1.0 / ((n - 1) * (n - 2)))


# --- operation-level API ----------------------------------------------------------

def curvature_bundle(m: ModelSpec, p: Sequence[float], r: int) -> CurvatureBundle:
    """Riemann, Ricci and scalar curvature jets of order ``r`` (metric order ``r + 2``)."""
    if r + 2 > 6:
        raise ValueError(f"curvature order {r} exceeds the metric jet budget")
    site = CurvatureSite(m, p, order=r + 2)
    return site.bundle()


def weyl_tensor(bundle: CurvatureBundle, g: TensorJet, g_inv: TensorJet | None = None) -> TensorJet:
    scal = scalar_jet(bundle.scalar.coeffs, bundle.order, bundle.riemann.center)
    return _weyl(bundle.riemann, bundle.ricci, scal, g.truncate(bundle.order))


def sectional_curvature(m: ModelSpec, p: Sequence[float], u, v, site: CurvatureSite | None = None) -> float:
    """Sectional curvature of the plane spanned by coordinate vectors ``u`` and ``v``."""
    if site is None:
        site = CurvatureSite(m, p, order=2)
    g = site.metric.values
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.sqrt(u @ g @ u), np.sqrt(v @ g @ v)
    if nu == 0.0 or nv == 0.0:
        raise DegeneratePlaneError("zero vector does not span a plane")
    u, v = u / nu, v / nv
    uv = u @ g @ v
    gram = 1.0 - uv * uv
    if gram <= 1e-12:
        raise DegeneratePlaneError("vectors are (nearly) parallel")
    rm = site.riemann.values
    num = np.einsum("ijkl,i,j,k,l->", rm, u, v, u, v)
    return float(num / gram)


def cotton_tensor(m: ModelSpec, p: Sequence[float]) -> TensorJet:
    return CurvatureSite(m, p, order=3).cotton


def bach_tensor(m: ModelSpec, p: Sequence[float]) -> TensorJet:
    return CurvatureSite(m, p, order=4).bach


def d_tensor(m: ModelSpec, p: Sequence[float]) -> TensorJet:
    return CurvatureSite(m, p, order=3).d_tensor


def conformal_bundle(site: CurvatureSite) -> ConformalBundle:
    bach = site.bach if site.n >= 4 else None
    dt = site.d_tensor if site.model.potential is not None else None
    return ConformalBundle(site.weyl, site.cotton, bach, dt)


@functools.lru_cache(maxsize=1)
def convention_self_test() -> bool:
    """Assert the sign convention on a round sphere and a non-symmetric metric.

    Raises ``AssertionError`` if the curvature code drifts from the convention.
    """
    from .expr import parse_expression

    coords = ("th", "ph")
    sph = ModelSpec(
        name="selftest_s2", dimension=2, coords=coords,
        metric=((parse_expression("4", coords), parse_expression("0", coords)),
                (parse_expression("0", coords), parse_expression("4*sin(th)^2", coords))),
        domain=((0.5, 2.5), (0.0, 6.0)))
    site = CurvatureSite(sph, (1.1, 0.3), order=2)
    assert abs(site.scalar.values - 0.5) < 1e-12, "round sphere must have R = 2/a^2 > 0"
    coords3 = ("x", "y", "z")
    diag = ("1 + x^2/5", "exp(y*z/7)", "1 + sin(x)^2/3")
    metric = tuple(tuple(parse_expression(diag[i] if i == j else ("x*y/9" if {i, j} == {0, 1} else "0"),
                                          coords3) for j in range(3)) for i in range(3))
    warped = ModelSpec(name="selftest_w3", dimension=3, coords=coords3, metric=metric,
                       domain=((-1, 1),) * 3)
    site = CurvatureSite(warped, (0.3, -0.2, 0.4), order=3)
    lhs = site.contract(site.nabla_riemann, 0, 4).values
    dric = site.nabla_ricci.values
    rhs = np.einsum("jik->ijk", dric) - dric
    assert np.max(np.abs(lhs - rhs)) < 1e-10, "contracted Bianchi identity sign mismatch"
    return True
