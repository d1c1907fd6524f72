"""Iterated covariant divergences of the Riemann and Weyl tensors.

A divergence step differentiates (new slot 0) and metric-contracts the new slot
with one slot of the previous level.  An *ordering* is the list of slots
contracted at each step, counted in the tensor *before* the derivative is
prepended.  The canonical chain

    (div Rm)_ijk   = nabla_l R_ijkl           -> contract slot 3
    (div^2 Rm)_ik  = nabla_j nabla_l R_ijkl   -> then slot 1 of (i, j, k)
    (div^3 Rm)_i   = nabla_k ...              -> then slot 1 of (i, k)
    div^4 Rm       = nabla_i ...              -> then slot 0 of (i,)

is ``CANONICAL = (3, 1, 1, 0)``.  Because nabla commutes with metric
contraction, derive-then-contract on the already contracted level gives the
same result as contracting the full iterated derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .curvature import CurvatureSite
from .errors import DimensionError, MissingPotentialError
from .geometry import ModelSpec, TensorJet

CANONICAL = (3, 1, 1, 0)
FAMILIES = ("Rm", "W")

# Alternative orderings displayed alongside the canonical ones, written in the
# same slot language.  All act on the family tensor with its natural slots.
DIV3_VARIANTS = {
    "k j l R_kjil": (3, 1, 0),
    "k l j R_ijkl": (1, 2, 1),
    "k l j R_kjil": (1, 2, 0),
}
DIV4_VARIANTS = {
    "i k l j R_ijkl": (1, 2, 1, 0),
    "k i j l R_ijkl": (3, 1, 0, 0),
    "k i l j R_ijkl": (1, 2, 0, 0),
}
# nabla_k nabla_j nabla_l nabla_i W_ikjl
ALT_DIV4_W = (0, 2, 1, 0)


@dataclass(frozen=True)
class DivergenceChain:
    family: str
    levels: tuple  # level k at index k - 1
    ordering: tuple

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, k: int) -> TensorJet:
        return self.levels[k - 1]


def family_tensor(site: CurvatureSite, family: str) -> TensorJet:
    if family == "Rm":
        return site.riemann
    if family == "W":
        return site.weyl
    raise ValueError(f"unknown tensor family {family!r}; expected one of {FAMILIES}")


def divergence(site: CurvatureSite, t: TensorJet, slot: int) -> TensorJet:
    """``nabla^a T_{..a..}`` with the contracted index at ``slot`` of ``t``."""
    return site.contract(site.nabla(t), 0, slot + 1)


def iterated_divergence(site: CurvatureSite, family: str, ordering: Sequence[int]) -> TensorJet:
    """Divergence chain of ``family`` along ``ordering``; prefixes are memoised on the site."""
    ordering = tuple(ordering)
    if not ordering:
        return family_tensor(site, family)

    def build():
        prev = iterated_divergence(site, family, ordering[:-1])
        return divergence(site, prev, ordering[-1])

    return site.cached(("div", family, ordering), build)


def _site(m, p, site):
    return site if site is not None else CurvatureSite(m, p)


def div_chain(m: ModelSpec, p: Sequence[float], family: str, depth: int,
              site: CurvatureSite | None = None) -> DivergenceChain:
    """Canonical divergence levels ``1..depth`` of Riemann (``"Rm"``) or Weyl (``"W"``)."""
    if not 1 <= depth <= 4:
        raise ValueError(f"depth must be in 1..4, got {depth}")
    site = _site(m, p, site)
    if family == "W" and site.n < 3:
        raise DimensionError("Weyl chains need n >= 3")
    levels = tuple(iterated_divergence(site, family, CANONICAL[:k]) for k in range(1, depth + 1))
    return DivergenceChain(family, levels, CANONICAL[:depth])


def div3_radial(m: ModelSpec, p: Sequence[float], family: str,
                site: CurvatureSite | None = None) -> float:
    """``div^3 T(grad f)`` at ``p`` (order-0 value)."""
    site = _site(m, p, site)
    if site.model.potential is None:
        raise MissingPotentialError(f"model {site.model.name} has no potential")
    d3 = iterated_divergence(site, family, CANONICAL[:3])
    return float(site.along(site.grad_f_vector, d3, 0).values)


def second_derivative(site: CurvatureSite, family: str) -> TensorJet:
    """Full ``nabla_a nabla_b T_ijkl`` as a (0,6) jet, slots ``(a, b, i, j, k, l)``."""
    def build():
        t = family_tensor(site, family)
        return site.nabla(site.nabla(t))
    return site.cached(("nabla2", family), build)


def div2_ordering_variants(m: ModelSpec, p: Sequence[float], family: str,
                           site: CurvatureSite | None = None) -> tuple:
    """``(nabla_j nabla_l T_ijkl, nabla_l nabla_j T_ijkl)`` from the full second derivative."""
    site = _site(m, p, site)
    full = second_derivative(site, family)
    # a = j, b = l: contract (a, j) -> slots (b, i, k, l); then (b, l)
    canonical = site.contract(site.contract(full, 0, 3), 0, 3)
    # a = l, b = j: contract (a, l) -> slots (b, i, j, k); then (b, j)
    swapped = site.contract(site.contract(full, 0, 5), 0, 2)
    return canonical, swapped


def catino_div4_w(m: ModelSpec, p: Sequence[float], site: CurvatureSite | None = None) -> float:
    """``nabla_k nabla_j nabla_l nabla_i W_ikjl`` (the alternative fourth divergence of W)."""
    site = _site(m, p, site)
    if site.n < 4:
        raise DimensionError("alternative div^4 W is defined here for n >= 4")
    return float(iterated_divergence(site, "W", ALT_DIV4_W).values)
