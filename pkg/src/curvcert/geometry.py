"""Charts, metric jets, the Levi-Civita connection and tensor calculus on jets.

Conventions
-----------
* ``TensorJet.data`` has shape ``(n,) * rank + (M,)``; the trailing axis holds
  jet coefficients (raw partials), the leading axes are tensor slots.
* Covariant derivatives PREPEND the derivative slot:
  ``(nabla T)[a, i1, ..., ik] = d_a T[i1..ik] - sum_s Gamma^m_{a i_s} T[..m..]``.
  So ``nabla_k nabla_j nabla_l R_{ijkl}`` is built innermost-first, each new
  derivative landing in slot 0.
* ``ChristoffelJet.data[k, i, j]`` is ``Gamma^k_{ij}``.
"""

from __future__ import annotations

import functools
import string
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import jets
from .errors import (
    DimensionError,
    MissingPotentialError,
    NotPositiveDefiniteError,
    OrderExhaustedError,
    SlotError,
    ValidationError,
)
from .expr import Expr, jet_array, to_text, variables

COV = "cov"
CON = "con"

MAX_METRIC_ORDER = 6
DEFAULT_ORDER = 6

_SLOTS = string.ascii_uppercase


# --- model description ----------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """A Riemannian chart, optionally with a soliton potential ``f`` and constant ``lam``."""

    name: str
    dimension: int
    coords: tuple
    metric: tuple  # n x n tuple of Expr
    potential: Optional[Expr] = None
    lam: Optional[float] = None
    domain: tuple = ()  # per-coordinate (lo, hi)
    margins: tuple = ()  # per-coordinate singularity margins
    expected_class: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        n = self.dimension
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "metric", tuple(tuple(row) for row in self.metric))
        object.__setattr__(self, "domain", tuple((float(lo), float(hi)) for lo, hi in self.domain))
        margins = tuple(float(m) for m in self.margins) or (0.0,) * n
        object.__setattr__(self, "margins", margins)
        if self.lam is not None:
            object.__setattr__(self, "lam", float(self.lam))
        if n < 2:
            raise ValidationError(f"{self.name}: dimension must be >= 2")
        if len(self.coords) != n:
            raise ValidationError(f"{self.name}: expected {n} coordinates, got {len(self.coords)}")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise ValidationError(f"{self.name}: metric must be {n}x{n}")
        if len(self.domain) != n or len(self.margins) != n:
            raise ValidationError(f"{self.name}: domain and margins need one entry per coordinate")
        for lo, hi in self.domain:
            if not lo <= hi:
                raise ValidationError(f"{self.name}: empty domain interval [{lo}, {hi}]")
        exprs = [e for row in self.metric for e in row]
        if self.potential is not None:
            exprs.append(self.potential)
        for e in exprs:
            if not isinstance(e, Expr):
                raise ValidationError(f"{self.name}: metric entries must be expressions")
            bad = [i for i in variables(e) if i >= n]
            if bad:
                raise ValidationError(f"{self.name}: coordinate index {bad[0]} out of range")
        for i in range(n):
            for j in range(i + 1, n):
                if self.metric[i][j] != self.metric[j][i]:
                    raise ValidationError(
                        f"{self.name}: metric[{i}][{j}] = {to_text(self.metric[i][j])!r} differs "
                        f"from metric[{j}][{i}] = {to_text(self.metric[j][i])!r}")
        if self.potential is not None and self.lam is None:
            raise ValidationError(f"{self.name}: potential given without lambda")

    @property
    def has_potential(self) -> bool:
        return self.potential is not None


# --- tensor jets ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TensorJet:
    data: np.ndarray
    valence: tuple
    order: int
    center: tuple

    def __post_init__(self):
        object.__setattr__(self, "valence", tuple(self.valence))
        n = len(self.center)
        want = (n,) * len(self.valence) + (jets.jet_space(n, self.order).size,)
        if self.data.shape != want:
            raise ValueError(f"tensor jet data has shape {self.data.shape}, expected {want}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def rank(self) -> int:
        return len(self.valence)

    @property
    def space(self) -> jets.JetSpace:
        return jets.jet_space(self.dim, self.order)

    @property
    def values(self) -> np.ndarray:
        """Order-0 part (plain component values)."""
        return self.data[..., 0]

    def component(self, *index) -> jets.Jet:
        return jets.Jet(self.center, self.order, self.data[tuple(index)])

    def _like(self, data, valence=None, order=None):
        return TensorJet(data, self.valence if valence is None else valence,
                         self.order if order is None else order, self.center)

    def truncate(self, order: int) -> "TensorJet":
        if order == self.order:
            return self
        return self._like(jets.truncate(self.data, self.space, order), order=order)

    def transpose(self, *axes) -> "TensorJet":
        """Reorder tensor slots; ``axes`` as in ``np.transpose`` (jet axis stays last)."""
        axes = tuple(axes)
        if sorted(axes) != list(range(self.rank)):
            raise SlotError(f"bad slot permutation {axes}")
        return self._like(np.transpose(self.data, axes + (self.rank,)),
                          valence=tuple(self.valence[a] for a in axes))

    def _binary(self, other, op):
        if isinstance(other, TensorJet):
            if other.valence != self.valence:
                raise SlotError(f"valence mismatch {self.valence} vs {other.valence}")
            r = min(self.order, other.order)
            a, b = self.truncate(r), other.truncate(r)
            return a._like(op(a.data, b.data))
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return self._like(-self.data)

    def __mul__(self, c):
        if isinstance(c, TensorJet):
            return NotImplemented
        return self._like(self.data * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._like(self.data / float(c))

    def __repr__(self):
        return f"TensorJet(valence={self.valence}, dim={self.dim}, order={self.order})"


class ChristoffelJet(TensorJet):
    """``Gamma^k_{ij}`` as a (1,2) tensor jet, ``data[k, i, j]``."""


def scalar_jet(data: np.ndarray, order: int, center) -> TensorJet:
    return TensorJet(np.asarray(data, dtype=float), (), order, tuple(center))


def tensor_product(a: TensorJet, b: TensorJet) -> TensorJet:
    """Outer product ``a (x) b`` (slots of ``a`` first)."""
    r = min(a.order, b.order)
    a, b = a.truncate(r), b.truncate(r)
    la = _SLOTS[: a.rank]
    lb = _SLOTS[a.rank: a.rank + b.rank]
    data = jets.jet_einsum(f"{la},{lb}->{la}{lb}", a.data, b.data, a.space)
    return TensorJet(data, a.valence + b.valence, r, a.center)


def multiply(a: TensorJet, b: TensorJet, subscripts: str) -> TensorJet:
    """Jet-aware einsum of two tensor jets.  Output valence is inferred by letter."""
    r = min(a.order, b.order)
    a, b = a.truncate(r), b.truncate(r)
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    val = {}
    for letters, t in ((sa, a), (sb, b)):
        for ch, v in zip(letters, t.valence):
            val.setdefault(ch, v)
    data = jets.jet_einsum(subscripts, a.data, b.data, a.space)
    return TensorJet(data, tuple(val[ch] for ch in out), r, a.center)


# --- metric ---------------------------------------------------------------------

def _check_order(r, cap=MAX_METRIC_ORDER):
    if r < 0:
        raise OrderExhaustedError(f"jet order must be >= 0, got {r}")
    if r > cap:
        raise ValueError(f"metric jet order {r} exceeds cap {cap}")


def metric_jet(m: ModelSpec, p: Sequence[float], r: int) -> TensorJet:
    """Jets of the metric components ``g_ij`` at ``p`` to order ``r``."""
    _check_order(r)
    p = tuple(float(x) for x in p)
    n = m.dimension
    if len(p) != n:
        raise DimensionError(f"point has {len(p)} coordinates, model {m.name} has {n}")
    space = jets.jet_space(n, r)
    data = np.empty((n, n, space.size))
    memo = {}
    for i in range(n):
        for j in range(i, n):
            data[i, j] = jet_array(m.metric[i][j], p, space, memo)
            data[j, i] = data[i, j]
    try:
        np.linalg.cholesky(data[..., 0])
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"metric of {m.name} is not positive definite at {p}") from None
    return TensorJet(data, (COV, COV), r, p)


def inverse_metric_jet(g: TensorJet) -> TensorJet:
    """Jet of ``g^{-1}``.

    Writing ``g = g0 + d`` with ``d`` free of constant terms,
    ``g^{-1} = sum_k (-g0^{-1} d)^k g0^{-1}``; ``d`` is nilpotent on jets so the
    sum stops at the jet order.  Equivalent to iterating
    ``d(g^{-1}) = -g^{-1} (dg) g^{-1}``.
    """
    if g.valence != (COV, COV):
        raise SlotError("inverse_metric_jet expects a (0,2) tensor")
    space = g.space
    g0 = g.values
    try:
        np.linalg.cholesky(g0)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"metric is not positive definite at {g.center}") from None
    h0 = np.linalg.inv(g0)
    h0 = 0.5 * (h0 + h0.T)
    delta = g.data.copy()
    delta[..., 0] = 0.0
    h0_jet = np.zeros_like(g.data)
    h0_jet[..., 0] = h0
    # A = -h0 d  (constant left factor: plain matmul on every coefficient)
    a = -np.einsum("ik,kjz->ijz", h0, delta)
    term = h0_jet
    out = h0_jet.copy()
    for _ in range(g.order):
        term = jets.jet_einsum("ik,kj->ij", a, term, space)
        out = out + term
    out = 0.5 * (out + np.swapaxes(out, 0, 1))
    return TensorJet(out, (CON, CON), g.order, g.center)


def _christoffel_from(g: TensorJet, g_inv: TensorJet) -> ChristoffelJet:
    r = g.order - 1
    if r < 0:
        raise OrderExhaustedError("Christoffel symbols need a metric jet of order >= 1")
    dg = jets.jet_derivatives(g.data, g.space)  # dg[c, i, j] = d_c g_ij
    a = dg  # d_i g_jl  as [i, j, l]
    b = np.swapaxes(dg, 0, 1)  # d_j g_il  as [i, j, l]
    c = np.moveaxis(dg, 0, 2)  # d_l g_ij  as [i, j, l]
    first = 0.5 * (a + b - c)
    ginv = jets.truncate(g_inv.data, g_inv.space, r)
    gamma = jets.jet_einsum("kl,ijl->kij", ginv, first, jets.jet_space(g.dim, r))
    gamma = 0.5 * (gamma + np.swapaxes(gamma, 1, 2))
    return ChristoffelJet(gamma, (CON, COV, COV), r, g.center)


def christoffel_jet(m: ModelSpec, p: Sequence[float], r: int) -> ChristoffelJet:
    """``Gamma^k_{ij}`` to order ``r`` (consumes one metric order)."""
    g = metric_jet(m, p, r + 1)
    return _christoffel_from(g, inverse_metric_jet(g))


# --- tensor calculus ------------------------------------------------------------

def covariant_derivative(t: TensorJet, gamma: ChristoffelJet) -> TensorJet:
    """``nabla T`` with the derivative slot prepended; one jet order is consumed."""
    if any(v != COV for v in t.valence):
        raise SlotError("covariant_derivative expects a fully covariant tensor; lower indices first")
    r = t.order
    if r == 0:
        raise OrderExhaustedError("cannot differentiate an order-0 tensor jet")
    if gamma.order < r - 1:
        raise OrderExhaustedError(f"connection order {gamma.order} too low for tensor order {r}")
    space = t.space
    low = space.lower()
    out = jets.jet_derivatives(t.data, space)
    k = t.rank
    if k:
        g = jets.truncate(gamma.data, gamma.space, r - 1)
        tl = jets.truncate(t.data, space, r - 1)
        letters = _SLOTS[:k]
        for s in range(k):
            src = letters[:s] + "m" + letters[s + 1:]
            out = out - jets.jet_einsum(f"ma{letters[s]},{src}->a{letters}", g, tl, low)
    return TensorJet(out, (COV,) * (k + 1), r - 1, t.center)


def contract(t: TensorJet, slot_a: int, slot_b: int,
             g_inv: Optional[TensorJet] = None, g: Optional[TensorJet] = None) -> TensorJet:
    """Contract two slots; metric-assisted when both are covariant (or both contravariant)."""
    k = t.rank
    if slot_a == slot_b or not (0 <= slot_a < k and 0 <= slot_b < k):
        raise SlotError(f"cannot contract slots {slot_a}, {slot_b} of a rank-{k} tensor")
    va, vb = t.valence[slot_a], t.valence[slot_b]
    keep = [s for s in range(k) if s not in (slot_a, slot_b)]
    valence = tuple(t.valence[s] for s in keep)
    if va != vb:
        data = np.trace(t.data, axis1=slot_a, axis2=slot_b)
        return TensorJet(data, valence, t.order, t.center)
    metric = g_inv if va == COV else g
    if metric is None:
        need = "inverse metric" if va == COV else "metric"
        raise SlotError(f"contracting two {va} slots needs the {need}")
    r = min(t.order, metric.order)
    t = t.truncate(r)
    mdata = jets.truncate(metric.data, metric.space, r)
    letters = list(_SLOTS[:k])
    letters[slot_a], letters[slot_b] = "x", "y"
    out = "".join(letters[s] for s in keep)
    data = jets.jet_einsum(f"xy,{''.join(letters)}->{out}", mdata, t.data, t.space)
    return TensorJet(data, valence, r, t.center)


def _move_index(t, slot, metric, want):
    if not 0 <= slot < t.rank:
        raise SlotError(f"slot {slot} out of range for rank {t.rank}")
    if t.valence[slot] == want:
        raise SlotError(f"slot {slot} is already {want}")
    r = min(t.order, metric.order)
    t = t.truncate(r)
    mdata = jets.truncate(metric.data, metric.space, r)
    letters = list(_SLOTS[: t.rank])
    src = "".join(letters)
    letters[slot] = "x"
    dst = "".join(letters)
    data = jets.jet_einsum(f"x{src[slot]},{src}->{dst}", mdata, t.data, t.space)
    valence = list(t.valence)
    valence[slot] = want
    return TensorJet(data, tuple(valence), r, t.center)


def raise_index(t: TensorJet, slot: int, g_inv: TensorJet) -> TensorJet:
    return _move_index(t, slot, g_inv, CON)


def lower_index(t: TensorJet, slot: int, g: TensorJet) -> TensorJet:
    return _move_index(t, slot, g, COV)


def raise_all(t: TensorJet, g_inv: TensorJet) -> TensorJet:
    for s in range(t.rank):
        if t.valence[s] == COV:
            t = raise_index(t, s, g_inv)
    return t


def inner(t: TensorJet, u: TensorJet, g_inv: TensorJet) -> TensorJet:
    """Full metric contraction ``<T, U>`` of two covariant tensors of equal rank."""
    if t.rank != u.rank:
        raise SlotError("inner product needs equal ranks")
    if t.rank == 0:
        r = min(t.order, u.order)
        return scalar_jet(jets.jet_mul(t.truncate(r).data, u.truncate(r).data, t.truncate(r).space),
                          r, t.center)
    up = raise_all(t, g_inv)
    letters = _SLOTS[: t.rank]
    return multiply(up, u, f"{letters},{letters}->")


def norm2(t: TensorJet, g_inv: TensorJet) -> TensorJet:
    """``|T|^2``: full ``g``-contraction of ``T`` with itself."""
    return inner(t, t, g_inv)


# --- per-point cache ------------------------------------------------------------

class LocalGeometry:
    """Lazily computed jets of the geometry of ``model`` around ``point``.

    Everything is derived from one metric jet of order ``order`` evaluated once.
    """

    def __init__(self, model: ModelSpec, point: Sequence[float], order: int = DEFAULT_ORDER):
        _check_order(order)
        self.model = model
        self.point = tuple(float(x) for x in point)
        self.order = order
        self.n = model.dimension
        if len(self.point) != self.n:
            raise DimensionError(f"point has {len(self.point)} coordinates, model has {self.n}")

    @functools.cached_property
    def metric(self) -> TensorJet:
        return metric_jet(self.model, self.point, self.order)

    @functools.cached_property
    def inverse_metric(self) -> TensorJet:
        return inverse_metric_jet(self.metric)

    @functools.cached_property
    def christoffel(self) -> ChristoffelJet:
        return _christoffel_from(self.metric, self.inverse_metric)

    @functools.cached_property
    def potential(self) -> TensorJet:
        if self.model.potential is None:
            raise MissingPotentialError(f"model {self.model.name} has no potential")
        space = jets.jet_space(self.n, self.order)
        return scalar_jet(jet_array(self.model.potential, self.point, space), self.order, self.point)

    @property
    def lam(self) -> float:
        if self.model.lam is None:
            raise MissingPotentialError(f"model {self.model.name} has no lambda")
        return self.model.lam

    @functools.cached_property
    def grad_f(self) -> TensorJet:
        return self.nabla(self.potential)

    @functools.cached_property
    def grad_f_vector(self) -> TensorJet:
        return raise_index(self.grad_f, 0, self.inverse_metric)

    @functools.cached_property
    def hess_f(self) -> TensorJet:
        return self.nabla(self.grad_f)

    def nabla(self, t: TensorJet) -> TensorJet:
        return covariant_derivative(t, self.christoffel)

    def contract(self, t: TensorJet, a: int, b: int) -> TensorJet:
        return contract(t, a, b, g_inv=self.inverse_metric, g=self.metric)

    def trace_pair(self, t: TensorJet, a: int, b: int) -> TensorJet:
        return self.contract(t, a, b)

    def norm2(self, t: TensorJet) -> TensorJet:
        return norm2(t, self.inverse_metric)

    def inner(self, t: TensorJet, u: TensorJet) -> TensorJet:
        return inner(t, u, self.inverse_metric)

    def g(self, order: int) -> TensorJet:
        return self.metric.truncate(order)

    def along(self, vector: TensorJet, t: TensorJet, slot: int = 0) -> TensorJet:
        """Insert a contravariant vector into covariant slot ``slot`` of ``t``."""
        letters = _SLOTS[: t.rank]
        rest = letters[:slot] + letters[slot + 1:]
        return multiply(vector, t, f"{letters[slot]},{letters}->{rest}")

    def laplacian(self, t: TensorJet) -> TensorJet:
        """Rough Laplacian ``g^{ab} nabla_a nabla_b T``."""
        return self.contract(self.nabla(self.nabla(t)), 0, 1)

    def weighted_laplacian(self, t: TensorJet) -> TensorJet:
        """``Delta_f T = Delta T - nabla_{grad f} T``."""
        if t.order < 2:
            raise OrderExhaustedError("weighted Laplacian needs jet order >= 2")
        dt = self.nabla(t)
        lap = self.contract(self.nabla(dt), 0, 1)
        drift = self.along(self.grad_f_vector, dt, 0)
        return lap - drift


def hessian(f: Expr, m: ModelSpec, p: Sequence[float], r: int) -> TensorJet:
    """Covariant Hessian ``nabla^2 f`` to jet order ``r`` (metric needed to ``r + 1``)."""
    _check_order(r + 1)
    _check_order(r + 2, cap=jets.MAX_JET_ORDER)
    n = m.dimension
    space = jets.jet_space(n, r + 2)
    fj = scalar_jet(jet_array(f, p, space), r + 2, tuple(float(x) for x in p))
    gamma = christoffel_jet(m, p, r + 1)
    return covariant_derivative(covariant_derivative(fj, gamma), gamma)


def weighted_laplacian(t: TensorJet, m: ModelSpec, p: Sequence[float]) -> TensorJet:
    """``Delta_f T`` for a tensor jet ``t`` living at ``p`` on model ``m``."""
    if m.potential is None:
        raise MissingPotentialError(f"model {m.name} has no potential")
    if t.order < 2:
        raise OrderExhaustedError("weighted Laplacian needs jet order >= 2")
    geo = LocalGeometry(m, p, order=min(MAX_METRIC_ORDER, t.order + 1))
    return geo.weighted_laplacian(t)
