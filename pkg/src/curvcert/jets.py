"""Truncated multivariate Taylor data ("jets") stored as raw partial derivatives.

A jet of order ``r`` in ``n`` variables is a flat float array indexed by the
multi-indices ``alpha`` with ``|alpha| <= r``.  Entry ``alpha`` holds the raw
partial derivative ``d^alpha u`` at the jet's centre, *not* divided by
``alpha!``.  Multi-indices are enumerated degree by degree, so the jet of
order ``r - 1`` is always a prefix of the jet of order ``r`` and truncation is
a slice.

Tensor-valued jets are ordinary numpy arrays whose trailing axis is the jet
axis; every helper here broadcasts over leading axes.
"""

from __future__ import annotations

import functools
import itertools
import math
import string
from dataclasses import dataclass, field

import numpy as np

from .errors import OrderExhaustedError

MAX_JET_ORDER = 8


def _monomials_of_degree(n, d):
    out = []
    for combo in itertools.combinations_with_replacement(range(n), d):
        alpha = [0] * n
        for v in combo:
            alpha[v] += 1
        out.append(tuple(alpha))
    return out


@functools.lru_cache(maxsize=None)
def jet_space(n: int, order: int) -> "JetSpace":
    return JetSpace(n, order)


class JetSpace:
    """Index bookkeeping and Leibniz tables for jets of fixed ``(n, order)``.

    Use :func:`jet_space` to obtain cached instances.
    """

    def __init__(self, n: int, order: int):
        if n < 1:
            raise ValueError("jet space needs at least one variable")
        if order < 0:
            raise OrderExhaustedError(f"jet order must be >= 0, got {order}")
        if order > MAX_JET_ORDER:
            raise ValueError(f"jet order {order} exceeds engine cap {MAX_JET_ORDER}")
        self.n = n
        self.order = order
        monos = []
        self.degree_offsets = [0]
        for d in range(order + 1):
            monos.extend(_monomials_of_degree(n, d))
            self.degree_offsets.append(len(monos))
        self.monomials = tuple(monos)
        self.size = len(monos)
        self.index = {alpha: k for k, alpha in enumerate(monos)}
        self._build_product_table()

    def size_at(self, order: int) -> int:
        """Number of coefficients of a jet truncated to ``order``."""
        return self.degree_offsets[order + 1]

    def _build_product_table(self):
        left, right, coef, starts = [], [], [], []
        for gamma in self.monomials:
            starts.append(len(left))
            ranges = [range(g + 1) for g in gamma]
            for alpha in itertools.product(*ranges):
                beta = tuple(g - a for g, a in zip(gamma, alpha))
                c = 1
                for g, a in zip(gamma, alpha):
                    c *= math.comb(g, a)
                left.append(self.index[alpha])
                right.append(self.index[beta])
                coef.append(float(c))
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.coef = np.asarray(coef)
        self.starts = np.asarray(starts, dtype=np.intp)

    @functools.cached_property
    def shifts(self) -> np.ndarray:
        """``shifts[a]`` maps order-(r-1) slots to the slot of ``beta + e_a``."""
        if self.order == 0:
            raise OrderExhaustedError("cannot differentiate an order-0 jet")
        m = self.size_at(self.order - 1)
        out = np.empty((self.n, m), dtype=np.intp)
        for a in range(self.n):
            for k, beta in enumerate(self.monomials[:m]):
                b = list(beta)
                b[a] += 1
                out[a, k] = self.index[tuple(b)]
        return out

    @functools.cached_property
    def first_order_slots(self) -> np.ndarray:
        return np.array([self.index[tuple(int(i == a) for i in range(self.n))]
                         for a in range(self.n)], dtype=np.intp)

    def lower(self) -> "JetSpace":
        return jet_space(self.n, self.order - 1)


# --- array-level arithmetic ---------------------------------------------------

def jet_mul(a: np.ndarray, b: np.ndarray, space: JetSpace) -> np.ndarray:
    """Leibniz product of jet arrays (broadcast over leading axes)."""
    prod = a[..., space.left] * b[..., space.right]
    prod *= space.coef
    return np.add.reduceat(prod, space.starts, axis=-1)


_LETTERS = string.ascii_letters


def jet_einsum(subscripts: str, a: np.ndarray, b: np.ndarray, space: JetSpace) -> np.ndarray:
    """``np.einsum`` over tensor slots with a Leibniz product on the jet axis.

    ``subscripts`` names only the tensor slots, e.g. ``"ik,kj->ij"``.  The pair
    axis of the Leibniz table acts as a leading batch axis, so the contraction
    is a batched matrix product and the Leibniz sum a contiguous reduction.
    """
    plan = _einsum_plan(subscripts.replace(" ", ""), a.ndim - 1, b.ndim - 1)
    pa = np.moveaxis(a, -1, 0)[space.left]
    pb = np.moveaxis(b, -1, 0)[space.right]
    prod = _batched_contract(pa, pb, plan)
    prod *= space.coef.reshape((-1,) + (1,) * (prod.ndim - 1))
    return np.moveaxis(np.add.reduceat(prod, space.starts, axis=0), 0, -1)


@functools.lru_cache(maxsize=None)
def _einsum_plan(subscripts, rank_a, rank_b):
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    if len(sa) != rank_a or len(sb) != rank_b:
        raise ValueError(f"subscripts {subscripts!r} do not match ranks {rank_a}, {rank_b}")
    if len(set(sa)) != len(sa) or len(set(sb)) != len(sb):
        return ("einsum", subscripts)
    batch = [c for c in sa if c in sb and c in out]
    contr = [c for c in sa if c in sb and c not in out]
    left = [c for c in sa if c not in sb and c in out]
    right = [c for c in sb if c not in sa and c in out]
    # letters private to one operand and absent from the output are summed first
    a_sum = tuple(i for i, c in enumerate(sa) if c not in sb and c not in out)
    b_sum = tuple(i for i, c in enumerate(sb) if c not in sa and c not in out)
    sa_kept = [c for c in sa if c in sb or c in out]
    sb_kept = [c for c in sb if c in sa or c in out]
    perm_a = tuple(sa_kept.index(c) for c in batch + left + contr)
    perm_b = tuple(sb_kept.index(c) for c in batch + contr + right)
    mid = batch + left + right
    perm_out = tuple(mid.index(c) for c in out)
    return ("bmm", a_sum, b_sum, perm_a, perm_b, len(batch), len(left), len(contr), len(right),
            perm_out)


def _batched_contract(pa, pb, plan):
    """Contract pair-first arrays ``pa``, ``pb``; the result is pair-first too."""
    if plan[0] == "einsum":
        lhs, out = plan[1].split("->")
        sa, sb = lhs.split(",")
        used = set(sa + sb + out)
        z = next(ch for ch in _LETTERS if ch not in used)
        return np.einsum(f"{z}{sa},{z}{sb}->{z}{out}", pa, pb)
    _, a_sum, b_sum, perm_a, perm_b, nb, nl, nc, nr, perm_out = plan
    if a_sum:
        pa = pa.sum(axis=tuple(i + 1 for i in a_sum))
    if b_sum:
        pb = pb.sum(axis=tuple(i + 1 for i in b_sum))
    z = pa.shape[0]
    ta = pa.transpose((0,) + tuple(i + 1 for i in perm_a))
    tb = pb.transpose((0,) + tuple(i + 1 for i in perm_b))
    bshape = ta.shape[1:1 + nb]
    lshape = ta.shape[1 + nb:1 + nb + nl]
    cshape = ta.shape[1 + nb + nl:]
    rshape = tb.shape[1 + nb + nc:]
    nbatch = math.prod(bshape)
    ncv = math.prod(cshape)
    ma = ta.reshape(z * nbatch, math.prod(lshape), ncv)
    mb = tb.reshape(z * nbatch, ncv, math.prod(rshape))
    res = np.matmul(ma, mb).reshape((z,) + bshape + lshape + rshape)
    return res.transpose((0,) + tuple(i + 1 for i in perm_out))


def jet_derivatives(a: np.ndarray, space: JetSpace) -> np.ndarray:
    """All first partials of jet array ``a``: shape ``(n,) + a.shape[:-1] + (M',)``.

    The new (leading) axis is the differentiation direction; the result lives in
    ``space.lower()``.
    """
    d = a[..., space.shifts]  # (..., n, M')
    return np.moveaxis(d, -2, 0)


def truncate(a: np.ndarray, space: JetSpace, order: int) -> np.ndarray:
    if order > space.order:
        raise OrderExhaustedError(f"cannot raise jet order {space.order} to {order}")
    return a[..., : space.size_at(order)]


def constant(value: float, space: JetSpace) -> np.ndarray:
    out = np.zeros(space.size)
    out[0] = value
    return out


def coordinate(index: int, value: float, space: JetSpace) -> np.ndarray:
    out = np.zeros(space.size)
    out[0] = value
    if space.order >= 1:
        out[space.first_order_slots[index]] = 1.0
    return out


def compose(u: np.ndarray, derivs, space: JetSpace) -> np.ndarray:
    """Jet of ``phi(u)`` given ``derivs[k] = phi^(k)(u_0)`` for ``k = 0..order``.

    Uses ``phi(u) = sum_k phi^(k)(u_0) / k! * (u - u_0)^k``; the increment has
    no constant term so the sum is exact at the truncation order.  The sum is
    accumulated from low to high ``k`` so lower-order coefficients are
    bit-identical across truncation orders.
    """
    delta = u.copy()
    delta[..., 0] = 0.0
    out = np.zeros_like(u)
    out[..., 0] = derivs[0]
    power = None
    for k in range(1, space.order + 1):
        power = delta if power is None else jet_mul(power, delta, space)
        ck = derivs[k]
        if ck == 0.0:
            continue
        out = out + (ck / math.factorial(k)) * power
    return out


# --- scalar Jet value type ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Jet:
    """Raw partial derivatives of a scalar up to ``order`` at ``center``."""

    center: tuple
    order: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))
        if c.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} coefficients, got {c.shape}")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def space(self) -> JetSpace:
        return jet_space(len(self.center), self.order)

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def __getitem__(self, alpha) -> float:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.n:
            raise KeyError(alpha)
        if sum(alpha) > self.order:
            raise KeyError(f"multi-index {alpha} exceeds jet order {self.order}")
        return float(self.coeffs[self.space.index[alpha]])

    def as_dict(self) -> dict:
        return {alpha: float(c) for alpha, c in zip(self.space.monomials, self.coeffs)}

    def truncate(self, order: int) -> "Jet":
        return Jet(self.center, order, truncate(self.coeffs, self.space, order))

    def derivative(self, index: int) -> "Jet":
        """Jet of ``d u / d x_index``, one order lower."""
        if self.order == 0:
            raise OrderExhaustedError("cannot differentiate an order-0 jet")
        return Jet(self.center, self.order - 1, self.coeffs[self.space.shifts[index]])

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.center != self.center or other.order != self.order:
                raise ValueError("jets must share centre and order")
            return other.coeffs
        return constant(float(other), self.space)

    def __add__(self, other):
        return Jet(self.center, self.order, self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.center, self.order, self.coeffs - self._coerce(other))

    def __rsub__(self, other):
        return Jet(self.center, self.order, self._coerce(other) - self.coeffs)

    def __neg__(self):
        return Jet(self.center, self.order, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.center, self.order,
                       jet_mul(self.coeffs, self._coerce(other), self.space))
        return Jet(self.center, self.order, self.coeffs * float(other))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        return (self.center == other.center and self.order == other.order
                and np.array_equal(self.coeffs, other.coeffs))

    def __repr__(self):
        return f"Jet(center={self.center}, order={self.order}, value={self.value:.6g})"
