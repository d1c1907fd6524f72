"""Soliton catalog, model files, the soliton-equation residual and point sampling."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CurvcertError,
    DomainError,
    EmptyDomainError,
    MissingPotentialError,
    ParseError,
    UnknownNameError,
    ValidationError,
)
from .expr import evaluate, parse_expression, to_text
from .geometry import LocalGeometry, ModelSpec, TensorJet

LAMBDA = 0.5
# Polar angles stay this far from the poles.  Order-6 jets on the
# hyperspherical chart lose accuracy roughly like (prod sin)^-10, and 0.5
# keeps sin^4 >= 0.05 in five dimensions.
ANGLE_MARGIN = 0.5
PD_SPOT_CHECKS = 16


@dataclass(frozen=True)
class SolitonCatalogEntry:
    """A catalog model with the constants it is expected to exhibit.

    ``scalar_ratio`` is ``R / lambda``; ``ricci_eigs`` are the Ricci eigenvalues in
    units of ``lambda``, sorted ascending.  Both are ``None`` for non-solitons.
    """

    model: ModelSpec
    expected_class: Optional[str] = None
    scalar_ratio: Optional[float] = None
    ricci_eigs: Optional[tuple] = None

    @property
    def name(self) -> str:
        return self.model.name

    @property
    def is_soliton(self) -> bool:
        return self.scalar_ratio is not None


@dataclass(frozen=True)
class SamplePlan:
    model: str
    count: int
    seed: int
    margins: tuple
    points: tuple = field(repr=False)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


# --- construction helpers -------------------------------------------------------

def build_model(name, coords, metric_text, potential=None, lam=None, domain=None,
                margins=None, expected_class=None) -> ModelSpec:
    """Build a :class:`ModelSpec` from expression strings.

    ``metric_text`` is either a full ``n x n`` nested list or a flat list of
    diagonal entries.
    """
    coords = tuple(coords)
    n = len(coords)
    if metric_text and isinstance(metric_text[0], str):
        metric_text = [[metric_text[i] if i == j else "0" for j in range(n)] for i in range(n)]
    metric = tuple(tuple(parse_expression(s, coords) for s in row) for row in metric_text)
    pot = parse_expression(potential, coords) if potential is not None else None
    return ModelSpec(name=name, dimension=n, coords=coords, metric=metric, potential=pot,
                     lam=lam, domain=tuple(domain), margins=tuple(margins or ()),
                     expected_class=expected_class)


def _round_sphere(radius2: float, angles: Sequence[str]) -> list:
    """Diagonal of ``radius2 * dOmega_k`` in hyperspherical angles."""
    r2 = _num(radius2)
    diag = []
    for i in range(len(angles)):
        factors = [f"sin({a})^2" for a in angles[:i]]
        diag.append("*".join([r2] + factors))
    return diag


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _sphere_box(angles):
    dom = [(0.0, math.pi)] * (len(angles) - 1) + [(0.0, 2 * math.pi)]
    mar = [ANGLE_MARGIN] * (len(angles) - 1) + [0.0]
    return dom, mar


def sphere_n(n: int, lam: float = LAMBDA) -> SolitonCatalogEntry:
    """Round ``S^n`` of radius^2 ``(n - 1) / lam`` with ``f = 0``."""
    if not 2 <= n <= 5:
        raise ValueError("sphere generator covers 2 <= n <= 5")
    angles = [f"a{i}" for i in range(1, n + 1)]
    dom, mar = _sphere_box(angles)
    name = "sphere4" if n == 4 else f"sphere{n}"
    model = build_model(name, angles, _round_sphere((n - 1) / lam, angles), potential="0",
                        lam=lam, domain=dom, margins=mar, expected_class="Einstein")
    return SolitonCatalogEntry(model, "Einstein", float(n), (1.0,) * n)


def cylinder_n(n: int, lam: float = LAMBDA) -> SolitonCatalogEntry:
    """Round cylinder ``R x S^(n-1)``, sphere radius^2 ``(n - 2) / lam``, ``f = lam t^2 / 2``."""
    if not 3 <= n <= 5:
        raise ValueError("cylinder generator covers 3 <= n <= 5")
    angles = [f"a{i}" for i in range(1, n)]
    dom, mar = _sphere_box(angles)
    label = f"RxS{n - 1}"
    model = build_model(f"cylinder{n}", ["t"] + angles,
                        ["1"] + _round_sphere((n - 2) / lam, angles),
                        potential=f"{_num(lam / 2)}*t^2", lam=lam,
                        domain=[(-2.0, 2.0)] + dom, margins=[0.0] + mar, expected_class=label)
    return SolitonCatalogEntry(model, label, float(n - 1), (0.0,) + (1.0,) * (n - 1))


def _gaussian4():
    coords = ["x1", "x2", "x3", "x4"]
    m = build_model("gaussian4", coords, ["1"] * 4, potential="(x1^2 + x2^2 + x3^2 + x4^2)/4",
                    lam=LAMBDA, domain=[(-2.0, 2.0)] * 4, expected_class="Gaussian_R4")
    return SolitonCatalogEntry(m, "Gaussian_R4", 0.0, (0.0,) * 4)


def _cylinder_r1s3():
    angles = ["a", "b", "c"]
    dom, mar = _sphere_box(angles)
    m = build_model("cylinder_r1s3", ["t"] + angles, ["1"] + _round_sphere(4, angles),
                    potential="t^2/4", lam=LAMBDA, domain=[(-2.0, 2.0)] + dom,
                    margins=[0.0] + mar, expected_class="RxS3")
    return SolitonCatalogEntry(m, "RxS3", 3.0, (0.0, 1.0, 1.0, 1.0))


def _product_r2s2():
    m = build_model("product_r2s2", ["x", "y", "th", "ph"], ["1", "1", "2", "2*sin(th)^2"],
                    potential="(x^2 + y^2)/4", lam=LAMBDA,
                    domain=[(-2.0, 2.0), (-2.0, 2.0), (0.0, math.pi), (0.0, 2 * math.pi)],
                    margins=[0.0, 0.0, ANGLE_MARGIN, 0.0], expected_class="R2xS2")
    return SolitonCatalogEntry(m, "R2xS2", 2.0, (0.0, 0.0, 1.0, 1.0))


_PHI = "(1 + t^2/10)^2"


def _warped_test():
    # f = 0 and lam = 0.5 are attached on purpose so the residual gate has something to reject
    m = build_model("warped_test", ["t", "x", "y", "z"], ["1", _PHI, _PHI, _PHI], potential="0",
                    lam=LAMBDA, domain=[(-2.0, 2.0)] + [(-1.0, 1.0)] * 3)
    return SolitonCatalogEntry(m)


def _warped3():
    m = build_model("warped3", ["t", "x", "y"], ["1", _PHI, _PHI],
                    domain=[(-2.0, 2.0)] + [(-1.0, 1.0)] * 2)
    return SolitonCatalogEntry(m)


def _random_perturb():
    coords = ["x1", "x2", "x3", "x4"]
    bump = "exp(-(x1^2 + x2^2 + x3^2 + x4^2)/4)"
    rows = []
    for i in range(4):
        row = []
        for j in range(4):
            if i == j:
                row.append(f"1 + 0.15*{bump}*cos({coords[(i + 1) % 4]})")
            else:
                a, b = min(i, j), max(i, j)
                # symmetric by construction: the same text for (i, j) and (j, i)
                row.append(f"0.05*{bump}*(sin({coords[a]} + 2*{coords[b]}) + sin({coords[b]} + 2*{coords[a]}))")
        rows.append(row)
    m = build_model("random_perturb", coords, rows, domain=[(-1.5, 1.5)] * 4)
    return SolitonCatalogEntry(m)


def builtin_models() -> dict:
    """Name -> :class:`SolitonCatalogEntry`, sorted by name."""
    entries = [_gaussian4(), _cylinder_r1s3(), _product_r2s2(), sphere_n(4),
               sphere_n(3), sphere_n(5), cylinder_n(3), cylinder_n(5),
               _warped_test(), _warped3(), _random_perturb()]
    return {e.name: e for e in sorted(entries, key=lambda e: e.name)}


_CATALOG = None


def catalog() -> dict:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = builtin_models()
    return _CATALOG


def get_model(name: str) -> ModelSpec:
    try:
        return catalog()[name].model
    except KeyError:
        raise UnknownNameError(f"unknown model {name!r}; known: {', '.join(catalog())}") from None


def resolve_model(selector: str) -> ModelSpec:
    """A builtin name, or a path to a model file."""
    if selector in catalog():
        return catalog()[selector].model
    if os.path.exists(selector):
        return load_model(selector)
    raise UnknownNameError(f"{selector!r} is neither a builtin model nor a model file")


# --- model files ----------------------------------------------------------------

def _locate(raw: str, needle: str):
    """1-based (line, column) of the JSON string literal ``needle`` in ``raw``."""
    lit = json.dumps(needle)
    at = raw.find(lit)
    if at < 0:
        return None, None
    line = raw.count("\n", 0, at) + 1
    col = at - (raw.rfind("\n", 0, at) + 1) + 1
    return line, col + 1  # inside the opening quote


def _parse_in_file(raw, text, coords, where):
    if not isinstance(text, str):
        raise ValidationError(f"{where}: expected an expression string, got {text!r}")
    try:
        return parse_expression(text, coords)
    except ParseError as exc:
        line, col = _locate(raw, text)
        if line is not None and exc.position is not None:
            col += exc.position
        raise type(exc)(f"{where}: {exc.message}", position=exc.position, line=line,
                        column=col, text=text) from None


def loads_model(raw: str) -> ModelSpec:
    """Parse and validate a model description from JSON text."""
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, position=exc.pos, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ValidationError("model file must hold a JSON object")
    for key in ("name", "dimension", "coordinates", "metric", "domain"):
        if key not in doc:
            raise ValidationError(f"model file lacks required key {key!r}")
    coords = tuple(doc["coordinates"])
    n = doc["dimension"]
    if not isinstance(n, int) or n != len(coords):
        raise ValidationError(f"dimension {n!r} does not match {len(coords)} coordinates")
    rows = doc["metric"]
    if not isinstance(rows, list) or len(rows) != n or any(
            not isinstance(r, list) or len(r) != n for r in rows):
        raise ValidationError(f"metric must be a {n}x{n} array of expression strings")
    metric = tuple(tuple(_parse_in_file(raw, s, coords, f"metric[{i}][{j}]")
                         for j, s in enumerate(row)) for i, row in enumerate(rows))
    pot_text = doc.get("potential")
    pot = _parse_in_file(raw, pot_text, coords, "potential") if pot_text is not None else None
    lam = doc.get("lambda")
    if pot is not None and lam is None:
        raise ValidationError("potential given without lambda")
    dom = doc["domain"]
    missing = [c for c in coords if c not in dom]
    if missing:
        raise ValidationError(f"domain lacks coordinates {missing}")
    margins = doc.get("margins") or {}
    model = ModelSpec(name=str(doc["name"]), dimension=n, coords=coords, metric=metric,
                      potential=pot, lam=lam,
                      domain=tuple(tuple(dom[c]) for c in coords),
                      margins=tuple(float(margins.get(c, 0.0)) for c in coords))
    _spot_check_positive(model)
    return model


def load_model(path) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())


def dumps_model(m: ModelSpec) -> str:
    doc = {
        "name": m.name,
        "dimension": m.dimension,
        "coordinates": list(m.coords),
        "metric": [[to_text(e) for e in row] for row in m.metric],
        "potential": to_text(m.potential) if m.potential is not None else None,
        "lambda": m.lam,
        "domain": {c: list(b) for c, b in zip(m.coords, m.domain)},
        "margins": {c: v for c, v in zip(m.coords, m.margins)},
    }
    return json.dumps(doc, indent=2) + "\n"


def dump_model(m: ModelSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(m))


def metric_values(m: ModelSpec, p: Sequence[float]) -> np.ndarray:
    return np.array([[evaluate(e, p) for e in row] for row in m.metric])


def _spot_check_positive(m: ModelSpec) -> None:
    try:
        plan = sample_points(m, PD_SPOT_CHECKS, seed=0)
    except EmptyDomainError as exc:
        raise ValidationError(str(exc)) from None
    for p in plan.points:
        try:
            g = metric_values(m, p)
            np.linalg.cholesky(g)
        except DomainError as exc:
            raise ValidationError(f"metric cannot be evaluated at {p}: {exc}") from None
        except np.linalg.LinAlgError:
            raise ValidationError(f"metric is not positive definite at {p}") from None


# --- soliton residual and sampling ----------------------------------------------

def soliton_residual(m: ModelSpec, p: Sequence[float], site=None) -> TensorJet:
    """``Ric + Hess f - lam g`` at ``p`` (order 0 unless a richer ``site`` is passed)."""
    if m.potential is None or m.lam is None:
        raise MissingPotentialError(f"model {m.name} has no potential")
    if site is None:
        from .curvature import CurvatureSite
        site = CurvatureSite(m, p, order=2)
    r = site.ricci.order
    return site.ricci + site.hess_f.truncate(r) - site.g(r) * m.lam


def soliton_gate(m: ModelSpec, points, site_factory=None) -> float:
    """Largest max-abs soliton residual over ``points``; ``inf`` without a potential."""
    if m.potential is None:
        return math.inf
    worst = 0.0
    for p in points:
        site = site_factory(p) if site_factory else None
        worst = max(worst, float(np.max(np.abs(soliton_residual(m, p, site).values))))
    return worst


def sample_points(m: ModelSpec, count: int, seed: int = 0) -> SamplePlan:
    """Seeded uniform points in the domain box shrunk by the per-coordinate margins."""
    if count < 1:
        raise ValueError("count must be >= 1")
    lo = np.array([b[0] for b in m.domain]) + np.array(m.margins)
    hi = np.array([b[1] for b in m.domain]) - np.array(m.margins)
    if np.any(lo > hi):
        bad = [c for c, a, b in zip(m.coords, lo, hi) if a > b]
        raise EmptyDomainError(f"{m.name}: margins exceed the domain for {bad}")
    if count == 1:
        pts = ((lo + hi) / 2,)
    else:
        rng = np.random.default_rng(seed)
        pts = lo + (hi - lo) * rng.random((count, m.dimension))
    points = tuple(tuple(float(x) for x in p) for p in pts)
    return SamplePlan(m.name, count, seed, m.margins, points)


def check_model_points(m: ModelSpec, points) -> None:
    """Raise a :class:`CurvcertError` for the first point where the metric is unusable."""
    for p in points:
        LocalGeometry(m, p, order=0).metric
