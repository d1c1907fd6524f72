"""Command-line front end: ``curvcert {list,verify,classify,tensor}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import divchain as dc
from .curvature import CurvatureSite
from .errors import CurvcertError, DomainError, UnknownNameError
from .models import catalog, resolve_model, sample_points, soliton_residual
from .verify import (
    DEFAULT_TOL,
    FAIL,
    classify_dim4,
    get_check,
    list_checks,
    reports_to_json,
    reports_to_text,
    run_checks,
    run_tier,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_POINTS = 20
DEFAULT_THRESHOLD = 1e-12

TENSORS = ("metric", "riemann", "ricci", "scalar", "weyl", "cotton", "bach", "dtensor",
           "div1rm", "div2rm", "div3rm", "div4rm", "div1w", "div2w", "div3w", "div4w",
           "soliton_residual")


@dataclass
class CliConfig:
    command: str
    kind: Optional[str] = None
    model: Optional[str] = None
    tier: Optional[str] = None
    checks: list = field(default_factory=list)
    points: int = DEFAULT_POINTS
    seed: int = 0
    tol: float = DEFAULT_TOL
    format: str = "text"
    out: Optional[str] = None
    threshold: float = DEFAULT_THRESHOLD
    tensor: Optional[str] = None
    point: Optional[str] = None
    workers: int = 1

    def validate(self):
        if self.points < 1:
            raise ValueError("--points must be >= 1")
        if not self.tol > 0:
            raise ValueError("--tol must be > 0")
        if self.format not in ("text", "json"):
            raise ValueError("--format must be text or json")


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvcert",
        description="Verify curvature identities of gradient shrinking Ricci solitons on explicit charts.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sampling=True):
        p.add_argument("--model", required=True, help="builtin model name or model-file path")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--out", help="write output here instead of stdout")
        if sampling:
            p.add_argument("--points", type=_positive_int, default=DEFAULT_POINTS)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)

    p = sub.add_parser("list", help="list builtin models or registered checks")
    p.add_argument("kind", choices=("models", "checks"))
    p.add_argument("--tier", choices=("A", "B", "C", "all"))
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="run identity checks on sampled points")
    common(p)
    p.add_argument("--tier", choices=("A", "B", "C", "all"))
    p.add_argument("--check", action="append", default=[], dest="checks", metavar="ID")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("classify", help="classify a four-dimensional shrinker")
    common(p)

    p = sub.add_parser("tensor", help="print a tensor at one point")
    common(p, sampling=False)
    p.add_argument("--tensor", required=True)
    p.add_argument("--point", required=True, help="e.g. x1=1,x2=0,x3=0,x4=0")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    return parser


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- list -----------------------------------------------------------------------

def cmd_list(cfg: CliConfig) -> int:
    if cfg.kind == "models":
        rows = [{"name": e.name, "dimension": e.model.dimension,
                 "coordinates": list(e.model.coords),
                 "expected_class": e.expected_class, "soliton": e.is_soliton}
                for e in catalog().values()]
        if cfg.format == "json":
            text = json.dumps(rows, indent=2) + "\n"
        else:
            w = max(len(r["name"]) for r in rows)
            text = "".join(f"{r['name'].ljust(w)}  n={r['dimension']}  "
                           f"{r['expected_class'] or '(not a soliton)'}\n" for r in rows)
    else:
        specs = list_checks(cfg.tier)
        rows = [{"id": c.id, "tier": c.tier, "description": c.description,
                 "requires_potential": c.requires_potential, "min_dim": c.min_dim,
                 "exact_dim": c.exact_dim, "inequality": c.inequality} for c in specs]
        if cfg.format == "json":
            text = json.dumps(rows, indent=2) + "\n"
        else:
            w = max((len(r["id"]) for r in rows), default=0)
            text = "".join(f"{r['id'].ljust(w)}  {r['description']}\n" for r in rows)
    _emit(text, cfg.out)
    return EXIT_OK


# --- verify ---------------------------------------------------------------------

def cmd_verify(cfg: CliConfig) -> int:
    model = resolve_model(cfg.model)
    plan = sample_points(model, cfg.points, cfg.seed)
    if cfg.checks:
        for cid in cfg.checks:
            get_check(cid)
        reports = run_checks(cfg.checks, model, plan, cfg.tol, cfg.workers)
    else:
        reports = run_tier(cfg.tier or "all", model, plan, cfg.tol, cfg.workers)
    text = reports_to_json(reports) if cfg.format == "json" else reports_to_text(reports)
    _emit(text, cfg.out)
    return EXIT_FAIL if any(r.status == FAIL for r in reports) else EXIT_OK


# --- classify -------------------------------------------------------------------

def cmd_classify(cfg: CliConfig) -> int:
    model = resolve_model(cfg.model)
    plan = sample_points(model, cfg.points, cfg.seed)
    res = classify_dim4(model, plan, cfg.tol)
    if cfg.format == "json":
        text = json.dumps(res.to_dict(), indent=2) + "\n"
    else:
        lines = [f"model: {res.model}", f"verdict: {res.verdict}"]
        if res.reason:
            lines.append(f"reason: {res.reason}")
        lines.append(f"soliton residual (max): {res.soliton_gate!r}")
        if res.scalar_ratio is not None:
            lines.append(f"R/lambda: {res.scalar_ratio!r}")
            eig = ", ".join(f"{x:.6f}" for x in res.eigenvalues)
            lines.append(f"Ricci eigenvalues / lambda: ({eig})")
            lines.append(f"max |grad R|: {res.grad_r_max!r}")
            lines.append(f"|Ric|^2 - lambda R residual: {res.ricci_norm_gap!r}")
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.out)
    return EXIT_OK if res.definite else EXIT_FAIL


# --- tensor ---------------------------------------------------------------------

def parse_point(text: str, coords) -> tuple:
    values = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValueError(f"bad point component {part!r}; expected name=value")
        k, v = part.split("=", 1)
        k = k.strip()
        if k not in coords:
            raise ValueError(f"unknown coordinate {k!r}")
        values[k] = float(v)
    missing = [c for c in coords if c not in values]
    if missing:
        raise ValueError(f"point lacks coordinates {missing}")
    return tuple(values[c] for c in coords)


def tensor_at(model, point, name):
    if name not in TENSORS:
        raise UnknownNameError(f"unknown tensor {name!r}; known: {', '.join(TENSORS)}")
    for (lo, hi), x, c in zip(model.domain, point, model.coords):
        if not lo <= x <= hi:
            raise DomainError(f"{c} = {x} lies outside [{lo}, {hi}]")
    site = CurvatureSite(model, point, order=6 if name.startswith("div") else 4)
    if name == "metric":
        return site.metric
    if name == "soliton_residual":
        return soliton_residual(model, point, site=site)
    if name.startswith("div"):
        depth, fam = int(name[3]), ("Rm" if name.endswith("rm") else "W")
        return dc.div_chain(model, point, fam, depth, site=site).level(depth)
    attr = {"dtensor": "d_tensor"}.get(name, name)
    return getattr(site, attr)


def cmd_tensor(cfg: CliConfig) -> int:
    model = resolve_model(cfg.model)
    point = parse_point(cfg.point, model.coords)
    t = tensor_at(model, point, cfg.tensor)
    site = CurvatureSite(model, point, order=2)
    values = np.asarray(t.values, dtype=float)
    norm2 = float(site.norm2(t.truncate(0)).values) if t.rank else float(values) ** 2
    if cfg.format == "json":
        doc = {"model": model.name, "tensor": cfg.tensor,
               "point": dict(zip(model.coords, point)), "valence": list(t.valence),
               "components": values.tolist(), "norm2": norm2}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        lines = [f"{cfg.tensor} of {model.name} at "
                 + ", ".join(f"{c}={x:g}" for c, x in zip(model.coords, point))]
        if t.rank == 0:
            lines.append(f"value = {float(values)!r}")
        else:
            nz = [(idx, v) for idx, v in np.ndenumerate(values) if abs(v) > cfg.threshold]
            if not nz:
                lines.append("all components zero")
            for idx, v in nz:
                label = ",".join(model.coords[i] for i in idx)
                lines.append(f"[{label}] = {float(v)!r}")
            lines.append(f"|T|^2 = {norm2:.10g}")
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.out)
    return EXIT_OK


COMMANDS = {"list": cmd_list, "verify": cmd_verify, "classify": cmd_classify, "tensor": cmd_tensor}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    cfg = CliConfig(**{k: v for k, v in vars(ns).items() if k in CliConfig.__dataclass_fields__})
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except (CurvcertError, ValueError, OSError) as exc:
        print(f"curvcert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
