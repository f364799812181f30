"""TOML scenario files.

Layout::

    name = "duffing"
    T = "2*pi"                 # number or constant expression
    seed = 7
    stages = ["grid", "capture", "degree", "orbit", "check"]

    [field]
    kind = "duffing"           # a catalogue name, or "expr" with f = ..., p = ...
    params = { eps = 0.05 }

    [region]
    xmin = -3.0
    xmax = 3.0
    ymin = -3.0
    ymax = 3.0

    [grid]
    nx = 32
    ny = 32

    [search]
    n_bar = 1                  # optional; chosen from a small circle otherwise
    boundary = "capture"       # or "circle" with radius = ...
    seed = [-0.05, 0.0]        # optional Newton seed cross-checked against the bisection
    k_list = [1, 2, 3]
    annulus = [0.05, 8.0]

    [integrator]
    rel_tol = 1e-10
    abs_tol = 1e-12
    escape_radius = 1e6

    [a]
    expr = "0.1*sin(t)"
    expr_dot = "0.1*cos(t)"

    [diagnostics]
    gamma_p = 0.06
    C_p = 0.0
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Optional

import tomli

from .diagnostics import DEFAULT_SEED
from .errors import ParseError
from .expr import eval_expression, parse_expression, variables_of
from .field_model import BUILTINS, PeriodicFunction, PlanarField, builtin_field, expression_field, periodicity_defect
from .integrator import IntegratorOptions
from .rotation import Region

__all__ = ["Scenario", "load_scenario", "parse_scenario", "STAGES"]

STAGES = ("grid", "capture", "degree", "orbit", "multiplicity", "check")
_KNOWN_TABLES = {"field", "region", "grid", "search", "integrator", "a", "diagnostics", "output"}


@dataclass
class Scenario:
    name: str
    field_spec: dict
    T: float
    region: Region
    nx: int = 32
    ny: int = 32
    n_bar: Optional[int] = None
    boundary: str = "capture"
    boundary_radius: float = 1.0
    newton_seed: Optional[tuple] = None
    k_list: list = dc_field(default_factory=list)
    annulus: tuple = (0.05, 8.0)
    a_spec: Optional[dict] = None
    opts: IntegratorOptions = IntegratorOptions()
    diagnostics: dict = dc_field(default_factory=dict)
    out_dir: str = "out"
    seed: int = DEFAULT_SEED
    stages: tuple = ("grid", "capture", "degree", "orbit")
    path: Optional[str] = None

    def build_field(self) -> PlanarField:
        spec = dict(self.field_spec)
        kind = spec.get("kind", "expr")
        params = dict(spec.get("params", {}))
        bps = tuple(float(b) for b in spec.get("breakpoints", ()))
        if kind == "expr":
            if "f" not in spec:
                raise ParseError("[field] kind = 'expr' needs f = \"...\"")
            fld = expression_field(spec["f"], spec.get("p"), self.T, spec.get("label", self.name), params, bps)
        else:
            fld = builtin_field(kind, T=self.T, **params)
            if bps:
                fld = replace(fld, breakpoints=bps)
        return fld

    def shift(self) -> Optional[PeriodicFunction]:
        if self.a_spec is None:
            return None
        a = self.a_spec
        return PeriodicFunction.from_expressions(a["expr"], a["expr_dot"], a.get("expr_ddot"), T=self.T)

    def with_overrides(self, out_dir=None, tol=None, seed=None) -> "Scenario":
        s = self
        if out_dir is not None:
            s = replace(s, out_dir=str(out_dir))
        if tol is not None:
            s = replace(s, opts=replace(s.opts, rel_tol=tol, abs_tol=min(s.opts.abs_tol, tol)))
        if seed is not None:
            s = replace(s, seed=int(seed))
        return s


def _number(value, what: str) -> float:
    if isinstance(value, bool):
        raise ParseError(f"{what}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            e = parse_expression(value)
        except ParseError as exc:
            raise ParseError(f"{what}: {exc}") from None
        if variables_of(e):
            raise ParseError(f"{what}: constant expression may not use t, x or y")
        return float(eval_expression(e, 0.0, 0.0, 0.0))
    raise ParseError(f"{what}: expected a number, got {value!r}")


def parse_scenario(text: str, path: Optional[str] = None) -> Scenario:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"malformed TOML: {exc.msg if hasattr(exc, 'msg') else exc}",
                         line=getattr(exc, "lineno", None)) from None
    unknown = {k for k, v in doc.items() if isinstance(v, dict)} - _KNOWN_TABLES
    if unknown:
        raise ParseError(f"unknown table(s): {sorted(unknown)}")
    if "field" not in doc:
        raise ParseError("missing [field] table")
    fspec = doc["field"]
    kind = fspec.get("kind", "expr")
    if kind != "expr" and kind not in BUILTINS:
        raise ParseError(f"unknown field kind {kind!r}; choose 'expr' or one of {sorted(BUILTINS)}")
    T = _number(doc.get("T", 2 * math.pi), "T")
    if not T > 0:
        raise ParseError(f"T must be positive, got {T}")
    r = doc.get("region", {})
    try:
        region = Region(*(_number(r.get(k, d), f"region.{k}") for k, d in
                          (("xmin", -3.0), ("xmax", 3.0), ("ymin", -3.0), ("ymax", 3.0))))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if not region.contains((0.0, 0.0)):
        raise ParseError("region must contain the origin")
    g = doc.get("grid", {})
    nx, ny = int(g.get("nx", 32)), int(g.get("ny", 32))
    if nx < 2 or ny < 2:
        raise ParseError("grid.nx and grid.ny must be at least 2")
    s = doc.get("search", {})
    seed_pt = s.get("seed")
    if seed_pt is not None:
        if len(seed_pt) != 2:
            raise ParseError("search.seed must be [x, y]")
        seed_pt = tuple(_number(v, "search.seed") for v in seed_pt)
    boundary = s.get("boundary", "capture")
    if boundary not in ("capture", "circle"):
        raise ParseError(f"search.boundary must be 'capture' or 'circle', got {boundary!r}")
    iopts = doc.get("integrator", {})
    try:
        opts = IntegratorOptions(**{k: (int(v) if k == "max_steps" else _number(v, f"integrator.{k}"))
                                    for k, v in iopts.items()})
    except (TypeError, ValueError) as exc:
        raise ParseError(f"[integrator]: {exc}") from None
    a = doc.get("a")
    if a is not None and not {"expr", "expr_dot"} <= set(a):
        raise ParseError("[a] needs expr and expr_dot")
    stages = tuple(doc.get("stages", ("grid", "capture", "degree", "orbit")))
    bad = [st for st in stages if st not in STAGES]
    if bad:
        raise ParseError(f"unknown stage(s) {bad}; choose from {list(STAGES)}")
    n_bar = s.get("n_bar")
    scen = Scenario(
        name=str(doc.get("name", Path(path).stem if path else "scenario")),
        field_spec=dict(fspec), T=T, region=region, nx=nx, ny=ny,
        n_bar=int(n_bar) if n_bar is not None else None,
        boundary=boundary, boundary_radius=_number(s.get("radius", 1.0), "search.radius"),
        newton_seed=seed_pt, k_list=[int(k) for k in s.get("k_list", [])],
        annulus=tuple(_number(v, "search.annulus") for v in s.get("annulus", (0.05, 8.0))),
        a_spec=dict(a) if a is not None else None, opts=opts,
        diagnostics=dict(doc.get("diagnostics", {})),
        out_dir=str(doc.get("output", {}).get("dir", "out")),
        seed=int(doc.get("seed", DEFAULT_SEED)), stages=stages, path=path,
    )
    try:
        fld = scen.build_field()
        defect = periodicity_defect(fld)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"[field]: {exc}") from None
    if not defect <= 1e-9:
        raise ParseError(f"field is not {T:g}-periodic in t (sampled defect {defect:.3g})")
    return scen


def load_scenario(path) -> Scenario:
    path = os.fspath(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text, path)
