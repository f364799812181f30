"""``rotor`` command line: scenario-driven pipeline runs.

Stages: rotation grid, capture set, degree, periodic orbit, multiplicity and
hypothesis checks.  Every run writes ``report.json`` listing which stages
succeeded; the exit code is 0 iff all requested stages did.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as diag
from .errors import ParseError, RotorError, StageFailure
from .field_model import PhasePoint, reverse_field, translate_field
from .integrator import Escaped, flow, poincare_map
from .rotation import Finite, PlusInfinity, UndefinedOriginHit, rotation, rotation_grid
from .scenario import Scenario, load_scenario
from .svg import heatmap_svg, portrait_svg
from .topology import (
    DegreeReport, PolyCurve, build_capture_set, choose_n_bar, degree_fixed_point,
    find_periodic, find_periodic_in, multiplicity_search,
)

__all__ = ["main", "run_scenario", "Bundle", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
EXIT_OK, EXIT_STAGE_FAILED, EXIT_USAGE = 0, 1, 2
SAME_ORBIT = 1e-6


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class Bundle:
    scenario: Scenario
    out_dir: Path
    stages: dict = dc_field(default_factory=dict)
    files: dict = dc_field(default_factory=dict)
    results: dict = dc_field(default_factory=dict)
    notes: list = dc_field(default_factory=list)
    cross_checks: dict = dc_field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(s["status"] == "ok" for s in self.stages.values())

    def write(self, name: str, text: str):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8")
        self.files[name] = path


class _Pipeline:
    def __init__(self, scen: Scenario, threads: Optional[int]):
        self.scen = scen
        self.threads = threads
        self.field = scen.build_field()
        self.opts = scen.opts
        self.bundle = Bundle(scen, Path(scen.out_dir))
        self.header = {"schema_version": SCHEMA_VERSION, "scenario": scen.name,
                       "field": self.field.label, "T": self.field.T}

    # each stage stores its result in bundle.results under its own name

    def grid(self):
        s = self.scen
        grid = rotation_grid(self.field, s.region, s.nx, s.ny, self.opts, threads=self.threads)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "status", "rho"])
        for (i, j, x, y), o in zip(grid.centers(), grid.outcomes):
            w.writerow([repr(x), repr(y), o.status, repr(float(o.rho))])
        self.bundle.write("rotation_grid.csv", buf.getvalue())
        self.bundle.write("rotation_heatmap.svg", heatmap_svg(grid, f"rho(T; 0, z) for {self.field.label}"))
        return grid

    def capture(self):
        s = self.scen
        grid = self.need("grid")
        n_bar = s.n_bar if s.n_bar is not None else choose_n_bar(self.field, opts=self.opts)
        cs = build_capture_set(self.field, n_bar, s.region, (s.nx, s.ny), self.opts,
                               threads=self.threads, grid=grid)
        self.bundle.write("capture_set.json", dumps({**self.header, "source": "capture", **cs.to_dict()}))
        return cs.inner_component

    def curve(self) -> PolyCurve:
        if self.scen.boundary == "circle":
            if "curve" not in self.bundle.results:
                c = PolyCurve.circle(self.scen.boundary_radius, 64)
                self.bundle.results["curve"] = c
                self.bundle.write("capture_set.json", dumps({
                    **self.header, "source": "circle", "radius": self.scen.boundary_radius,
                    "orientation": c.orientation, "vertices": [[v.x, v.y] for v in c.vertices]}))
            return self.bundle.results["curve"]
        return self.need("capture")

    def degree(self) -> DegreeReport:
        rep = degree_fixed_point(self.field, self.curve(), self.opts, threads=self.threads)
        self.bundle.write("degree.json", dumps({**self.header, "curve_source": self.scen.boundary,
                                                **rep.as_dict()}))
        return rep

    def _orbit_entry(self, orbit, sources, k=None):
        tight = poincare_map(self.field, orbit.z_star, self.opts.tightened(10))
        verified = (math.hypot(tight.z.x - orbit.z_star.x, tight.z.y - orbit.z_star.y)
                    if not isinstance(tight, Escaped) else math.inf)
        d = orbit.to_dict()
        d.update({"sources": list(sources), "verified_residual": verified, "k": k})
        return d

    def orbit(self):
        s = self.scen
        found = []
        rep = self.need("degree") if ("degree" in s.stages or s.newton_seed is None) else None
        if rep is not None and rep.degree != 0:
            found.append((find_periodic_in(self.field, self.curve(), self.opts, threads=self.threads),
                          ["bisection"]))
        if s.newton_seed is not None:
            seeded = find_periodic(self.field, s.newton_seed, self.opts)
            for orb, src in found:
                dist = abs(PhasePoint(orb.z_star.x - seeded.z_star.x, orb.z_star.y - seeded.z_star.y))
                self.bundle.cross_checks["bisection_vs_seed"] = dist
                if dist < SAME_ORBIT:
                    src.append("newton_seed")
                    break
            else:
                found.append((seeded, ["newton_seed"]))
        a = s.shift()
        if a is not None and found:
            z = found[0][0].z_star
            shifted = translate_field(self.field, a)
            u = find_periodic(shifted, (z.x - a.value(0.0), z.y - a.derivative(0.0)), self.opts)
            back = (u.z_star.x + a.value(0.0), u.z_star.y + a.derivative(0.0))
            self.bundle.cross_checks["translation"] = math.hypot(back[0] - z.x, back[1] - z.y)
        if not found:
            raise RotorError("no orbit search possible: degree 0 and no Newton seed")
        self.bundle.notes.append("a T-periodic solution was found, so the translated continuability "
                                 "condition holds with a equal to its x-component")
        entries = [self._orbit_entry(o, src) for o, src in found]
        self.bundle.results["orbit_objects"] = [o for o, _ in found]
        self._write_orbits(entries, {})
        return entries

    def multiplicity(self):
        s = self.scen
        base_seed = s.newton_seed if s.newton_seed is not None else (0.0, 0.0)
        base = find_periodic(self.field, base_seed, self.opts)
        res = multiplicity_search(self.field, base, s.k_list or [1, 2, 3], tuple(s.annulus), self.opts,
                                  threads=self.threads)
        entries = self.bundle.results.get("orbit", []) or []
        for k in sorted(res.by_k):
            entries = entries + [self._orbit_entry(o, ["multiplicity"], k) for o in res.by_k[k]]
        self.bundle.results.setdefault("orbit_objects", []).extend(res.orbits)
        self._write_orbits(entries, {str(k): v for k, v in sorted(res.not_found.items())})
        if res.not_found:
            self.bundle.notes.append(f"multiplicity: no orbit for k in {sorted(res.not_found)}")
        return res

    def _write_orbits(self, entries, not_found):
        self.bundle.write("orbits.json", dumps({**self.header, "orbits": entries, "not_found": not_found}))

    def check(self):
        reports = run_diagnostics(self.field, self.scen, self.threads)
        self.bundle.results["hypotheses"] = reports
        return reports

    def need(self, stage):
        if stage not in self.bundle.results:
            self.run_stage(stage, required_by=True)
        status = self.bundle.stages.get(stage, {}).get("status")
        if status != "ok":
            raise StageFailure(stage, RuntimeError("prerequisite stage failed"))
        return self.bundle.results[stage]

    def run_stage(self, stage, required_by=False):
        if stage in self.bundle.stages:
            return
        try:
            self.bundle.results[stage] = getattr(self, stage)()
            self.bundle.stages[stage] = {"status": "ok", "error": None}
        except StageFailure as exc:
            self.bundle.stages[stage] = {"status": "failed", "error": str(exc)}
        except (RotorError, ValueError, ArithmeticError) as exc:
            failure = StageFailure(stage, exc)
            self.bundle.stages[stage] = {"status": "failed", "error": str(failure)}

    def finish(self):
        b = self.bundle
        hyps = b.results.get("hypotheses") or []
        report = {**self.header, "seed": self.scen.seed,
                  "stages": {k: b.stages[k] for k in sorted(b.stages)},
                  "hypotheses": [r.to_dict() for r in hyps],
                  "cross_checks": b.cross_checks, "notes": b.notes}
        b.write("report.json", dumps(report))
        grid = b.results.get("grid")
        curve = b.results.get("capture") or b.results.get("curve")
        orbits = b.results.get("orbit_objects") or []
        if grid is not None or orbits:
            paths = [[tuple(o.trajectory(float(t)))[:2] for t in np.linspace(0.0, self.field.T, 129)]
                     for o in orbits]
            box = self.scen.region.as_tuple()
            b.write("portrait.svg", portrait_svg(box, grid, [tuple(v) for v in curve.vertices] if curve else None,
                                                 paths, f"periodic orbits of {self.field.label}"))
        return b


def run_diagnostics(field, scen: Scenario, threads=None) -> list:
    d = scen.diagnostics
    seed = scen.seed
    reports = [diag.check_superlinearity(field, d.get("x_magnitudes", (10.0, 100.0, 1000.0)),
                                         int(d.get("t_samples", 16)), float(d.get("threshold", 50.0)))]
    if "gamma_p" in d:
        reports.append(diag.check_p_bound(field, float(d["gamma_p"]), float(d.get("C_p", 0.0)),
                                          region=scen.region, seed=seed))
    elif field.p_is_zero:
        reports.append(diag.HypothesisReport("A4", diag.CONSISTENT, 0, {"p": "identically zero"}))
    reports.append(diag.check_continuability(field, None, int(d.get("t_grid", 32)), scen.opts, threads))
    a = scen.shift()
    if a is not None:
        reports.append(diag.check_continuability(field, a, int(d.get("t_grid", 32)), scen.opts, threads))
    if "alpha" in d and "gamma_alpha" in d:
        reports.append(diag.check_super_est(field, float(d["alpha"]), float(d["gamma_alpha"]),
                                            region=scen.region, seed=seed))
    if "a5_alpha" in d:
        reports.append(diag.check_a5_sufficient(field, float(d["a5_alpha"]), seed=seed))
    return reports


def run_scenario(scenario, stages=None, out_dir=None, threads: Optional[int] = None,
                 tol: Optional[float] = None, seed: Optional[int] = None) -> Bundle:
    """Run the requested stages (the scenario's own list by default) and write the bundle."""
    scen = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    scen = scen.with_overrides(out_dir, tol, seed)
    pipe = _Pipeline(scen, threads)
    for st in (stages if stages is not None else scen.stages):
        pipe.run_stage(st)
    return pipe.finish()


# --- command line ----------------------------------------------------------------

def _point(text: str):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return (x, y)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario TOML file")
    common.add_argument("--out", help="output directory (default: the scenario's, or ./out)")
    common.add_argument("--tol", type=float, help="relative integration tolerance")
    common.add_argument("--seed", type=int, help="random seed for sampled checks")
    common.add_argument("--threads", type=int, help="worker processes (default: ROTOR_THREADS or 1)")
    p = argparse.ArgumentParser(prog="rotor", description="rotation numbers and periodic orbits of "
                                "x'' + f(t, x) + p(t, x, x') = 0")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("rotate", parents=[common], help="print rho(T; 0, z)")
    r.add_argument("--z", type=_point, help="initial point X,Y (default: search.seed or 1,0)")
    r.add_argument("--t0", type=float, default=0.0)
    r.add_argument("--t1", type=float, help="end time (default T)")
    sub.add_parser("grid", parents=[common], help="rotation grid CSV and heatmap")
    sub.add_parser("find", parents=[common], help="capture set, degree and periodic orbit")
    sub.add_parser("multiplicity", parents=[common], help="orbits with prescribed rotation (p = 0)")
    sub.add_parser("check", parents=[common], help="sampled hypothesis checks")
    rc = sub.add_parser("reverse-check", parents=[common], help="verify the time-reversal rotation identity")
    rc.add_argument("--samples", type=int, default=20)
    sub.add_parser("run", parents=[common], help="run the stages listed in the scenario")
    return p


def _fmt(v, width=12):
    if v is None:
        return "-".rjust(width)
    if isinstance(v, float):
        return f"{v:.{width - 6}g}".rjust(width)
    return str(v).rjust(width)


def _print_stages(bundle: Bundle):
    for name, st in bundle.stages.items():
        line = f"  {name:<13} {st['status']}"
        if st["error"]:
            line += f"  ({st['error']})"
        print(line)
    print(f"  outputs in {bundle.out_dir}")


def _print_orbits(bundle: Bundle):
    path = bundle.files.get("orbits.json")
    if path is None:
        return
    data = json.loads(path.read_text())
    print(f"{'x*':>14} {'y*':>14} {'residual':>11} {'rho':>10} {'k':>3}  sources")
    for o in data["orbits"]:
        x, y = o["z_star"]
        rho = o["rho"] if o["rho"] is not None else float("nan")
        k = "" if o.get("k") is None else o["k"]
        print(f"{x:14.9f} {y:14.9f} {o['residual']:11.2e} {rho:10.6f} {k!s:>3}  {','.join(o['sources'])}")
    for k, msg in data.get("not_found", {}).items():
        print(f"  k={k}: {msg}")


def _print_hypotheses(reports):
    print(f"{'hypothesis':<13} {'verdict':<20} {'samples':>7}  witness")
    for r in reports:
        wit = "" if r.witness is None else ", ".join(f"{k}={v:.6g}" for k, v in r.witness.items()
                                                     if isinstance(v, float))
        print(f"{r.hypothesis:<13} {r.verdict:<20} {r.samples:>7}  {wit}")
        for n in r.notes:
            print(f"{'':<13} note: {n}")


def _rotate(scen: Scenario, args) -> int:
    field = scen.build_field()
    z = args.z or scen.newton_seed or (1.0, 0.0)
    t1 = field.T if args.t1 is None else args.t1
    out = rotation(field, args.t0, t1, z, scen.opts)
    if isinstance(out, Finite):
        print(repr(out.rho))
    elif isinstance(out, PlusInfinity):
        print(f"+inf (escaped at t={out.t_max_estimate!r}, rho_at_cutoff={out.rho_at_cutoff!r})")
    else:
        print(f"undefined (origin hit at t={out.t_hit!r})")
    return EXIT_OK


def _reverse_check(scen: Scenario, args) -> int:
    field = scen.build_field()
    rev = reverse_field(field)
    T = field.T
    rng = np.random.default_rng(scen.seed)
    rows = []
    attempts = 0
    while len(rows) < args.samples and attempts < 20 * args.samples:
        attempts += 1
        t = float(rng.uniform(0.05 * T, T))
        z = (float(rng.uniform(scen.region.xmin, scen.region.xmax)),
             float(rng.uniform(scen.region.ymin, scen.region.ymax)))
        fwd = rotation(field, 0.0, t, z, scen.opts)
        if not isinstance(fwd, Finite):
            continue
        x_s, y_s = fwd.terminal
        back = rotation(rev, T - t, T, (-x_s, y_s), scen.opts)
        if not isinstance(back, Finite):
            continue
        rows.append((t, z, fwd.rho, back.rho, abs(fwd.rho - back.rho)))
    worst = max((r[4] for r in rows), default=math.inf)
    print(f"{'t':>10} {'x':>10} {'y':>10} {'rho':>14} {'rho_reversed':>14} {'diff':>9}")
    for t, (x, y), a, b, d in rows:
        print(f"{t:10.5f} {x:10.5f} {y:10.5f} {a:14.9f} {b:14.9f} {d:9.2e}")
    ok = len(rows) == args.samples and worst < 1e-6
    print(f"max difference {worst:.3e} over {len(rows)} samples: {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_STAGE_FAILED


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        scen = load_scenario(args.scenario).with_overrides(args.out, args.tol, args.seed)
    except ParseError as exc:
        print(f"rotor: error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("rotor: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    cmd = args.command
    if cmd == "rotate":
        return _rotate(scen, args)
    if cmd == "reverse-check":
        return _reverse_check(scen, args)
    stages = {
        "grid": ["grid"],
        "find": ["grid", "capture", "degree", "orbit"] if scen.boundary == "capture" else ["degree", "orbit"],
        "multiplicity": ["multiplicity"],
        "check": ["check"],
        "run": None,
    }[cmd]
    bundle = run_scenario(scen, stages, threads=args.threads)
    if cmd == "check" and "hypotheses" in bundle.results:
        _print_hypotheses(bundle.results["hypotheses"])
    if cmd in ("find", "multiplicity", "run"):
        _print_orbits(bundle)
    if cmd == "grid" and "grid" in bundle.results:
        rho = bundle.results["grid"].rho()
        fin = rho[np.isfinite(rho)]
        if fin.size:
            print(f"rho on the grid: min {fin.min():.6f}, max {fin.max():.6f} turns (clockwise positive)")
    _print_stages(bundle)
    return EXIT_OK if bundle.ok else EXIT_STAGE_FAILED


if __name__ == "__main__":
    sys.exit(main())
