"""Command line front end: ``toricvol <command> [options]``.

Exit codes: 0 success, 2 property violation, 3 input error, 4 budget or
iteration exhaustion. Reports are JSON with floats rounded to 12 significant
digits; each one embeds the run configuration and the package version.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import catalog, green_bm, ma_solver, mt_lab
from .errors import BudgetExceededError, GridTooCoarseError, ToricVolError
from .grids import ConvexGridFn, uniform_axes
from .io import __version__, dumps, read_grid_csv, read_json, write_grid_csv, write_json
from .polytope import (degree_and_bounds, invariants_to_dict, polytope_from_dict,
                       reduced_representative)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3, 4
COMMANDS = ("analyze", "enumerate", "audit", "solve", "geodesic", "mtcheck", "green",
            "bm", "pipeline")


class InputError(ToricVolError):
    code = "INPUT_ERROR"


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)
    seed: int = 7
    jobs: int = 1
    tol: Optional[float] = None
    out_dir: str = "."

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.tol is not None and not self.tol > 0:
            raise InputError("tolerances must be positive")
        res = self.options.get("res")
        if res is not None and res < 33:
            raise InputError("resolution must be at least 33")
        if self.jobs < 1:
            raise InputError("--jobs must be at least 1")

    def path(self, name):
        if name is None:
            return None
        p = Path(name)
        return p if p.is_absolute() else Path(self.out_dir) / p

    def to_dict(self):
        return asdict(self)


def _envelope(cfg, result, status="ok"):
    return {"command": cfg.command, "config": cfg.to_dict(), "version": __version__,
            "status": status, "result": result}


def _emit(cfg, payload, target):
    if target is None:
        sys.stdout.write(dumps(payload))
    else:
        write_json(payload, cfg.path(target))


def _load_polytope(path):
    try:
        data = read_json(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})")
    return polytope_from_dict(data)


def _load_grid(path):
    if not Path(path).exists():
        raise InputError(f"no such file: {path}")
    return read_grid_csv(path)


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(cfg):
    o = cfg.options
    P = _load_polytope(o["polytope"])
    inv = degree_and_bounds(P)
    result = {"polytope": o["polytope"], "invariants": invariants_to_dict(inv)}
    violated = inv.ke_candidate and inv.is_smooth_fano and not inv.theorem_bound_ok
    _emit(cfg, _envelope(cfg, result, "violation" if violated else "ok"), o.get("out"))
    return EXIT_VIOLATION if violated else EXIT_OK


def cmd_enumerate(cfg):
    o = cfg.options
    cat = catalog.enumerate_fano(o["dim"], o["box"], budget=o["budget"],
                                 method=o.get("method"), strict=o.get("strict", False))
    payload = _envelope(cfg, catalog.catalog_to_dict(cat),
                        "ok" if cat.complete else "incomplete")
    _emit(cfg, payload, o.get("out"))
    return EXIT_OK


def cmd_audit(cfg):
    o = cfg.options
    if o.get("input"):
        data = read_json(o["input"])
        cat = catalog.catalog_from_dict(data.get("result", data))
    elif o.get("dim"):
        cat = catalog.enumerate_fano(o["dim"], o["box"], budget=o["budget"])
    else:
        raise InputError("audit needs --in catalog.json or --dim")
    rep = catalog.audit(cat, scope=o["scope"])
    payload = _envelope(cfg, catalog.audit_to_dict(rep), "ok" if rep.ok else "violation")
    _emit(cfg, payload, o.get("out"))
    if o.get("csv"):
        target = cfg.path(o["csv"])
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(catalog.audit_to_csv(rep))
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_solve(cfg):
    o = cfg.options
    P = _load_polytope(o["polytope"])
    phi, rep = ma_solver.solve_ke(P, o["res"], o.get("box"), tol_residual=cfg.tol,
                                  tol_gradient=cfg.tol,
                                  max_iter=o.get("max_iter") or 60)
    if phi is not None and o.get("out"):
        write_grid_csv(phi, cfg.path(o["out"]), meta={"status": rep.status})
    result = rep.to_dict()
    result["polytope"] = o["polytope"]
    _emit(cfg, _envelope(cfg, result, rep.status), o.get("report"))
    return EXIT_BUDGET if rep.status == "max_iter" else EXIT_OK


def cmd_geodesic(cfg):
    o = cfg.options
    u0, u1 = _load_grid(o["u0"]), _load_grid(o["u1"])
    times = np.linspace(0.0, 1.0, o["samples"])
    path = mt_lab.GeodesicPath(u0, u1, times, o.get("dual_res"))
    V = o.get("volume")
    if V is None:
        from .grids import ma_measure
        V = float(ma_measure(u0, check=False)[0].sum())
    tol = cfg.tol if cfg.tol is not None else 1e-4
    trace = mt_lab.path_property_check(path, V, tol)
    result = trace.to_dict()
    result["volume"] = V
    _emit(cfg, _envelope(cfg, result, "ok" if trace.ok else "violation"), o.get("report"))
    return EXIT_OK if trace.ok else EXIT_VIOLATION


def _reference_domain(phi, level, res):
    R = mt_lab.default_level(phi) if level is None else level
    if phi.dim == 1:
        return mt_lab.resample_reference(phi, R, res or 8001)
    return mt_lab.domain_from_grid(phi, R)


def cmd_mtcheck(cfg):
    o = cfg.options
    phi = _load_grid(o["ref"])
    dom = _reference_domain(phi, o.get("level"), o.get("res"))
    tol = cfg.tol if cfg.tol is not None else 1e-4
    rep = mt_lab.run_suite(dom, o["suite"], cfg.seed, tol=tol, jobs=cfg.jobs)
    C = mt_lab.mt_functional(dom.reference, dom.ma_mass)
    ok = (rep.geodesic_pass == rep.count) and rep.min_margin >= -1e-6
    result = rep.to_dict()
    result.update({"constant": C, "volume": dom.ma_mass, "level": dom.level,
                   "nodes": list(dom.mask.shape), "margin_tolerance": 1e-6})
    _emit(cfg, _envelope(cfg, result, "ok" if ok else "violation"), o.get("report"))
    return EXIT_OK if ok else EXIT_VIOLATION


def domain_from_descriptor(data, res=129):
    """Build a :class:`ReinhardtDomain` from its JSON descriptor.

    ``{"kind": "polydisc" | "ball", "dim": n}``, ``{"kind": "box",
    "log_radii": [...]}``, or a polytope object (normals or vertices) with
    optional ``"level"`` and ``"disc_factors"``; the last form solves for
    the Kahler-Einstein potential and takes its sublevel set in a vertex
    chart.
    """
    kind = data.get("kind")
    if kind == "polydisc":
        return green_bm.ReinhardtDomain.polydisc(int(data["dim"]))
    if kind == "ball":
        return green_bm.ReinhardtDomain.ball(int(data["dim"]))
    if kind == "box":
        return green_bm.ReinhardtDomain.polydisc(len(data["log_radii"]), data["log_radii"])
    if "normals" in data or "vertices" in data:
        P = polytope_from_dict(data)
        return chart_domain(P, data.get("level"), int(data.get("disc_factors", 0)), res)
    raise InputError("domain descriptor needs a kind or a polytope")


def chart_domain(P, level=None, disc_factors=0, res=129, phi_report=None):
    """Sublevel set of the KE potential in a vertex chart, times discs."""
    if phi_report is None:
        _, phi_report = ma_solver.solve_ke(P, 33 if P.dim > 1 else 129)
    if phi_report.dual is None or phi_report.status == "translation_divergence":
        raise InputError("polytope has no Kahler-Einstein potential (barycenter not zero)")
    psi = green_bm.chart_potential(phi_report.dual, P)
    R = float(3.0 * P.dim if level is None else level)
    # upper extent of {psi < R} along each axis
    hi = 1.0
    while np.any(psi(np.eye(P.dim) * hi + (-30.0) * (1 - np.eye(P.dim))) < R):
        hi *= 1.5
    axes = uniform_axes([(-30.0, hi)] * P.dim, res if P.dim > 1 else 20 * res)
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = np.concatenate([psi(pts[s:s + 20000]) for s in range(0, len(pts), 20000)])
    grid = ConvexGridFn(axes, vals.reshape(tuple(len(a) for a in axes)))
    return green_bm.ReinhardtDomain.from_sublevel(grid, R, disc_factors)


def cmd_green(cfg):
    o = cfg.options
    dom = domain_from_descriptor(read_json(o["domain"]), o["res"])
    g = green_bm.green_function(dom, o["res"], o["depth"])
    cert = g.certificate()
    if o.get("out"):
        write_grid_csv(g.grid, cfg.path(o["out"]), meta={"kind": dom.kind})
    ok = cert["nonpositive"] and cert["convex"]
    result = {"domain": dom.kind, "dim": dom.dim, "certificate": cert,
              "upper": dom.upper.tolist()}
    if o.get("probe"):
        result["divergence"] = green_bm.divergence_probe(g).to_dict()
    _emit(cfg, _envelope(cfg, result, "ok" if ok else "violation"), o.get("report"))
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_bm(cfg):
    o = cfg.options
    u = _load_grid(o["input"])
    mass = o["mass"]
    if o["mode"] == "disc":
        if u.dim != 1:
            raise InputError("disc mode expects a radial profile w(s), s = log|z|^2")
        rep = green_bm.bm_disc_radial(u, "auto" if mass == "auto" else float(mass))
        result = rep.to_dict()
        ok = rep.holds
    else:
        if o.get("volume") is None or o.get("constant") is None:
            raise InputError("product mode needs --volume and --constant")
        rep = green_bm.bm_product_check(u, o["volume"], o["constant"])
        result = rep.to_dict()
        ok = rep.margin >= 0
    _emit(cfg, _envelope(cfg, result, "ok" if ok else "violation"), o.get("report"))
    return EXIT_OK if ok else EXIT_VIOLATION


def run_pipeline(P, res=None, seed=7, jobs=1, suite=10):
    """Invariants, KE filter, solver, sublevel masses, M-T constant, Green probes."""
    n = P.dim
    inv = degree_and_bounds(P)
    out = {"invariants": invariants_to_dict(inv), "ke": inv.ke_candidate}
    violations = []
    if inv.ke_candidate and not inv.theorem_bound_ok:
        violations.append("degree bound")
    res = res or {1: 513, 2: 129}.get(n, 33)
    box = 12.0 if n <= 2 else 8.0
    # the grid solver runs on a compact unimodular image; all invariants agree
    Q, U = reduced_representative(P)
    out["solver_basis"] = [list(r) for r in U]
    phi, rep = ma_solver.solve_ke(Q, res, box)
    out["solver"] = rep.to_dict()
    if phi is None:
        out["stage_reached"] = "solver"
        return out, violations, rep.status
    top = mt_lab.default_level(phi)
    levels = [top - k for k in (8, 6, 4, 2, 1)]
    sweep = ma_solver.sublevel_sweep(phi, levels, order=4)
    degree = float(inv.degree)
    out["sublevel_sweep"] = sweep
    out["sublevel_degree_error"] = abs(sweep[-1]["degree_equivalent"] - degree) / degree

    if n == 1:
        dom = mt_lab.ke_reference(rep.dual, Q, R=6.0, resolution=8001)
    else:
        dom = mt_lab.domain_from_grid(phi, levels[2])
    C = mt_lab.mt_functional(dom.reference, dom.ma_mass)
    probes = {"2u0": 2.0, "u0/2": 0.5}
    margins = {k: mt_lab.mt_inequality_check(dom.reference.with_values(s * dom.reference.values),
                                             dom) for k, s in probes.items()}
    margins["zero"] = mt_lab.mt_inequality_check(dom.blank(0.0), dom)
    mt = {"constant": C, "volume": dom.ma_mass, "level": dom.level, "margins": margins}
    if n == 1 and suite:
        srep = mt_lab.run_suite(dom, suite, seed, jobs=jobs)
        mt["suite"] = {k: v for k, v in srep.to_dict().items() if k != "margins"}
        if srep.geodesic_pass < srep.count:
            violations.append("geodesic structure")
        margins["suite_min"] = srep.min_margin
    if min(margins.values()) < -1e-6:
        violations.append("moser-trudinger margin")
    out["moser_trudinger"] = mt

    # the exact degree: P2 sits on the threshold, where grid overshoot would flip the verdict
    V = degree
    probe = green_bm.contradiction_probe(V, n)
    synthetic = green_bm.contradiction_probe(1.05 * (n + 1) ** n, n)
    disc = [green_bm.bm_disc_check(lambda z, m=m: m * np.log(np.abs(z) ** 2), m).ratio
            for m in (0.1, 0.5, 0.9)]
    out["brezis_merle"] = {"volume": V, "numerical_volume": sweep[-1]["degree_equivalent"],
                           "probe": probe, "synthetic_probe": synthetic,
                           "disc_extremal_ratios": disc, "green_model": "polydisc"}
    if probe["contradiction"]:
        violations.append("contradiction reached with the true volume")
    out["stage_reached"] = "complete"
    return out, violations, rep.status


def cmd_pipeline(cfg):
    o = cfg.options
    P = _load_polytope(o["polytope"])
    result, violations, status = run_pipeline(P, o.get("res"), cfg.seed, cfg.jobs,
                                              o.get("suite", 10))
    result["violations"] = violations
    state = "violation" if violations else status
    _emit(cfg, _envelope(cfg, result, state), o.get("report"))
    if violations:
        return EXIT_VIOLATION
    return EXIT_BUDGET if status == "max_iter" else EXIT_OK


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def dispatch(cfg):
    """Run one command; map library errors to exit codes and error objects."""
    try:
        return HANDLERS[cfg.command](cfg)
    except (BudgetExceededError, GridTooCoarseError) as exc:
        return _fail(cfg, exc.to_dict(), EXIT_BUDGET)
    except ToricVolError as exc:
        return _fail(cfg, exc.to_dict(), EXIT_INPUT)
    except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        return _fail(cfg, {"code": "INPUT_ERROR", "message": str(exc)}, EXIT_INPUT)


def _fail(cfg, error, code):
    payload = {"command": cfg.command, "config": cfg.to_dict(), "version": __version__,
               "status": "error", "partial": True, "error": error}
    sys.stderr.write(dumps({"error": error}))
    target = cfg.options.get("report") or cfg.options.get("out")
    if target and str(target).endswith(".json"):
        write_json(payload, cfg.path(target))
    return code


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--out-dir", default=".")

    parser = argparse.ArgumentParser(prog="toricvol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="exact invariants of a polytope")
    p.add_argument("--polytope", required=True)
    p.add_argument("--out")

    p = sub.add_parser("enumerate", parents=[common], help="reflexive polytopes up to equivalence")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--box", type=int, default=3)
    p.add_argument("--budget", type=int, default=catalog.DEFAULT_CANDIDATE_BUDGET)
    p.add_argument("--method", choices=["cycles", "dual-subsets"])
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("audit", parents=[common], help="check the degree bound over a catalog")
    p.add_argument("--in", dest="input")
    p.add_argument("--dim", type=int)
    p.add_argument("--box", type=int, default=3)
    p.add_argument("--budget", type=int, default=catalog.DEFAULT_CANDIDATE_BUDGET)
    p.add_argument("--scope", choices=["smooth", "all-reflexive"], default="smooth")
    p.add_argument("--out")
    p.add_argument("--csv")

    p = sub.add_parser("solve", parents=[common], help="Kahler-Einstein potential on a grid")
    p.add_argument("--polytope", required=True)
    p.add_argument("--res", type=int, default=129)
    p.add_argument("--box", type=float)
    p.add_argument("--max-iter", type=int, default=60)
    p.add_argument("--out")
    p.add_argument("--report")

    p = sub.add_parser("geodesic", parents=[common], help="functionals along a Legendre geodesic")
    p.add_argument("--u0", required=True)
    p.add_argument("--u1", required=True)
    p.add_argument("--samples", type=int, default=21)
    p.add_argument("--volume", type=float)
    p.add_argument("--dual-res", type=int)
    p.add_argument("--report")

    p = sub.add_parser("mtcheck", parents=[common], help="randomized Moser-Trudinger suite")
    p.add_argument("--ref", required=True)
    p.add_argument("--suite", type=int, default=50)
    p.add_argument("--level", type=float)
    p.add_argument("--res", type=int)
    p.add_argument("--report")

    p = sub.add_parser("green", parents=[common], help="pluricomplex Green function")
    p.add_argument("--domain", required=True)
    p.add_argument("--res", type=int, default=129)
    p.add_argument("--depth", type=float, default=12.0)
    p.add_argument("--probe", action="store_true", help="also run the divergence probe")
    p.add_argument("--out")
    p.add_argument("--report")

    p = sub.add_parser("bm", parents=[common], help="Brezis-Merle checks")
    p.add_argument("--mode", choices=["disc", "product"], required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mass", default="auto")
    p.add_argument("--volume", type=float)
    p.add_argument("--constant", type=float)
    p.add_argument("--report")

    p = sub.add_parser("pipeline", parents=[common], help="end-to-end run for one polytope")
    p.add_argument("--polytope", required=True)
    p.add_argument("--res", type=int)
    p.add_argument("--suite", type=int, default=10)
    p.add_argument("--report")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    opts = {k: v for k, v in vars(args).items()
            if k not in ("command", "jobs", "seed", "tol", "out_dir")}
    try:
        cfg = RunConfig(args.command, opts, args.seed, args.jobs, args.tol, args.out_dir)
    except InputError as exc:
        sys.stderr.write(dumps({"error": exc.to_dict()}))
        return EXIT_INPUT
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
