"""
Command line entry point.

    fblab solve     --config run.json --out results/
    fblab continue  --config jet.json --out results/ --plot
    fblab diagnose  --config diag.json
    fblab oracle    --config oracle.json
    fblab sweep     --config sweep.json --threads 4
    fblab report    --out results/

Exit codes: 0 success, 2 configuration error, 3 numerical failure (or a
solve that did not converge), 4 failed --check.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from fblab import __version__
from fblab import diagnostics as dg
from fblab.energy import total_energy
from fblab.mesh import DiscreteFunction, Domain, GridMismatch, InvalidExponent, InvalidResolution, build_grid
from fblab.model import (
    BorderlineRegime,
    BoundarySpec,
    ExponentInputs,
    InvalidSpec,
    ProblemSpec,
    SourceSpec,
    UnsupportedPotential,
    predicted_alpha,
    profile_constant,
)
from fblab.oracle import alt_phillips_profile, brute_force_minimizer_1d, two_phase_jet_1d
from fblab.plots import loglog_svg, map_svg, profile_svg
from fblab.solver import (
    ContinuationSchedule,
    NumericalFailure,
    SolverParams,
    continuation,
    minimize,
    truncation_audit,
)

log = logging.getLogger("fblab")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

TOP_KEYS = {
    "schema_version", "problem", "solver", "continuation", "diagnostics",
    "sweep", "oracle", "input", "output", "plot", "seed", "check",
}
PROBLEM_KEYS = {"p", "gamma", "lambda_plus", "lambda_minus", "domain", "N", "source", "boundary", "alpha_p"}
SOURCE_KEYS = {"family", "value", "amplitude", "center", "s", "path", "q"}
BOUNDARY_KEYS = {"kind", "value", "values", "grad", "expr"}
SOLVER_KEYS = {f.name for f in fields(SolverParams)}
CONT_KEYS = {"gammas"}
DIAG_KEYS = {"zero_tol", "radii"}
SWEEP_KEYS = {"p", "gamma", "q", "profile_boundary", "fb_location"}
ORACLE_KEYS = {"kind", "a", "A", "B", "N", "starts", "resolution"}
CHECK_KEYS = {
    "converged", "sup_norm_max", "energy_max", "flux_rel_max", "kink_cells_max",
    "growth_rel_tol", "sweep_monotone_growth", "sweep_borderline_exact",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: ProblemSpec
    N: int
    solver: SolverParams
    schedule: ContinuationSchedule | None = None
    diagnostics: dict = field(default_factory=dict)
    sweep: dict | None = None
    oracle: dict | None = None
    input: str | None = None
    output: str = "fblab-out"
    plot: bool = False
    seed: int = 0
    check: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def _reject_unknown(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _problem(d: dict) -> tuple[ProblemSpec, int]:
    _reject_unknown(d, PROBLEM_KEYS, "problem")
    for k in ("p", "gamma", "lambda_plus", "lambda_minus", "domain"):
        if k not in d:
            raise ConfigError(f"problem.{k} is required")
    bounds = d["domain"]
    if not isinstance(bounds, list) or not all(isinstance(b, list) and len(b) == 2 for b in bounds):
        raise ConfigError("problem.domain must be a list of [lo, hi] pairs")
    src = dict(d.get("source", {}))
    _reject_unknown(src, SOURCE_KEYS, "problem.source")
    if "center" in src:
        src["center"] = tuple(src["center"])
    bnd = dict(d.get("boundary", {}))
    _reject_unknown(bnd, BOUNDARY_KEYS, "problem.boundary")
    for k in ("values", "grad"):
        if k in bnd:
            bnd[k] = tuple(bnd[k])
    try:
        domain = Domain(tuple(tuple(float(x) for x in b) for b in bounds))
        spec = ProblemSpec(
            p=float(d["p"]),
            gamma=float(d["gamma"]),
            lambda_plus=float(d["lambda_plus"]),
            lambda_minus=float(d["lambda_minus"]),
            domain=domain,
            source=SourceSpec(**src),
            boundary=BoundarySpec(**bnd),
            alpha_p=d.get("alpha_p"),
        )
        N = int(d.get("N", 256))
        grid = build_grid(domain, N)
        spec.boundary.trace(grid)  # validates boundary data against the grid
    except (InvalidSpec, InvalidResolution, InvalidExponent, GridMismatch, TypeError, ValueError) as exc:
        raise ConfigError(f"problem: {exc}") from exc
    return spec, N


def load_config(src) -> RunConfig:
    """Parse and validate a config (path or already-loaded dict)."""
    if isinstance(src, (str, Path)):
        try:
            d = json.loads(Path(src).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {src}: {exc}") from exc
    else:
        d = src
    _reject_unknown(d, TOP_KEYS, "config")
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    if "problem" not in d:
        raise ConfigError("config needs a problem section")
    spec, N = _problem(d["problem"])
    sol = d.get("solver", {})
    _reject_unknown(sol, SOLVER_KEYS, "solver")
    try:
        params = SolverParams(**sol)
    except (InvalidSpec, TypeError) as exc:
        raise ConfigError(f"solver: {exc}") from exc
    cfg = RunConfig(problem=spec, N=N, solver=params)
    if "continuation" in d:
        _reject_unknown(d["continuation"], CONT_KEYS, "continuation")
        try:
            cfg.schedule = ContinuationSchedule(tuple(d["continuation"].get("gammas", ())))
        except InvalidSpec as exc:
            raise ConfigError(f"continuation: {exc}") from exc
    cfg.diagnostics = dict(d.get("diagnostics", {}))
    _reject_unknown(cfg.diagnostics, DIAG_KEYS, "diagnostics")
    if "sweep" in d:
        _reject_unknown(d["sweep"], SWEEP_KEYS, "sweep")
        cfg.sweep = dict(d["sweep"])
    if "oracle" in d:
        _reject_unknown(d["oracle"], ORACLE_KEYS, "oracle")
        cfg.oracle = dict(d["oracle"])
    cfg.check = dict(d.get("check", {}))
    _reject_unknown(cfg.check, CHECK_KEYS, "check")
    cfg.input = d.get("input")
    cfg.output = d.get("output", cfg.output)
    cfg.plot = bool(d.get("plot", False))
    cfg.seed = int(d.get("seed", 0))
    return cfg


# --- output ------------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path: Path, obj) -> None:
    if isinstance(obj, dict):
        obj = {"schema_version": SCHEMA_VERSION, **obj}
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def write_trace(path: Path, trace) -> None:
    write_rows(
        path,
        ["iteration", "stage", "epsilon", "energy", "grad_norm", "gamma"],
        ([t.iteration, t.stage, t.epsilon, t.energy, t.grad_norm, t.gamma] for t in trace),
    )


def write_metadata(out: Path, command: str, cfg: RunConfig) -> None:
    """Run metadata, kept apart so the result files stay reproducible byte for byte."""
    write_json(
        out / "metadata.json",
        {
            "command": command,
            "version": __version__,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "seed": cfg.seed,
            "notes": cfg.notes,
        },
    )


def _plot_solution(out: Path, u: DiscreteFunction, name: str, reference=None) -> None:
    if u.grid.dim == 1:
        svg = profile_svg(u.grid.coords[:, 0], u.values, name, reference)
    else:
        svg = map_svg(u.as_array(), name)
    (out / f"{name}.svg").write_text(svg)


# --- checks --------------------------------------------------------------------------------


def _run_checks(check: dict, measured: dict) -> list[str]:
    """Names of failed checks; checks whose quantity was not measured fail too."""
    failed = []
    for key, want in check.items():
        got = measured.get(key)
        if got is None:
            failed.append(f"{key}: not measured by this command")
            continue
        if key in ("converged", "sweep_monotone_growth", "sweep_borderline_exact"):
            ok = bool(got) == bool(want)
        else:
            ok = math.isfinite(got) and got <= float(want)
        if not ok:
            failed.append(f"{key}: measured {got!r}, required {want!r}")
    return failed


def _finish_checks(args, cfg: RunConfig, measured: dict, code: int) -> int:
    if not args.check or not cfg.check:
        return code
    failed = _run_checks(cfg.check, measured)
    for f in failed:
        print(f"CHECK FAILED {f}", file=sys.stderr)
    if failed:
        return EXIT_CHECK
    print("all checks passed")
    return code


# --- commands --------------------------------------------------------------------------------


def _params(cfg: RunConfig) -> SolverParams:
    d = {f.name: getattr(cfg.solver, f.name) for f in fields(SolverParams)}
    d["seed"] = cfg.seed
    return SolverParams(**d)


def _one_phase_measures(u: DiscreteFunction, spec: ProblemSpec, diag: dict) -> dict:
    fb = dg.free_boundary(u, diag.get("zero_tol", 0.0))
    out = {}
    try:
        g = dg.growth_fit(u, fb, diag.get("radii"))
        out["growth"] = g.to_dict()
    except (dg.InsufficientScales, dg.NoPositivePhase) as exc:
        out["growth_error"] = str(exc)
    return out


def cmd_solve(cfg: RunConfig, args) -> int:
    spec = cfg.problem
    if spec.gamma <= 0:
        raise ConfigError("solve needs gamma > 0; use `continue` for gamma = 0")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    grid = build_grid(spec.domain, cfg.N)
    rep = minimize(spec, grid, _params(cfg))
    rep.u.to_csv(out / "solution.csv")
    write_trace(out / "trace.csv", rep.trace)
    level = spec.boundary.sup_abs(grid) + 1.0
    j, jt = truncation_audit(rep.u, spec, level)
    report = {
        "command": "solve",
        "problem": spec.to_dict(),
        "N": cfg.N,
        "solve": rep.to_dict(),
        "truncation_audit": {"level": level, "energy": j, "truncated_energy": jt},
        **_one_phase_measures(rep.u, spec, cfg.diagnostics),
    }
    write_json(out / "report.json", report)
    write_metadata(out, "solve", cfg)
    if cfg.plot:
        _plot_solution(out, rep.u, "solution")
    measured = {
        "converged": rep.converged,
        "sup_norm_max": rep.sup_norm,
        "energy_max": rep.energy.total,
    }
    if "growth" in report and grid.dim == 1 and spec.gamma > 0:
        target = spec.p / (spec.p - spec.gamma)
        measured["growth_rel_tol"] = abs(report["growth"]["exponent"] - target) / target
    print(f"energy {rep.energy.total:.12g}  sup|u| {rep.sup_norm:.6g}  converged {rep.converged}")
    return _finish_checks(args, cfg, measured, EXIT_OK if rep.converged else EXIT_NUMERIC)


def cmd_continue(cfg: RunConfig, args) -> int:
    spec = cfg.problem
    if spec.gamma != 0:
        raise ConfigError("continue targets gamma = 0; set problem.gamma to 0")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    grid = build_grid(spec.domain, cfg.N)
    schedule = cfg.schedule
    if schedule is None:
        schedule = ContinuationSchedule()
        cfg.notes.append("default continuation schedule applied")
    rep = continuation(spec, grid, schedule, _params(cfg))
    rep.u.to_csv(out / "solution.csv")
    write_trace(out / "trace.csv", rep.trace)
    gaps = [math.nan] + list(rep.w1p_gaps)
    write_rows(
        out / "stages.csv",
        ["gamma", "energy_own", "energy_j0", "w1p_gap"],
        zip(rep.stage_gammas, rep.stage_energies_own, rep.stage_energies_j0, gaps),
    )
    reg = dg.regularity_report(rep.u, spec, cfg.diagnostics.get("zero_tol", 0.0)).to_dict()
    scale = (spec.lambda_plus - spec.lambda_minus) / (spec.p - 1)
    flux = [f["residual"] for f in reg["flux"] if not f["skipped"]]
    flux_rel = max(abs(r) for r in flux) / scale if flux else math.nan
    if not reg["flux"]:
        reg["flux_note"] = "no interior interface; flux section empty"
    report = {
        "command": "continue",
        "problem": spec.to_dict(),
        "N": cfg.N,
        "schedule": list(schedule.gammas),
        "solve": rep.to_dict(),
        "regularity": reg,
        "flux_rel_max": flux_rel,
        "notes": list(cfg.notes),
    }
    measured = {
        "converged": rep.converged,
        "sup_norm_max": rep.sup_norm,
        "energy_max": rep.energy.total,
        "flux_rel_max": flux_rel,
    }
    if grid.dim == 1 and spec.domain.bounds == ((-1.0, 1.0),) and spec.source.family == "zero":
        A, B = spec.boundary.trace(grid)
        if A < 0 < B:
            orc = two_phase_jet_1d(float(A), float(B), spec)
            fb = dg.free_boundary(rep.u)
            pts = fb.unique_points()[:, 0]
            if pts.size:
                cells = float(np.min(np.abs(pts - orc.extras["kink"]))) / grid.h[0]
                report["jet_oracle"] = {**orc.to_dict(), "kink_distance_cells": cells}
                measured["kink_cells_max"] = cells
    write_json(out / "report.json", report)
    write_metadata(out, "continue", cfg)
    if cfg.plot:
        _plot_solution(out, rep.u, "solution")
        g = reg.get("growth")
        if g:
            (out / "growth.svg").write_text(loglog_svg(g["radii"], g["values"], g["exponent"], g["constant"], "growth"))
    print(f"J0 {rep.energy.total:.12g}  flux residual / scale {flux_rel:.4g}")
    return _finish_checks(args, cfg, measured, EXIT_OK)


def cmd_diagnose(cfg: RunConfig, args) -> int:
    spec = cfg.problem
    if not cfg.input:
        raise ConfigError("diagnose needs `input`: a solution CSV with header x[,y],u")
    grid = build_grid(spec.domain, cfg.N)
    try:
        u = DiscreteFunction.from_csv(cfg.input, grid)
    except (OSError, GridMismatch, ValueError) as exc:
        raise ConfigError(f"cannot load {cfg.input}: {exc}") from exc
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    reg = dg.regularity_report(u, spec, cfg.diagnostics.get("zero_tol", 0.0)).to_dict()
    write_json(out / "regularity.json", reg)
    rows = []
    for name in ("growth", "oscillation"):
        fit = reg.get(name)
        if fit:
            rows += [(name, r, v) for r, v in zip(fit["radii"], fit["values"])]
    nd = reg.get("nondegeneracy")
    if nd:
        rows += [("c_growth", r, v) for r, v in zip(nd["radii"], nd["growth_by_radius"])]
        rows += [("c_sup", r, v) for r, v in zip(nd["radii"], nd["sup_by_radius"])]
    write_rows(out / "radii.csv", ["quantity", "radius", "value"], rows)
    write_metadata(out, "diagnose", cfg)
    if cfg.plot:
        for name in ("growth", "oscillation"):
            fit = reg.get(name)
            if fit and isinstance(fit["exponent"], float) and math.isfinite(fit["exponent"]):
                (out / f"{name}.svg").write_text(loglog_svg(fit["radii"], fit["values"], fit["exponent"], fit["constant"], name))
    scale = (spec.lambda_plus - spec.lambda_minus) / (spec.p - 1)
    flux = [abs(f["residual"]) for f in reg["flux"] if not f["skipped"]]
    measured = {"sup_norm_max": float(np.max(np.abs(u.values)))}
    if flux:
        measured["flux_rel_max"] = max(flux) / scale
    print(json.dumps(_clean({k: reg[k] for k in ("errors",)}), sort_keys=True))
    return _finish_checks(args, cfg, measured, EXIT_OK)


def cmd_oracle(cfg: RunConfig, args) -> int:
    spec = cfg.problem
    o = cfg.oracle or {}
    kind = o.get("kind")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    grid = build_grid(spec.domain, cfg.N)
    try:
        if kind == "alt_phillips":
            sol = alt_phillips_profile(spec.p, spec.gamma, spec.lambda_plus, float(o.get("a", 0.0)), grid)
            u, info = sol.u, sol.to_dict()
        elif kind == "jet":
            trace = spec.boundary.trace(grid)
            A, B = float(o.get("A", trace[0])), float(o.get("B", trace[-1]))
            sol = two_phase_jet_1d(A, B, spec, grid, resolution=float(o.get("resolution", 1e-4)))
            u, info = sol.u, sol.to_dict()
        elif kind == "brute_force":
            u = brute_force_minimizer_1d(spec, int(o.get("N", 32)), int(o.get("starts", 16)), cfg.seed)
            info = {"kind": "brute_force", "energy": total_energy(u, spec).total, "N": u.grid.N, "starts": int(o.get("starts", 16))}
        else:
            raise ConfigError("oracle.kind must be alt_phillips, jet or brute_force")
    except (InvalidSpec, UnsupportedPotential) as exc:
        raise ConfigError(f"oracle: {exc}") from exc
    u.to_csv(out / "oracle.csv")
    write_json(out / "oracle.json", info)
    write_metadata(out, "oracle", cfg)
    if cfg.plot:
        _plot_solution(out, u, "oracle")
    print(json.dumps(_clean(info), sort_keys=True))
    return EXIT_OK


def _sweep_spec(base: ProblemSpec, p: float, gamma: float, sw: dict) -> ProblemSpec:
    spec = replace(base, p=float(p), gamma=float(gamma))
    if sw.get("profile_boundary", True) and base.n == 1:
        (lo, hi), = base.domain.bounds
        a = float(sw.get("fb_location", 0.0))
        c = profile_constant(spec.p, spec.gamma, spec.lambda_plus)
        beta = spec.p / (spec.p - spec.gamma)
        spec = replace(spec, boundary=BoundarySpec(kind="endpoints", values=(0.0, c * (hi - a) ** beta)))
    return spec


def _sweep_solve(base: ProblemSpec, N: int, params: SolverParams, sw: dict, p: float, gamma: float) -> dict:
    try:
        spec = _sweep_spec(base, p, gamma, sw)
        grid = build_grid(spec.domain, N)
        rep = minimize(spec, grid, params)
        fb = dg.free_boundary(rep.u)
        res = {"status": "ok", "converged": rep.converged}
        try:
            res["growth_exponent"] = dg.growth_fit(rep.u, fb).exponent
        except (dg.InsufficientScales, dg.NoPositivePhase) as exc:
            res["growth_exponent"] = math.nan
            res["status"] = f"growth: {exc}"
        try:
            c = dg._pick_center(grid, fb, positive=False)
            res["oscillation_exponent"] = dg.oscillation_decay_fit(rep.u, c, p=spec.p).exponent
        except (dg.InsufficientScales, dg.NoPositivePhase):
            res["oscillation_exponent"] = math.nan
        flux = [f.residual for f in dg.flux_residual(rep.u, fb, spec) if not f.skipped] if not fb.empty else []
        res["flux_residual"] = max(flux, key=abs) if flux else math.nan
        return res
    except (NumericalFailure, InvalidSpec, UnsupportedPotential, ValueError) as exc:
        return {"status": f"failed: {exc}", "converged": False, "growth_exponent": math.nan, "oscillation_exponent": math.nan, "flux_residual": math.nan}


SWEEP_HEADER = [
    "p", "gamma", "q", "predicted_alpha", "regime", "borderline", "growth_target",
    "growth_exponent", "oscillation_exponent", "flux_residual", "converged", "status",
]


def sweep_table(cfg: RunConfig, threads: int = 1) -> list[dict]:
    sw = cfg.sweep or {}
    ps = [float(x) for x in sw.get("p", [cfg.problem.p])]
    gs = [float(x) for x in sw.get("gamma", [cfg.problem.gamma])]
    qs = [x for x in sw.get("q", ["inf"])]
    if not ps or not gs or not qs:
        raise ConfigError("sweep lists must be nonempty")
    if any(not 0 < g <= 1 for g in gs):
        raise ConfigError("sweep gammas must lie in (0, 1]")
    params = _params(cfg)
    keys = list(itertools.product(ps, gs))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(_sweep_solve, cfg.problem, cfg.N, params, sw, p, g) for p, g in keys]
        solved = dict(zip(keys, [f.result() for f in futures]))
    rows = []
    n = cfg.problem.n
    for p, g, q in itertools.product(ps, gs, qs):
        qf = math.inf if str(q).lower() in ("inf", "infinity") else float(q)
        inp = ExponentInputs(p=p, gamma=g, q=qf, n=n, alpha_p=cfg.problem.alpha_p)
        try:
            alpha, regime = predicted_alpha(inp)
            borderline = False
        except BorderlineRegime:
            alpha, regime = math.nan, "borderline" if qf == n else "subcritical"
            borderline = qf == n
        s = solved[(p, g)]
        rows.append(
            {
                "p": p,
                "gamma": g,
                "q": qf,
                "predicted_alpha": alpha,
                "regime": regime,
                "borderline": borderline,
                "growth_target": p / (p - g),
                "growth_exponent": s["growth_exponent"],
                "oscillation_exponent": s["oscillation_exponent"],
                "flux_residual": s["flux_residual"],
                "converged": s["converged"],
                "status": s["status"],
            }
        )
    return rows


def sweep_properties(rows: list[dict], n: int) -> dict:
    """Growth exponent increasing in gamma for each (p, q); borderline flag iff q = n."""
    mono = True
    for key, grp in itertools.groupby(sorted(rows, key=lambda r: (r["p"], r["q"], r["gamma"])), key=lambda r: (r["p"], r["q"])):
        by_gamma = {r["gamma"]: r["growth_exponent"] for r in grp}  # repeated q entries collapse
        vals = [by_gamma[g] for g in sorted(by_gamma)]
        if any(not math.isfinite(v) for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
            mono = False
    border = all(r["borderline"] == (r["q"] == n) for r in rows)
    return {"sweep_monotone_growth": mono, "sweep_borderline_exact": border}


def cmd_sweep(cfg: RunConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a sweep section")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_table(cfg, args.threads)
    write_rows(out / "sweep.csv", SWEEP_HEADER, ([r[k] for k in SWEEP_HEADER] for r in rows))
    props = sweep_properties(rows, cfg.problem.n)
    write_json(out / "sweep.json", {"rows": rows, "properties": props})
    write_metadata(out, "sweep", cfg)
    for r in rows:
        print(f"p={r['p']:g} gamma={r['gamma']:g} q={r['q']:g} alpha={r['predicted_alpha']:.4g} ({r['regime']}) growth={r['growth_exponent']:.4g}/{r['growth_target']:.4g} {r['status']}")
    return _finish_checks(args, cfg, props, EXIT_OK)


def cmd_report(out: Path) -> int:
    """Summarize whatever result files exist in an output directory."""
    if not out.is_dir():
        raise ConfigError(f"no such output directory: {out}")
    summary = {}
    for name in ("report.json", "regularity.json", "sweep.json", "oracle.json"):
        f = out / name
        if f.exists():
            d = json.loads(f.read_text())
            if name == "report.json":
                s = d.get("solve", {})
                summary[name] = {
                    "command": d.get("command"),
                    "energy": s.get("energy", {}).get("total"),
                    "converged": s.get("converged"),
                    "sup_norm": s.get("sup_norm"),
                    "flux_rel_max": d.get("flux_rel_max"),
                }
            elif name == "sweep.json":
                summary[name] = {"rows": len(d["rows"]), **d["properties"]}
            elif name == "regularity.json":
                summary[name] = {"errors": d.get("errors"), "n_interface": d["free_boundary"]["n_points"]}
            else:
                summary[name] = {"kind": d.get("kind"), "energy": d.get("energy")}
    if not summary:
        raise ConfigError(f"no result files in {out}")
    write_json(out / "summary.json", summary)
    for k, v in summary.items():
        print(f"{k}: {json.dumps(_clean(v), sort_keys=True)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fblab", description="two-phase free boundary energy laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "continue", "diagnose", "oracle", "sweep", "report"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides config output)")
        sp.add_argument("--plot", action="store_true", help="write SVG figures")
        sp.add_argument("--check", action="store_true", help="evaluate the config's check section; exit 4 on failure")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


COMMANDS = {
    "solve": cmd_solve,
    "continue": cmd_continue,
    "diagnose": cmd_diagnose,
    "oracle": cmd_oracle,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            if not args.out and not args.config:
                raise ConfigError("report needs --out or --config")
            out = Path(args.out) if args.out else Path(load_config(args.config).output)
            return cmd_report(out)
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        if args.out:
            cfg.output = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.plot:
            cfg.plot = True
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
