"""Command-line entry point ``frl``.

Exit codes
----------
0  success
2  configuration error (bad/missing field, dt policy, oracle budget, unmet hypothesis)
3  solver error
4  verification failure (reports are still written)
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import os
import sys

import numpy as np

from .. import __version__, kernels
from .. import checks as chk
from ..mesh import BC, interior_mask
from ..profiles import SubsolutionError, validate_initial_pair
from ..reports import CheckReport, summarize
from ..solver import (DtPolicyError, OracleBudgetError, SolverError, oracle_solve, solve_coupled,
                      solve_heat, solve_reduced)
from . import io as rio
from .config import ConfigError, load_run_config, load_sweep_config
from .sweep import SCOPE_TAG, render_plots, run_sweep, table_text, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
DEFAULT_OUT = "frl_out"
ORACLE_TOL = 1e-3
REACTION_OFF_TOL = 1e-8


class _Exit(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else rio.fmt(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _record(kind, spec_snapshot, run_id, outcome, artifacts) -> dict:
    return _jsonable(dict(kind=kind, run_id=run_id, spec=spec_snapshot, outcome=outcome,
                          artifacts=artifacts, timestamp=_now(), version=__version__))


class Context:
    def __init__(self, args):
        self.quiet = args.quiet
        self.out = args.out or os.environ.get("FRL_OUT_DIR") or DEFAULT_OUT

    def say(self, text):
        if not self.quiet:
            print(text)

    @property
    def records(self):
        return os.path.join(self.out, "records.jsonl")


def _spec(cfg, **kw):
    try:
        return cfg.spec(**kw)
    except DtPolicyError as exc:
        raise _Exit(EXIT_CONFIG, f"dt policy: {exc}")
    except (ConfigError, ValueError) as exc:
        raise _Exit(EXIT_CONFIG, str(exc))


def cmd_simulate(args, ctx: Context) -> int:
    cfg = load_run_config(args.config)
    spec = _spec(cfg)
    solver = cfg.problem.get("solver", "coupled").strip()
    runners = dict(coupled=solve_coupled, reduced=solve_reduced)
    if solver not in runners:
        raise _Exit(EXIT_CONFIG, f"unknown solver {solver!r}")
    try:
        traj = runners[solver](spec)
    except SolverError as exc:
        raise _Exit(EXIT_SOLVER, f"solver error: {exc}")
    rid = rio.run_id(spec)
    frames = rio.write_frames(ctx.out, traj)
    snap = rio.spec_snapshot(spec)
    manifest = dict(run_id=rid, version=__version__, solver=solver,
                    content_hash=rio.content_hash(snap, spec.pair.u0.values, spec.pair.v0.values),
                    **{f"spec.{k}": v for k, v in snap.items()},
                    dt_effective=rio.fmt(traj.meta["dt"]), steps=traj.meta["steps"],
                    frames=len(frames),
                    times=",".join(rio.fmt(t) for t in traj.times))
    rio.write_manifest(os.path.join(ctx.out, "manifest.txt"), manifest)
    rio.append_record(ctx.records, _record(
        "simulate", snap, rid,
        dict(steps=traj.meta["steps"], max_reaction=traj.meta["max_reaction"],
             wall_time=traj.meta["wall_time"]),
        ["manifest.txt", *frames]))
    ctx.say(f"simulate: {len(frames)} frames, {traj.meta['steps']} steps -> {ctx.out}")
    return EXIT_OK


def verify_reports(spec) -> list:
    """The full estimate pipeline for one ProblemSpec."""
    reports = validate_initial_pair(spec.pair)
    mesh = spec.mesh
    mask = None
    if mesh.bc is BC.DIRICHLET:
        mask = interior_mask(mesh, chk.DIRICHLET_MASK_CELLS * max(mesh.spacing))
    traj = solve_coupled(spec)
    u_inf = solve_heat(spec.pair.u0, T=spec.T, dt=spec.dt, sample_times=spec.sample_times,
                       n_samples=spec.n_samples)
    M = chk.estimate_time_derivative_bound(u_inf)
    reports += chk.check_sandwich(traj, u_inf, M)
    if not spec.theorem_scope:
        reports.append(CheckReport.skip("subsolution", "skipped: m outside theorem scope"))
        return reports
    try:
        sub = chk.build_subsolution(spec, mask)
    except SubsolutionError as exc:
        reports.append(CheckReport("subsolution_construction", exc.worst_margin or -math.inf,
                                   worst_location=(exc.worst_node, 0.0), details=str(exc)))
        return reports
    reports += chk.check_subsolution_evolution(sub.heat, spec.m)
    try:
        reports.append(chk.check_lower_bound(traj, sub.heat, spec.delta))
    except chk.HypothesisError as exc:
        raise _Exit(EXIT_CONFIG, str(exc))
    reports.append(chk.check_reaction_bound(traj, sub.schedule, spec.k, spec.m, mask))
    return reports


def cmd_verify(args, ctx: Context) -> int:
    cfg = load_run_config(args.config)
    spec = _spec(cfg)
    try:
        reports = verify_reports(spec)
    except SolverError as exc:
        raise _Exit(EXIT_SOLVER, f"solver error: {exc}")
    text = summarize(reports, f"verify {spec.mesh.describe()} m={spec.m:g} k={spec.k:g} T={spec.T:g}")
    rio.atomic_write(os.path.join(ctx.out, "checks.csv"), rio.reports_csv(reports))
    rio.atomic_write(os.path.join(ctx.out, "checks.txt"), text + "\n")
    failed = [r.name for r in reports if not r.passed]
    rio.append_record(ctx.records, _record(
        "verify", rio.spec_snapshot(spec), rio.run_id(spec),
        {r.name: r.status for r in reports}, ["checks.csv", "checks.txt"]))
    ctx.say(text)
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _table_record(table) -> dict:
    return dict(m=table.m, bc=table.bc.value, rho=table.rho, M=table.M,
                k_star_log10=table.k_star_log10, epsilon=table.epsilon,
                theorem_scope=table.theorem_scope, orders=table.orders,
                rows=[{c: getattr(r, c) for c in chk.ConvergenceTable.COLUMNS} for r in table.rows])


def _table_from_record(d) -> chk.ConvergenceTable:
    def num(x):
        return math.nan if x is None else float(x)

    rows = [chk.ConvergenceRow(**{c: num(r[c]) for c in chk.ConvergenceTable.COLUMNS})
            for r in d["rows"]]
    return chk.ConvergenceTable(rows, num(d["rho"]), None, num(d["m"]), BC.parse(d["bc"]),
                                num(d["M"]), num(d["k_star_log10"]), num(d["epsilon"]),
                                [num(p) for p in d["orders"]], bool(d["theorem_scope"]))


def cmd_sweep(args, ctx: Context) -> int:
    cfg = load_sweep_config(args.config)
    results = run_sweep(cfg)
    written = write_outputs(ctx.out, results)
    bad_in_scope = []
    for r in results:
        outcome = dict(scope=SCOPE_TAG[r.in_scope], error=r.error,
                       table=None if r.table is None else _table_record(r.table))
        rio.append_record(ctx.records, _record(
            "sweep", dict(cfg.snapshot(), m=r.m, bc=r.bc), r.run_id, outcome,
            [os.path.relpath(p, ctx.out) for p in written]))
        if r.table is not None:
            ctx.say(table_text(r.table))
        else:
            print(f"cell m={r.m:g} {r.bc} failed: {r.error}", file=sys.stderr)
            if r.in_scope:
                bad_in_scope.append(r.label)
    if bad_in_scope:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_oracle_check(args, ctx: Context) -> int:
    cfg = load_run_config(args.config)
    spec = _spec(cfg)
    refine = int(cfg.oracle.get("refine_factor", 4))
    budget = float(cfg.oracle.get("max_node_steps", 2e8))
    tol = float(cfg.oracle.get("tol", ORACLE_TOL)) * (1 + float(spec.pair.u0.values.max()))
    try:
        oracle = oracle_solve(spec, refine_factor=refine, max_node_steps=budget)
    except OracleBudgetError as exc:
        raise _Exit(EXIT_CONFIG, f"oracle budget: {exc}")
    try:
        coupled = solve_coupled(spec)
        reduced = solve_reduced(spec)
    except SolverError as exc:
        raise _Exit(EXIT_SOLVER, f"solver error: {exc}")

    def gap(a, b):
        return float(np.abs(a.u - b.u).max())

    reports = [
        CheckReport("coupled_vs_oracle", tol - gap(coupled, oracle), details="tol - sup|u gap|"),
        CheckReport("coupled_vs_reduced", tol - gap(coupled, reduced), details="tol - sup|u gap|"),
        CheckReport("reduced_vs_oracle", tol - gap(reduced, oracle), details="tol - sup|u gap|"),
    ]
    if spec.k == 0:
        heat = solve_heat(spec.pair.u0, T=spec.T, dt=spec.dt, sample_times=spec.sample_times,
                          n_samples=spec.n_samples)
        v_drift = float(np.abs(oracle.v - oracle.v[0]).max())
        reports += [
            CheckReport("coupled_vs_heat", REACTION_OFF_TOL - gap(coupled, heat)),
            CheckReport("reduced_vs_heat", REACTION_OFF_TOL - gap(reduced, heat)),
            CheckReport("oracle_v_frozen", REACTION_OFF_TOL - v_drift),
        ]
    text = summarize(reports, f"oracle-check k={spec.k:g} m={spec.m:g} tol={tol:.3e}")
    rio.atomic_write(os.path.join(ctx.out, "oracle.csv"), rio.reports_csv(reports))
    rio.append_record(ctx.records, _record(
        "oracle-check", rio.spec_snapshot(spec), rio.run_id(spec),
        {r.name: r.worst_margin for r in reports}, ["oracle.csv"]))
    ctx.say(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def cmd_report(args, ctx: Context) -> int:
    src = args.records or ctx.records
    try:
        records = rio.read_records(src)
    except (OSError, ValueError) as exc:
        raise _Exit(EXIT_CONFIG, f"cannot read records: {exc}")
    if not records:
        raise _Exit(EXIT_CONFIG, f"no records in {src}")
    tables = {}
    lines = []
    for rec in records:
        if rec["kind"] == "sweep" and rec["outcome"].get("table"):
            t = _table_from_record(rec["outcome"]["table"])
            tables[(t.bc.value, t.m)] = t  # latest record per cell wins
        else:
            lines.append(f"{rec['kind']} {rec['run_id']} {rec['timestamp']}: {rec['outcome']}")
    ordered = [tables[k] for k in sorted(tables)]
    blocks = [table_text(t) for t in ordered] + lines
    rio.atomic_write(os.path.join(ctx.out, "report.txt"), "\n\n".join(blocks) + "\n")
    if ordered:
        from .sweep import CellResult

        cells = [CellResult(t.m, t.bc.value, t.theorem_scope, t) for t in ordered]
        rio.atomic_write(os.path.join(ctx.out, "convergence.csv"), rio.table_csv(ordered))
        for name, doc in render_plots(cells).items():
            rio.atomic_write(os.path.join(ctx.out, name), doc)
    ctx.say("\n\n".join(blocks))
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "run one solve and write trajectory frames"),
    "verify": (cmd_verify, "run every estimate check on one configuration"),
    "sweep": (cmd_sweep, "convergence tables and plots over (k, m, bc)"),
    "oracle-check": (cmd_oracle_check, "compare coupled, reduced and reference solvers"),
    "report": (cmd_report, "re-render tables and plots from the record file"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frl", description="fast-reaction-limit solver and checks")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=name != "report", help="INI config file")
        sp.add_argument("--out", help="output directory (default $FRL_OUT_DIR or ./frl_out)")
        sp.add_argument("--seed", type=int, default=None, help="reserved; ignored")
        sp.add_argument("--quiet", action="store_true")
        if name == "report":
            sp.add_argument("--records", help="record file (default OUT/records.jsonl)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    ctx = Context(args)
    fn = COMMANDS[args.command][0]
    try:
        return fn(args, ctx)
    except _Exit as exc:
        print(f"frl {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"frl {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"frl {args.command}: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
