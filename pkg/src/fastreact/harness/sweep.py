"""Sweep orchestration over (m, bc) cells, each a convergence study in k."""

from __future__ import annotations

import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from ..checks import ConvergenceTable, convergence_study
from .config import SweepConfig, load_sweep_config
from . import io as rio
from .svg import loglog_chart

SCOPE_TAG = {True: "in theorem scope", False: "out of theorem scope"}


@dataclass
class CellResult:
    m: float
    bc: str
    in_scope: bool
    table: Optional[ConvergenceTable] = None
    error: Optional[str] = None
    run_id: str = ""

    @property
    def key(self):
        return (self.bc, self.m)

    @property
    def label(self) -> str:
        return f"m={self.m:g} {self.bc}" + ("" if self.in_scope else " (exploratory)")


def run_cell(config_path: str, m: float, bc: str) -> CellResult:
    cfg = load_sweep_config(config_path)
    from ..solver import in_theorem_scope

    scope = in_theorem_scope(bc, m)
    try:
        base = cfg.spec(m=m, k=cfg.k_values[0], bc=bc)
        rho = cfg.rho if cfg.rho is not None else base.T / 4
        fixed = float(cfg.problem["dt"]) if cfg.problem.get("dt") else None
        table = convergence_study(base, cfg.k_values, rho, fixed_dt=fixed)
        return CellResult(m, bc, scope, table, run_id=rio.run_id(base))
    except Exception as exc:  # recorded per cell, never fatal for the sweep
        msg = f"{type(exc).__name__}: {exc}"
        if os.environ.get("FRL_DEBUG"):
            msg += "\n" + traceback.format_exc()
        return CellResult(m, bc, scope, error=msg)


def run_sweep(cfg: SweepConfig) -> list:
    """Run every cell (in parallel up to ``cfg.parallelism``); results sorted by (bc, m)."""
    cells = [(m, bc.value) for m, bc, _ in cfg.cells()]
    path = os.path.abspath(cfg.path)
    if cfg.parallelism == 1 or len(cells) == 1:
        results = [run_cell(path, m, bc) for m, bc in cells]
    else:
        with ProcessPoolExecutor(max_workers=min(cfg.parallelism, len(cells))) as pool:
            futures = [pool.submit(run_cell, path, m, bc) for m, bc in cells]
            results = [f.result() for f in futures]
    return sorted(results, key=lambda r: r.key)


def render_plots(results: list) -> dict:
    """SVG documents keyed by file name."""
    ok = [r for r in results if r.table is not None]
    err = {r.label: (r.table.column("k"), r.table.column("sup_error_u")) for r in ok}
    vl = {r.label: (r.table.column("k"), r.table.column("sup_v_late")) for r in ok}
    return {
        "sup_error_u_vs_k.svg": loglog_chart(err, "distance to heat flow", "k", "sup |u_k - u_inf|"),
        "sup_v_late_vs_k.svg": loglog_chart(vl, "late-time size of v", "k", "sup v on [rho, T]"),
    }


def write_outputs(outdir: str, results: list) -> list:
    """Tables, per-cell tables and plots. Returns written paths (sorted)."""
    written = []
    tables = [r.table for r in results if r.table is not None]
    path = os.path.join(outdir, "convergence.csv")
    rio.atomic_write(path, rio.table_csv(tables))
    written.append(path)
    for r in results:
        if r.table is None:
            continue
        p = os.path.join(outdir, f"convergence_m{r.m:g}_{r.bc}.csv")
        rio.atomic_write(p, rio.table_csv([r.table]))
        written.append(p)
    status = [[r.m, r.bc, SCOPE_TAG[r.in_scope], "ok" if r.error is None else "error",
               r.error or ""] for r in results]
    p = os.path.join(outdir, "cells.csv")
    rio.atomic_write(p, rio._csv_text(["m", "bc", "scope", "status", "error"], status))
    written.append(p)
    for name, doc in render_plots(results).items():
        p = os.path.join(outdir, name)
        rio.atomic_write(p, doc)
        written.append(p)
    return sorted(written)


def table_text(table: ConvergenceTable) -> str:
    """Human-readable block for one table."""
    cols = ("k", "sup_error_u", "sup_v_late", "t_k", "envelope", "vanishing_time")
    head = (f"m={table.m:g} bc={table.bc.value} rho={table.rho:g} "
            f"[{SCOPE_TAG[table.theorem_scope]}] M={table.M:.4g} k*=10^{table.k_star_log10:.4g}")
    lines = [head, "  ".join(f"{c:>14s}" for c in cols)]
    for r in table.rows:
        lines.append("  ".join(f"{getattr(r, c):14.6e}" for c in cols))
    if table.orders:
        lines.append("empirical orders in k: " + ", ".join(f"{p:.3f}" for p in table.orders))
    return "\n".join(lines)


__all__ = ["CellResult", "run_cell", "run_sweep", "render_plots", "write_outputs", "table_text"]
