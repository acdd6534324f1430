"""Run persistence: field and frame CSVs, manifests, report tables, run records.

Every writer goes through :func:`atomic_write`, so a reader never sees a
partial file. Numbers are written with ``%.17g`` and nothing time-dependent
enters a CSV or manifest, which makes repeated runs byte-identical. Column
layouts are listed in ``FORMATS.md`` at the repository root.
"""

from __future__ import annotations

import csv
import fcntl
import hashlib
import io
import json
import math
import os
import tempfile
from contextlib import contextmanager

import numpy as np

from .. import __version__
from ..mesh import Mesh, ScalarField

AXES = ("x", "y")
REPORT_COLUMNS = ("check", "status", "worst_margin", "tolerance", "tolerance_source",
                  "worst_node", "worst_time", "details")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    return buf.getvalue()


def _coord_header(mesh: Mesh) -> list:
    return list(AXES[: mesh.dim])


def write_field_csv(path: str, field: ScalarField) -> None:
    """``node,x[,y],value`` with a one-line header."""
    mesh = field.mesh
    pts = mesh.coords()
    rows = ([i, *pts[i], field.values[i]] for i in range(mesh.size))
    atomic_write(path, _csv_text(["node", *_coord_header(mesh), "value"], rows))


def read_field_csv(path: str, mesh: Mesh) -> ScalarField:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["node", *_coord_header(mesh), "value"]
        if header is None or [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: header must be {','.join(expected)}")
        values = np.full(mesh.size, np.nan)
        for row in reader:
            if not row:
                continue
            node = int(row[0])
            if not 0 <= node < mesh.size:
                raise ValueError(f"{path}: node index {node} out of range")
            values[node] = float(row[-1])
    if np.isnan(values).any():
        raise ValueError(f"{path}: {int(np.isnan(values).sum())} nodes missing")
    return ScalarField(mesh, values)


def write_frames(outdir: str, traj) -> list:
    """One ``frame_XXXX.csv`` (node, coords, u, v, A) per saved sample."""
    mesh = traj.mesh
    pts = mesh.coords()
    header = ["node", *_coord_header(mesh), "u", "v", "A"]
    names = []
    for s in range(len(traj.times)):
        name = f"frame_{s:04d}.csv"
        rows = ([i, *pts[i], traj.u[s, i], traj.v[s, i], traj.A[s, i]] for i in range(mesh.size))
        atomic_write(os.path.join(outdir, name), _csv_text(header, rows))
        names.append(name)
    return names


def content_hash(snapshot: dict, *arrays) -> str:
    h = hashlib.sha256()
    for key in sorted(snapshot):
        h.update(f"{key}={snapshot[key]}\n".encode())
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    h.update(__version__.encode())
    return h.hexdigest()


def spec_snapshot(spec) -> dict:
    """All ProblemSpec fields as text."""
    return {
        "mesh": spec.mesh.describe(),
        "m": fmt(spec.m),
        "k": fmt(spec.k),
        "T": fmt(spec.T),
        "dt": fmt(spec.dt),
        "delta": fmt(spec.delta),
        "n_samples": fmt(spec.n_samples),
        "sample_times": "" if spec.sample_times is None else ",".join(fmt(t) for t in spec.sample_times),
        "overlap_tol": fmt(spec.pair.overlap_tol),
        "theorem_scope": "yes" if spec.theorem_scope else "no",
    }


def run_id(spec) -> str:
    return content_hash(spec_snapshot(spec), spec.pair.u0.values, spec.pair.v0.values)[:16]


def write_manifest(path: str, entries: dict) -> None:
    lines = [f"{k}={entries[k]}" for k in entries]
    atomic_write(path, "\n".join(lines) + "\n")


def read_manifest(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and "=" in line:
                k, v = line.split("=", 1)
                out[k] = v
    return out


def reports_csv(reports) -> str:
    rows = []
    for r in reports:
        node, t = r.worst_location
        rows.append([r.name, r.status, r.worst_margin, r.tolerance, r.tolerance_source,
                     node, t, r.details])
    return _csv_text(REPORT_COLUMNS, rows)


def table_csv(tables) -> str:
    """Rows of one or more ConvergenceTables, each tagged with its (m, bc) cell."""
    from ..checks import ConvergenceTable

    header = ["m", "bc", "scope", *ConvergenceTable.COLUMNS]
    rows = []
    for t in tables:
        scope = "in theorem scope" if t.theorem_scope else "out of theorem scope"
        for r in t.rows:
            rows.append([t.m, t.bc.value, scope, *(getattr(r, c) for c in ConvergenceTable.COLUMNS)])
    return _csv_text(header, rows)


@contextmanager
def _locked(path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path + ".lock", "w") as lk:
        fcntl.flock(lk, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(lk, fcntl.LOCK_UN)


def append_record(path: str, record: dict) -> None:
    """Append one JSON line; the whole file is rewritten then renamed under a lock."""
    line = json.dumps(record, sort_keys=True, allow_nan=True)
    with _locked(path):
        old = ""
        if os.path.exists(path):
            with open(path) as fh:
                old = fh.read()
        if old and not old.endswith("\n"):
            old += "\n"
        atomic_write(path, old + line + "\n")


def read_records(path: str) -> list:
    if not os.path.exists(path):
        return []
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
