import json
import os
import textwrap
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fastreact.harness import io as rio
from fastreact.harness.cli import main
from fastreact.harness.config import ConfigError, load_run_config, load_sweep_config
from fastreact.harness.svg import loglog_chart
from fastreact.mesh import ScalarField, build_mesh

BASE = """
[problem]
dim = 1
extents = 0, 1
nodes = 65
bc = neumann
m = 2.5
k = 100
T = 0.02
initial = two_blocks_1d
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def test_config_roundtrip(tmp_path):
    cfg = load_run_config(write(tmp_path, BASE))
    spec = cfg.spec()
    assert spec.mesh.size == 65 and spec.k == 100 and spec.m == 2.5


def test_config_missing_field(tmp_path):
    with pytest.raises(ConfigError, match="'k'"):
        load_run_config(write(tmp_path, BASE.replace("k = 100\n", "")))


def test_sweep_config_validation(tmp_path):
    empty = write(tmp_path, BASE + "[sweep]\nk_values =\nm_values = 2.5\n", "s.ini")
    with pytest.raises(ConfigError, match="empty"):
        load_sweep_config(empty)
    ok = write(tmp_path, BASE + "[sweep]\nk_values = 10, 100\nm_values = 1.5, 2.5\n"
               "bc_modes = neumann, dirichlet\n", "s2.ini")
    cfg = load_sweep_config(ok)
    scopes = {(m, bc.value): s for m, bc, s in cfg.cells()}
    assert scopes[(1.5, "neumann")] is False
    assert scopes[(2.5, "dirichlet")] is True


def test_field_csv_roundtrip(tmp_path):
    mesh = build_mesh(2, [(0, 1), (0, 2)], (9, 11))
    f = ScalarField(mesh, np.random.default_rng(3).random(mesh.size))
    path = str(tmp_path / "f.csv")
    rio.write_field_csv(path, f)
    assert open(path).readline().strip() == "node,x,y,value"
    back = rio.read_field_csv(path, mesh)
    assert np.array_equal(back.values, f.values)


def test_field_csv_rejects_bad_header(tmp_path):
    mesh = build_mesh(1, (0, 1), 9)
    p = tmp_path / "bad.csv"
    p.write_text("i,value\n0,1\n")
    with pytest.raises(ValueError, match="header"):
        rio.read_field_csv(str(p), mesh)


def test_records_append(tmp_path):
    path = str(tmp_path / "records.jsonl")
    for i in range(3):
        rio.append_record(path, {"i": i})
    lines = open(path).read().splitlines()
    assert [json.loads(s)["i"] for s in lines] == [0, 1, 2]


def test_manifest_roundtrip(tmp_path):
    p = str(tmp_path / "m.txt")
    rio.write_manifest(p, {"a": "1", "b": "x=y"})
    assert rio.read_manifest(p) == {"a": "1", "b": "x=y"}


def test_svg_is_wellformed():
    doc = loglog_chart({"a": ([1e2, 1e3, 1e4], [0.1, 0.02, 0.005]), "empty": ([1], [0])},
                       "t", "k", "err")
    root = ET.fromstring(doc)
    assert root.tag.endswith("svg")
    assert doc.count("<polyline") == 1


# -- CLI ---------------------------------------------------------------------

def test_cli_simulate(tmp_path):
    cfg = write(tmp_path, BASE + "n_samples = 5\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    man = rio.read_manifest(str(out / "manifest.txt"))
    assert man["frames"] == "5"
    assert open(out / "frame_0000.csv").readline().strip() == "node,x,u,v,A"
    assert len(rio.read_records(str(out / "records.jsonl"))) == 1


def test_cli_simulate_deterministic(tmp_path):
    cfg = write(tmp_path, BASE + "n_samples = 3\n")
    a, b = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", cfg, "--out", str(a), "--quiet"])
    main(["simulate", "--config", cfg, "--out", str(b), "--quiet"])
    for name in ("manifest.txt", "frame_0000.csv", "frame_0002.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_cli_out_from_env(tmp_path, monkeypatch):
    cfg = write(tmp_path, BASE + "n_samples = 2\n")
    monkeypatch.setenv("FRL_OUT_DIR", str(tmp_path / "envout"))
    assert main(["simulate", "--config", cfg, "--quiet", "--seed", "7"]) == 0
    assert (tmp_path / "envout" / "manifest.txt").exists()


def test_cli_missing_k(tmp_path, capsys):
    cfg = write(tmp_path, BASE.replace("k = 100\n", ""))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2
    assert "'k'" in capsys.readouterr().err


def test_cli_dt_policy(tmp_path, capsys):
    cfg = write(tmp_path, BASE + "dt = 0.01\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2
    assert "dt policy" in capsys.readouterr().err


def test_cli_unknown_preset(tmp_path):
    cfg = write(tmp_path, BASE.replace("two_blocks_1d", "nope"))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2


def test_cli_csv_initial_data(tmp_path):
    mesh = build_mesh(1, (0, 1), 65)
    x = mesh.axis_coords(0)
    rio.write_field_csv(str(tmp_path / "u0.csv"), ScalarField(mesh, np.where(x < 0.4, 1.0, 0.0)))
    rio.write_field_csv(str(tmp_path / "v0.csv"), ScalarField(mesh, np.where(x > 0.6, 1.0, 0.0)))
    cfg = write(tmp_path, BASE.replace("initial = two_blocks_1d", "u0_csv = u0.csv\nv0_csv = v0.csv"))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 0
    missing = write(tmp_path, BASE.replace("initial = two_blocks_1d", "u0_csv = nope.csv\nv0_csv = v0.csv"),
                    "m.ini")
    assert main(["simulate", "--config", missing, "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_cli_verify_below_kstar_skips(tmp_path):
    cfg = write(tmp_path, BASE.replace("nodes = 65", "nodes = 129"))
    out = tmp_path / "v"
    assert main(["verify", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    text = (out / "checks.txt").read_text()
    assert "skipped: below k*" in text
    header = (out / "checks.csv").read_text().splitlines()[0]
    assert header == ",".join(rio.REPORT_COLUMNS)


def test_cli_verify_sabotaged(tmp_path, capsys):
    mesh = build_mesh(1, (0, 1), 129)
    x = mesh.axis_coords(0)
    rio.write_field_csv(str(tmp_path / "u0.csv"), ScalarField(mesh, np.exp(-40 * (x - 0.4) ** 2)))
    rio.write_field_csv(str(tmp_path / "v0.csv"), ScalarField(mesh, np.exp(-40 * (x - 0.6) ** 2)))
    cfg = write(tmp_path, BASE.replace("nodes = 65", "nodes = 129").replace(
        "initial = two_blocks_1d", "u0_csv = u0.csv\nv0_csv = v0.csv"))
    out = tmp_path / "v"
    assert main(["verify", "--config", cfg, "--out", str(out), "--quiet"]) == 4
    assert "initial_separation" in capsys.readouterr().err
    assert (out / "checks.csv").exists()


ORACLE = BASE.replace("nodes = 65", "nodes = 129").replace("T = 0.02", "T = 0.25")


def test_cli_oracle(tmp_path):
    cfg = write(tmp_path, ORACLE)
    assert main(["oracle-check", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 0
    big = write(tmp_path, ORACLE + "[oracle]\nmax_node_steps = 1000\n", "big.ini")
    assert main(["oracle-check", "--config", big, "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_cli_oracle_reaction_off(tmp_path):
    cfg = write(tmp_path, ORACLE.replace("k = 100", "k = 0"))
    out = tmp_path / "o"
    assert main(["oracle-check", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert "coupled_vs_heat" in (out / "oracle.csv").read_text()


SWEEP = BASE.replace("k = 100\n", "") + """
[sweep]
k_values = 100, 1000
m_values = 1.5, 2.5
bc_modes = neumann
parallelism = 2
"""


def test_cli_sweep_and_report(tmp_path):
    cfg = write(tmp_path, SWEEP, "sweep.ini")
    out = tmp_path / "s"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    table = (out / "convergence.csv").read_text().splitlines()
    assert len(table) == 1 + 4
    assert any("out of theorem scope" in line for line in table)
    assert (out / "sup_error_u_vs_k.svg").exists()
    assert len(rio.read_records(str(out / "records.jsonl"))) == 2
    before = (out / "convergence.csv").read_bytes()
    assert main(["report", "--out", str(out), "--quiet"]) == 0
    assert (out / "convergence.csv").read_bytes() == before


def test_cli_sweep_empty_k(tmp_path):
    cfg = write(tmp_path, SWEEP.replace("k_values = 100, 1000", "k_values ="), "e.ini")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2


def test_cli_report_without_records(tmp_path):
    assert main(["report", "--out", str(tmp_path / "none"), "--quiet"]) == 2
