"""INI-style run and sweep configuration.

Example::

    [problem]
    dim = 1
    extents = 0, 1
    nodes = 129
    bc = neumann
    m = 2.5
    k = 1000
    T = 0.25
    initial = two_blocks_1d

    [sweep]
    k_values = 100, 1000, 10000
    m_values = 2.5
    bc_modes = neumann
    parallelism = 2

2D extents are written ``0, 1; 0, 1``. Instead of ``initial`` a run may
name ``u0_csv`` and ``v0_csv`` field files (relative to the config file).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from typing import Optional

from ..mesh import BC, build_mesh
from ..profiles import InitialPair, preset_initial_pair
from ..solver import ProblemSpec, in_theorem_scope

REQUIRED_PROBLEM = ("dim", "extents", "nodes", "bc", "m", "k", "T")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _parse_extents(text: str, dim: int) -> list:
    groups = [g for g in text.split(";") if g.strip()]
    pairs = [tuple(_floats(g)) for g in groups]
    if dim == 1 and len(pairs) == 1 and len(pairs[0]) == 2:
        return pairs
    if len(pairs) != dim or any(len(p) != 2 for p in pairs):
        raise ConfigError(f"extents must give {dim} 'a, b' pairs separated by ';'")
    return pairs


@dataclass
class RunConfig:
    path: Optional[str]
    problem: dict
    oracle: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.problem.get(key, default)

    def mesh(self, bc=None):
        dim = int(self.problem["dim"])
        nodes = [int(c) for c in _floats(self.problem["nodes"])]
        nodes = nodes[0] if len(nodes) == 1 else nodes
        return build_mesh(dim, _parse_extents(self.problem["extents"], dim), nodes,
                          bc or self.problem["bc"])

    def initial_pair(self, mesh) -> InitialPair:
        from .io import read_field_csv

        preset = self.problem.get("initial")
        if preset:
            pair = preset_initial_pair(preset.strip(), mesh)
        else:
            base = os.path.dirname(self.path) if self.path else "."
            try:
                paths = [os.path.join(base, self.problem[k]) for k in ("u0_csv", "v0_csv")]
            except KeyError as exc:
                raise ConfigError(f"missing field {exc.args[0]!r} (or give 'initial')") from None
            for p in paths:
                if not os.path.exists(p):
                    raise ConfigError(f"initial data file not found: {p}")
            pair = InitialPair(read_field_csv(paths[0], mesh), read_field_csv(paths[1], mesh))
        pair.overlap_tol = float(self.problem.get("overlap_tol", 0.0))
        return pair

    def spec(self, **override) -> ProblemSpec:
        """Assemble a ProblemSpec; ``override`` may replace m, k, bc."""
        bc = override.pop("bc", None)
        mesh = self.mesh(bc)
        pair = self.initial_pair(mesh)
        opt = {}
        for key in ("dt", "delta"):
            if self.problem.get(key):
                opt[key] = float(self.problem[key])
        if self.problem.get("sample_times"):
            opt["sample_times"] = _floats(self.problem["sample_times"])
        if self.problem.get("n_samples"):
            opt["n_samples"] = int(self.problem["n_samples"])
        return ProblemSpec(mesh, float(override.get("m", self.problem["m"])),
                           float(override.get("k", self.problem["k"])),
                           float(self.problem["T"]), pair, **opt)

    def snapshot(self) -> dict:
        return {f"problem.{k}": v for k, v in sorted(self.problem.items())}


@dataclass
class SweepConfig(RunConfig):
    k_values: list = field(default_factory=list)
    m_values: list = field(default_factory=list)
    bc_modes: list = field(default_factory=list)
    rho: Optional[float] = None
    parallelism: int = 1

    def cells(self) -> list:
        """(m, bc, in_scope) for every sweep cell, in canonical order."""
        return [(m, bc, in_theorem_scope(bc, m))
                for bc in self.bc_modes for m in self.m_values]


def _read(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not cp.has_section("problem"):
        raise ConfigError("missing section [problem]")
    return cp


def _check_problem(problem: dict, skip=()):
    for key in REQUIRED_PROBLEM:
        if key in skip:
            continue
        if not problem.get(key, "").strip():
            raise ConfigError(f"missing field {key!r} in [problem]")
    try:
        for key in ("m", "k", "T"):
            if key not in skip:
                float(problem[key])
        int(problem["dim"])
        BC.parse(problem["bc"])
    except ValueError as exc:
        raise ConfigError(f"bad value in [problem]: {exc}") from None


def load_run_config(path: str) -> RunConfig:
    cp = _read(path)
    problem = dict(cp["problem"])
    _check_problem(problem)
    return RunConfig(path, problem,
                     dict(cp["oracle"]) if cp.has_section("oracle") else {},
                     dict(cp["output"]) if cp.has_section("output") else {})


def load_sweep_config(path: str) -> SweepConfig:
    cp = _read(path)
    if not cp.has_section("sweep"):
        raise ConfigError("missing section [sweep]")
    problem, sweep = dict(cp["problem"]), dict(cp["sweep"])
    problem.setdefault("k", "0")
    problem.setdefault("m", sweep.get("m_values", "").split(",")[0])
    problem.setdefault("bc", sweep.get("bc_modes", "").split(",")[0])
    _check_problem(problem)
    try:
        k_values = _floats(sweep.get("k_values", ""))
        m_values = _floats(sweep.get("m_values", problem["m"]))
        bc_modes = [BC.parse(b.strip()) for b in sweep.get("bc_modes", problem["bc"]).split(",")
                    if b.strip()]
        rho = float(sweep["rho"]) if sweep.get("rho") else None
        parallelism = int(sweep.get("parallelism", "1"))
    except ValueError as exc:
        raise ConfigError(f"bad value in [sweep]: {exc}") from None
    if not k_values:
        raise ConfigError("k_values is empty")
    if any(b <= a for a, b in zip(k_values, k_values[1:])):
        raise ConfigError("k_values must be strictly increasing")
    if not m_values or not bc_modes:
        raise ConfigError("m_values and bc_modes must be nonempty")
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    return SweepConfig(path, problem, {}, dict(cp["output"]) if cp.has_section("output") else {},
                       k_values, m_values, bc_modes, rho, parallelism)
