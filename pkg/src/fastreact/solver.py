"""Time integration: heat flow, the coupled system, its reduced form, and an explicit oracle.

All integrators share one fixed step grid: ``nsteps`` equal steps of
length ``dt`` on ``[0, T]`` with the requested sample times snapped to
step boundaries. ``A = int_0^t u`` is accumulated with the trapezoidal rule
at every step.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .mesh import BC, Mesh, ScalarField, laplacian_values, sup_norm
from .profiles import InitialPair

log = logging.getLogger(__name__)

CLAMP_FLOOR = -1e-12
DEFAULT_SAMPLES = 101
ORACLE_ADVISORY_NODE_STEPS = 2e5
ORACLE_MAX_NODE_STEPS = 2e8
CG_RTOL = 1e-12
REACTION_RETRIES = 3
RANNACHER_STEPS = 2


class SolverError(RuntimeError):
    pass


class DtPolicyError(ValueError):
    pass


class OracleBudgetError(ValueError):
    pass


def dt_ceiling(T: float, k: float) -> float:
    """Largest step the policy admits: min(T/200, 0.1 k^-1/2)."""
    cap = T / 200.0
    if k > 0:
        cap = min(cap, 0.1 / math.sqrt(k))
    return cap


def positivity_dt(mesh: Mesh) -> float:
    """Crank-Nicolson keeps the explicit half nonnegative for dt * sum(1/h^2) <= 1."""
    return 1.0 / sum(1.0 / h**2 for h in mesh.spacing)


def default_dt(mesh: Mesh, T: float, k: float) -> float:
    return min(dt_ceiling(T, k), positivity_dt(mesh))


def in_theorem_scope(bc, m: float) -> bool:
    bc = BC.parse(bc)
    if bc is BC.NEUMANN:
        return 2 < m <= 3
    return 2 < m


@dataclass(eq=False)
class ProblemSpec:
    mesh: Mesh
    m: float
    k: float
    T: float
    pair: InitialPair
    dt: Optional[float] = None
    sample_times: Optional[Sequence[float]] = None
    delta: Optional[float] = None
    n_samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be positive")
        if not 0 <= self.k < math.inf:
            raise ValueError(f"k must be finite and nonnegative, got {self.k}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.pair.mesh is not self.mesh:
            raise ValueError("initial pair lives on a different mesh")
        ceiling = dt_ceiling(self.T, self.k)
        if self.dt is None:
            self.dt = default_dt(self.mesh, self.T, self.k)
        elif not 0 < self.dt <= ceiling * (1 + 1e-12):
            raise DtPolicyError(
                f"dt={self.dt} violates the dt policy dt <= min(T/200, 0.1*k^-1/2) = {ceiling}"
            )
        if self.delta is None:
            self.delta = 2.0 * sup_norm(self.pair.v0) / math.e

    @property
    def bc(self) -> BC:
        return self.mesh.bc

    @property
    def theorem_scope(self) -> bool:
        return in_theorem_scope(self.bc, self.m)

    def with_(self, **changes) -> "ProblemSpec":
        fields = dict(mesh=self.mesh, m=self.m, k=self.k, T=self.T, pair=self.pair, dt=self.dt,
                      sample_times=self.sample_times, delta=self.delta, n_samples=self.n_samples)
        fields.update(changes)
        return ProblemSpec(**fields)


@dataclass(eq=False)
class Trajectory:
    mesh: Mesh
    kind: str
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    A: np.ndarray
    meta: dict = field(default_factory=dict)

    def frame(self, name: str, i: int) -> ScalarField:
        return ScalarField(self.mesh, getattr(self, name)[i])

    @property
    def u_frames(self) -> list:
        return [self.frame("u", i) for i in range(len(self.times))]

    @property
    def v_frames(self) -> list:
        return [self.frame("v", i) for i in range(len(self.times))]

    @property
    def A_frames(self) -> list:
        return [self.frame("A", i) for i in range(len(self.times))]


def time_grid(T: float, dt: float, sample_times=None, n_samples: int = DEFAULT_SAMPLES):
    """Return (dt_eff, nsteps, sample_steps) with samples on step boundaries."""
    if sample_times is None:
        n_samples = max(int(n_samples), 2)
        per = max(1, math.ceil(T / (dt * (n_samples - 1)) - 1e-9))
        nsteps = per * (n_samples - 1)
        steps = np.arange(n_samples) * per
    else:
        ts = np.asarray(sorted(float(t) for t in sample_times))
        if ts.size == 0 or ts[0] < 0 or ts[-1] > T * (1 + 1e-12):
            raise ValueError("sample_times must lie in [0, T]")
        nsteps = max(1, math.ceil(T / dt - 1e-9))
        steps = np.unique(np.rint(ts / (T / nsteps)).astype(int))
    return T / nsteps, int(nsteps), steps


def _clamp(x: np.ndarray, what: str) -> np.ndarray:
    low = x.min() if x.size else 0.0
    if low < CLAMP_FLOOR:
        raise SolverError(f"{what} went negative ({low:.3e}); scheme failure")
    if low < 0:
        x = np.maximum(x, 0.0)
    return x


class CrankNicolson:
    """(I - dt/2 L) u_new = (I + dt/2 L) u with L the mesh Laplacian.

    The first ``startup`` steps are damped backward-Euler half steps so that
    discontinuous data do not excite undamped high modes. 1D uses a
    prefactored tridiagonal solve; 2D runs conjugate gradients on
    the trapezoid-weighted (hence symmetric) operator.
    """

    def __init__(self, mesh: Mesh, dt: float, startup: int = RANNACHER_STEPS):
        self.mesh = mesh
        self.dt = dt
        self.startup = startup
        self.count = 0
        self.neumann = mesh.bc is BC.NEUMANN
        self.boundary = mesh.boundary_nodes()
        self.iterations = 0
        if mesh.dim == 1:
            n = mesh.size
            r = dt / mesh.spacing[0] ** 2
            lower = np.full(n, -0.5 * r)
            upper = np.full(n, -0.5 * r)
            diag = np.full(n, 1.0 + r)
            if self.neumann:
                upper[0] = -r
                lower[-1] = -r
            else:
                diag[0] = diag[-1] = 1.0
                upper[0] = lower[-1] = 0.0
            lower[0] = upper[-1] = 0.0
            self.lower = lower
            self.cp, self.inv = kernels.tridiag_factor(lower, diag, upper)
        else:
            self.w = mesh.weights() if self.neumann else np.ones(mesh.size)

    def _lhs(self, x):
        out = x - 0.5 * self.dt * laplacian_values(self.mesh, x)
        return out

    def _solve(self, rhs, guess):
        if self.mesh.dim == 1:
            return kernels.tridiag_solve(self.lower, self.cp, self.inv, rhs)
        return self._cg(rhs, guess)

    def step(self, u: np.ndarray) -> np.ndarray:
        self.count += 1
        if self.count <= self.startup:
            # Rannacher start: two backward-Euler half steps share the CN matrix
            return self._solve(self._solve(u, u), u)
        rhs = u + 0.5 * self.dt * laplacian_values(self.mesh, u)
        return self._solve(rhs, u)

    def _cg(self, rhs, x0):
        free = np.ones(self.mesh.size, dtype=bool) if self.neumann else ~self.boundary
        x = x0.copy()
        if not self.neumann:
            x[self.boundary] = rhs[self.boundary]
        w = self.w
        b = (w * rhs)[free]
        diag_inv = 1.0 / (w * (1.0 + self.dt * sum(1.0 / h**2 for h in self.mesh.spacing)))[free]

        def apply(xf):
            full = x.copy()
            full[free] = xf
            return (w * self._lhs(full))[free]

        def apply_hom(xf):
            full = np.zeros_like(x)
            full[free] = xf
            return (w * self._lhs(full))[free]

        xf = x[free]
        r = b - apply(xf)
        bnorm = np.linalg.norm(b) or 1.0
        z = diag_inv * r
        p = z.copy()
        rz = r @ z
        for it in range(10 * free.sum() + 10):
            if np.linalg.norm(r) <= CG_RTOL * bnorm:
                break
            Ap = apply_hom(p)
            alpha = rz / (p @ Ap)
            xf = xf + alpha * p
            r = r - alpha * Ap
            z = diag_inv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        else:
            raise SolverError("conjugate gradient did not reach the residual target")
        self.iterations += it
        x[free] = xf
        return x


def _store(buf, idx, u, v, A):
    buf["u"][idx] = u
    buf["v"][idx] = v
    buf["A"][idx] = A


def _alloc(nsamples, n):
    return {name: np.zeros((nsamples, n)) for name in ("u", "v", "A")}


def _reaction_coupled(u, v, k, m, tau):
    for attempt in range(REACTION_RETRIES + 1):
        pieces = 2**attempt
        uu, vv = u, v
        bad = 0
        for _ in range(pieces):
            uu, vv, b = kernels.reaction_coupled(uu, vv, k, m, tau / pieces)
            bad += b
        if bad == 0:
            return uu, vv
    raise SolverError(f"implicit reaction update failed to converge at {bad} nodes")


def _reaction_reduced(u, A, v0, k, m, tau):
    for attempt in range(REACTION_RETRIES + 1):
        pieces = 2**attempt
        uu, AA = u, A
        bad = 0
        for _ in range(pieces):
            un, b = kernels.reaction_reduced(uu, AA, v0, k, m, tau / pieces)
            AA = AA + 0.5 * (tau / pieces) * (uu + un)
            uu = un
            bad += b
        if bad == 0:
            return uu
    raise SolverError(f"implicit reaction update failed to converge at {bad} nodes")


def _reaction_max(u, v, k, m):
    if k == 0:
        return 0.0
    return float(k * np.max(kernels.powm(u, m) * v))


def solve_heat(u0, mesh: Optional[Mesh] = None, bc=None, T: float = 1.0, dt: Optional[float] = None,
               sample_times=None, n_samples: int = DEFAULT_SAMPLES) -> Trajectory:
    """Crank-Nicolson heat flow from ``u0``; v frames are zero.

    Nonnegative data are held to the clamp policy; signed data (used for
    manufactured-solution tests) are evolved as they are.
    """
    if isinstance(u0, ScalarField):
        mesh = mesh or u0.mesh
        u0 = u0.values
    if bc is not None and BC.parse(bc) is not mesh.bc:
        raise ValueError("bc disagrees with mesh bc")
    if dt is None:
        dt = min(T / 200.0, positivity_dt(mesh))
    dt, nsteps, samples = time_grid(T, dt, sample_times, n_samples)
    t0 = time.perf_counter()
    cn = CrankNicolson(mesh, dt)
    buf = _alloc(len(samples), mesh.size)
    u = np.array(u0, dtype=float)
    signed = u.min() < 0
    zeros = np.zeros(mesh.size)
    A = np.zeros(mesh.size)
    si = 0
    if samples[0] == 0:
        _store(buf, 0, u, zeros, A)
        si = 1
    for n in range(1, nsteps + 1):
        un = cn.step(u)
        if not signed:
            un = _clamp(un, "heat u")
        A = A + 0.5 * dt * (u + un)
        u = un
        if si < len(samples) and samples[si] == n:
            _store(buf, si, u, zeros, A)
            si += 1
    meta = dict(kind="heat", dt=dt, steps=nsteps, wall_time=time.perf_counter() - t0,
                backend=kernels.BACKEND, max_reaction=0.0)
    return Trajectory(mesh, "heat", samples * dt, buf["u"], buf["v"], buf["A"], meta)


def solve_coupled(spec: ProblemSpec, *, diffusion: bool = True, react_u: bool = True) -> Trajectory:
    """Strang splitting: half reaction, Crank-Nicolson diffusion, half reaction.

    ``diffusion`` and ``react_u`` are test hooks that switch off the
    diffusion step and the u-part of the reaction.
    """
    mesh = spec.mesh
    dt, nsteps, samples = time_grid(spec.T, spec.dt, spec.sample_times, spec.n_samples)
    t0 = time.perf_counter()
    cn = CrankNicolson(mesh, dt) if diffusion else None
    buf = _alloc(len(samples), mesh.size)
    u = spec.pair.u0.values.copy()
    v = spec.pair.v0.values.copy()
    A = np.zeros(mesh.size)
    k, m, half = spec.k, spec.m, 0.5 * dt
    rmax = _reaction_max(u, v, k, m)
    si = 0
    if samples[0] == 0:
        _store(buf, 0, u, v, A)
        si = 1

    def react(u, v):
        if not react_u:
            return u, v * np.exp(-k * u * half)
        return _reaction_coupled(u, v, k, m, half)

    for n in range(1, nsteps + 1):
        un, vn = react(u, v)
        if cn is not None:
            un = _clamp(cn.step(un), "coupled u")
        un, vn = react(un, vn)
        un = _clamp(un, "coupled u")
        vn = _clamp(vn, "coupled v")
        A = A + 0.5 * dt * (u + un)
        u, v = un, vn
        rmax = max(rmax, _reaction_max(u, v, k, m))
        if si < len(samples) and samples[si] == n:
            _store(buf, si, u, v, A)
            si += 1
    meta = dict(kind="coupled", dt=dt, steps=nsteps, wall_time=time.perf_counter() - t0,
                backend=kernels.BACKEND, max_reaction=rmax, m=m, k=k)
    return Trajectory(mesh, "coupled", samples * dt, buf["u"], buf["v"], buf["A"], meta)


def solve_reduced(spec: ProblemSpec) -> Trajectory:
    """March u alone with the reaction k v0 u^m exp(-k A); v = v0 exp(-k A) afterwards.

    Within a step the reaction sees A extrapolated from the start of the
    step; A itself is advanced with the trapezoidal rule on the step values
    of u.
    """
    mesh = spec.mesh
    dt, nsteps, samples = time_grid(spec.T, spec.dt, spec.sample_times, spec.n_samples)
    t0 = time.perf_counter()
    cn = CrankNicolson(mesh, dt)
    buf = _alloc(len(samples), mesh.size)
    v0 = spec.pair.v0.values.copy()
    u = spec.pair.u0.values.copy()
    A = np.zeros(mesh.size)
    k, m, half = spec.k, spec.m, 0.5 * dt
    rmax = float(np.max(kernels.reaction_rate(u, v0, A, k, m)))

    def reconstruct_v(A):
        return np.where(k * A < 745.0, v0 * np.exp(-np.minimum(k * A, 745.0)), 0.0)

    si = 0
    if samples[0] == 0:
        _store(buf, 0, u, v0, A)
        si = 1
    for n in range(1, nsteps + 1):
        un = _reaction_reduced(u, A, v0, k, m, half)
        un = _clamp(cn.step(un), "reduced u")
        un = _reaction_reduced(un, A + half * u, v0, k, m, half)
        un = _clamp(un, "reduced u")
        A = A + 0.5 * dt * (u + un)
        u = un
        rmax = max(rmax, float(np.max(kernels.reaction_rate(u, v0, A, k, m))))
        if si < len(samples) and samples[si] == n:
            _store(buf, si, u, reconstruct_v(A), A)
            si += 1
    meta = dict(kind="reduced", dt=dt, steps=nsteps, wall_time=time.perf_counter() - t0,
                backend=kernels.BACKEND, max_reaction=rmax, m=m, k=k)
    return Trajectory(mesh, "reduced", samples * dt, buf["u"], buf["v"], buf["A"], meta)


def reaction_term(u, v0, A, k: float, m: float) -> ScalarField:
    """Nodewise k v0 u^m exp(-k A), computed in log space with underflow flushed to 0."""
    mesh = u.mesh
    vals = kernels.reaction_rate(u.values, _vals(v0), _vals(A), float(k), float(m))
    return ScalarField(mesh, vals)


def _vals(f):
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


def _reaction_off(spec) -> bool:
    return spec.k == 0 or not np.any(spec.pair.v0.values)


def oracle_solve(spec: ProblemSpec, refine_factor: int = 4,
                 max_node_steps: float = ORACLE_MAX_NODE_STEPS) -> Trajectory:
    """Forward Euler on the full system at dt/refine_factor (halved further for stability).

    Independent of the splitting machinery; used only as a reference.
    """
    if refine_factor < 4:
        raise ValueError("refine_factor must be at least 4")
    mesh = spec.mesh
    dt, nsteps, samples = time_grid(spec.T, spec.dt, spec.sample_times, spec.n_samples)
    stable = min(mesh.spacing) ** 2 / (2 * mesh.dim)
    sub = int(refine_factor)
    while dt / sub > stable * (1 + 1e-12):
        sub *= 2
    total = nsteps * sub
    node_steps = float(total) * mesh.size
    if node_steps > max_node_steps:
        raise OracleBudgetError(
            f"oracle needs {node_steps:.3g} node-steps, budget is {max_node_steps:.3g}"
        )
    if node_steps > ORACLE_ADVISORY_NODE_STEPS:
        log.debug("oracle run of %.3g node-steps exceeds the advisory size", node_steps)
    h = dt / sub
    t0 = time.perf_counter()
    buf = _alloc(len(samples), mesh.size)
    u = spec.pair.u0.values.copy()
    v = spec.pair.v0.values.copy()
    signed = u.min() < 0 and _reaction_off(spec)
    A = np.zeros(mesh.size)
    k, m = spec.k, spec.m
    si = 0
    if samples[0] == 0:
        _store(buf, 0, u, v, A)
        si = 1
    for n in range(1, nsteps + 1):
        for _ in range(sub):
            um = np.where(u > 0, np.exp(m * np.log(np.where(u > 0, u, 1.0))), 0.0)
            un = u + h * (laplacian_values(mesh, u) - k * um * v)
            vn = v - h * k * u * v
            if not signed:
                un = _clamp(un, "oracle u")
                vn = _clamp(vn, "oracle v")
            A = A + 0.5 * h * (u + un)
            u, v = un, vn
        if si < len(samples) and samples[si] == n:
            _store(buf, si, u, v, A)
            si += 1
    meta = dict(kind="oracle", dt=dt, fine_dt=h, steps=total, wall_time=time.perf_counter() - t0,
                backend="numpy", max_reaction=float("nan"), m=m, k=k)
    return Trajectory(mesh, "oracle", samples * dt, buf["u"], buf["v"], buf["A"], meta)
