"""Numerical forms of the subsolution, lower-bound, sandwich and reaction-decay estimates.

Every check returns a :class:`CheckReport` whose margin is the slack of the
required inequality at its worst sample/node. Tolerances follow
``C * (h^2 + dt^2) * max(1, sup u0)`` with ``C`` fixed per check.

Thresholds such as ``k*`` are astronomically large for the bump
subsolution, so they are carried as base-10 logarithms; ``k`` arguments may
be Python ints of any size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from typing import Optional

import numpy as np

from . import kernels
from .mesh import BC, SubdomainMask, interior_mask
from .profiles import construct_subsolution_initial
from .reports import CheckReport, worst_point
from .solver import ProblemSpec, Trajectory, solve_coupled, solve_heat

C_SUBSOLUTION = 10.0
C_LOWER = 5.0
C_SANDWICH = 5.0
C_REACTION = 5.0
DIRICHLET_MASK_CELLS = 4


class HypothesisError(ValueError):
    """A precondition of an estimate does not hold (not a failed check)."""


class BelowThreshold(ValueError):
    def __init__(self, message, required_log10):
        super().__init__(message)
        self.required_log10 = required_log10


def log10k(k) -> float:
    if k <= 0:
        return -math.inf
    return math.log10(k)


def k_from_log10(x: float) -> int:
    """Integer k with log10(k) == x to ~30 significant digits."""
    getcontext().prec = 40
    return int(Decimal(10) ** Decimal(repr(x)))


def _scale(traj: Trajectory) -> float:
    return max(1.0, float(np.abs(traj.u[0]).max()))


def _tolerance(C: float, traj: Trajectory, dt: Optional[float] = None):
    h = max(traj.mesh.spacing)
    dt = traj.meta.get("dt") if dt is None else dt
    scale = _scale(traj)
    return C * (h**2 + dt**2) * scale, f"{C:g}*(h^2+dt^2)*max(1,sup u0), h={h:.4g}, dt={dt:.4g}"


def _time_derivative(traj: Trajectory) -> np.ndarray:
    if len(traj.times) < 3:
        raise ValueError("need at least 3 samples for a time derivative")
    return np.gradient(traj.u, traj.times, axis=0)


def _sample_spacing(traj: Trajectory) -> float:
    return float(np.max(np.diff(traj.times)))


def _aligned(a: Trajectory, b: Trajectory):
    if a.mesh.size != b.mesh.size or a.times.shape != b.times.shape or not np.allclose(
        a.times, b.times, rtol=0, atol=1e-12
    ):
        raise ValueError("trajectories are sampled on different grids")


def check_subsolution_evolution(underline: Trajectory, m: float) -> list:
    """Positivity for t > 0 and the evolved subsolution inequality.

    Returns ``[positivity, inequality]``. For 2 < m < 3 the inequality is
    ``u^(3-m) >= (m-1) du/dt``; for m >= 3 it is ``1 >= 2 du/dt``.
    """
    if underline.kind != "heat":
        raise ValueError("subsolution check needs a heat-flow trajectory")
    mesh = underline.mesh
    later = underline.times > 0
    nodes = np.ones(mesh.size, dtype=bool)
    if mesh.bc is BC.DIRICHLET:
        nodes = ~mesh.boundary_nodes()
    u = underline.u[later][:, nodes]
    node_ids = np.flatnonzero(nodes)
    times = underline.times[later]

    pmin, (pn, pt) = worst_point(u, times)
    positivity = CheckReport(
        "subsolution_positive", pmin, strict=True,
        worst_location=(None if pn is None else int(node_ids[pn]), pt),
        details="min of the evolved subsolution over t > 0"
        + (" (interior nodes)" if mesh.bc is BC.DIRICHLET else ""),
    )

    dudt = _time_derivative(underline)[later][:, nodes]
    if m < 3:
        with np.errstate(divide="ignore"):
            lhs = np.where(u > 0, np.exp((3.0 - m) * np.log(np.where(u > 0, u, 1.0))), 0.0)
        margin = lhs - (m - 1.0) * dudt
        form = f"u^(3-m) - (m-1) du/dt, m={m:g}"
    else:
        margin = 1.0 - 2.0 * dudt
        form = f"1 - 2 du/dt, m={m:g}"
    tol, src = _tolerance(C_SUBSOLUTION, underline, _sample_spacing(underline))
    wm, (wn, wt) = worst_point(margin, times)
    inequality = CheckReport(
        "subsolution_evolution", wm, tol, src,
        worst_location=(None if wn is None else int(node_ids[wn]), wt), details=form,
    )
    return [positivity, inequality]


def check_lower_bound(u_traj: Trajectory, underline: Trajectory, delta: float) -> CheckReport:
    """u_k >= exp(-delta t) * underline-u at every sample and node."""
    _aligned(u_traj, underline)
    if u_traj.times[0] != 0:
        raise ValueError("trajectory must start at t = 0")
    v0_sup = float(u_traj.v[0].max())
    if not delta > v0_sup / math.e:
        raise HypothesisError(
            f"delta={delta} must exceed sup(v0)/e = {v0_sup / math.e}"
        )
    bound = np.exp(-delta * underline.times)[:, None] * underline.u
    margin = u_traj.u - bound
    tol, src = _tolerance(C_LOWER, u_traj)
    wm, loc = worst_point(margin, u_traj.times)
    return CheckReport("lower_bound", wm, tol, src, worst_location=loc,
                       details=f"u_k - exp(-delta t) u_sub, delta={delta:.6g}")


def estimate_time_derivative_bound(u_inf: Trajectory) -> float:
    """Sup over samples and nodes of the discrete |du/dt| of the heat flow."""
    return float(np.abs(_time_derivative(u_inf)).max())


def check_sandwich(u_traj: Trajectory, u_inf: Trajectory, M: float) -> list:
    """``[upper, lower]`` for u_inf - M t <= u_k <= u_inf."""
    _aligned(u_traj, u_inf)
    tol, src = _tolerance(C_SANDWICH, u_traj)
    t = u_traj.times[:, None]
    up, up_loc = worst_point(u_inf.u - u_traj.u, u_traj.times)
    lo, lo_loc = worst_point(u_traj.u - (u_inf.u - M * t), u_traj.times)
    return [
        CheckReport("sandwich_upper", up, tol, src, worst_location=up_loc,
                    details="u_inf - u_k"),
        CheckReport("sandwich_lower", lo, tol, src, worst_location=lo_loc,
                    details=f"u_k - (u_inf - M t), M={M:.6g}"),
    ]


@dataclass
class GammaSchedule:
    times: np.ndarray
    gamma: np.ndarray
    delta: float
    restriction: Optional[SubdomainMask] = None

    @property
    def final(self) -> float:
        return float(self.gamma[-1])

    def threshold_log10(self) -> float:
        """log10 of gamma(T)^-8, the smallest k for which t_k exists."""
        if self.final <= 0:
            return math.inf
        return -8.0 * math.log10(self.final)


def compute_gamma(underline: Trajectory, delta: float,
                  mask: Optional[SubdomainMask] = None) -> GammaSchedule:
    """Trapezoidal integral in time of the (masked) spatial minimum of exp(-delta t) u_sub."""
    mesh = underline.mesh
    if mesh.bc is BC.DIRICHLET and mask is None:
        raise ValueError("Dirichlet gamma needs an interior mask (the full minimum is 0)")
    sel = mask.selected if mask is not None else np.ones(mesh.size, dtype=bool)
    mins = np.exp(-delta * underline.times) * underline.u[:, sel].min(axis=1)
    dt = np.diff(underline.times)
    gamma = np.concatenate([[0.0], np.cumsum(0.5 * dt * (mins[1:] + mins[:-1]))])
    return GammaSchedule(underline.times.copy(), gamma, float(delta), mask)


def tk_bracket(schedule: GammaSchedule, k) -> tuple:
    """Sample interval [t_lo, t_hi] containing the solution of gamma(t) = k^-1/8."""
    lk = log10k(k)
    need = schedule.threshold_log10()
    if not lk > need:
        raise BelowThreshold(
            f"k=10^{lk:.4g} is below threshold k* = gamma(T)^-8 = 10^{need:.4g}", need
        )
    target = 10.0 ** (-lk / 8.0)
    g = schedule.gamma
    lo, hi = 0, len(g) - 1
    # bisection on the monotone sampled schedule: g[lo] < target <= g[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if g[mid] >= target:
            hi = mid
        else:
            lo = mid
    return float(schedule.times[lo]), float(schedule.times[hi]), target


def compute_tk(schedule: GammaSchedule, k) -> float:
    """Midpoint of the grid cell where gamma crosses k^-1/8."""
    t_lo, t_hi, _ = tk_bracket(schedule, k)
    return 0.5 * (t_lo + t_hi)


def k_star_log10(schedule: GammaSchedule, v0_sup: float, u0_sup: float, m: float) -> float:
    """log10 of max{gamma(T)^-8, (4 sup v0 sup u0^m / e^2)^4}."""
    second = 4.0 * v0_sup * u0_sup**m / math.e**2
    second_log = 4.0 * math.log10(second) if second > 0 else -math.inf
    return max(schedule.threshold_log10(), second_log)


def check_reaction_bound(traj: Trajectory, schedule: GammaSchedule, k, m: float,
                         mask: Optional[SubdomainMask] = None) -> CheckReport:
    """k v0 u^m exp(-k A) <= k^-1/2 on [t_k, T] (masked nodes in Dirichlet mode)."""
    v0, u0 = traj.v[0], traj.u[0]
    ks = k_star_log10(schedule, float(v0.max()), float(u0.max()), m)
    if not log10k(k) > ks:
        return CheckReport.skip(
            "reaction_bound", f"skipped: below k* (k=10^{log10k(k):.4g}, k*=10^{ks:.4g})",
            k_star_log10=ks,
        )
    tk = compute_tk(schedule, k)
    late = traj.times >= tk
    sel = mask.selected if mask is not None else np.ones(traj.mesh.size, dtype=bool)
    kf = float(k)
    rates = np.array([
        kernels.reaction_rate(traj.u[i], v0, traj.A[i], kf, m)[sel] for i in np.flatnonzero(late)
    ])
    margin = kf**-0.5 - rates
    tol, src = _tolerance(C_REACTION, traj)
    wm, (wn, wt) = worst_point(margin, traj.times[late])
    return CheckReport("reaction_bound", wm, tol, src,
                       worst_location=(None if wn is None else int(np.flatnonzero(sel)[wn]), wt),
                       details=f"k^-1/2 - reaction on [t_k={tk:.4g}, T]",
                       extra=dict(k_star_log10=ks, t_k=tk))


def interface_vanishing_time(traj: Trajectory, threshold: float,
                             mask: Optional[SubdomainMask] = None) -> float:
    """First sample time at which sup v <= threshold (inf if never)."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    v = traj.v if mask is None else traj.v[:, mask.selected]
    below = np.flatnonzero(v.max(axis=1) <= threshold)
    return float(traj.times[below[0]]) if below.size else math.inf


@dataclass
class ConvergenceRow:
    k: float
    sup_error_u: float
    sup_v_late: float
    t_k: float
    reaction_max_after_tk: float
    envelope: float
    strip_error: float = math.nan
    strip_bound: float = math.nan
    vanishing_time: float = math.nan


@dataclass
class ConvergenceTable:
    rows: list
    rho: float
    mask: Optional[SubdomainMask]
    m: float
    bc: BC
    M: float
    k_star_log10: float
    epsilon: float = 0.0
    orders: list = field(default_factory=list)
    theorem_scope: bool = True

    COLUMNS = ("k", "sup_error_u", "sup_v_late", "t_k", "reaction_max_after_tk", "envelope",
               "strip_error", "strip_bound", "vanishing_time")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


@dataclass
class SubsolutionBundle:
    """Everything the estimates need from the subsolution side of one problem."""
    bump: object
    initial: object
    heat: Trajectory
    schedule: GammaSchedule
    mask: Optional[SubdomainMask]


def build_subsolution(spec: ProblemSpec, mask: Optional[SubdomainMask] = None) -> SubsolutionBundle:
    m_form = spec.m
    bump, initial = construct_subsolution_initial(spec.pair.u0, m_form)
    heat = solve_heat(initial, T=spec.T, dt=spec.dt, sample_times=spec.sample_times,
                      n_samples=spec.n_samples)
    if spec.bc is BC.DIRICHLET and mask is None:
        mask = interior_mask(spec.mesh, DIRICHLET_MASK_CELLS * max(spec.mesh.spacing))
    schedule = compute_gamma(heat, spec.delta, mask if spec.bc is BC.DIRICHLET else None)
    return SubsolutionBundle(bump, initial, heat, schedule, mask)


def _empirical_orders(ks, errs) -> list:
    out = []
    for i in range(1, len(ks)):
        if ks[i - 1] > 0 and errs[i - 1] > 0 and errs[i] > 0:
            out.append(-math.log(errs[i] / errs[i - 1]) / math.log(ks[i] / ks[i - 1]))
        else:
            out.append(math.nan)
    return out


def convergence_study(base_spec: ProblemSpec, k_list, rho: float,
                      epsilon: Optional[float] = None, vanish_threshold: float = 1e-3,
                      subsolution: Optional[SubsolutionBundle] = None,
                      fixed_dt: Optional[float] = None) -> ConvergenceTable:
    """Sup-norm distance to the heat flow and late-time size of v across k.

    One heat solve per distinct step size; one coupled solve per k. Unless
    ``fixed_dt`` is given each k runs at its own default step. In
    Dirichlet mode v is measured on the interior mask (epsilon defaults to
    4h) and the boundary strip error is compared with M * epsilon.
    """
    ks = [float(k) for k in k_list]
    if not ks:
        raise ValueError("k_list is empty")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k_list must be strictly increasing")
    if not 0 < rho < base_spec.T:
        raise ValueError("rho must lie in (0, T)")
    mesh = base_spec.mesh
    dirichlet = mesh.bc is BC.DIRICHLET
    mask = None
    if dirichlet:
        epsilon = DIRICHLET_MASK_CELLS * max(mesh.spacing) if epsilon is None else epsilon
        mask = interior_mask(mesh, epsilon)
    else:
        epsilon = 0.0

    sub = None
    if base_spec.m > 2:
        try:
            sub = subsolution or build_subsolution(base_spec, mask)
        except ValueError:
            sub = None
    heat_cache = {}
    rows = []
    M_ref = math.nan
    ks_log = math.inf
    for k in ks:
        spec = base_spec.with_(k=k, dt=fixed_dt)
        key = spec.dt
        if key not in heat_cache:
            heat_cache[key] = solve_heat(spec.pair.u0, T=spec.T, dt=spec.dt,
                                         sample_times=spec.sample_times, n_samples=spec.n_samples)
        u_inf = heat_cache[key]
        traj = solve_coupled(spec)
        M = estimate_time_derivative_bound(u_inf)
        M_ref = M
        err = float(np.abs(traj.u - u_inf.u).max())
        late = traj.times >= rho - 1e-12
        v_late = traj.v[late] if mask is None else traj.v[late][:, mask.selected]
        sup_v_late = float(v_late.max()) if v_late.size else math.nan

        t_k = reaction_after = envelope = math.nan
        if sub is not None:
            ks_log = k_star_log10(sub.schedule, float(spec.pair.v0.values.max()),
                                  float(spec.pair.u0.values.max()), spec.m)
            if k > 0 and log10k(k) > ks_log:
                t_k = compute_tk(sub.schedule, k)
                sel = mask.selected if mask is not None else slice(None)
                after = traj.times >= t_k
                reaction_after = max(
                    float(kernels.reaction_rate(traj.u[i], spec.pair.v0.values, traj.A[i],
                                                k, spec.m)[sel].max())
                    for i in np.flatnonzero(after)
                )
                envelope = 2 * M * t_k + k**-0.5 * spec.T + (3 * M * epsilon if dirichlet else 0.0)
        strip_err = strip_bound = math.nan
        if dirichlet:
            strip = ~mask.selected
            strip_err = float(np.abs(u_inf.u[:, strip] - traj.u[:, strip]).max())
            strip_bound = M * epsilon
        vt = interface_vanishing_time(traj, vanish_threshold, mask)
        rows.append(ConvergenceRow(k, err, sup_v_late, t_k, reaction_after, envelope,
                                   strip_err, strip_bound, vt))
    errs = [r.sup_error_u for r in rows]
    return ConvergenceTable(rows, rho, mask, base_spec.m, mesh.bc, M_ref, ks_log,
                            epsilon, _empirical_orders(ks, errs), base_spec.theorem_scope)
