"""Admissible initial data and the compact bump subsolution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .mesh import BC, Mesh, ScalarField, laplacian_values, sup_norm
from .reports import CheckReport, worst_point

MIN_RADIUS_NODES = 6
# supp of the subsolution stays this many cells away from the boundary
BOUNDARY_CLEARANCE = 2
PRESETS = ("two_blocks_1d", "bump_vs_ring_2d", "smoothed_blocks_1d")


class SubsolutionError(ValueError):
    def __init__(self, message, worst_node=None, worst_margin=None):
        super().__init__(message)
        self.worst_node = worst_node
        self.worst_margin = worst_margin


@dataclass(frozen=True)
class BumpSpec:
    center: tuple
    radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")
        if not 0 < self.amplitude <= 1:
            raise ValueError("bump amplitude must lie in (0, 1]")


@dataclass(eq=False)
class InitialPair:
    u0: ScalarField
    v0: ScalarField
    overlap_tol: float = 0.0

    @property
    def mesh(self) -> Mesh:
        return self.u0.mesh


def _distance(mesh: Mesh, center) -> np.ndarray:
    pts = mesh.coords()
    return np.sqrt(((pts - np.asarray(center, dtype=float)) ** 2).sum(axis=1))


def bump_values(mesh: Mesh, spec: BumpSpec) -> np.ndarray:
    rho2 = _distance(mesh, spec.center) ** 2
    gap = spec.radius**2 - rho2
    out = np.zeros(mesh.size)
    inside = gap > 0
    with np.errstate(under="ignore"):
        out[inside] = spec.amplitude * np.exp(-1.0 / gap[inside])
    return out


def bump_field(mesh: Mesh, spec: BumpSpec) -> ScalarField:
    """``amplitude * exp(-1 / (r^2 - |x - x0|^2))`` inside the ball, 0 outside."""
    center = np.asarray(spec.center, dtype=float)
    if center.shape != (mesh.dim,):
        raise ValueError("bump center has wrong dimension")
    for ax, (a, b) in enumerate(mesh.extents):
        if not (a + spec.radius < center[ax] < b - spec.radius):
            raise ValueError("bump ball is not strictly inside the domain")
    if spec.radius < MIN_RADIUS_NODES * max(mesh.spacing):
        raise ValueError(
            f"bump radius {spec.radius} resolved by fewer than {MIN_RADIUS_NODES} nodes"
        )
    return ScalarField(mesh, bump_values(mesh, spec))


def curvature_bound(mesh: Mesh, spec: BumpSpec) -> np.ndarray:
    """(12 + 2n) (r^2 - |x - x0|^2)^-4 U, the analytic ceiling on the bump's Laplacian."""
    gap = spec.radius**2 - _distance(mesh, spec.center) ** 2
    u = bump_values(mesh, spec)
    out = np.zeros(mesh.size)
    inside = (gap > 0) & (u > 0)
    out[inside] = (12 + 2 * mesh.dim) * gap[inside] ** -4.0 * u[inside]
    return out


def subsolution_slack(field: ScalarField, m: float) -> tuple:
    """Nodewise slack of the initial subsolution inequality, and the checked nodes.

    For 2 < m < 3 the slack is ``u^(3-m) - (m-1) lap u`` on the support of
    ``u``; for m >= 3 it is ``1 - 2 lap u`` on every node.
    """
    lap = laplacian_values(field.mesh, field.values)
    if m < 3:
        u = field.values
        checked = u > 0
        slack = np.full(u.size, np.inf)
        slack[checked] = np.exp((3.0 - m) * np.log(u[checked])) - (m - 1.0) * lap[checked]
    else:
        checked = np.ones(field.values.size, dtype=bool)
        slack = 1.0 - 2.0 * lap
    return slack, checked


def construct_subsolution_initial(u0: ScalarField, m: float, mesh: Optional[Mesh] = None):
    """Build the compact bump lying below ``u0`` that satisfies the subsolution inequality.

    Returns ``(BumpSpec, ScalarField)``. The radius is found by halving from
    ``r0 / 2`` until every checked node has nonnegative slack.
    """
    mesh = mesh or u0.mesh
    if not m > 2:
        raise ValueError(f"subsolution construction needs m > 2, got {m}")
    u = u0.values
    if sup_norm(u0) == 0:
        raise ValueError("u0 vanishes identically")
    h = max(mesh.spacing)
    dist_b = mesh.boundary_distance()
    peak = float(u.max())
    # distance from every node to the nearest node where u0 < peak/2
    low = mesh.to_grid(u < 0.5 * peak)
    if low.any():
        dist_low = mesh.from_grid(
            ndimage.distance_transform_edt(~low, sampling=mesh.spacing)
        )
    else:
        dist_low = np.full(mesh.size, np.inf)
    r0_all = np.minimum(np.minimum(dist_low, dist_b - BOUNDARY_CLEARANCE * h), 1.0)
    # among argmax nodes take the one hosting the widest ball
    ties = u >= peak * (1.0 - 1e-12)
    i0 = int(np.argmax(np.where(ties, r0_all, -np.inf)))
    r0 = float(r0_all[i0])
    x0 = mesh.coords()[i0]
    amplitude = min(0.5 * peak, 1.0)

    r1 = 0.5 * r0
    worst = (None, None)
    if r1 < MIN_RADIUS_NODES * h:
        raise SubsolutionError(
            f"largest admissible ball radius {r0:.4g} leaves fewer than {MIN_RADIUS_NODES} "
            "nodes across r1 = r0/2"
        )
    while r1 >= MIN_RADIUS_NODES * h:
        spec = BumpSpec(tuple(float(c) for c in x0), r1, amplitude)
        field = ScalarField(mesh, bump_values(mesh, spec))
        if field.values.max() == 0:
            # smaller radii only shrink exp(-1/r^2) further
            raise SubsolutionError(
                f"bump underflows to zero at radius {r1:.4g} before the inequality holds "
                f"(worst node {worst[0]}, slack {worst[1]}); refine the mesh",
                worst_node=worst[0], worst_margin=worst[1],
            )
        slack, checked = subsolution_slack(field, m)
        node = int(np.argmin(slack))
        if slack[node] >= 0 and field.values.max() > 0:
            return spec, field
        worst = (node, float(slack[node]))
        r1 *= 0.5
    raise SubsolutionError(
        f"no admissible radius down to {MIN_RADIUS_NODES} cells (worst node {worst[0]}, "
        f"slack {worst[1]})",
        worst_node=worst[0],
        worst_margin=worst[1],
    )


def _neumann_flux(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """One-sided second-order normal derivative at every boundary node."""
    g = mesh.to_grid(values)
    flux = []
    for ax in range(mesh.dim):
        gg = np.moveaxis(g, ax, 0)
        h = mesh.spacing[ax]
        flux.append(np.abs(-3 * gg[0] + 4 * gg[1] - gg[2]).ravel() / (2 * h))
        flux.append(np.abs(-3 * gg[-1] + 4 * gg[-2] - gg[-3]).ravel() / (2 * h))
    return np.concatenate(flux)


def validate_initial_pair(pair: InitialPair, bc=None) -> list:
    """One report per hypothesis: nonnegativity, separation, nontriviality, BC compatibility."""
    mesh = pair.mesh
    bc = BC.parse(bc) if bc is not None else mesh.bc
    u, v = pair.u0.values, pair.v0.values
    reports = []

    margin, loc = worst_point(np.minimum(u, v))
    reports.append(CheckReport("initial_nonnegative", margin, worst_location=loc,
                               details="min(u0, v0) >= 0"))

    prod = u * v
    node = int(np.argmax(prod))
    reports.append(CheckReport(
        "initial_separation", float(pair.overlap_tol - prod[node]),
        worst_location=(node, 0.0),
        details=f"max u0*v0 = {prod[node]:.3e}, overlap_tol = {pair.overlap_tol:.1e}",
    ))

    nontriv = min(sup_norm(pair.u0), sup_norm(pair.v0))
    reports.append(CheckReport("initial_nontrivial", nontriv, strict=True,
                               details="min(sup u0, sup v0) > 0"))

    if bc is BC.DIRICHLET:
        bnd = np.abs(u[mesh.boundary_nodes()])
        reports.append(CheckReport("initial_bc_compatible", 0.0 - float(bnd.max()),
                                   details="u0 = 0 on boundary nodes"))
    else:
        scale = max(sup_norm(pair.u0), 1.0)
        tol = 10.0 * max(mesh.spacing) * scale
        flux = _neumann_flux(mesh, u)
        reports.append(CheckReport(
            "initial_bc_compatible", 0.0 - float(flux.max()), tolerance=tol,
            tolerance_source="10*h*max(1,sup u0)",
            details="one-sided normal derivative of u0 on the boundary",
        ))
    return reports


def _smoothstep(t):
    """C2 ramp 6t^5 - 15t^4 + 10t^3 clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _block(x, lo, hi, ramp=0.0):
    if ramp == 0.0:
        eps = 1e-12
        return ((x >= lo - eps) & (x <= hi + eps)).astype(float)
    return _smoothstep((x - lo) / ramp) * _smoothstep((hi - x) / ramp)


def preset_initial_pair(name: str, mesh: Mesh, bc=None) -> InitialPair:
    """Reproducible admissible pairs.

    ``two_blocks_1d``      unit indicators, u0 on [0.05, 0.45], v0 on [0.55, 0.95]
    ``smoothed_blocks_1d`` same supports with C2 ramps of width 0.05
    ``bump_vs_ring_2d``    C2 disc for u0 inside an annulus of v0
    (fractions of the domain extent).
    """
    if bc is not None and BC.parse(bc) is not mesh.bc:
        raise ValueError("preset bc disagrees with mesh bc")
    if name in ("two_blocks_1d", "smoothed_blocks_1d"):
        if mesh.dim != 1:
            raise ValueError(f"preset {name} is one-dimensional")
        (a, b), = mesh.extents
        s = (mesh.axis_coords(0) - a) / (b - a)
        ramp = 0.05 if name == "smoothed_blocks_1d" else 0.0
        u0 = _block(s, 0.05, 0.45, ramp)
        v0 = _block(s, 0.55, 0.95, ramp)
    elif name == "bump_vs_ring_2d":
        if mesh.dim != 2:
            raise ValueError("preset bump_vs_ring_2d is two-dimensional")
        pts = mesh.coords()
        lo = np.array([e[0] for e in mesh.extents])
        size = np.array([e[1] - e[0] for e in mesh.extents])
        s = (pts - lo) / size
        rho = np.sqrt(((s - 0.5) ** 2).sum(axis=1))
        u0 = _smoothstep((0.2 - rho) / 0.08)
        v0 = _smoothstep((rho - 0.3) / 0.05) * _smoothstep((0.45 - rho) / 0.05)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return InitialPair(ScalarField(mesh, u0), ScalarField(mesh, v0), overlap_tol=0.0)
