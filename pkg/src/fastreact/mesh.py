"""Uniform node-centred meshes on intervals and rectangles.

Nodes include the boundary. For ``dim == 2`` the flat node index is
``i0 + N0 * i1`` (axis 0 varies fastest); :meth:`Mesh.to_grid` returns the
``(N0, N1)`` view used by the stencils.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MIN_NODES = 8


class BC(str, enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, value) -> "BC":
        if isinstance(value, BC):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown boundary condition {value!r}") from None


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    extents: tuple
    cells: tuple
    bc: BC
    spacing: tuple = field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.cells) != self.dim:
            raise ValueError("extents and cells must have one entry per axis")
        spacing = []
        for (a, b), n in zip(self.extents, self.cells):
            if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
                raise ValueError(f"degenerate extent [{a}, {b}]")
            if n < MIN_NODES:
                raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {n}")
            spacing.append((b - a) / (n - 1))
        object.__setattr__(self, "spacing", tuple(spacing))
        object.__setattr__(self, "bc", BC.parse(self.bc))

    @property
    def shape(self) -> tuple:
        return tuple(self.cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    def axis_coords(self, axis: int) -> np.ndarray:
        a = self.extents[axis][0]
        return a + np.arange(self.cells[axis]) * self.spacing[axis]

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``, in flat node order."""
        if self.dim == 1:
            return self.axis_coords(0)[:, None]
        x0, x1 = np.meshgrid(self.axis_coords(0), self.axis_coords(1), indexing="ij")
        return np.stack([x0.ravel(order="F"), x1.ravel(order="F")], axis=1)

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return values
        return values.reshape(self.shape, order="F")

    def from_grid(self, grid: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return grid
        return grid.ravel(order="F")

    def boundary_distance(self) -> np.ndarray:
        pts = self.coords()
        d = np.full(self.size, np.inf)
        for ax, (a, b) in enumerate(self.extents):
            d = np.minimum(d, np.minimum(pts[:, ax] - a, b - pts[:, ax]))
        return d

    def boundary_nodes(self) -> np.ndarray:
        """Boolean flag per node, True on the discrete boundary."""
        if self.dim == 1:
            flags = np.zeros(self.size, dtype=bool)
            flags[0] = flags[-1] = True
            return flags
        g = np.zeros(self.shape, dtype=bool)
        g[0, :] = g[-1, :] = g[:, 0] = g[:, -1] = True
        return self.from_grid(g)

    def weights(self) -> np.ndarray:
        """Trapezoidal cell volumes (half weight on boundary nodes per axis)."""
        w = None
        for ax in range(self.dim):
            wa = np.full(self.cells[ax], self.spacing[ax])
            wa[0] = wa[-1] = 0.5 * self.spacing[ax]
            w = wa if w is None else np.multiply.outer(w, wa)
        return self.from_grid(w)

    def describe(self) -> str:
        ext = " x ".join(f"[{a!r},{b!r}]" for a, b in self.extents)
        return f"dim={self.dim} extents={ext} nodes={self.cells} bc={self.bc.value}"


@dataclass(eq=False)
class ScalarField:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.size,):
            raise ValueError(
                f"field has {self.values.size} values, mesh has {self.mesh.size} nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def from_function(cls, mesh: Mesh, fn) -> "ScalarField":
        pts = mesh.coords()
        return cls(mesh, fn(*pts.T))

    def grid(self) -> np.ndarray:
        return self.mesh.to_grid(self.values)


@dataclass(eq=False)
class SubdomainMask:
    mesh: Mesh
    selected: np.ndarray
    margin: float

    @property
    def count(self) -> int:
        return int(self.selected.sum())


def build_mesh(dim: int, extents: Sequence, cells_per_axis, bc="neumann") -> Mesh:
    if np.isscalar(cells_per_axis):
        cells_per_axis = (int(cells_per_axis),) * dim
    if dim == 1 and len(extents) == 2 and np.isscalar(extents[0]):
        extents = (tuple(extents),)
    extents = tuple((float(a), float(b)) for a, b in extents)
    return Mesh(dim=dim, extents=extents, cells=tuple(int(n) for n in cells_per_axis), bc=bc)


def _second_difference(g: np.ndarray, axis: int, h: float, neumann: bool) -> np.ndarray:
    g = np.moveaxis(g, axis, 0)
    out = np.zeros_like(g)
    out[1:-1] = (g[:-2] - 2.0 * g[1:-1] + g[2:]) / h**2
    if neumann:
        # ghost node reflection: f[-1] = f[1]
        out[0] = 2.0 * (g[1] - g[0]) / h**2
        out[-1] = 2.0 * (g[-2] - g[-1]) / h**2
    return np.moveaxis(out, 0, axis)


def laplacian_values(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    neumann = mesh.bc is BC.NEUMANN
    g = mesh.to_grid(values)
    lap = np.zeros_like(g, dtype=float)
    for ax in range(mesh.dim):
        lap += _second_difference(g, ax, mesh.spacing[ax], neumann)
    if not neumann:
        lap = lap.copy()
        lap_flat = mesh.from_grid(lap)
        lap_flat[mesh.boundary_nodes()] = 0.0
        return lap_flat
    return mesh.from_grid(lap)


def laplacian(f: ScalarField) -> ScalarField:
    """Second-order five-point (three-point in 1D) Laplacian.

    Neumann meshes reflect a ghost node across the boundary so that the
    normal derivative vanishes to second order. Dirichlet meshes treat the
    boundary values of ``f`` as fixed data and return 0 on boundary nodes.
    """
    return ScalarField(f.mesh, laplacian_values(f.mesh, f.values))


def sup_norm(f, mask: Optional[SubdomainMask] = None) -> float:
    values = f.values if isinstance(f, ScalarField) else np.asarray(f)
    if mask is not None:
        if isinstance(f, ScalarField) and mask.mesh is not f.mesh:
            raise ValueError("mask and field live on different meshes")
        if not mask.selected.any():
            raise ValueError("mask selects no nodes")
        values = values[..., mask.selected]
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))


def interior_mask(mesh: Mesh, epsilon: float) -> SubdomainMask:
    """Nodes strictly farther than ``epsilon`` from the boundary.

    With ``epsilon == 0`` a Neumann mesh keeps every node (the closure of the
    domain) while a Dirichlet mesh drops the boundary nodes.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    half = 0.5 * min(b - a for a, b in mesh.extents)
    if epsilon >= half:
        raise ValueError(f"epsilon={epsilon} selects no nodes (half extent {half})")
    dist = mesh.boundary_distance()
    if epsilon == 0 and mesh.bc is BC.NEUMANN:
        selected = np.ones(mesh.size, dtype=bool)
    else:
        selected = dist > epsilon + 1e-9 * min(mesh.spacing)
    if not selected.any():
        raise ValueError(f"epsilon={epsilon} selects no nodes")
    return SubdomainMask(mesh, selected, float(epsilon))


def integrate(mesh: Mesh, values: np.ndarray) -> float:
    return float(np.dot(mesh.weights(), values))
