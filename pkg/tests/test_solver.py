import math

import numpy as np
import pytest

from fastreact.mesh import ScalarField, build_mesh, integrate
from fastreact.profiles import InitialPair, preset_initial_pair
from fastreact.solver import (DtPolicyError, OracleBudgetError, ProblemSpec, SolverError, _clamp,
                              default_dt, dt_ceiling, oracle_solve, reaction_term, solve_coupled,
                              solve_heat, solve_reduced, time_grid)


def preset_spec(n=65, bc="neumann", m=2.5, k=1e2, T=0.05, **kw):
    mesh = build_mesh(1, (0, 1), n, bc)
    return ProblemSpec(mesh, m, k, T, preset_initial_pair("two_blocks_1d", mesh), **kw)


def cos_u0(n, bc="neumann"):
    mesh = build_mesh(1, (0, 1), n, bc)
    x = mesh.axis_coords(0)
    return mesh, ScalarField(mesh, np.cos(np.pi * x) if bc == "neumann" else np.sin(np.pi * x))


# -- dt policy ---------------------------------------------------------------

def test_dt_ceiling():
    assert dt_ceiling(1.0, 0.0) == pytest.approx(5e-3)
    assert dt_ceiling(1.0, 1e4) == pytest.approx(1e-3)


def test_default_dt_includes_positivity():
    mesh = build_mesh(1, (0, 1), 129)
    assert default_dt(mesh, 0.25, 1e2) == pytest.approx((1 / 128) ** 2)


def test_dt_policy_violation():
    with pytest.raises(DtPolicyError, match="dt policy"):
        preset_spec(k=1e4, T=0.25, dt=0.01)


def test_spec_validation():
    with pytest.raises(ValueError):
        preset_spec(k=-1.0)
    with pytest.raises(ValueError):
        preset_spec(T=0.0)
    spec = preset_spec()
    assert spec.delta == pytest.approx(2 / math.e)
    assert spec.theorem_scope
    assert not spec.with_(m=3.5).theorem_scope
    dmesh = build_mesh(1, (0, 1), 65, "dirichlet")
    dspec = spec.with_(m=3.5, mesh=dmesh, pair=preset_initial_pair("two_blocks_1d", dmesh))
    assert dspec.theorem_scope
    with pytest.raises(ValueError, match="different mesh"):
        spec.with_(mesh=dmesh)


def test_time_grid_snaps_samples():
    dt, n, steps = time_grid(1.0, 0.01, sample_times=[0.0, 0.333, 1.0])
    assert n == 100 and dt == pytest.approx(0.01)
    assert list(steps) == [0, 33, 100]
    dt, n, steps = time_grid(0.25, 1e-3, n_samples=11)
    assert len(steps) == 11 and steps[-1] == n


def test_clamp_policy():
    x = np.array([1.0, -5e-13, 0.0])
    assert np.array_equal(_clamp(x, "u"), [1.0, 0.0, 0.0])
    with pytest.raises(SolverError):
        _clamp(np.array([1.0, -1e-9]), "u")


# -- heat flow ---------------------------------------------------------------

def test_heat_constant_is_equilibrium():
    mesh = build_mesh(2, [(0, 1), (0, 1)], 17)
    traj = solve_heat(ScalarField(mesh, np.full(mesh.size, 0.7)), T=0.01, n_samples=5)
    assert np.abs(traj.u - 0.7).max() <= 1e-12
    assert np.all(traj.v == 0)


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
def test_heat_analytic_second_order(bc):
    T = 0.125
    errs = []
    for n in (33, 65, 129):
        mesh, u0 = cos_u0(n, bc)
        h = mesh.spacing[0]
        traj = solve_heat(u0, T=T, dt=h / 4, n_samples=5)
        exact = np.exp(-np.pi**2 * traj.times)[:, None] * u0.values[None, :]
        errs.append(np.abs(traj.u - exact).max())
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.9


def test_heat_2d_matches_separable_solution():
    mesh = build_mesh(2, [(0, 1), (0, 1)], 33, "dirichlet")
    x, y = mesh.coords().T
    u0 = ScalarField(mesh, np.sin(np.pi * x) * np.sin(np.pi * y))
    traj = solve_heat(u0, T=0.02, n_samples=3)
    exact = np.exp(-2 * np.pi**2 * traj.times[-1]) * u0.values
    assert np.abs(traj.u[-1] - exact).max() < 2e-3


def test_heat_A_is_time_integral():
    mesh, u0 = cos_u0(65)
    traj = solve_heat(u0, T=0.1, dt=1e-4, n_samples=3)
    exact = (1 - np.exp(-np.pi**2 * 0.1)) / np.pi**2 * u0.values
    assert np.abs(traj.A[-1] - exact).max() < 1e-3


# -- coupled -----------------------------------------------------------------

def test_coupled_without_v_is_heat():
    mesh = build_mesh(1, (0, 1), 65)
    pair = preset_initial_pair("smoothed_blocks_1d", mesh)
    pair = InitialPair(pair.u0, ScalarField(mesh, np.zeros(mesh.size)))
    spec = ProblemSpec(mesh, 2.5, 1e3, 0.05, pair)
    heat = solve_heat(pair.u0, T=spec.T, dt=spec.dt)
    assert np.abs(solve_coupled(spec).u - heat.u).max() <= 1e-10


def test_exact_v_decay_with_frozen_u():
    mesh = build_mesh(1, (0, 1), 17)
    c, k = 0.3, 50.0
    pair = InitialPair(ScalarField(mesh, np.full(17, c)), ScalarField(mesh, np.full(17, 0.8)),
                       overlap_tol=1.0)
    spec = ProblemSpec(mesh, 2.5, k, 0.1, pair, n_samples=6)
    traj = solve_coupled(spec, diffusion=False, react_u=False)
    expect = 0.8 * np.exp(-k * c * traj.times)
    assert np.allclose(traj.v, expect[:, None], rtol=1e-12, atol=0)


def test_coupled_invariants():
    spec = preset_spec(n=65, k=1e3, T=0.05)
    traj = solve_coupled(spec)
    assert traj.u.min() >= 0 and traj.v.min() >= 0
    assert np.all(np.diff(traj.v, axis=0) <= 0)
    assert np.all(np.diff(traj.A, axis=0) >= 0)
    mass = np.array([integrate(spec.mesh, u) for u in traj.u])
    assert np.all(np.diff(mass) <= 1e-13)
    heat = solve_heat(spec.pair.u0, T=spec.T, dt=spec.dt)
    h = spec.mesh.spacing[0]
    assert np.all(traj.u <= heat.u + 5 * (h**2 + spec.dt**2))
    assert traj.meta["steps"] > 0 and traj.meta["max_reaction"] > 0


def test_coupled_2d_runs():
    mesh = build_mesh(2, [(0, 1), (0, 1)], 33)
    spec = ProblemSpec(mesh, 2.5, 100.0, 0.005, preset_initial_pair("bump_vs_ring_2d", mesh),
                       n_samples=3)
    traj = solve_coupled(spec)
    assert traj.u.min() >= 0
    assert np.all(np.diff(traj.v, axis=0) <= 0)


def test_coupled_deterministic():
    spec = preset_spec(k=1e3, T=0.02)
    a, b = solve_coupled(spec), solve_coupled(spec)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)


# -- reduced -----------------------------------------------------------------

def test_reduced_without_v_is_heat():
    spec = preset_spec(T=0.02)
    spec = spec.with_(pair=InitialPair(spec.pair.u0, ScalarField(spec.mesh, np.zeros(65))))
    heat = solve_heat(spec.pair.u0, T=spec.T, dt=spec.dt)
    assert np.abs(solve_reduced(spec).u - heat.u).max() <= 1e-12


def test_reduced_k_zero():
    spec = preset_spec(k=0.0, T=0.02)
    traj = solve_reduced(spec)
    heat = solve_heat(spec.pair.u0, T=spec.T, dt=spec.dt)
    assert np.abs(traj.u - heat.u).max() <= 1e-12
    assert np.array_equal(traj.v, np.broadcast_to(spec.pair.v0.values, traj.v.shape))


def test_reduced_v_matches_coupled_under_refinement():
    base = preset_spec(n=65, k=1e3, T=0.02, n_samples=5)
    gaps = []
    for dt in (1e-4, 5e-5, 2.5e-5):
        s = base.with_(dt=dt)
        gaps.append(np.abs(solve_coupled(s).v - solve_reduced(s).v).max())
    assert gaps[0] > gaps[1] > gaps[2]


# -- reaction term -----------------------------------------------------------

def test_reaction_term_examples():
    mesh = build_mesh(1, (0, 1), 9)
    u = ScalarField(mesh, [0, 1, 1, 1, 1, 1, 1, 1, 2])
    v0 = ScalarField(mesh, [1, 0, 1, 1, 1, 1, 1, 1, 1])
    A = ScalarField(mesh, [0, 0, 8, 0, 0, 0, 0, 0, 0])
    r = reaction_term(u, v0, A, 100.0, 2.5).values
    assert r[0] == 0 and r[1] == 0
    assert r[2] == 0.0
    assert r[3] == pytest.approx(100.0)
    assert r[8] == pytest.approx(100.0 * 2**2.5)
    assert not np.isnan(r).any()


# -- oracle ------------------------------------------------------------------

def test_oracle_budget():
    with pytest.raises(OracleBudgetError):
        oracle_solve(preset_spec(n=129, T=0.25), max_node_steps=1e5)
    with pytest.raises(ValueError):
        oracle_solve(preset_spec(), refine_factor=2)


def test_oracle_k_zero_freezes_v():
    traj = oracle_solve(preset_spec(k=0.0, T=0.01))
    assert np.array_equal(traj.v, np.broadcast_to(traj.v[0], traj.v.shape))


def test_oracle_heat_decay():
    mesh, u0 = cos_u0(33)
    pair = InitialPair(u0, ScalarField(mesh, np.zeros(33)))
    spec = ProblemSpec(mesh, 2.5, 0.0, 0.1, pair, n_samples=3)
    traj = oracle_solve(spec)
    exact = np.exp(-np.pi**2 * 0.1) * u0.values
    assert np.abs(traj.u[-1] - exact).max() < 1e-3


def test_oracle_self_convergence():
    spec = preset_spec(n=33, k=1e2, T=0.02, n_samples=3)
    a, b, c = (oracle_solve(spec, refine_factor=r).u for r in (4, 8, 16))
    g1, g2 = np.abs(a - b).max(), np.abs(b - c).max()
    assert g1 / g2 == pytest.approx(2.0, rel=0.2)
