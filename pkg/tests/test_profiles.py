import math

import numpy as np
import pytest

from fastreact.mesh import ScalarField, build_mesh, laplacian_values
from fastreact.profiles import (BumpSpec, InitialPair, SubsolutionError, bump_field, bump_values,
                                construct_subsolution_initial, curvature_bound, preset_initial_pair,
                                subsolution_slack, validate_initial_pair)


def by_name(reports):
    return {r.name: r for r in reports}


def test_bump_point_values():
    m = build_mesh(1, (-2, 2), 401)
    spec = BumpSpec((0.0,), 1.0, 1.0)
    vals = bump_values(m, spec)
    x = m.axis_coords(0)
    assert vals[np.argmin(abs(x))] == pytest.approx(math.exp(-1), rel=1e-12)
    assert vals[np.argmin(abs(x - 0.5))] == pytest.approx(math.exp(-4 / 3), rel=1e-12)
    assert np.all(vals[abs(x) >= 1] == 0.0)


def test_bump_positive_exactly_inside_ball():
    m = build_mesh(2, [(0, 1), (0, 1)], 41)
    spec = BumpSpec((0.5, 0.5), 0.3, 0.7)
    f = bump_field(m, spec)
    r = np.sqrt(((m.coords() - 0.5) ** 2).sum(axis=1))
    assert np.all(f.values >= 0)
    assert np.array_equal(f.values > 0, r < 0.3)


def test_bump_errors():
    m = build_mesh(1, (0, 1), 21)
    with pytest.raises(ValueError, match="fewer than"):
        bump_field(m, BumpSpec((0.5,), 0.2))
    with pytest.raises(ValueError, match="inside"):
        bump_field(build_mesh(1, (0, 1), 201), BumpSpec((0.1,), 0.2))
    with pytest.raises(ValueError):
        BumpSpec((0.5,), 0.1, amplitude=1.5)


def test_curvature_bound_holds_discretely():
    m = build_mesh(1, (0, 1), 801)
    spec = BumpSpec((0.5,), 0.3, 1.0)
    f = bump_field(m, spec)
    lap = laplacian_values(m, f.values)
    bound = curvature_bound(m, spec)
    inside = f.values > 0
    h = m.spacing[0]
    assert np.all(lap[inside] <= bound[inside] + 10 * h**2)


def plateau(n=257, height=2.0):
    m = build_mesh(1, (0, 1), n)
    x = m.axis_coords(0)
    return ScalarField(m, np.where((x > 0.2) & (x < 0.8), height, 0.0))


@pytest.mark.parametrize("m_exp", [2.5, 3.0])
def test_subsolution_on_plateau(m_exp):
    u0 = plateau()
    spec, sub = construct_subsolution_initial(u0, m_exp)
    assert spec.amplitude == 1.0
    slack, checked = subsolution_slack(sub, m_exp)
    assert np.all(slack[checked] >= 0)
    # certify nodewise without the helper
    lap = laplacian_values(u0.mesh, sub.values)
    if m_exp < 3:
        pos = sub.values > 0
        assert np.all(sub.values[pos] ** (3 - m_exp) - (m_exp - 1) * lap[pos] >= 0)
    else:
        assert np.all(1 - 2 * lap >= 0)
    assert np.all(sub.values <= np.minimum(u0.values, 1.0))
    h = u0.mesh.spacing[0]
    near = u0.mesh.boundary_distance() <= 2 * h
    assert np.all(sub.values[near] == 0)


def test_subsolution_preconditions():
    u0 = plateau()
    with pytest.raises(ValueError):
        construct_subsolution_initial(ScalarField(u0.mesh, np.zeros(u0.mesh.size)), 2.5)
    with pytest.raises(ValueError):
        construct_subsolution_initial(u0, 2.0)


def test_subsolution_unresolved_reports_worst_node():
    m = build_mesh(1, (0, 1), 33)
    x = m.axis_coords(0)
    u0 = ScalarField(m, np.where(abs(x - 0.5) < 0.1, 1.0, 0.0))
    with pytest.raises(SubsolutionError):
        construct_subsolution_initial(u0, 2.2)


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
def test_two_blocks_preset(bc):
    m = build_mesh(1, (0, 1), 129, bc)
    pair = preset_initial_pair("two_blocks_1d", m)
    x = m.axis_coords(0)
    assert x[pair.u0.values > 0].min() >= 0.05 - 1e-12
    assert x[pair.u0.values > 0].max() <= 0.45 + 1e-12
    assert x[pair.v0.values > 0].min() >= 0.55 - 1e-12
    assert x[pair.v0.values > 0].max() <= 0.95 + 1e-12
    assert all(r.passed for r in validate_initial_pair(pair, bc))


def test_smoothed_preset_is_admissible():
    m = build_mesh(1, (0, 1), 257, "dirichlet")
    pair = preset_initial_pair("smoothed_blocks_1d", m)
    assert all(r.passed for r in validate_initial_pair(pair))


def test_ring_preset():
    m = build_mesh(2, [(0, 1), (0, 1)], 65)
    pair = preset_initial_pair("bump_vs_ring_2d", m)
    assert all(r.passed for r in validate_initial_pair(pair))


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown preset"):
        preset_initial_pair("three_blocks", build_mesh(1, (0, 1), 33))


def test_overlap_fails_separation():
    m = build_mesh(1, (0, 1), 65)
    x = m.axis_coords(0)
    pair = InitialPair(ScalarField(m, np.exp(-30 * (x - 0.4) ** 2)),
                       ScalarField(m, np.exp(-30 * (x - 0.6) ** 2)))
    rep = by_name(validate_initial_pair(pair))
    assert not rep["initial_separation"].passed
    assert "max u0*v0" in rep["initial_separation"].details


def test_dirichlet_boundary_value_fails():
    m = build_mesh(1, (0, 1), 65, "dirichlet")
    u = np.zeros(65)
    u[0] = 0.3
    u[10:20] = 1.0
    v = np.zeros(65)
    v[40:50] = 1.0
    rep = by_name(validate_initial_pair(InitialPair(ScalarField(m, u), ScalarField(m, v))))
    assert not rep["initial_bc_compatible"].passed
    assert rep["initial_separation"].passed
