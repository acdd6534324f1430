import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastreact import _fallback, kernels

try:
    from fastreact import _kernels
except ImportError:  # pragma: no cover - extension optional
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")
BACKENDS = [_fallback] + ([_kernels] if _kernels is not None else [])


def random_state(rng, n):
    u = rng.uniform(0, 2, n)
    u[rng.random(n) < 0.2] = 0.0
    v = rng.uniform(0, 1.5, n)
    v[rng.random(n) < 0.2] = 0.0
    return u, v


@pytest.mark.parametrize("impl", BACKENDS)
def test_tridiag_matches_dense(impl):
    rng = np.random.default_rng(0)
    n = 50
    lower, upper = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    lower[0] = upper[-1] = 0.0
    diag = 2.5 + rng.uniform(0, 1, n)
    dense = np.diag(diag) + np.diag(upper[:-1], 1) + np.diag(lower[1:], -1)
    rhs = rng.normal(size=n)
    cp, inv = impl.tridiag_factor(lower, diag, upper)
    x = impl.tridiag_solve(lower, cp, inv, rhs)
    assert np.allclose(dense @ x, rhs, atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS)
def test_powm(impl):
    u = np.array([0.0, 1e-300, 0.5, 1.0, 3.0])
    assert np.allclose(impl.powm(u, 2.5), np.where(u > 0, u**2.5, 0.0), rtol=1e-14)


@pytest.mark.parametrize("impl", BACKENDS)
def test_implicit_reaction_root(impl):
    # u_new + tau k v u_new^m = u_prev with v fixed when u v tau k is tiny
    rng = np.random.default_rng(1)
    u, v = random_state(rng, 200)
    un, vn, bad = impl.reaction_coupled(u, v, 10.0, 2.5, 1e-3)
    assert bad == 0
    assert np.all((un >= 0) & (un <= u))
    assert np.all((vn >= 0) & (vn <= v))


@pytest.mark.parametrize("impl", BACKENDS)
def test_reaction_rate_flush(impl):
    u = np.array([0.0, 1.0, 1.0, 1.0])
    v0 = np.array([1.0, 0.0, 1.0, 1.0])
    A = np.array([0.0, 0.0, 8.0, 0.0])
    r = impl.reaction_rate(u, v0, A, 100.0, 2.5)
    assert r[0] == 0.0 and r[1] == 0.0
    assert r[2] == 0.0 and not np.isnan(r).any()
    assert r[3] == pytest.approx(100.0)


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(2.05, 4.0), st.sampled_from([1.0, 1e2, 1e4, 1e6]),
       st.floats(1e-6, 1e-2))
def test_backends_agree_coupled(seed, m, k, tau):
    rng = np.random.default_rng(seed)
    u, v = random_state(rng, 64)
    a = _fallback.reaction_coupled(u, v, k, m, tau)
    b = _kernels.reaction_coupled(u, v, k, m, tau)
    assert a[2] == b[2]
    assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-300)
    assert np.allclose(a[1], b[1], rtol=1e-12, atol=1e-300)


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(2.05, 4.0), st.sampled_from([1.0, 1e3, 1e5]))
def test_backends_agree_reduced_and_rate(seed, m, k):
    rng = np.random.default_rng(seed)
    u, v0 = random_state(rng, 64)
    A = rng.uniform(0, 0.05, 64)
    a = _fallback.reaction_reduced(u, A, v0, k, m, 1e-4)
    b = _kernels.reaction_reduced(u, A, v0, k, m, 1e-4)
    assert a[1] == b[1]
    assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-300)
    assert np.allclose(_fallback.reaction_rate(u, v0, A, k, m),
                       _kernels.reaction_rate(u, v0, A, k, m), rtol=1e-12, atol=1e-300)


def test_dispatch_reports_backend():
    assert kernels.BACKEND in ("cython", "python")
    if _kernels is not None and os.environ.get("FASTREACT_PURE", "") not in ("1", "true", "yes"):
        assert kernels.BACKEND == "cython"
