import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import G3_CLOSED_FORM, G4_FROZEN, torus_generator
from silt_lab.errors import DomainError, ParameterError
from silt_lab.torus_green import (build_kernel, green_infinite, green_infinite_fourier, green_value,
                                  heat_kernel_zero, laplacian)


def test_single_mode():
    k = build_kernel(3, 1, 2.5)
    assert k.eigenvalues.shape == (1, 1, 1)
    assert k.eigenvalues.flat[0] == 2.5
    assert green_value(k, 0, 0) == pytest.approx(1 / 2.5, rel=1e-15)


def test_two_site_circle():
    k = build_kernel(1, 2, 1.0)
    assert np.allclose(k.laplacian_eigenvalues, [0.0, 4.0], atol=1e-15)


def test_eigenvalue_range():
    lam = 0.7
    k = build_kernel(3, 4, lam)
    mu = k.eigenvalues
    assert mu.min() == lam and mu.flat[0] == lam
    assert np.all(mu.ravel()[1:] > lam)
    assert mu.max() <= lam + 12


@pytest.mark.parametrize("lam", [0.0, -1.0, float("nan")])
def test_rejects_nonpositive_lambda(lam):
    with pytest.raises(ParameterError):
        build_kernel(3, 4, lam)


def test_rejects_tiny_lambda():
    with pytest.raises(ParameterError):
        build_kernel(3, 4, 1e-13)


def test_large_lambda_limit():
    k = build_kernel(3, 4, 1e6)
    assert abs(1e6 * green_value(k, 0, 0) - 1) < 1e-4


@pytest.mark.parametrize("lam", [0.1, 1.0])
def test_matches_dense_solve(lam):
    d, R = 3, 4
    A = lam * np.eye(R**d) - torus_generator(d, R)
    e0 = np.zeros(R**d)
    e0[0] = 1.0
    g = np.linalg.solve(A, e0)
    k = build_kernel(d, R, lam)
    assert abs(green_value(k, 0, 0) - g[0]) < 1e-10
    assert np.allclose(k.green_row.ravel(), g, atol=1e-10, rtol=0)


def test_symmetry_translation_and_reduction():
    k = build_kernel(3, 5, 0.3)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y, s = rng.integers(-20, 20, size=(3, 3))
        g = green_value(k, x, y)
        assert g == pytest.approx(green_value(k, y, x), rel=1e-13)
        assert g == pytest.approx(green_value(k, x + s, y + s), rel=1e-13)
        assert g == pytest.approx(green_value(k, np.mod(x, 5), np.mod(y, 5)), rel=1e-13)
        assert g <= green_value(k, x, x)


def test_large_torus_path_matches_materialised(monkeypatch):
    import silt_lab.torus_green as tg
    k = build_kernel(3, 6, 0.2)
    want = [green_value(k, (0, 0, 0), y) for y in [(0, 0, 0), (1, 2, 3), (5, 0, 1)]]
    monkeypatch.setattr(tg, "MATERIALIZE_LIMIT", 10)
    k2 = build_kernel(3, 6, 0.2)
    got = [green_value(k2, (0, 0, 0), y) for y in [(0, 0, 0), (1, 2, 3), (5, 0, 1)]]
    assert np.allclose(got, want, rtol=1e-13, atol=0)


def test_strictly_decreasing_in_lambda():
    vals = [green_value(build_kernel(3, 6, lam), 0, 0) for lam in (0.01, 0.1, 0.5, 1.0, 5.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), R=st.integers(2, 7), d=st.integers(1, 3),
       lam=st.floats(1e-3, 10.0))
def test_positive_definite_and_inverse(seed, R, d, lam):
    k = build_kernel(d, R, lam)
    h = np.random.default_rng(seed).standard_normal(k.shape)
    Gh = k.apply(h)
    assert float(np.sum(h * Gh)) > 0
    assert np.allclose(k.apply_inverse(Gh), h, atol=1e-9 * (1 + 1 / lam))


def test_laplacian_annihilates_constants():
    assert np.allclose(laplacian(np.ones((4, 4, 4)), 3), 0.0)


def test_heat_kernel_endpoints():
    assert heat_kernel_zero(3, 4, 0.0) == 1.0
    assert abs(heat_kernel_zero(3, 2, 1e3) - 1 / 8) < 1e-8
    with pytest.raises(ParameterError):
        heat_kernel_zero(3, 4, -1.0)


def test_heat_kernel_matches_expm():
    L = torus_generator(3, 4)
    for t in (0.3, 1.0, 2.5):
        assert abs(heat_kernel_zero(3, 4, t) - expm(t * L)[0, 0]) < 1e-8


def test_heat_kernel_nonincreasing():
    ts = np.linspace(0, 50, 200)
    p = [heat_kernel_zero(3, 5, t) for t in ts]
    assert all(b <= a + 1e-15 for a, b in zip(p, p[1:]))


def test_green_is_laplace_transform_of_heat_kernel():
    from scipy.integrate import quad
    lam = 0.5
    val, _ = quad(lambda t: math.exp(-lam * t) * heat_kernel_zero(3, 4, t), 0, np.inf, epsabs=1e-12)
    assert abs(val - green_value(build_kernel(3, 4, lam), 0, 0)) < 1e-9


def test_green_infinite_matches_closed_form():
    v, err = green_infinite(3, 1e-10)
    assert err < 1e-10
    assert abs(v - G3_CLOSED_FORM) < 1e-12


def test_green_infinite_d4():
    v, err = green_infinite(4, 1e-10)
    assert abs(v - G4_FROZEN) < 1e-11


def test_green_infinite_fourier_quadrature_agrees():
    v, _ = green_infinite(3, 1e-10)
    assert abs(green_infinite_fourier(3, 24) - v) < 1e-4


def test_fourier_quadrature_refines():
    # successive refinements close in on the same value
    a, b = green_infinite_fourier(3, 12), green_infinite_fourier(3, 24)
    ref, _ = green_infinite(3)
    assert abs(b - ref) < abs(a - ref)


def test_fourier_value_invariant_under_axis_permutation():
    a = green_infinite_fourier(3, (8, 12, 16))
    b = green_infinite_fourier(3, (16, 8, 12))
    assert a == pytest.approx(b, rel=1e-12)


def test_green_infinite_domain():
    with pytest.raises(DomainError):
        green_infinite(2)
    with pytest.raises(DomainError):
        green_infinite_fourier(1, 8)
