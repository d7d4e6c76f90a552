import math

import numpy as np
import pytest

from dirac_l2.clifford import Multivector, embed_vector
from dirac_l2.errors import ConfigurationError
from dirac_l2.fields import Polynomial, constant_field, gen_monogenic_poly, kelvin, position_field
from dirac_l2.obstruction import (
    CROSSCHECK_TOL,
    POINTWISE_TOL,
    counterexample_norms,
    counterexample_quadrature_crosscheck,
    f_values,
    is_outer_monogenic,
    laplacian_samples,
    orthogonality_check,
    spherical_mean_zero,
    sphere_sup,
    u_field,
)
from dirac_l2.quadrature import sphere_area


def x1e2_plus_x2e1(n):
    coeffs = np.zeros((2, 1 << n))
    coeffs[0, 2] = 1.0
    coeffs[1, 1] = 1.0
    return Polynomial(n, np.eye(n, dtype=int)[:2], coeffs)


def test_norms_n3_m10():
    r = counterexample_norms(3, 10)
    assert r.norm_u_sq == pytest.approx(20 * math.pi, rel=1e-14)
    assert r.norm_u_sq == pytest.approx(62.8319, abs=1e-4)
    assert r.weighted_f_integral == pytest.approx(math.pi / 15, rel=1e-14)
    assert r.weighted_f_integral == pytest.approx(0.20944, abs=1e-5)
    assert r.ratio == 300


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_ratio_formula_exact(n):
    prev = 0
    for m in range(1, 12):
        r = counterexample_norms(n, m)
        assert r.ratio == m * m * n * (n - 2)
        assert abs(r.norm_u_sq / r.weighted_f_integral - r.ratio) <= 1e-12 * r.ratio
        assert r.ratio > prev
        prev = r.ratio
    assert counterexample_norms(4, 1).ratio == 8


def test_rejections():
    with pytest.raises(ConfigurationError):
        counterexample_norms(2, 1)
    with pytest.raises(ConfigurationError):
        counterexample_norms(3, 0)
    with pytest.raises(ConfigurationError):
        counterexample_norms(3, 1.5)


@pytest.mark.parametrize("n,m", [(3, 1), (5, 3), (4, 10)])
def test_quadrature_crosscheck(n, m):
    res = counterexample_quadrature_crosscheck(n, m).quadrature_crosscheck
    assert max(res["rel_errors"].values()) <= CROSSCHECK_TOL
    assert res["pointwise_residual"] <= POINTWISE_TOL
    assert res["passed"]
    assert res["closed_form_radial"] == pytest.approx(m / 2 * sphere_area(n), rel=1e-14)


def test_crosscheck_unreachable_is_reported():
    res = counterexample_quadrature_crosscheck(3, 100).quadrature_crosscheck
    assert res["status"] == "unreachable"
    assert res["rel_errors"] == {}


def test_pointwise_f_example():
    x = np.array([[2.0, 0.0, 0.0]])
    np.testing.assert_allclose(f_values(3, 1, x), embed_vector(-x / 8, 3), rtol=1e-15)


def test_orthogonality_examples():
    n = 3
    h0 = kelvin(constant_field(Multivector.scalar(1.0, n)))
    assert orthogonality_check(n, 2, h0) == 0.0
    h1 = kelvin(x1e2_plus_x2e1(n))
    X = np.random.default_rng(0).standard_normal((5, n)) * 2
    r = np.linalg.norm(X, axis=1)
    np.testing.assert_allclose(h1.values(X)[:, 0], -2 * X[:, 0] * X[:, 1] / r ** (n + 2), rtol=1e-13)
    assert orthogonality_check(n, 1, h1) <= 1e-8
    M = gen_monogenic_poly(n, 1, seed=7)
    assert orthogonality_check(n, 7, kelvin(M)) <= 1e-7


@pytest.mark.parametrize("n", [3, 4])
def test_orthogonality_generated(n):
    for d in (0, 1, 2):
        h = kelvin(gen_monogenic_poly(n, d, seed=d))
        assert is_outer_monogenic(h)
        for m in (1, 3):
            assert orthogonality_check(n, m, h) <= 1e-7


def test_orthogonality_rejects_growth():
    with pytest.raises(ConfigurationError):
        orthogonality_check(3, 1, position_field(3))
    with pytest.raises(ConfigurationError):
        orthogonality_check(3, 1, constant_field(Multivector.scalar(1.0, 3)))
    with pytest.raises(ConfigurationError):
        orthogonality_check(3, 1, kelvin(constant_field(Multivector.scalar(1.0, 4))))


def test_spherical_means():
    n = 3
    h0 = kelvin(constant_field(Multivector.scalar(1.0, n)))
    assert spherical_mean_zero(h0, 2.0) == 0.0
    h1 = kelvin(x1e2_plus_x2e1(n))
    assert spherical_mean_zero(h1, 2.0) <= 1e-10
    one = constant_field(Multivector.scalar(1.0, n))
    assert spherical_mean_zero(one, 2.0) == pytest.approx(sphere_area(n), rel=1e-12)
    assert not is_outer_monogenic(one)
    for n in (3, 4, 5):
        for d in (0, 1, 2):
            h = kelvin(gen_monogenic_poly(n, d, seed=10 + d))
            assert spherical_mean_zero(h, 2.0) <= 1e-8 * sphere_sup(h, 2.0) * sphere_area(n)


def test_subharmonic_weight():
    rng = np.random.default_rng(1)
    for n in (3, 4, 5):
        assert np.all(laplacian_samples(n, rng) > 0)
    assert np.all(laplacian_samples(2, rng) == 0)


def test_u_field_values():
    X = np.array([[0.0, 4.0, 0.0]])
    np.testing.assert_allclose(u_field(3, 2).values(X)[:, 0], 0.5, rtol=1e-15)
