import math

import numpy as np
import pytest
from scipy.special import gamma

from dirac_l2.clifford import Multivector
from dirac_l2.errors import ConfigurationError, PreconditionError, UsageError
from dirac_l2.fields import CliffordField, bump_field, constant_field, weight_builtin, zero_weight
from dirac_l2.obstruction import log_weight, u_field
from dirac_l2.quadrature import (
    QuadratureSpec,
    annulus,
    box,
    closed_form_radial,
    exterior_truncated,
    integrate,
    sphere_area,
    sphere_rule,
    truncation_radius,
    weighted_inner,
    weighted_norm_sq,
)


@pytest.mark.parametrize("level", [1, 4, 20])
def test_circle_weights_sum_to_two_pi(level):
    assert np.sum(sphere_rule(2, level).weights) == pytest.approx(2 * math.pi, rel=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_sphere_weights(n):
    rule = sphere_rule(n, 12)
    assert np.all(rule.weights > 0)
    assert abs(np.sum(rule.weights) - sphere_area(n)) <= 1e-12 * sphere_area(n)
    np.testing.assert_allclose(np.linalg.norm(rule.nodes, axis=1), 1.0, rtol=1e-14)


def test_sphere_area_values():
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)


@pytest.mark.parametrize("n", [3, 4])
def test_sphere_second_moment(n):
    rule = sphere_rule(n, 4)
    got = np.sum(rule.weights * rule.nodes[:, 0] ** 2)
    assert abs(got - sphere_area(n) / n) <= 1e-10 * sphere_area(n)


def test_sphere_rule_exact_up_to_level():
    # odd moments vanish, even ones match the Dirichlet-type closed form
    rule = sphere_rule(3, 8)
    w, X = rule.weights, rule.nodes
    assert abs(np.sum(w * X[:, 0] ** 4)) == pytest.approx(4 * math.pi / 5, rel=1e-12)
    assert abs(np.sum(w * X[:, 0] ** 2 * X[:, 1] ** 2 * X[:, 2] ** 4)) == pytest.approx(4 * math.pi / 315, rel=1e-12)
    assert abs(np.sum(w * X[:, 0] ** 3 * X[:, 2])) <= 1e-14


def test_sphere_rule_errors():
    with pytest.raises(ConfigurationError):
        sphere_rule(3, 0)
    with pytest.raises(ConfigurationError):
        sphere_rule(1, 4)


def test_annulus_volume():
    n = 3
    one = constant_field(Multivector.scalar(1.0, n))
    iv = weighted_inner(one, one, zero_weight(n), annulus(n, 1.0, 2.0))
    assert iv.value == pytest.approx(4 * math.pi / 3 * 7, rel=1e-12)
    assert iv.value == pytest.approx(29.3215, abs=1e-4)
    assert iv.est_error >= 0 and iv.nodes_used > 0


def test_orthogonal_blades():
    n = 3
    e1 = constant_field(Multivector.blade([1], n))
    e2 = constant_field(Multivector.blade([2], n))
    assert weighted_inner(e1, e2, weight_builtin("radial_power", {"m": 2}, n), annulus(n, 1, 2)).value == 0.0


def test_box_volume_and_gaussian_moment():
    one = constant_field(Multivector.scalar(1.0, 2))
    assert weighted_inner(one, one, zero_weight(2), box([-1, 0], [1, 3])).value == pytest.approx(6.0, rel=1e-13)
    g = weight_builtin("single_quadratic", None, 2)
    iv = weighted_norm_sq(one, g, box([-1, -1], [1, 1]))
    assert iv.value == pytest.approx(2 * math.sqrt(math.pi) * math.erf(1.0), rel=1e-12)


@pytest.mark.parametrize("m", [1, 2])
def test_norm_of_u_m_on_truncated_exterior(m):
    n = 3
    w = log_weight(n)
    tol = 1e-9
    R = truncation_radius(w, -2.0 / m, tol)
    dom = exterior_truncated(n, 1.0, R, tol)
    u = u_field(n, m)
    got = weighted_norm_sq(u, w, dom).value
    exact = (m / 2) * sphere_area(n)
    assert abs(got - exact) <= 1e-8 * exact


def test_truncation_examples():
    assert truncation_radius(log_weight(3), -2.0, 1e-8) == 7072
    gauss = weight_builtin("radial_power", {"m": 2}, 3)
    R = truncation_radius(gauss, 4.0, 1e-12)
    assert R <= 10
    # the tail beyond R is below tol, checked against the incomplete-gamma closed form
    assert closed_form_radial(("power_times_gaussian", 6.0), (R, math.inf)) < 1e-12
    assert truncation_radius(gauss, 4.0, math.inf, r0=1.5) == 1.5


def test_truncation_rejects_non_integrable_tail():
    with pytest.raises(ConfigurationError):
        truncation_radius(log_weight(3), 0.5, 1e-8)
    with pytest.raises(ConfigurationError):
        truncation_radius(log_weight(3), -1.0, 0.0)


def test_closed_form_examples():
    for m in (1, 3, 10):
        assert closed_form_radial(("power", -2.0 / m - 1), (1, math.inf)) == pytest.approx(m / 2, rel=1e-14)
    for n in (2, 3, 5):
        assert closed_form_radial(("power_times_gaussian", n + 1), (0, math.inf)) == pytest.approx(
            gamma(n / 2 + 1) / 2, rel=1e-14)
    assert closed_form_radial(("power", 2), (0, 1)) == pytest.approx(1 / 3, rel=1e-15)
    assert closed_form_radial(("power", 2), (0, 1), sphere_dim=3) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert closed_form_radial(("power", -1), (1, math.e)) == pytest.approx(1.0)


def test_closed_form_divergent():
    with pytest.raises(ConfigurationError):
        closed_form_radial(("power", 0.5), (1, math.inf))
    with pytest.raises(ConfigurationError):
        closed_form_radial(("power", -2), (0, 1))
    with pytest.raises(ConfigurationError):
        closed_form_radial(("power", -1), (0, 1))
    with pytest.raises(ConfigurationError):
        closed_form_radial(("power_times_gaussian", -1), (0, 1))
    with pytest.raises(ConfigurationError):
        closed_form_radial(("cosine", 1), (0, 1))


def test_quadrature_matches_closed_form_gaussian():
    n = 3
    gauss = weight_builtin("radial_power", {"m": 2}, n)
    R = truncation_radius(gauss, 2.0, 1e-14)
    got = integrate(lambda X: np.sum(X * X, axis=1) * np.exp(-gauss.values(X)),
                    exterior_truncated(n, 1.0, R).region()).value
    exact = closed_form_radial(("power_times_gaussian", n + 1), (1.0, math.inf), sphere_dim=n)
    assert abs(got - exact) <= 1e-8 * exact


def test_domain_validation():
    with pytest.raises(ConfigurationError):
        annulus(3, 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        annulus(3, 2.0, 1.0)
    with pytest.raises(ConfigurationError):
        exterior_truncated(3, 0.5, 10.0)
    with pytest.raises(ConfigurationError):
        box([0, 0], [1, 0])


def test_dimension_mismatch_and_support_outside():
    one3 = constant_field(Multivector.scalar(1.0, 3))
    with pytest.raises(UsageError):
        weighted_inner(one3, one3, zero_weight(2), annulus(3, 1, 2))
    u = bump_field(np.zeros(3), 0.5, seed=0)
    with pytest.raises(PreconditionError):
        weighted_inner(u, u, zero_weight(3), annulus(3, 1, 2))


def test_bilinear_symmetric_deterministic():
    n = 3
    dom = annulus(n, 1.0, 3.0)
    w = weight_builtin("radial_power", {"m": 2}, n)
    c = np.array([2.0, 0.0, 0.0])
    u = bump_field(c, 0.8, seed=1)
    v = bump_field(c, 0.8, seed=2)
    q = QuadratureSpec(radial_nodes=24, sphere_level=10)
    uv = weighted_inner(u, v, w, dom, q).value
    vu = weighted_inner(v, u, w, dom, q).value
    assert abs(uv - vu) <= 1e-14 * max(1.0, abs(uv))
    assert weighted_inner(u, v, w, dom, q).value == uv
    uu = weighted_norm_sq(u, w, dom, q)
    assert uu.value >= -uu.est_error
    s = CliffordField(n, lambda X: 2.0 * u.values(X) - 3.0 * v.values(X), support=(c, 0.8))
    lin = weighted_inner(s, v, w, dom, q).value
    vv = weighted_norm_sq(v, w, dom, q).value
    assert abs(lin - (2 * uv - 3 * vv)) <= 1e-12 * max(abs(uv), abs(vv))


def test_refinement_within_error_estimate():
    n = 3
    dom = annulus(n, 1.0, 3.0)
    w = weight_builtin("radial_power", {"m": 2}, n)
    u = bump_field(np.array([0.0, 2.0, 0.0]), 0.9, seed=4)
    coarse = weighted_norm_sq(u, w, dom, QuadratureSpec(radial_nodes=24, sphere_level=10))
    fine = weighted_norm_sq(u, w, dom, QuadratureSpec(radial_nodes=48, sphere_level=20))
    assert abs(coarse.value - fine.value) <= 10 * coarse.est_error + 1e-15
