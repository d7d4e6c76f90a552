"""The exterior-domain counterexample for the log weight ``phi = n log|x|``.

``u_m = |x|^(-1/m)`` solves ``D u_m = f_m`` with ``f_m = -(1/m) |x|^(-1/m-2) x``
on ``|x| > 1``; the ratio ``|u_m|^2 / int |f_m|^2 / Laplacian(phi) e^{-phi}``
equals ``m^2 n (n-2)`` and is unbounded in ``m``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .clifford import check_dim, norm_sq_batch
from .errors import ConfigurationError
from .fields import CliffordField, KelvinField, dirac_array, radius, weight_builtin
from .quadrature import (
    QuadratureSpec,
    Shell,
    closed_form_radial,
    gauss_legendre,
    integrate_terms,
    sphere_area,
    sphere_rule,
    tail_integral,
    truncation_radius,
)

CROSSCHECK_TOL = 1e-7
POINTWISE_TOL = 1e-8
ORTHOGONALITY_TOL = 1e-7
SPHERICAL_MEAN_TOL = 1e-8
# above this m the truncation radius tol^(-m/2) is impractical; map to t = r^(-2/m) instead
SUBSTITUTION_MIN_M = 10
MAX_PANELS = 400
# largest log10(|x|^n) allowed at quadrature nodes
R_CAP_LOG10 = 250.0

EXTERIOR_SPEC = QuadratureSpec(radial_nodes=48, sphere_level=12, panel_ratio=10.0)


@dataclass
class ObstructionResult:
    n: int
    m: int
    norm_u_sq: float
    weighted_f_integral: float
    ratio: float
    quadrature_crosscheck: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_nm(n: int, m: int) -> None:
    check_dim(n)
    if n < 3:
        raise ConfigurationError("the counterexample needs n >= 3: for n = 2 the Laplacian of n log|x| is 0")
    if int(m) != m or m < 1:
        raise ConfigurationError(f"m must be a positive integer, got {m}")


def log_weight(n: int):
    return weight_builtin("log_radial", None, n)


def u_field(n: int, m: int) -> CliffordField:
    """``u_m(x) = |x|^(-1/m)`` (scalar-valued)."""
    dim = 1 << n

    def value(X):
        out = np.zeros((len(X), dim))
        out[:, 0] = radius(X) ** (-1.0 / m)
        return out

    def partials(X):
        r = radius(X)
        out = np.zeros((n, len(X), dim))
        out[:, :, 0] = (-(1.0 / m) * (r ** (-1.0 / m - 2.0))[:, None] * X).T
        return out

    return CliffordField(n, value, partials, singular=lambda X: radius(X) == 0, name=f"u_{m}")


def f_values(n: int, m: int, X: np.ndarray) -> np.ndarray:
    """Coefficients of ``f_m(x) = -(1/m) |x|^(-1/m-2) x``."""
    r = radius(X)
    out = np.zeros((len(X), 1 << n))
    for j in range(n):
        out[:, 1 << j] = -(1.0 / m) * r ** (-1.0 / m - 2.0) * X[:, j]
    return out


def counterexample_norms(n: int, m: int) -> ObstructionResult:
    """Closed forms: ``|u_m|^2 = (m/2) sigma``, ``int |f_m|^2/Laplacian e^{-phi} = sigma / (2 m n (n-2))``."""
    _check_nm(n, m)
    sigma = sphere_area(n)
    norm_u = 0.5 * m * sigma
    f_int = sigma / (2.0 * m * n * (n - 2))
    return ObstructionResult(n, int(m), norm_u, f_int, float(m * m * n * (n - 2)))


def _exterior_shell(n: int, m: int, tol: float) -> tuple[Shell, dict]:
    """Radial rule on ``[1, inf)`` for integrands ``~ r^(-2/m-1)``.

    Small m: truncate at the certified radius; large m: substitute ``t = r^(-2/m)``.
    """
    if m >= SUBSTITUTION_MIN_M:
        # t in (t_min, 1]; the dropped piece of int_0^1 (m/2) dt is exactly t_min relative.
        # r = t^(-m/2) must keep r^n finite, which caps how small t_min can be.
        t_cap = R_CAP_LOG10 / n * (-2.0 / m)
        t_min = max(tol, 10.0**t_cap)

        def radial_map(N):
            t, wt = gauss_legendre(t_min, 1.0, N)
            return t ** (-m / 2.0), wt * (m / 2.0) * t ** (-m / 2.0 - 1.0)

        info = {"method": "substitution", "R": float(t_min ** (-m / 2.0)), "tail_bound": t_min * 0.5 * m * sphere_area(n)}
        if t_min > tol:
            info["status"] = "unreachable"
        return Shell(np.zeros(n), 1.0, info["R"], radial_map=radial_map), info
    w = log_weight(n)
    # tail in units of the radial integral m/2, so tol is relative
    R = truncation_radius(w, -2.0 / m, tol * 0.5 * m, r0=1.0)
    panels = math.ceil(math.log10(R)) if R > 1 else 1
    info = {"method": "truncated", "R": R, "tail_bound": tail_integral(w, -2.0 / m, R) * sphere_area(n)}
    if panels > MAX_PANELS:
        info["status"] = "unreachable"
    return Shell(np.zeros(n), 1.0, R), info


def counterexample_quadrature_crosscheck(n: int, m: int, tol: float = 1e-9,
                                         q: QuadratureSpec = EXTERIOR_SPEC, seed: int = 0) -> ObstructionResult:
    """Both integrals by exterior quadrature plus a pointwise finite-difference check of ``D u_m = f_m``."""
    res = counterexample_norms(n, m)
    shell, info = _exterior_shell(n, m, tol)
    if info.get("status") == "unreachable":
        res.quadrature_crosscheck = {**info, "values": {}, "rel_errors": {}}
        return res
    u = u_field(n, m)
    w = log_weight(n)

    def fn(X):
        e = np.exp(-w.values(X))
        return {"norm_u_sq": norm_sq_batch(u.values(X)) * e,
                "weighted_f_integral": norm_sq_batch(f_values(n, m, X)) / w.lap(X) * e}

    vals = integrate_terms(fn, shell, q)
    exact = {"norm_u_sq": res.norm_u_sq, "weighted_f_integral": res.weighted_f_integral}
    rel = {k: abs(vals[k].value - exact[k]) / exact[k] for k in exact}

    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((50, n))
    X = dirs / np.linalg.norm(dirs, axis=1)[:, None] * rng.uniform(1.0, 5.0, 50)[:, None]
    fd = CliffordField(n, u.value, None, singular=u.singular)  # finite differences, independent of the closed form
    pointwise = float(np.max(np.abs(dirac_array(fd, X) - f_values(n, m, X))))

    res.quadrature_crosscheck = {
        **info,
        "values": {k: v.value for k, v in vals.items()},
        "est_errors": {k: v.est_error for k, v in vals.items()},
        "rel_errors": rel,
        "pointwise_residual": pointwise,
        "closed_form_radial": closed_form_radial(("power", -2.0 / m - 1.0), (1.0, math.inf), n),
        "passed": bool(max(rel.values()) <= CROSSCHECK_TOL and pointwise <= POINTWISE_TOL),
    }
    return res


def growth_exponent(h: CliffordField, r1: float = 10.0, r2: float = 100.0, level: int = 6) -> float:
    """Largest observed ``log(|h(r2 w)| / |h(r1 w)|) / log(r2/r1)`` over sphere nodes ``w``."""
    S = sphere_rule(h.n, level).nodes
    a = np.sqrt(norm_sq_batch(h.values(r1 * S)))
    b = np.sqrt(norm_sq_batch(h.values(r2 * S)))
    ok = (a > 0) & (b > 0)
    if not np.any(ok):
        return -math.inf
    return float(np.max(np.log(b[ok] / a[ok])) / math.log(r2 / r1))


def _inverse_shell(n: int, panels: int = 4) -> Shell:
    """``[1, inf)`` via ``r = 1/s`` with Gauss-Legendre panels in ``s``."""
    def radial_map(N):
        edges = np.linspace(0.0, 1.0, panels + 1)
        parts = [gauss_legendre(a, b, N) for a, b in zip(edges[:-1], edges[1:])]
        s = np.concatenate([p[0] for p in parts])
        ws = np.concatenate([p[1] for p in parts])
        return 1.0 / s, ws / s**2

    return Shell(np.zeros(n), 1.0, math.inf, radial_map=radial_map)


def orthogonality_check(n: int, m: int, h: CliffordField, q: QuadratureSpec = EXTERIOR_SPEC) -> float:
    """Normalized ``|<u_m, h>_phi| / (|u_m|_phi |h|_phi)`` on the exterior of the unit ball.

    ``h`` must lie in the weighted space; fields that do not decay
    (``|h| ~ r^p`` with ``p >= 0``, e.g. a nonzero polynomial part) are rejected.
    """
    _check_nm(n, m)
    if h.n != n:
        raise ConfigurationError(f"h has dimension {h.n}, expected {n}")
    p = growth_exponent(h)
    if p >= -1e-6:
        raise ConfigurationError(
            f"h grows like |x|^{p:.3g} and is not square integrable against |x|^(-n); "
            "its polynomial part must vanish")
    u = u_field(n, m)
    w = log_weight(n)
    shell = _inverse_shell(n)

    def fn(X):
        e = np.exp(-w.values(X))
        H = h.values(X)
        return {"pairing": np.sum(u.values(X) * H, axis=1) * e, "norm_h": norm_sq_batch(H) * e}

    vals = integrate_terms(fn, shell, q, estimate=False)
    norm_u = math.sqrt(counterexample_norms(n, m).norm_u_sq)
    return abs(vals["pairing"].value) / (norm_u * math.sqrt(vals["norm_h"].value))


def spherical_mean_zero(h: CliffordField, r: float, level: int = 20) -> float:
    """``|int_{S^{n-1}} Re h(r w) dS(w)|``."""
    rule = sphere_rule(h.n, level)
    return abs(float(np.sum(rule.weights * h.values(r * rule.nodes)[:, 0])))


def sphere_sup(h: CliffordField, r: float, level: int = 20) -> float:
    rule = sphere_rule(h.n, level)
    return float(np.max(np.sqrt(norm_sq_batch(h.values(r * rule.nodes)))))


def is_outer_monogenic(h: CliffordField) -> bool:
    return isinstance(h, KelvinField) and getattr(h.source, "constraint_residual", None) is not None


def laplacian_samples(n: int, rng: np.random.Generator, count: int = 100) -> np.ndarray:
    """``Laplacian(n log|x|)`` at random points with ``1 < |x| < 10``."""
    d = rng.standard_normal((count, n))
    X = d / np.linalg.norm(d, axis=1)[:, None] * rng.uniform(1.0, 10.0, count)[:, None]
    return log_weight(n).lap(X)
