"""Domains, product quadrature on balls/shells/boxes, and weighted L2 pairings.

Shells and balls are integrated with Gauss-Legendre in the radius times a
product rule on the unit sphere; boxes use tensor Gauss-Legendre. Every
integral is evaluated on the requested rule and on the next finer one, and the
difference is reported as the error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Mapping

import mpmath
import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaincc, gamma, roots_jacobi

from .clifford import check_dim
from .errors import ConfigurationError, PreconditionError, UsageError
from .fields import CliffordField, Weight

# points per evaluation block; bounds peak memory of (n, N, 2**n) gradient arrays
CHUNK = 1 << 15


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True, eq=False)
class SphereRule:
    n: int
    level: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=64)
def sphere_rule(n: int, level: int) -> SphereRule:
    """Product rule on S^{n-1} exact for polynomials of degree <= level.

    The circle uses the uniform trapezoid rule; each additional polar angle is
    handled by Gauss-Jacobi nodes in its cosine, which absorbs the
    ``(1 - t^2)^((k-3)/2)`` Jacobian exactly.
    """
    if n < 2:
        raise ConfigurationError("sphere rule needs n >= 2")
    if level < 1:
        raise ConfigurationError(f"sphere rule level must be >= 1, got {level}")
    m = level + 1
    theta = 2.0 * np.pi * np.arange(m) / m
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    weights = np.full(m, 2.0 * np.pi / m)
    n_polar = (level + 2) // 2
    for k in range(3, n + 1):
        alpha = (k - 3) / 2.0
        t, wt = roots_jacobi(n_polar, alpha, alpha)
        s = np.sqrt(1.0 - t**2)
        nodes = np.concatenate(
            [np.column_stack([np.full(len(nodes), ti), si * nodes]) for ti, si in zip(t, s)]
        )
        weights = np.concatenate([wi * weights for wi in wt])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SphereRule(n, level, nodes, weights)


@dataclass(frozen=True)
class QuadratureSpec:
    """Rule sizes: Gauss-Legendre nodes per radial panel, sphere exactness
    level, tensor nodes per box axis, and the largest radius ratio allowed
    inside one radial panel when the inner radius is positive."""

    radial_nodes: int = 64
    sphere_level: int = 20
    box_nodes: int = 32
    panel_ratio: float = 10.0

    def refined(self) -> QuadratureSpec:
        return replace(self, radial_nodes=self.radial_nodes + 8, sphere_level=self.sphere_level + 1,
                       box_nodes=self.box_nodes + 4)


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class IntegralValue:
    value: float
    est_error: float
    nodes_used: int


def gauss_legendre(a: float, b: float, N: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(N)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def radial_panels(r0: float, r1: float, breaks=(), ratio: float = 10.0) -> list[tuple[float, float]]:
    pts = sorted({float(r0), float(r1), *(float(b) for b in breaks if r0 < b < r1)})
    panels = []
    for a, b in zip(pts[:-1], pts[1:]):
        if a > 0 and b / a > ratio:
            k = math.ceil(math.log(b / a) / math.log(ratio))
            edges = a * (b / a) ** (np.arange(k + 1) / k)
            edges[-1] = b
            panels.extend(zip(edges[:-1], edges[1:]))
        else:
            panels.append((a, b))
    return panels


# -- integration regions ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class Shell:
    """``{c + r w : r0 <= r <= r1, |w| = 1}``; ``r0 = 0`` gives a ball."""

    center: np.ndarray
    r0: float
    r1: float
    breaks: tuple[float, ...] = ()
    radial_map: Callable | None = None

    @property
    def n(self) -> int:
        return len(self.center)

    def rule(self, q: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
        if self.radial_map is not None:
            r, wr = self.radial_map(q.radial_nodes)
        else:
            parts = [gauss_legendre(a, b, q.radial_nodes) for a, b in radial_panels(self.r0, self.r1, self.breaks, q.panel_ratio)]
            r = np.concatenate([p[0] for p in parts])
            wr = np.concatenate([p[1] for p in parts])
        sph = sphere_rule(self.n, q.sphere_level)
        X = self.center + (r[:, None, None] * sph.nodes[None, :, :]).reshape(-1, self.n)
        W = ((wr * r ** (self.n - 1))[:, None] * sph.weights[None, :]).reshape(-1)
        return X, W


@dataclass(frozen=True, eq=False)
class BoxRegion:
    lo: np.ndarray
    hi: np.ndarray

    @property
    def n(self) -> int:
        return len(self.lo)

    def rule(self, q: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
        axes = [gauss_legendre(a, b, q.box_nodes) for a, b in zip(self.lo, self.hi)]
        grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
        wgrids = np.meshgrid(*[ax[1] for ax in axes], indexing="ij")
        X = np.column_stack([g.reshape(-1) for g in grids])
        W = np.prod(np.stack([g.reshape(-1) for g in wgrids]), axis=0)
        return X, W


Region = Shell | BoxRegion


# -- domains ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Domain:
    kind: str
    n: int
    params: tuple
    tail_bound: float = 0.0

    def contains_ball(self, center, rho: float) -> bool:
        c = np.asarray(center, dtype=float)
        if self.kind == "box":
            lo, hi = self.params
            return bool(np.all(c - rho >= lo) and np.all(c + rho <= hi))
        r0, r1 = self.params
        dist = float(np.linalg.norm(c))
        return dist - rho >= r0 and dist + rho <= r1

    def contains_points(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "box":
            lo, hi = self.params
            return np.all((X >= lo) & (X <= hi), axis=1)
        r = np.linalg.norm(X, axis=1)
        return (r >= self.params[0]) & (r <= self.params[1])

    def region(self) -> Region:
        if self.kind == "box":
            return BoxRegion(*self.params)
        r0, r1 = self.params
        breaks = (1.0,) if r0 < 1.0 < r1 else ()
        return Shell(np.zeros(self.n), r0, r1, breaks)

    def describe(self) -> dict:
        params = [p.tolist() if isinstance(p, np.ndarray) else p for p in self.params]
        return {"kind": self.kind, "n": self.n, "params": params, "tail_bound": self.tail_bound}


def annulus(n: int, r0: float, r1: float) -> Domain:
    if not 0 < r0 < r1:
        raise ConfigurationError(f"annulus needs 0 < r0 < r1, got ({r0}, {r1})")
    return Domain("annulus", check_dim(n), (float(r0), float(r1)))


def box(lo, hi) -> Domain:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi <= lo):
        raise ConfigurationError("box needs matching lo < hi vectors")
    lo.setflags(write=False)
    hi.setflags(write=False)
    return Domain("box", check_dim(lo.size), (lo, hi))


def exterior_truncated(n: int, r0: float, R: float, tail_bound: float = 0.0) -> Domain:
    if not 1.0 <= r0 < R:
        raise ConfigurationError(f"exterior domain needs 1 <= r0 < R, got ({r0}, {R})")
    return Domain("exterior_truncated", check_dim(n), (float(r0), float(R)), float(tail_bound))


def support_region(dom: Domain, *fields: CliffordField) -> Region:
    """Smallest declared support ball among ``fields`` (checked against ``dom``), else ``dom`` itself."""
    best = None
    for f in fields:
        if f.n != dom.n:
            raise UsageError(f"field dimension {f.n} does not match domain dimension {dom.n}")
        if f.support is None:
            continue
        c, rho = f.support
        if not dom.contains_ball(c, rho):
            raise PreconditionError(f"support ball (center={np.round(c, 6).tolist()}, radius={rho}) leaves the {dom.kind}")
        if best is None or rho < best[1]:
            best = (c, rho)
    if best is None:
        return dom.region()
    return Shell(np.asarray(best[0], dtype=float), 0.0, float(best[1]))


# -- integration -----------------------------------------------------------

def _accumulate(fn: Callable[[np.ndarray], Mapping[str, np.ndarray]], X: np.ndarray, W: np.ndarray) -> dict[str, float]:
    totals: dict[str, float] = {}
    for start in range(0, len(X), CHUNK):
        block = fn(X[start:start + CHUNK])
        wb = W[start:start + CHUNK]
        for key, vals in block.items():
            totals[key] = totals.get(key, 0.0) + float(np.sum(wb * vals))
    return totals


def integrate_terms(fn: Callable[[np.ndarray], Mapping[str, np.ndarray]], region: Region,
                    q: QuadratureSpec = DEFAULT_SPEC, estimate: bool = True) -> dict[str, IntegralValue]:
    """Integrate each named pointwise integrand returned by ``fn`` over ``region``."""
    X, W = region.rule(q)
    base = _accumulate(fn, X, W)
    if not estimate:
        return {k: IntegralValue(v, 0.0, len(X)) for k, v in base.items()}
    X2, W2 = region.rule(q.refined())
    fine = _accumulate(fn, X2, W2)
    return {k: IntegralValue(v, abs(v - fine[k]), len(X)) for k, v in base.items()}


def integrate(fn: Callable[[np.ndarray], np.ndarray], region: Region, q: QuadratureSpec = DEFAULT_SPEC,
              estimate: bool = True) -> IntegralValue:
    return integrate_terms(lambda X: {"value": fn(X)}, region, q, estimate)["value"]


def weighted_inner(u: CliffordField, v: CliffordField, w: Weight, dom: Domain,
                   q: QuadratureSpec = DEFAULT_SPEC) -> IntegralValue:
    """``<u, v>_phi = int Re(u conj(v)) e^{-phi} dV`` over ``dom``."""
    if not (u.n == v.n == w.n == dom.n):
        raise UsageError(f"dimension mismatch: u={u.n}, v={v.n}, weight={w.n}, domain={dom.n}")
    region = support_region(dom, u, v)
    return integrate(lambda X: np.sum(u.values(X) * v.values(X), axis=1) * np.exp(-w.values(X)), region, q)


def weighted_norm_sq(u: CliffordField, w: Weight, dom: Domain, q: QuadratureSpec = DEFAULT_SPEC) -> IntegralValue:
    return weighted_inner(u, u, w, dom, q)


# -- closed forms and tails ------------------------------------------------

def _upper_gamma(a: float, x: float) -> float:
    if a > 0:
        return float(gammaincc(a, x) * gamma(a))
    return float(mpmath.gammainc(a, x, mpmath.inf))


def tail_integral(w: Weight, decay_exponent: float, R: float) -> float:
    """Closed-form bound on ``int_R^inf r^(p+n-1) e^{-phi(r)} dr``."""
    p, n = float(decay_exponent), w.n
    s = p + n
    if w.kind == "log_radial":
        if p >= 0:
            raise ConfigurationError(f"tail r^({p}-1) is not integrable for the log weight; need decay_exponent < 0")
        return R**p / (-p)
    if w.kind == "radial_power":
        m = float(w.params["m"])
        if m > 0:
            return _upper_gamma(s / m, R**m) / m
        if s >= 0:
            raise ConfigurationError("weight |x|^m with m < 0 does not decay; need decay_exponent < -n")
        return R**s / (-s)
    if w.kind == "aniso_quadratic":
        a = min(w.params["a"])
        return 0.5 * a ** (-s / 2) * _upper_gamma(s / 2, a * R * R)
    raise ConfigurationError(f"no closed-form tail bound for weight kind {w.kind!r}")


def truncation_radius(w: Weight, decay_exponent: float, tol: float, r0: float = 1.0) -> float:
    """Smallest (integer-rounded up) ``R >= r0`` whose closed-form tail bound is below ``tol``."""
    if math.isinf(tol):
        return float(r0)
    if not tol > 0:
        raise ConfigurationError("truncation tolerance must be positive")
    tail = lambda R: tail_integral(w, decay_exponent, R)  # noqa: E731
    if w.kind == "log_radial":
        p = float(decay_exponent)
        tail(r0)
        R = ((-p) * tol) ** (1.0 / p)
    elif w.kind == "radial_power" and float(w.params["m"]) < 0:
        s = decay_exponent + w.n
        tail(r0)
        R = ((-s) * tol) ** (1.0 / s)
    else:
        if tail(r0) < tol:
            return float(r0)
        hi = max(2.0 * r0, 2.0)
        while tail(hi) >= tol:
            hi *= 2.0
            if hi > 1e12:
                raise ConfigurationError("truncation radius exceeds 1e12")
        R = brentq(lambda r: math.log(tail(r)) - math.log(tol), r0, hi, xtol=1e-10)
    return float(max(math.ceil(R), r0))


def closed_form_radial(shape: tuple[str, float], bounds: tuple[float, float], sphere_dim: int | None = None) -> float:
    """Exact ``int_a^b r^p dr`` (``("power", p)``) or ``int_a^b r^p e^{-r^2} dr``
    (``("power_times_gaussian", p)``), times ``sigma_{n-1}`` when ``sphere_dim=n``."""
    kind, p = shape[0], float(shape[1])
    a, b = float(bounds[0]), float(bounds[1])
    if not 0 <= a <= b:
        raise ConfigurationError(f"bounds must satisfy 0 <= a <= b, got {bounds}")
    if kind == "power":
        if p == -1.0:
            if a == 0 or math.isinf(b):
                raise ConfigurationError("integral of 1/r diverges on the given bounds")
            val = math.log(b / a)
        else:
            if math.isinf(b) and p > -1:
                raise ConfigurationError(f"int r^{p} dr diverges at infinity")
            if a == 0 and p < -1:
                raise ConfigurationError(f"int r^{p} dr diverges at 0")
            top = 0.0 if math.isinf(b) else b ** (p + 1)
            val = (top - a ** (p + 1)) / (p + 1)
    elif kind == "power_times_gaussian":
        if a == 0 and p <= -1:
            raise ConfigurationError(f"int r^{p} e^(-r^2) dr diverges at 0")
        s = (p + 1) / 2
        hi = mpmath.inf if math.isinf(b) else b * b
        val = float(mpmath.gammainc(s, a * a, hi)) / 2.0
    else:
        raise ConfigurationError(f"unknown radial shape {kind!r}")
    if sphere_dim is not None:
        val *= sphere_area(sphere_dim)
    return val
