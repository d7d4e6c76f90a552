"""Term-by-term quadrature checks of the weighted integral identities and coercive estimates.

Each check evaluates named pointwise integrands once per quadrature node and
integrates them over the support ball of the test field, so that the left- and
right-hand sides see exactly the same rule. Terms are reported with their signs
so that ``sum(terms.values()) == rhs``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import minimize

from .clifford import embed_vector, gen_left_batch, gmul_batch, inner_batch, norm_sq_batch, vec_left_batch
from .errors import ConfigurationError, DomainError, PreconditionError
from .fields import (
    CliffordField,
    MultiplierChoice,
    Weight,
    bump_field,
    multiplier_canonical,
    radius,
    weight_builtin,
)
from .seeding import trial_rng
from .quadrature import BoxRegion, Domain, QuadratureSpec, integrate_terms, support_region

SCALE_FLOOR = 1e-30
DEFAULT_TOL = 1e-6
DUALITY_TOL = 1e-7
EPS_DEFAULT = 0.01

# bump integrands are smooth on their support ball; this rule already resolves them far below 1e-8
BUMP_SPEC = QuadratureSpec(radial_nodes=32, sphere_level=14)
# the duality pairings are sign-indefinite and can be 1e-3 of the integrand scale,
# so the rule is refined until the error estimate is small relative to the pairing
DUALITY_LADDER = (BUMP_SPEC, QuadratureSpec(radial_nodes=48, sphere_level=20),
                  QuadratureSpec(radial_nodes=64, sphere_level=28))


@dataclass
class IdentityReport:
    """Both sides of an identity, their signed constituent terms and derived margins.

    For ``kind == "inequality"`` the pass criterion is ``margins[...] >= -est_error``
    rather than the relative residual.
    """

    name: str
    lhs: float
    rhs: float
    terms: dict[str, float]
    lhs_terms: dict[str, float]
    abs_residual: float
    rel_residual: float
    est_error: float
    tol: float
    margins: dict[str, float] = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    kind: str = "identity"

    @property
    def passed(self) -> bool:
        if self.kind == "identity" and not self.rel_residual <= self.tol:
            return False
        return all(v >= -self.est_error for v in self.margins.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def make_report(name: str, lhs_terms: Mapping[str, float], terms: Mapping[str, float], est_error: float,
                tol: float = DEFAULT_TOL, margins=None, params=None, kind: str = "identity") -> IdentityReport:
    lhs = float(sum(lhs_terms.values()))
    rhs = float(sum(terms.values()))
    abs_res = abs(lhs - rhs)
    rel = abs_res / max(abs(lhs), abs(rhs), SCALE_FLOOR)
    return IdentityReport(name, lhs, rhs, dict(terms), dict(lhs_terms), abs_res, rel, float(est_error), tol,
                          dict(margins or {}), dict(params or {}), kind)


@dataclass(frozen=True)
class KappaK:
    """Parameter pair with ``kappa > (n-2)/n`` and ``k = (n-2) kappa / (n kappa - (n-2))``."""

    n: int
    kappa: float
    k: float

    @classmethod
    def from_kappa(cls, kappa: float, n: int) -> KappaK:
        lower = (n - 2) / n
        if not kappa > lower:
            raise ConfigurationError(f"kappa must exceed (n-2)/n = {lower:.6g}, got {kappa}")
        return cls(n, float(kappa), (n - 2) * kappa / (n * kappa - (n - 2)))

    def relation_residual(self) -> float:
        """``|(k - (n-2)/n)(kappa + k) - k^2|``."""
        return abs((self.k - (self.n - 2) / self.n) * (self.kappa + self.k) - self.k**2)

    @property
    def c_kappa(self) -> float:
        """A priori constant obtained by dropping the two nonnegative terms."""
        return 1.0 / (1.0 + self.k)


# -- pointwise building blocks ---------------------------------------------

class _Local:
    """Pointwise quantities of a field ``u`` against a weight at nodes ``X``."""

    def __init__(self, u: CliffordField, w: Weight, X: np.ndarray):
        n = u.n
        self.n = n
        self.X = X
        self.V = u.values(X)
        self.G = u.grad(X)
        self.g = w.gradient(X)
        self.phi = w.values(X)
        self.e = np.exp(-self.phi)
        self.lap = w.lap(X)
        self.Du = sum(gen_left_batch(j + 1, self.G[j], n) for j in range(n))
        self.dphi_u = vec_left_batch(self.g, self.V, n)
        self.delta = self.Du - self.dphi_u
        s = np.exp(-0.5 * self.phi)[:, None]
        # U = u e^{-phi/2} and its partials
        self.U = self.V * s
        self.dU = np.stack([(self.G[j] - 0.5 * self.g[:, j, None] * self.V) * s for j in range(n)])
        self.DU = (self.Du - 0.5 * self.dphi_u) * s

    @property
    def u_sq(self) -> np.ndarray:
        return norm_sq_batch(self.V)

    @property
    def grad_sq(self) -> np.ndarray:
        return np.sum(self.G**2, axis=(0, 2))


def yeey_divergence(Y: Callable[[np.ndarray], np.ndarray], X: np.ndarray, n: int) -> np.ndarray:
    """``M_j = sum_k d_k(Y e_k e_j Y)`` for ``j = 1..n`` by central differences of the product.

    The step is ``1e-5 * max(1, |x|)``.
    """
    h = 1e-5 * np.maximum(1.0, radius(X))
    out = np.zeros((n, len(X), 1 << n))
    for k in range(n):
        step = np.zeros_like(X)
        step[:, k] = h
        Yp, Ym = Y(X + step), Y(X - step)
        Ep, Em = embed_vector(Yp, n), embed_vector(Ym, n)
        for j in range(n):
            Fp = vec_left_batch(Yp, gen_left_batch(k + 1, gen_left_batch(j + 1, Ep, n), n), n)
            Fm = vec_left_batch(Ym, gen_left_batch(k + 1, gen_left_batch(j + 1, Em, n), n), n)
            out[j] += (Fp - Fm) / (2.0 * h[:, None])
    return out


def curvature_density(M: np.ndarray, dU: np.ndarray, U: np.ndarray, n: int) -> np.ndarray:
    """Pointwise ``sum_j Re((M_j d_j U) conj(U))``."""
    return sum(inner_batch(gmul_batch(M[j], dU[j], n), U) for j in range(n))


def _integrate(fn, region, q) -> tuple[dict[str, float], float]:
    vals = integrate_terms(fn, region, q)
    return {k: v.value for k, v in vals.items()}, float(sum(v.est_error for v in vals.values()))


def _region(dom: Domain, w: Weight, *fields: CliffordField):
    if w.n != dom.n:
        raise ConfigurationError(f"weight dimension {w.n} does not match domain dimension {dom.n}")
    return support_region(dom, *fields)


def _project(region, x: np.ndarray) -> np.ndarray:
    if isinstance(region, BoxRegion):
        return np.clip(x, region.lo, region.hi)
    d = x - region.center
    r = float(np.linalg.norm(d))
    if r == 0.0:
        return region.center + region.r0 * np.eye(len(x))[0] if region.r0 > 0 else x.copy()
    return region.center + d * (min(max(r, region.r0), region.r1) / r)


def min_gradient_norm(w: Weight, region, q: QuadratureSpec = BUMP_SPEC, starts: int = 4) -> float:
    """Smallest ``|grad phi|`` on ``region``: best quadrature node, refined by Nelder-Mead."""
    X, _ = region.rule(q)
    g = np.linalg.norm(w.gradient(X), axis=1)
    f = lambda x: float(np.linalg.norm(w.gradient(_project(region, x)[None])[0]))  # noqa: E731
    best = float(g.min())
    for i in np.argsort(g)[:starts]:
        res = minimize(f, X[i], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best


def _require_gradient(w: Weight, region) -> None:
    if min_gradient_norm(w, region) <= 1e-8:
        raise DomainError("gradient of phi vanishes on the integration region; D(phi)/|D(phi)| is undefined")


def _radius_range(dom: Domain) -> tuple[float, float]:
    if dom.kind == "box":
        lo, hi = dom.params
        nearest = np.clip(0.0, lo, hi)
        far = np.maximum(np.abs(lo), np.abs(hi))
        return float(np.linalg.norm(nearest)), float(np.linalg.norm(far))
    return dom.params


def _describe(w: Weight, dom: Domain, **extra) -> dict:
    return {"weight": w.describe(), "domain": dom.describe(), **extra}


# -- checks ----------------------------------------------------------------

def check_adjoint_duality(u: CliffordField, v: CliffordField, w: Weight, dom: Domain,
                          q: QuadratureSpec | None = None) -> IdentityReport:
    """``<delta_phi u, v>_phi`` against ``<u, Dv>_phi``.

    Without an explicit rule, walks ``DUALITY_LADDER`` until the companion-rule
    estimate is below ``0.1 * DUALITY_TOL`` of the pairing.
    """
    region = _region(dom, w, u, v)
    n = u.n

    def fn(X):
        Lu = _Local(u, w, X)
        Dv = sum(gen_left_batch(j + 1, G, n) for j, G in enumerate(v.grad(X)))
        return {"adjoint_pairing": inner_batch(Lu.delta, v.values(X)) * Lu.e,
                "dirac_pairing": inner_batch(Lu.V, Dv) * Lu.e}

    for rule in (q,) if q is not None else DUALITY_LADDER:
        t, err = _integrate(fn, region, rule)
        scale = max(abs(t["adjoint_pairing"]), abs(t["dirac_pairing"]), SCALE_FLOOR)
        if err <= 0.1 * DUALITY_TOL * scale:
            break
    params = _describe(w, dom, radial_nodes=rule.radial_nodes, sphere_level=rule.sphere_level)
    return make_report("adjoint_duality", {"adjoint_pairing": t["adjoint_pairing"]},
                       {"dirac_pairing": t["dirac_pairing"]}, err, DUALITY_TOL, params=params)


def check_bochner(u: CliffordField, w: Weight, dom: Domain, q: QuadratureSpec = BUMP_SPEC) -> IdentityReport:
    """``|delta u|^2 + |Du|^2 = 2 sum |d_j u_A|^2 + Laplacian(phi) |u|^2`` in the weighted norm."""
    region = _region(dom, w, u)

    def fn(X):
        L = _Local(u, w, X)
        return {"delta_sq": norm_sq_batch(L.delta) * L.e, "dirac_sq": norm_sq_batch(L.Du) * L.e,
                "gradient": 2.0 * L.grad_sq * L.e, "laplacian": L.lap * L.u_sq * L.e}

    t, err = _integrate(fn, region, q)
    return make_report("bochner", {k: t[k] for k in ("delta_sq", "dirac_sq")},
                       {k: t[k] for k in ("gradient", "laplacian")}, err, params=_describe(w, dom))


def check_weighted_identity(u: CliffordField, w: Weight, kk: KappaK, dom: Domain,
                            q: QuadratureSpec = BUMP_SPEC) -> IdentityReport:
    """The kappa-k weighted identity; also reports the a priori margin with ``C = 1/(1+k)``."""
    if kk.n != u.n:
        raise ConfigurationError(f"KappaK built for n={kk.n}, field has n={u.n}")
    region = _region(dom, w, u)
    n = u.n
    a = math.sqrt(max(kk.k - (n - 2) / n, 0.0))
    b = math.sqrt(kk.kappa + kk.k)

    def fn(X):
        L = _Local(u, w, X)
        gsq = np.sum(L.g**2, axis=1)
        return {
            "delta_sq": norm_sq_batch(L.delta) * L.e,
            "potential": (L.lap - kk.kappa * gsq) * L.u_sq * L.e,
            "square": norm_sq_batch(a * L.Du - b * L.dphi_u) * L.e,
            "trace_free": 2.0 * (L.grad_sq - norm_sq_batch(L.Du) / n) * L.e,
        }

    t, err = _integrate(fn, region, q)
    lhs = {"scaled_delta_sq": (1.0 + kk.k) * t["delta_sq"]}
    margins = {"apriori": t["delta_sq"] - kk.c_kappa * t["potential"]}
    return make_report("weighted_identity", lhs, {k: t[k] for k in ("potential", "square", "trace_free")},
                       err * (2.0 + kk.k), margins=margins,
                       params=_describe(w, dom, kappa=kk.kappa, k=kk.k, relation_residual=kk.relation_residual()))


def trace_margins(u: CliffordField, X) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise ``sum |d_j u_A|^2 - |Du|^2 / n`` and the local gradient scale."""
    X = np.asarray(X, dtype=float)
    G = u.grad(X)
    n = u.n
    Du = sum(gen_left_batch(j + 1, G[j], n) for j in range(n))
    gsq = np.sum(G**2, axis=(0, 2))
    return gsq - norm_sq_batch(Du) / n, gsq


def check_trace_inequality(u: CliffordField, sample_points) -> float:
    """Minimum of the trace-free gradient margin over the sample points."""
    m, _ = trace_margins(u, sample_points)
    return float(m.min())


def check_general_identity(u: CliffordField, w: Weight, mult: MultiplierChoice, dom: Domain,
                           q: QuadratureSpec = BUMP_SPEC) -> IdentityReport:
    """Identity for the conjugated unknown ``U = u e^{-phi/2}`` with multipliers ``eta`` and ``Y``."""
    region = _region(dom, w, u)
    if mult.name in ("canonical", "perturbed"):
        _require_gradient(w, region)
    n = u.n

    def fn(X):
        L = _Local(u, w, X)
        eta = mult.eta(X)
        Y = mult.Y(X)
        twisted = eta[:, None] * L.U + sum(gen_left_batch(j + 1, vec_left_batch(Y, L.dU[j], n), n)
                                           for j in range(n))
        coef = 0.25 * np.sum(L.g**2, axis=1) - eta**2 - 2.0 * mult.divergence(X) + 0.5 * mult.laplacian_y_sq(X)
        M = yeey_divergence(mult.Y, X, n)
        U_sq = norm_sq_batch(L.U)
        return {
            "delta_sq": norm_sq_batch(L.delta) * L.e,
            "twisted": -norm_sq_batch(twisted),
            "potential": coef * U_sq,
            "mixed": -inner_batch(L.DU, vec_left_batch(L.g + 2.0 * eta[:, None] * Y, L.U, n)),
            "gradient": (1.0 - np.sum(Y**2, axis=1)) * np.sum(L.dU**2, axis=(0, 2)),
            "curvature": curvature_density(M, L.dU, L.U, n),
        }

    t, err = _integrate(fn, region, q)
    return make_report("general_identity", {k: t[k] for k in ("delta_sq", "twisted")},
                       {k: t[k] for k in ("potential", "mixed", "gradient", "curvature")}, err,
                       params=_describe(w, dom, multiplier=mult.name))


def check_radial_identity(u: CliffordField, m: float, dom: Domain, q: QuadratureSpec = BUMP_SPEC) -> IdentityReport:
    """``|delta u|^2 = || |x| D((x/|x|^2) u) ||^2 + m^2 int |x|^(m-2) |u|^2 e^{-phi}`` for ``phi = |x|^m``."""
    if m == 0:
        raise ConfigurationError("radial identity needs m != 0")
    rmin, rmax = _radius_range(dom)
    if rmin <= 0.0:
        raise DomainError("radial identity needs a domain whose closure avoids the origin")
    w = weight_builtin("radial_power", {"m": m}, dom.n)
    region = _region(dom, w, u)
    n = u.n

    def fn(X):
        L = _Local(u, w, X)
        r2 = np.sum(X * X, axis=1)
        # D((x/r^2) u) = (2-n) u / r^2 + sum_j e_j x d_j u / r^2
        Dxu = ((2 - n) * L.V + sum(gen_left_batch(j + 1, vec_left_batch(X, L.G[j], n), n) for j in range(n)))
        Dxu /= r2[:, None]
        return {"delta_sq": norm_sq_batch(L.delta) * L.e,
                "twisted": r2 * norm_sq_batch(Dxu) * L.e,
                "potential": m * m * r2 ** (m / 2 - 1) * L.u_sq * L.e,
                "mass": L.u_sq * L.e}

    t, err = _integrate(fn, region, q)
    c_min = m * m * min(rmin ** (m - 2), rmax ** (m - 2))
    margins = {"coercivity": t["delta_sq"] - t["potential"], "constant": t["delta_sq"] - c_min * t["mass"]}
    return make_report("radial_identity", {"delta_sq": t["delta_sq"]},
                       {k: t[k] for k in ("twisted", "potential")}, err, margins=margins,
                       params=_describe(w, dom, m=m, constant=c_min))


def check_single_quadratic(u: CliffordField, dom: Domain, q: QuadratureSpec = BUMP_SPEC) -> IdentityReport:
    """``|delta u|^2 = |D(e_1 u)|^2 + 2 |u|^2`` for ``phi = x_1^2``."""
    w = weight_builtin("single_quadratic", None, dom.n)
    region = _region(dom, w, u)
    n = u.n

    def fn(X):
        L = _Local(u, w, X)
        De1u = sum(gen_left_batch(j + 1, gen_left_batch(1, L.G[j], n), n) for j in range(n))
        return {"delta_sq": norm_sq_batch(L.delta) * L.e, "twisted": norm_sq_batch(De1u) * L.e,
                "mass": 2.0 * L.u_sq * L.e}

    t, err = _integrate(fn, region, q)
    return make_report("single_quadratic", {"delta_sq": t["delta_sq"]}, {k: t[k] for k in ("twisted", "mass")},
                       err, margins={"constant": t["delta_sq"] - t["mass"]}, params=_describe(w, dom))


def check_perturbed_coercivity(u: CliffordField, a, dom: Domain, q: QuadratureSpec = BUMP_SPEC,
                               eps: float = EPS_DEFAULT) -> IdentityReport:
    """Margin ``|delta u|^2 - 3 |u|^2`` for ``phi = sum a_i x_i^2`` on the exterior of the unit ball.

    Coefficients further than ``eps`` from 1 are still evaluated; the report
    records the actual deviation so larger values show up as findings.
    """
    w = weight_builtin("aniso_quadratic", {"a": a}, dom.n)
    if u.support is None:
        raise PreconditionError("perturbed coercivity needs a compactly supported field")
    c, rho = u.support
    if np.linalg.norm(c) - rho <= 1.0:
        raise PreconditionError("support of u touches the closed unit ball")
    region = _region(dom, w, u)

    def fn(X):
        L = _Local(u, w, X)
        return {"delta_sq": norm_sq_batch(L.delta) * L.e, "mass": L.u_sq * L.e}

    t, err = _integrate(fn, region, q)
    deviation = float(np.max(np.abs(np.asarray(a, dtype=float) - 1.0)))
    return make_report("perturbed_coercivity", {"delta_sq": t["delta_sq"]}, {"scaled_mass": 3.0 * t["mass"]},
                       4.0 * err, margins={"constant": t["delta_sq"] - 3.0 * t["mass"]},
                       params=_describe(w, dom, eps=eps, deviation=deviation, within_eps=deviation <= eps * (1 + 1e-12)),
                       kind="inequality")


def check_general_application(u: CliffordField, w: Weight, dom: Domain, q: QuadratureSpec = BUMP_SPEC,
                              k: float | None = None, eps: float | None = None) -> IdentityReport:
    """Identity for a subharmonic weight with nonvanishing gradient and ``Y = D phi / |D phi|``.

    With ``k`` and ``eps`` given, also reports the auxiliary inequality margin
    and the implied lower bound ``eps/(1+k) int Laplacian(phi) |u|^2 e^{-phi}``.
    """
    region = _region(dom, w, u)
    _require_gradient(w, region)
    n = u.n
    Y = multiplier_canonical(w).Y

    def fn(X):
        L = _Local(u, w, X)
        if np.any(L.lap < 0):
            raise ConfigurationError("weight is not subharmonic on the integration region")
        Yx = Y(X)
        twisted = sum(gen_left_batch(j + 1, vec_left_batch(Yx, L.G[j], n), n) for j in range(n))
        M = yeey_divergence(Y, X, n)
        return {"delta_sq": norm_sq_batch(L.delta) * L.e, "twisted": -norm_sq_batch(twisted) * L.e,
                "laplacian": L.lap * L.u_sq * L.e, "curvature": curvature_density(M, L.dU, L.U, n)}

    t, err = _integrate(fn, region, q)
    margins = {}
    extra = {}
    if k is not None and eps is not None:
        if not (k > 0 and 0 < eps < 1):
            raise ConfigurationError("need k > 0 and 0 < eps < 1")
        # the auxiliary inequality is a per-family hypothesis; it is only measured here
        extra["auxiliary"] = k * t["delta_sq"] + (1 - eps) * t["laplacian"] + t["curvature"]
        extra["auxiliary_holds"] = bool(extra["auxiliary"] >= -err)
        if extra["auxiliary_holds"]:
            margins["implied_bound"] = t["delta_sq"] - eps / (1 + k) * t["laplacian"]
    return make_report("general_application", {k_: t[k_] for k_ in ("delta_sq", "twisted")},
                       {k_: t[k_] for k_ in ("laplacian", "curvature")}, err, margins=margins,
                       params=_describe(w, dom, **extra))


def apriori_2d(u: CliffordField, w: Weight, dom: Domain, q: QuadratureSpec = BUMP_SPEC) -> IdentityReport:
    """Planar identity ``|delta u|^2 = |(e_1 d_1 - e_2 d_2) u|^2 + int Laplacian(phi) |u|^2 e^{-phi}``."""
    if u.n != 2:
        raise ConfigurationError(f"the planar a priori identity needs n = 2, got n = {u.n}")
    region = _region(dom, w, u)

    def fn(X):
        L = _Local(u, w, X)
        if np.any(L.lap < 0):
            raise ConfigurationError("weight is not subharmonic on the integration region")
        T = gen_left_batch(1, L.G[0], 2) - gen_left_batch(2, L.G[1], 2)
        return {"delta_sq": norm_sq_batch(L.delta) * L.e, "twisted": norm_sq_batch(T) * L.e,
                "laplacian": L.lap * L.u_sq * L.e}

    t, err = _integrate(fn, region, q)
    return make_report("apriori_2d", {"delta_sq": t["delta_sq"]}, {k: t[k] for k in ("twisted", "laplacian")},
                       err, margins={"apriori": t["delta_sq"] - t["laplacian"]}, params=_describe(w, dom))


# -- random test fields ----------------------------------------------------

def random_bump(dom: Domain, rng: np.random.Generator, degree: int = 2, center=None) -> CliffordField:
    """Bump with a random polynomial amplitude whose support ball lies strictly inside ``dom``."""
    n = dom.n
    if dom.kind == "box":
        lo, hi = dom.params
        width = float(np.min(hi - lo))
        rho = rng.uniform(0.2, 0.45) * width
        if center is None:
            center = rng.uniform(lo + rho, hi - rho)
        center = np.asarray(center, dtype=float)
        rho = min(rho, 0.999 * float(np.min(np.minimum(center - lo, hi - center))))
    else:
        r0, r1 = dom.params
        if dom.kind == "exterior_truncated":
            r1 = min(r1, r0 + 3.0)
        gap = r1 - r0
        rho = rng.uniform(0.15, 0.45) * gap
        if center is None:
            direction = rng.standard_normal(n)
            direction /= np.linalg.norm(direction)
            center = rng.uniform(r0 + rho, r1 - rho) * direction
        center = np.asarray(center, dtype=float)
        dist = float(np.linalg.norm(center))
        rho = min(rho, 0.999 * min(dist - r0, r1 - dist))
    return bump_field(center, rho, seed=rng, degree=degree)


def probe_epsilon(n: int, eps_values, dom: Domain, seed: int, trials: int = 10,
                  q: QuadratureSpec = BUMP_SPEC) -> dict:
    """Largest ``eps`` (from ``eps_values``) for which every sampled margin ``|delta u|^2 - 3|u|^2`` is >= 0.

    Coefficients alternate ``1 + eps, 1 - eps, ...``; a finding, not a proof.
    """
    rows = []
    best = None
    for eps in sorted(eps_values):
        a = [1.0 + eps * (1 if i % 2 == 0 else -1) for i in range(n)]
        worst = math.inf
        for t in range(trials):
            u = random_bump(dom, trial_rng(seed, t))
            worst = min(worst, check_perturbed_coercivity(u, a, dom, q, eps=eps).margins["constant"])
        rows.append({"eps": eps, "a": a, "min_margin": worst})
        if worst >= 0:
            best = eps
    return {"largest_passing_eps": best, "rows": rows}
