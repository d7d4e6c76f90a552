"""Clifford-valued fields on R^n, the Dirac operator and its weighted formal adjoint.

Every evaluator is batched: points are passed as an ``(N, n)`` array and
values come back as ``(N, 2**n)`` coefficient arrays, partial derivatives as
``(n, N, 2**n)``. Single-point convenience wrappers return :class:`Multivector`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import null_space

from .clifford import (
    Multivector,
    check_dim,
    embed_vector,
    gen_left_batch,
    generator_matrix,
    vec_left_batch,
)
from .errors import ConfigurationError, DomainError

ArrayFn = Callable[[np.ndarray], np.ndarray]

# optimal step for second-order central differences
FD_REL_STEP = np.finfo(float).eps ** (1.0 / 3.0)


def as_points(x, n: int) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n:
        raise ConfigurationError(f"expected points of shape (N, {n}), got {np.shape(x)}")
    return X


def fd_step(X: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.linalg.norm(X, axis=1)) * FD_REL_STEP


def central_partials(fn: ArrayFn, X: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """Central differences of ``fn`` along each axis; result has a leading axis of size n."""
    n = X.shape[1]
    if h is None:
        h = fd_step(X)
    out = []
    for j in range(n):
        step = np.zeros_like(X)
        step[:, j] = h
        diff = fn(X + step) - fn(X - step)
        out.append(diff / (2.0 * h.reshape((-1,) + (1,) * (diff.ndim - 1))))
    return np.stack(out)


def radius(X: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(X * X, axis=1))


def _origin_mask(X: np.ndarray) -> np.ndarray:
    return radius(X) == 0.0


# -- fields ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CliffordField:
    """A Clifford-valued function with optional analytic partials and compact support.

    ``value`` maps ``(N, n)`` points to ``(N, 2**n)`` coefficients; ``partials``
    (if given) returns ``(n, N, 2**n)``. ``support`` is ``(center, radius)`` of
    a ball outside which the field vanishes. ``singular`` returns a boolean mask
    of points where the field is undefined.
    """

    n: int
    value: ArrayFn
    partials: ArrayFn | None = None
    support: tuple[np.ndarray, float] | None = None
    singular: ArrayFn | None = None
    name: str = "field"

    @property
    def dim(self) -> int:
        return 1 << self.n

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = as_points(X, self.n)
        if self.singular is not None and np.any(self.singular(X)):
            raise DomainError(f"{self.name} is singular at one of the requested points")
        return X

    def values(self, X) -> np.ndarray:
        return self.value(self._check(X))

    def grad(self, X) -> np.ndarray:
        X = self._check(X)
        if self.partials is not None:
            return self.partials(X)
        return central_partials(self.value, X)

    def fd_grad(self, X) -> np.ndarray:
        """Finite-difference partials regardless of analytic availability."""
        return central_partials(self.value, self._check(X))

    def __call__(self, x) -> Multivector:
        return Multivector(self.values(x)[0], self.n)

    def partial(self, j: int, x) -> Multivector:
        return Multivector(self.grad(x)[j - 1, 0], self.n)


def zero_field(n: int) -> CliffordField:
    n = check_dim(n)
    dim = 1 << n
    return CliffordField(
        n,
        lambda X: np.zeros((len(X), dim)),
        lambda X: np.zeros((n, len(X), dim)),
        name="zero",
    )


def constant_field(c: Multivector) -> CliffordField:
    n = c.n
    coeffs = c.coeffs
    return CliffordField(
        n,
        lambda X: np.broadcast_to(coeffs, (len(X), len(coeffs))).copy(),
        lambda X: np.zeros((n, len(X), len(coeffs))),
        name="constant",
    )


def position_field(n: int) -> CliffordField:
    """The vector variable ``x = sum_j x_j e_j``."""
    n = check_dim(n)
    basis = np.eye(n)

    def partials(X):
        return np.stack([np.broadcast_to(embed_vector(basis[j], n), (len(X), 1 << n)) for j in range(n)])

    return CliffordField(n, lambda X: embed_vector(X, n), partials, name="x")


def dirac_array(u: CliffordField, X) -> np.ndarray:
    """``Du = sum_j e_j d_j u`` at each row of ``X``."""
    G = u.grad(X)
    out = gen_left_batch(1, G[0], u.n)
    for j in range(2, u.n + 1):
        out = out + gen_left_batch(j, G[j - 1], u.n)
    return out


def dirac(u: CliffordField, x) -> Multivector:
    return Multivector(dirac_array(u, as_points(x, u.n))[0], u.n)


# -- weights ---------------------------------------------------------------

WEIGHT_KINDS = ("log_radial", "radial_power", "single_quadratic", "aniso_quadratic", "custom")


@dataclass(frozen=True, eq=False)
class Weight:
    """Scalar weight ``phi`` with analytic gradient and Laplacian."""

    kind: str
    n: int
    params: Mapping[str, object]
    phi: ArrayFn
    grad: ArrayFn
    laplacian: ArrayFn
    singular: ArrayFn | None = None

    def _check(self, X) -> np.ndarray:
        X = as_points(X, self.n)
        if self.singular is not None and np.any(self.singular(X)):
            raise DomainError(f"weight {self.kind} is singular at one of the requested points")
        return X

    def values(self, X) -> np.ndarray:
        return self.phi(self._check(X))

    def gradient(self, X) -> np.ndarray:
        return self.grad(self._check(X))

    def lap(self, X) -> np.ndarray:
        return self.laplacian(self._check(X))

    def dphi(self, X) -> np.ndarray:
        """The Clifford vector ``D phi`` as coefficients."""
        return embed_vector(self.gradient(X), self.n)

    def dphi_mv(self, x) -> Multivector:
        return Multivector(self.dphi(x)[0], self.n)

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, "params": {k: _plain(v) for k, v in self.params.items()}}


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def weight_builtin(kind: str, params: Mapping[str, object] | None, n: int) -> Weight:
    """Built-in weight families.

    ``log_radial``: ``n log|x|``; ``radial_power``: ``|x|^m`` (``params["m"] != 0``);
    ``single_quadratic``: ``x_1^2``; ``aniso_quadratic``: ``sum a_i x_i^2`` with
    ``params["a"]`` of length n and all entries positive.
    """
    n = check_dim(n)
    params = dict(params or {})
    if kind == "log_radial":
        return Weight(
            kind, n, {},
            lambda X: n * np.log(radius(X)),
            lambda X: n * X / np.sum(X * X, axis=1)[:, None],
            lambda X: n * (n - 2) / np.sum(X * X, axis=1),
            _origin_mask,
        )
    if kind == "radial_power":
        if "m" not in params:
            raise ConfigurationError("radial_power weight needs parameter m")
        m = float(params["m"])
        if m == 0.0 or not np.isfinite(m):
            raise ConfigurationError("radial_power weight requires a finite m != 0")
        singular = _origin_mask if m < 2 else None
        return Weight(
            kind, n, {"m": m},
            lambda X: radius(X) ** m,
            lambda X: m * (radius(X) ** (m - 2))[:, None] * X,
            lambda X: m * (m + n - 2) * radius(X) ** (m - 2),
            singular,
        )
    if kind == "single_quadratic":
        def grad(X):
            g = np.zeros_like(X)
            g[:, 0] = 2.0 * X[:, 0]
            return g

        return Weight(kind, n, {}, lambda X: X[:, 0] ** 2, grad, lambda X: np.full(len(X), 2.0))
    if kind == "aniso_quadratic":
        if "a" not in params:
            raise ConfigurationError("aniso_quadratic weight needs coefficients a")
        a = np.asarray(params["a"], dtype=float)
        if a.shape != (n,):
            raise ConfigurationError(f"aniso_quadratic needs {n} coefficients, got {a.shape}")
        if np.any(a <= 0):
            raise ConfigurationError("aniso_quadratic coefficients must be positive")
        a.setflags(write=False)
        return Weight(
            kind, n, {"a": tuple(float(v) for v in a)},
            lambda X: X * X @ a,
            lambda X: 2.0 * a * X,
            lambda X: np.full(len(X), 2.0 * a.sum()),
        )
    raise ConfigurationError(f"unknown weight kind {kind!r}; expected one of {WEIGHT_KINDS[:-1]}")


def custom_weight(n: int, phi: ArrayFn, grad: ArrayFn, laplacian: ArrayFn, name: str = "custom",
                  singular: ArrayFn | None = None) -> Weight:
    return Weight("custom", check_dim(n), {"name": name}, phi, grad, laplacian, singular)


def zero_weight(n: int) -> Weight:
    return custom_weight(n, lambda X: np.zeros(len(X)), np.zeros_like, lambda X: np.zeros(len(X)), "zero")


def linear_weight(c) -> Weight:
    """Harmonic weight ``phi(x) = c . x``."""
    c = np.asarray(c, dtype=float)
    return custom_weight(
        c.size,
        lambda X: X @ c,
        lambda X: np.broadcast_to(c, X.shape).copy(),
        lambda X: np.zeros(len(X)),
        "linear",
    )


def adjoint_array(u: CliffordField, w: Weight, X) -> np.ndarray:
    """``delta_phi u = Du - (D phi) u`` at each row of ``X``."""
    X = as_points(X, u.n)
    return dirac_array(u, X) - vec_left_batch(w.gradient(X), u.values(X), u.n)


def adjoint_formal(u: CliffordField, w: Weight, x) -> Multivector:
    return Multivector(adjoint_array(u, w, x)[0], u.n)


# -- multipliers -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultiplierChoice:
    """Scalar multiplier ``eta`` and vector field ``Y = sum_j Y_j e_j``.

    ``div_eta_y`` is ``sum_j d_j(eta Y_j)`` and ``lap_y_sq`` is ``Laplacian |Y|^2``;
    when omitted they are computed by finite differences.
    """

    n: int
    eta: ArrayFn
    Y: ArrayFn
    div_eta_y: ArrayFn | None = None
    lap_y_sq: ArrayFn | None = None
    name: str = "custom"

    def divergence(self, X: np.ndarray) -> np.ndarray:
        if self.div_eta_y is not None:
            return self.div_eta_y(X)
        flux = lambda P: self.eta(P)[:, None] * self.Y(P)  # noqa: E731
        d = central_partials(flux, X)
        return sum(d[j][:, j] for j in range(self.n))

    def laplacian_y_sq(self, X: np.ndarray) -> np.ndarray:
        if self.lap_y_sq is not None:
            return self.lap_y_sq(X)
        sq = lambda P: np.sum(self.Y(P) ** 2, axis=1)  # noqa: E731
        h = np.maximum(1.0, radius(X)) * 1e-4
        total = -2.0 * self.n * sq(X)
        for j in range(self.n):
            step = np.zeros_like(X)
            step[:, j] = h
            total = total + sq(X + step) + sq(X - step)
        return total / h**2


def multiplier_zero(n: int) -> MultiplierChoice:
    zeros = lambda X: np.zeros(len(X))  # noqa: E731
    return MultiplierChoice(n, zeros, np.zeros_like, zeros, zeros, "zero")


def _unit_gradient(w: Weight) -> ArrayFn:
    def Y(X):
        g = w.gradient(X)
        size = np.sqrt(np.sum(g * g, axis=1))
        if np.any(size <= 1e-12 * np.maximum(1.0, radius(X))):
            raise DomainError("multiplier D(phi)/|D(phi)| is singular: gradient of phi vanishes")
        return g / size[:, None]

    return Y


def multiplier_canonical(w: Weight) -> MultiplierChoice:
    """``Y = D phi / |D phi|`` and ``eta = -|D phi| / 2``."""
    def eta(X):
        g = w.gradient(X)
        return -0.5 * np.sqrt(np.sum(g * g, axis=1))

    return MultiplierChoice(
        w.n, eta, _unit_gradient(w),
        lambda X: -0.5 * w.lap(X),
        lambda X: np.zeros(len(X)),
        "canonical",
    )


def multiplier_radial(m: float, n: int) -> MultiplierChoice:
    """``Y = x/|x|``, ``eta = -m |x|^(m-1) / 2 + (2-n)/|x|`` for the weight ``|x|^m``."""
    def Y(X):
        r = radius(X)
        if np.any(r == 0):
            raise DomainError("radial multiplier is singular at the origin")
        return X / r[:, None]

    def eta(X):
        r = radius(X)
        return -0.5 * m * r ** (m - 1) + (2 - n) / r

    def div(X):
        r = radius(X)
        return -0.5 * m * (m + n - 2) * r ** (m - 2) - (n - 2) ** 2 / r**2

    return MultiplierChoice(n, eta, Y, div, lambda X: np.zeros(len(X)), f"radial(m={m:g})")


def multiplier_single_quadratic(n: int) -> MultiplierChoice:
    """``Y = e_1``, ``eta = -x_1`` for the weight ``x_1^2``."""
    def Y(X):
        out = np.zeros_like(X)
        out[:, 0] = 1.0
        return out

    return MultiplierChoice(
        n, lambda X: -X[:, 0], Y,
        lambda X: np.full(len(X), -1.0),
        lambda X: np.zeros(len(X)),
        "single_quadratic",
    )


def multiplier_perturbed(w: Weight) -> MultiplierChoice:
    """``Y = D phi/|D phi|``, ``eta = -|D phi|/2 + 2(2-n)/|D phi|`` for ``sum a_i x_i^2``."""
    if w.kind != "aniso_quadratic":
        raise ConfigurationError("perturbed multiplier needs an aniso_quadratic weight")
    n = w.n
    a = np.asarray(w.params["a"])

    def eta(X):
        size = np.sqrt(np.sum(w.gradient(X) ** 2, axis=1))
        return -0.5 * size + 2.0 * (2 - n) / size

    def div(X):
        S = 4.0 * (X * X @ a**2)
        return -a.sum() + 4.0 * (2 - n) * (a.sum() / S - 8.0 * (X * X @ a**3) / S**2)

    return MultiplierChoice(n, eta, _unit_gradient(w), div, lambda X: np.zeros(len(X)), "perturbed")


# -- polynomials -----------------------------------------------------------

def monomial_exponents(n: int, degree: int) -> np.ndarray:
    """All exponent vectors of total degree ``degree`` in lexicographic order."""
    rows = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        e = np.zeros(n, dtype=int)
        for j in combo:
            e[j] += 1
        rows.append(e)
    return np.array(rows, dtype=int).reshape(-1, n)


def _monomials(X: np.ndarray, exps: np.ndarray) -> np.ndarray:
    if len(exps) == 0:
        return np.zeros((len(X), 0))
    top = int(exps.max())
    powers = np.ones((top + 1,) + X.shape)
    for d in range(1, top + 1):
        powers[d] = powers[d - 1] * X
    out = powers[exps[:, 0], :, 0]
    for j in range(1, X.shape[1]):
        out = out * powers[exps[:, j], :, j]
    return out.T


@dataclass(frozen=True, eq=False)
class Polynomial:
    """``P(x) = sum_k x^{exponents[k]} coeffs[k]`` with Multivector coefficients."""

    n: int
    exponents: np.ndarray
    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return int(self.exponents.sum(axis=1).max()) if len(self.exponents) else 0

    def is_homogeneous(self) -> bool:
        return len(set(self.exponents.sum(axis=1).tolist())) <= 1

    def values(self, X) -> np.ndarray:
        X = as_points(X, self.n)
        return _monomials(X, self.exponents) @ self.coeffs

    def partials(self, X) -> np.ndarray:
        X = as_points(X, self.n)
        out = np.empty((self.n, len(X), self.coeffs.shape[1]))
        for j in range(self.n):
            e = self.exponents.copy()
            scale = e[:, j].astype(float)
            e[:, j] = np.maximum(e[:, j] - 1, 0)
            out[j] = _monomials(X, e) @ (scale[:, None] * self.coeffs)
        return out

    def dirac(self) -> Polynomial:
        """Exact Dirac image, expressed on monomials of one lower degree."""
        terms: dict[tuple, np.ndarray] = {}
        for k, e in enumerate(self.exponents):
            for j in range(self.n):
                if e[j] == 0:
                    continue
                lower = e.copy()
                lower[j] -= 1
                key = tuple(lower)
                contrib = e[j] * (generator_matrix(self.n, j + 1) @ self.coeffs[k])
                terms[key] = terms.get(key, 0.0) + contrib
        if not terms:
            return Polynomial(self.n, np.zeros((1, self.n), dtype=int), np.zeros((1, 1 << self.n)))
        keys = sorted(terms)
        return Polynomial(self.n, np.array(keys, dtype=int), np.array([terms[k] for k in keys]))

    def as_field(self, name: str = "polynomial") -> CliffordField:
        return CliffordField(self.n, self.values, self.partials, name=name)


@dataclass(frozen=True, eq=False)
class MonogenicPolynomial(Polynomial):
    """Homogeneous polynomial with ``D P = 0``."""

    def constraint_residual(self) -> float:
        return float(np.max(np.abs(self.dirac().coeffs), initial=0.0))


def dirac_constraint_matrix(n: int, degree: int) -> np.ndarray:
    """Matrix of ``P -> DP`` from degree-``degree`` to degree-``degree-1`` coefficient space."""
    dim = 1 << n
    src = monomial_exponents(n, degree)
    if degree == 0:
        return np.zeros((0, len(src) * dim))
    dst = {tuple(e): i for i, e in enumerate(monomial_exponents(n, degree - 1))}
    M = np.zeros((len(dst) * dim, len(src) * dim))
    for k, e in enumerate(src):
        for j in range(n):
            if e[j] == 0:
                continue
            lower = e.copy()
            lower[j] -= 1
            row = dst[tuple(lower)]
            M[row * dim:(row + 1) * dim, k * dim:(k + 1) * dim] += e[j] * generator_matrix(n, j + 1)
    return M


def gen_monogenic_poly(n: int, degree: int, seed=None) -> MonogenicPolynomial:
    """Random homogeneous left-monogenic polynomial of degree 0, 1 or 2."""
    n = check_dim(n)
    if degree not in (0, 1, 2):
        raise ConfigurationError(f"monogenic generator supports degree 0, 1, 2; got {degree}")
    rng = np.random.default_rng(seed)
    exps = monomial_exponents(n, degree)
    dim = 1 << n
    M = dirac_constraint_matrix(n, degree)
    if M.shape[0] == 0:
        basis = np.eye(len(exps) * dim)
    else:
        basis = null_space(M)
    if basis.shape[1] == 0:
        raise RuntimeError(f"no monogenic polynomials found for n={n}, degree={degree}")
    c = basis @ rng.standard_normal(basis.shape[1])
    c /= np.linalg.norm(c)
    if M.shape[0]:
        residual = np.max(np.abs(M @ c))
        if residual > 1e-12:
            raise RuntimeError(f"monogenic projection residual {residual:.2e} exceeds 1e-12")
    return MonogenicPolynomial(n, exps, c.reshape(len(exps), dim))


def random_polynomial(n: int, max_degree: int, rng: np.random.Generator) -> Polynomial:
    exps = np.concatenate([monomial_exponents(n, d) for d in range(max_degree + 1)])
    return Polynomial(n, exps, rng.standard_normal((len(exps), 1 << n)))


# -- test functions --------------------------------------------------------

def bump_profile(t: np.ndarray) -> np.ndarray:
    """``exp(-1/(1-t^2))`` for ``|t| < 1``, zero otherwise."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def bump_field(center, radius_: float, amplitude: Polynomial | None = None, seed=None,
               degree: int = 2) -> CliffordField:
    """``u(x) = b(|x - center| / radius) P(x)`` with ``b(t) = exp(-1/(1-t^2))``.

    Without an explicit amplitude, ``P`` is a random polynomial of degree
    ``degree`` (at most 2) drawn from ``seed``.
    """
    c = np.asarray(center, dtype=float)
    n = check_dim(c.size)
    rho = float(radius_)
    if not rho > 0:
        raise ConfigurationError(f"bump radius must be positive, got {radius_}")
    if amplitude is None:
        if degree not in (0, 1, 2):
            raise ConfigurationError("bump amplitude degree must be 0, 1 or 2")
        amplitude = random_polynomial(n, degree, np.random.default_rng(seed))
    P = amplitude

    def profile(X):
        Y = X - c
        s = np.sum(Y * Y, axis=1) / rho**2
        inside = s < 1.0
        b = np.zeros(len(X))
        db = np.zeros(len(X))
        q = 1.0 - s[inside]
        b[inside] = np.exp(-1.0 / q)
        # d_j b = -2 b y_j / (rho^2 (1 - t^2)^2)
        db[inside] = -2.0 * b[inside] / (rho**2 * q**2)
        return Y, b, db

    def value(X):
        _, b, _ = profile(X)
        return b[:, None] * P.values(X)

    def partials(X):
        Y, b, db = profile(X)
        PV = P.values(X)
        dP = P.partials(X)
        return np.stack([(db * Y[:, j])[:, None] * PV + b[:, None] * dP[j] for j in range(n)])

    return CliffordField(n, value, partials, support=(c.copy(), rho), name="bump")


# -- Kelvin transform ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KelvinField(CliffordField):
    source: CliffordField | None = None


def kelvin(g: CliffordField) -> KelvinField:
    """``(K g)(x) = (x / |x|^n) g(x / |x|^2)``.

    Partials use the chain rule when ``g`` has analytic partials and finite
    differences otherwise. Polynomials are accepted directly and kept as ``source``.
    """
    source = g
    if isinstance(g, Polynomial):
        g = g.as_field(type(g).__name__.lower())
    n = g.n

    def value(X):
        r2 = np.sum(X * X, axis=1)
        J = X * (r2 ** (-n / 2))[:, None]
        return vec_left_batch(J, g.values(X / r2[:, None]), n)

    def partials(X):
        r2 = np.sum(X * X, axis=1)
        Y = X / r2[:, None]
        gy = g.values(Y)
        Gy = g.grad(Y)
        rn = r2 ** (-n / 2)
        xg = vec_left_batch(X, gy, n)
        J = X * rn[:, None]
        out = np.empty((n, len(X), 1 << n))
        for i in range(n):
            # d_i J = e_i r^-n - n x_i r^-(n+2) x ;  d_i y_j = delta_ij r^-2 - 2 x_i x_j r^-4
            dJ_g = rn[:, None] * gen_left_batch(i + 1, gy, n) - (n * X[:, i] * rn / r2)[:, None] * xg
            dy = -2.0 * (X[:, i] / r2**2)[:, None] * X
            dy[:, i] += 1.0 / r2
            chain = np.einsum("jnd,nj->nd", Gy, dy)
            out[i] = dJ_g + vec_left_batch(J, chain, n)
        return out

    return KelvinField(
        n, value, partials if g.partials is not None else None,
        singular=_origin_mask, name=f"kelvin({g.name})", source=source,
    )
