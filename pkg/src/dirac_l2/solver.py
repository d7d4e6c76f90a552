"""Discrete weighted minimal-norm solver for ``Du = f``, the Poisson composition, and
the cutoff sequence showing the Gaussian constant 1/4 cannot be improved.

Grid functions live on cell centres of a uniform box grid restricted to an
active mask; values are flattened as ``cell * 2**n + blade``. Equations are
posed on cells whose stencil stays inside the mask, unknowns on every active
cell, so the discrete operator has a null space (discrete monogenics) just as
the continuous one does.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import cg

from .clifford import check_dim, generator_matrix
from .errors import ConfigurationError
from .fields import CliffordField, Weight, dirac_array
from .quadrature import Domain, closed_form_radial, gauss_legendre, sphere_area

RESIDUAL_TOL = 1e-8
CG_RTOL = 1e-11

BOUNDS = {"gauss": 0.25, "x1sq": 0.5, "aniso": 1.0 / 3.0, "poisson": 1.0 / 16.0}


@dataclass(frozen=True, eq=False)
class Grid:
    n: int
    lo: np.ndarray
    h: float
    shape: tuple[int, ...]
    mask: np.ndarray
    index: np.ndarray  # flat cell id per grid cell, -1 when inactive
    centers: np.ndarray  # (cells, n)

    @property
    def cells(self) -> int:
        return len(self.centers)

    @property
    def unknowns(self) -> int:
        return self.cells << self.n

    def sample(self, u: CliffordField, cells: np.ndarray | None = None) -> np.ndarray:
        X = self.centers if cells is None else self.centers[cells]
        return u.values(X).reshape(-1)


def make_grid(dom: Domain, cells_per_axis: int) -> Grid:
    """Cell-centred grid over the bounding box of ``dom``; a cell is active when its centre lies in ``dom``."""
    n = check_dim(dom.n)
    N = int(cells_per_axis)
    if N < 3:
        raise ConfigurationError("need at least 3 cells per axis")
    if dom.kind == "box":
        lo, hi = (np.asarray(p, dtype=float) for p in dom.params)
        widths = hi - lo
        if not np.allclose(widths, widths[0]):
            raise ConfigurationError("solver grids need a cubic box")
    else:
        r1 = dom.params[1]
        lo, hi = np.full(n, -r1), np.full(n, r1)
    h = float((hi[0] - lo[0]) / N)
    axes = [lo[j] + h * (np.arange(N) + 0.5) for j in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    mask = dom.contains_points(pts).reshape((N,) * n)
    labels, count = ndimage.label(mask)
    if count != 1:
        raise ConfigurationError(f"active cells form {count} components; refine the grid")
    index = np.full(mask.shape, -1, dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()))
    return Grid(n, lo, h, (N,) * n, mask, index, pts[mask.reshape(-1)])


@dataclass(frozen=True, eq=False)
class DiscreteDirac:
    grid: Grid
    A: sp.csr_matrix
    rows: np.ndarray  # cell ids carrying an equation
    w_cols: np.ndarray  # mass per unknown
    w_rows: np.ndarray  # mass per equation

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.A @ u

    def norm_sq(self, v: np.ndarray, on_rows: bool = False) -> float:
        w = self.w_rows if on_rows else self.w_cols
        return float(np.sum(w * v * v))


def _neighbour(grid: Grid, axis: int, offset: int) -> np.ndarray:
    """Cell id of the neighbour at ``offset`` along ``axis`` for every active cell (-1 if absent)."""
    pad = 2
    padded = np.pad(grid.index, pad, constant_values=-1)
    sl = [slice(pad, pad + s) for s in grid.shape]
    sl[axis] = slice(pad + offset, pad + offset + grid.shape[axis])
    return padded[tuple(sl)][grid.mask]


def derivative_matrix(grid: Grid, axis: int, rows: np.ndarray, one_sided: bool) -> sp.csr_matrix:
    """d/dx_axis on ``rows``: central where both neighbours exist, else second-order one-sided."""
    p1, m1 = _neighbour(grid, axis, 1)[rows], _neighbour(grid, axis, -1)[rows]
    p2, m2 = _neighbour(grid, axis, 2)[rows], _neighbour(grid, axis, -2)[rows]
    r = np.arange(len(rows))
    central = (p1 >= 0) & (m1 >= 0)
    fwd = ~central & (p1 >= 0) & (p2 >= 0)
    bwd = ~central & ~fwd & (m1 >= 0) & (m2 >= 0)
    if not one_sided and not np.all(central):
        raise ConfigurationError("interior rows must have both neighbours")
    if np.any(~(central | fwd | bwd)):
        raise ConfigurationError(f"fewer than 3 active cells along axis {axis + 1} at some cell")
    I, J, V = [], [], []

    def add(sel, cols, coef):
        I.append(r[sel])
        J.append(cols[sel])
        V.append(np.full(int(sel.sum()), coef / (2.0 * grid.h)))

    add(central, p1, 1.0)
    add(central, m1, -1.0)
    c = rows
    add(fwd, c, -3.0)
    add(fwd, p1, 4.0)
    add(fwd, p2, -1.0)
    add(bwd, c, 3.0)
    add(bwd, m1, -4.0)
    add(bwd, m2, 1.0)
    return sp.csr_matrix((np.concatenate(V), (np.concatenate(I), np.concatenate(J))), shape=(len(rows), grid.cells))


def interior_rows(grid: Grid) -> np.ndarray:
    ok = np.ones(grid.cells, dtype=bool)
    for j in range(grid.n):
        ok &= (_neighbour(grid, j, 1) >= 0) & (_neighbour(grid, j, -1) >= 0)
    return np.flatnonzero(ok)


def discretize_dirac(grid: Grid, w: Weight, closure: str = "interior") -> DiscreteDirac:
    """``A = sum_j D_j (x) E_j`` with ``E_j`` the matrix of left multiplication by ``e_j``.

    ``closure="interior"`` poses equations only where central differences fit;
    ``closure="one_sided"`` adds every active cell using one-sided second-order stencils.
    """
    if closure not in ("interior", "one_sided"):
        raise ConfigurationError(f"unknown closure {closure!r}")
    n = grid.n
    rows = interior_rows(grid) if closure == "interior" else np.arange(grid.cells)
    if len(rows) == 0:
        raise ConfigurationError("grid has no interior cells")
    A = sum(sp.kron(derivative_matrix(grid, j, rows, closure == "one_sided"), sp.csr_matrix(generator_matrix(n, j + 1)))
            for j in range(n))
    mass = np.exp(-w.values(grid.centers)) * grid.h**n
    dim = 1 << n
    return DiscreteDirac(grid, sp.csr_matrix(A), rows, np.repeat(mass, dim), np.repeat(mass[rows], dim))


@dataclass
class SolveReport:
    residual: float
    rel_residual: float
    norm_ratio: float
    iterations: int
    h: float
    bound_expected: float | None
    converged: bool
    unknowns: int
    diagnostic: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _cg(S: sp.csr_matrix, b: np.ndarray, rtol: float) -> tuple[np.ndarray, int, int]:
    count = [0]

    def cb(_):
        count[0] += 1

    d = S.diagonal()
    d[d == 0] = 1.0
    M = sp.diags(1.0 / d)
    x, info = cg(S, b, rtol=rtol, atol=0.0, maxiter=10 * len(b), M=M, callback=cb)
    return x, info, count[0]


def minimal_norm_solve(dd: DiscreteDirac, f: np.ndarray, bound: float | None = None,
                       rtol: float = CG_RTOL) -> tuple[np.ndarray, SolveReport]:
    """``argmin u^T W u`` subject to ``A u = f`` via ``(A W^-1 A^T) lam = f``, ``u = W^-1 A^T lam``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (dd.A.shape[0],):
        raise ConfigurationError(f"f has shape {f.shape}, expected ({dd.A.shape[0]},)")
    fnorm = dd.norm_sq(f, on_rows=True)
    if fnorm == 0.0:
        return np.zeros(dd.A.shape[1]), SolveReport(0.0, 0.0, 0.0, 0, dd.grid.h, bound, True, dd.A.shape[1])
    winv = 1.0 / dd.w_cols
    S = (dd.A @ sp.diags(winv) @ dd.A.T).tocsr()
    lam, info, its = _cg(S, f, rtol)
    u = winv * (dd.A.T @ lam)
    r = dd.A @ u - f
    res = math.sqrt(dd.norm_sq(r, on_rows=True))
    rel = res / math.sqrt(fnorm)
    ok = info == 0 and rel <= RESIDUAL_TOL
    diag = "" if ok else f"CG info={info} after {its} iterations, relative residual {rel:.3e}"
    return u, SolveReport(res, rel, dd.norm_sq(u) / fnorm, its, dd.grid.h, bound, ok, dd.A.shape[1], diag)


def null_vector(dd: DiscreteDirac, rng: np.random.Generator, rtol: float = CG_RTOL) -> np.ndarray:
    """W-orthogonal projection of a random vector onto ``ker A``."""
    r = rng.standard_normal(dd.A.shape[1])
    winv = 1.0 / dd.w_cols
    S = (dd.A @ sp.diags(winv) @ dd.A.T).tocsr()
    mu, _, _ = _cg(S, dd.A @ r, rtol)
    return r - winv * (dd.A.T @ mu)


def w_orthogonality(dd: DiscreteDirac, u: np.ndarray, z: np.ndarray) -> float:
    """``|u^T W z| / (|u|_W |z|_W)``."""
    return abs(float(np.sum(dd.w_cols * u * z))) / math.sqrt(dd.norm_sq(u) * dd.norm_sq(z))


def restrict_to_rows(dd: DiscreteDirac, u: np.ndarray) -> np.ndarray:
    dim = 1 << dd.grid.n
    return u.reshape(-1, dim)[dd.rows].reshape(-1)


def poisson_solve(dd: DiscreteDirac, f: np.ndarray, dd_inner: DiscreteDirac | None = None
                  ) -> tuple[np.ndarray, SolveReport]:
    """``v`` = minimal solution of ``Dv = f``; ``u`` = minimal solution of ``Du = -v``; then ``Laplacian_h u = f``.

    The discrete Laplacian is ``-A_2 A_1`` where ``A_2`` is the Dirac operator on the
    equation cells of ``A_1``; its residual is reported on the cells where it is defined.
    """
    v, rep_v = minimal_norm_solve(dd, f)
    u, rep_u = minimal_norm_solve(dd, -restrict_to_rows(dd, v))
    fnorm = dd.norm_sq(f, on_rows=True)
    ratio = dd.norm_sq(u) / fnorm if fnorm else 0.0
    extra = {"ratio_first": rep_v.norm_ratio, "ratio_second": rep_u.norm_ratio}
    if dd_inner is not None and fnorm:
        lap = -(dd_inner.A @ (dd.A @ u))
        f_in = _restrict_between(dd, dd_inner, f)
        extra["laplacian_residual"] = math.sqrt(dd_inner.norm_sq(lap - f_in, on_rows=True) / dd_inner.norm_sq(f_in, on_rows=True))
        if _is_real(f, dd.grid.n):
            re_u = _real_part(u, dd.grid.n)
            lap_re = -(dd_inner.A @ (dd.A @ re_u))
            extra["real_part_residual"] = math.sqrt(dd_inner.norm_sq(lap_re - f_in, on_rows=True) / dd_inner.norm_sq(f_in, on_rows=True))
            extra["real_part_norm_ratio"] = dd.norm_sq(re_u) / max(dd.norm_sq(u), 1e-300)
    conv = rep_v.converged and rep_u.converged
    diag = "; ".join(d for d in (rep_v.diagnostic, rep_u.diagnostic) if d)
    return u, SolveReport(
        rep_u.residual, rep_u.rel_residual, ratio, rep_v.iterations + rep_u.iterations, dd.grid.h,
        BOUNDS["poisson"], conv, dd.A.shape[1], diag, extra,
    )


def _is_real(f: np.ndarray, n: int) -> bool:
    F = f.reshape(-1, 1 << n)
    return not np.any(F[:, 1:])


def _real_part(u: np.ndarray, n: int) -> np.ndarray:
    U = u.reshape(-1, 1 << n).copy()
    U[:, 1:] = 0.0
    return U.reshape(-1)


def second_dirac(dd: DiscreteDirac, w: Weight) -> DiscreteDirac:
    """Dirac operator from the equation cells of ``dd`` to their own interior."""
    grid = dd.grid
    sub_mask = np.zeros(grid.cells, dtype=bool)
    sub_mask[dd.rows] = True
    mask = np.zeros(grid.mask.shape, dtype=bool)
    mask[grid.mask] = sub_mask
    index = np.full(mask.shape, -1, dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()))
    sub = Grid(grid.n, grid.lo, grid.h, grid.shape, mask, index, grid.centers[dd.rows])
    return discretize_dirac(sub, w)


def _restrict_between(dd: DiscreteDirac, dd_inner: DiscreteDirac, f: np.ndarray) -> np.ndarray:
    dim = 1 << dd.grid.n
    return f.reshape(-1, dim)[dd_inner.rows].reshape(-1)


def laplacian_consistency(grid: Grid, w: Weight, u: CliffordField, lap_u: CliffordField) -> float:
    """Max error of ``-A_2 A_1 u`` against the exact Laplacian on the inner cells."""
    dd = discretize_dirac(grid, w)
    inner = second_dirac(dd, w)
    got = -(inner.A @ (dd.A @ grid.sample(u)))
    exact = lap_u.values(inner.grid.centers[inner.rows]).reshape(-1)
    return float(np.max(np.abs(got - exact)))


def dirac_consistency(grid: Grid, w: Weight, u: CliffordField, closure: str = "interior") -> float:
    """Max error of ``A u`` against ``D u`` on the equation cells."""
    dd = discretize_dirac(grid, w, closure)
    got = dd.A @ grid.sample(u)
    exact = dirac_array(u, grid.centers[dd.rows]).reshape(-1)
    return float(np.max(np.abs(got - exact)))


def convergence_order(errors) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


def discretization_deltas(ratios, bound: float) -> list[float]:
    """``delta_h = |ratio_h - ratio_{h/2}| / bound`` for consecutive refinement levels."""
    r = np.asarray(ratios, dtype=float)
    return list(np.abs(np.diff(r)) / bound)


# -- cutoff sequence -------------------------------------------------------

def smoothstep(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quintic ``s(t) = 6t^5 - 15t^4 + 10t^3`` on [0, 1] and its derivative."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t), 30.0 * t * t * (1.0 - t) ** 2


def cutoff(m: float, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``chi_m`` and ``chi_m'``: 0 below 1/m, 1 on [2/m, m], 0 above 2m, quintic in log r between."""
    r = np.asarray(r, dtype=float)
    chi = np.zeros_like(r)
    dchi = np.zeros_like(r)
    L = math.log(2.0)
    inner = (r > 1.0 / m) & (r < 2.0 / m)
    s, ds = smoothstep(np.log(r[inner] * m) / L)
    chi[inner], dchi[inner] = s, ds / (r[inner] * L)
    chi[(r >= 2.0 / m) & (r <= m)] = 1.0
    outer = (r > m) & (r < 2.0 * m)
    s, ds = smoothstep(np.log(r[outer] / m) / L)
    chi[outer], dchi[outer] = 1.0 - s, -ds / (r[outer] * L)
    return chi, dchi


@dataclass
class SharpnessRow:
    m: float
    norm_w_sq: float
    norm_delta_sq: float
    ratio: float
    sup_r_dchi: float


GAUSS_R = 12.0  # e^{-r^2} r^(n+3) is below 1e-50 beyond this for n <= 12


def _radial_rule(breaks, nodes: int = 64) -> tuple[np.ndarray, np.ndarray]:
    pts = sorted(set(breaks))
    parts = [gauss_legendre(a, b, nodes) for a, b in zip(pts[:-1], pts[1:]) if b > a]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sharpness_sequence(n: int, m_list, nodes: int = 64) -> list[SharpnessRow]:
    """Ratios ``|chi_m x|^2 / |delta_phi(chi_m x)|^2`` for ``phi = |x|^2``.

    ``delta_phi(chi x) = chi (2|x|^2 - n) - |x| chi'`` is scalar and radial, so both
    norms are one-dimensional integrals times ``sigma_{n-1}``.
    """
    n = check_dim(n)
    sigma = sphere_area(n)
    rows = []
    for m in m_list:
        if not m > 1:
            raise ConfigurationError(f"cutoff index must exceed 1, got {m}")
        top = min(2.0 * m, GAUSS_R)
        breaks = [1.0 / m, 2.0 / m, top] + [float(k) for k in range(1, int(top) + 1)]
        if m < GAUSS_R:
            breaks.append(float(m))
        r, wr = _radial_rule([b for b in breaks if 1.0 / m <= b <= top], nodes)
        chi, dchi = cutoff(m, r)
        dens = wr * r ** (n - 1) * np.exp(-r * r) * sigma
        nw = float(np.sum(dens * chi**2 * r * r))
        nd = float(np.sum(dens * (chi * (2.0 * r * r - n) - r * dchi) ** 2))
        rows.append(SharpnessRow(float(m), nw, nd, nw / nd, float(np.max(np.abs(r * dchi)))))
    return rows


def gaussian_moment_checks(n: int, nodes: int = 64) -> dict:
    """``|x|^2_phi = sigma Gamma(n/2+1)/2`` and ``|2|x|^2 - n|^2_phi = 4 |x|^2_phi`` by quadrature and closed form."""
    sigma = sphere_area(n)
    closed_x = 0.5 * sigma * math.gamma(n / 2 + 1)
    cf = lambda p: closed_form_radial(("power_times_gaussian", p), (0.0, math.inf), n)  # noqa: E731
    closed_u0 = 4.0 * cf(n + 3) - 4.0 * n * cf(n + 1) + n * n * cf(n - 1)
    r, wr = _radial_rule([0.0] + [float(k) for k in range(1, int(GAUSS_R) + 1)], nodes)
    dens = wr * r ** (n - 1) * np.exp(-r * r) * sigma
    quad_x = float(np.sum(dens * r * r))
    quad_u0 = float(np.sum(dens * (2.0 * r * r - n) ** 2))
    return {
        "norm_x_sq_closed": closed_x,
        "norm_x_sq_incomplete_gamma": cf(n + 1),
        "norm_x_sq_quadrature": quad_x,
        "norm_u0_sq_closed": closed_u0,
        "norm_u0_sq_quadrature": quad_u0,
        "rel_err_x": abs(quad_x - closed_x) / closed_x,
        "rel_err_u0_vs_4x": abs(closed_u0 - 4.0 * closed_x) / (4.0 * closed_x),
        "rel_err_u0_quadrature": abs(quad_u0 - 4.0 * closed_x) / (4.0 * closed_x),
    }


# -- refinement studies ----------------------------------------------------

@dataclass
class LevelResult:
    cells_per_axis: int
    report: SolveReport
    delta_h: float | None = None


def solve_levels(dom: Domain, w: Weight, source: CliffordField, levels, bound: float,
                 poisson: bool = False) -> list[LevelResult]:
    """Minimal-norm (or Poisson) solves of ``A u = A g`` across refinement levels."""
    out = []
    for N in levels:
        grid = make_grid(dom, N)
        dd = discretize_dirac(grid, w)
        f = dd.A @ grid.sample(source)
        if poisson:
            _, rep = poisson_solve(dd, f, second_dirac(dd, w))
        else:
            _, rep = minimal_norm_solve(dd, f, bound)
        out.append(LevelResult(N, rep))
    deltas = discretization_deltas([lv.report.norm_ratio for lv in out], bound)
    for lv, d in zip(out[1:], deltas):
        lv.delta_h = d
    return out
