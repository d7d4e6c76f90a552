"""Command-line batch runner: ``dirac-l2 {verify,obstruction,solve,sharpness,rerun}``.

Exit status: 0 when every entry passes, 1 when any fails, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import identities as idl
from . import obstruction as obs
from . import solver as sv
from .errors import ConfigurationError, DomainError, PreconditionError, UsageError
from .fields import (
    bump_field,
    gen_monogenic_poly,
    kelvin,
    linear_weight,
    multiplier_canonical,
    multiplier_perturbed,
    multiplier_radial,
    multiplier_single_quadratic,
    multiplier_zero,
    weight_builtin,
    zero_weight,
)
from .quadrature import Domain, QuadratureSpec, annulus, box, exterior_truncated
from .report import Entry, ReportFile, RunConfig, check, output_dir, write_report
from .seeding import trial_rng

IDENTITIES = ("duality", "bochner", "weighted", "general", "radial", "single_quadratic", "perturbed",
              "application", "apriori2d", "trace")
WEIGHTS = ("gauss", "x1sq", "log", "radial", "aniso", "zero", "linear")
MULTIPLIERS = ("zero", "canonical", "radial", "single_quadratic", "perturbed")

# weight forced by the identity, or the default when the identity accepts any weight
_DEFAULT_WEIGHT = {"radial": "radial", "single_quadratic": "x1sq", "perturbed": "aniso"}
_FORCED_WEIGHT = {"radial", "single_quadratic", "perturbed"}
_DEFAULT_DOMAIN = {"x1sq": "box:-1,1", "perturbed": "annulus:1.2,3", "log": "annulus:1.5,3"}

TRACE_TOL = 1e-12
KAPPA_K_TOL = 1e-12
SPHERE_MEAN_RADIUS = 2.0


# -- parsing helpers -------------------------------------------------------

def float_list(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",")]
    except ValueError:
        raise UsageError(f"malformed number list {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"malformed number list {text!r}")
    return vals


def int_list(text: str) -> list[int]:
    vals = float_list(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def parse_domain(spec: str, n: int) -> Domain:
    """``annulus:r0,r1``, ``exterior:r0,R`` or ``box:lo,hi`` (a cube)."""
    kind, _, rest = spec.partition(":")
    vals = float_list(rest) if rest else []
    if len(vals) != 2:
        raise UsageError(f"domain {spec!r} needs two numbers after the colon")
    try:
        if kind == "annulus":
            return annulus(n, *vals)
        if kind == "exterior":
            return exterior_truncated(n, *vals)
        if kind == "box":
            return box(np.full(n, vals[0]), np.full(n, vals[1]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"unknown domain kind {kind!r}; use annulus, exterior or box")


def make_weight(name: str, n: int, params: dict):
    if name == "gauss":
        return weight_builtin("radial_power", {"m": 2.0}, n)
    if name == "radial":
        return weight_builtin("radial_power", {"m": params.get("m", 2.0)}, n)
    if name == "x1sq":
        return weight_builtin("single_quadratic", None, n)
    if name == "log":
        return weight_builtin("log_radial", None, n)
    if name == "aniso":
        a = params.get("a") or default_aniso(n, params.get("eps", idl.EPS_DEFAULT))
        return weight_builtin("aniso_quadratic", {"a": a}, n)
    if name == "zero":
        return zero_weight(n)
    if name == "linear":
        return linear_weight(np.eye(n)[0])
    raise UsageError(f"unknown weight {name!r}")


def default_aniso(n: int, eps: float) -> list[float]:
    return [1.0 + eps * (1 if i % 2 == 0 else -1) for i in range(n)]


def _contains_origin(dom: Domain) -> bool:
    if dom.kind == "box":
        lo, hi = dom.params
        return bool(np.all(lo <= 0) and np.all(hi >= 0))
    return False


def _gradient_vanishes(weight: str, dom: Domain) -> bool:
    if weight == "zero":
        return True
    if weight == "linear":
        return False
    if weight == "x1sq":
        if dom.kind == "box":
            lo, hi = dom.params
            return bool(lo[0] <= 0 <= hi[0])
        return True
    return _contains_origin(dom)


def _validate_verify(cfg: RunConfig, dom: Domain) -> None:
    """Reject weight/domain combinations before any computation."""
    ident, weight = cfg.params["identity"], cfg.weight
    singular_weight = weight == "log" or (weight == "radial" and cfg.weight_params.get("m", 2.0) < 2)
    if (singular_weight or ident == "radial") and _contains_origin(dom):
        raise UsageError(f"weight {weight!r} is singular at the origin, which lies in the domain {cfg.domain!r}")
    if ident == "perturbed" and dom.params[0] <= 1.0 and dom.kind != "box":
        raise UsageError("perturbed coercivity needs a domain outside the closed unit ball")
    if ident == "perturbed" and dom.kind == "box":
        raise UsageError("perturbed coercivity needs an annulus or exterior domain outside the unit ball")
    mult = cfg.params.get("multiplier")
    needs_gradient = ident == "application" or (ident == "general" and mult in ("canonical", "perturbed"))
    if needs_gradient and _gradient_vanishes(weight, dom):
        raise UsageError(f"the gradient of weight {weight!r} vanishes somewhere in {cfg.domain!r}")
    if ident == "general" and mult == "radial" and _contains_origin(dom):
        raise UsageError("radial multiplier is singular at the origin")
    if ident in ("application", "apriori2d") and weight in ("radial",) and cfg.weight_params.get("m", 2.0) < 2 - cfg.n:
        raise UsageError("weight is not subharmonic")
    if ident == "apriori2d" and cfg.n != 2:
        raise UsageError("apriori2d needs --n 2")


def _multiplier(name: str, w, cfg: RunConfig):
    if name == "zero":
        return multiplier_zero(cfg.n)
    if name == "canonical":
        return multiplier_canonical(w)
    if name == "radial":
        return multiplier_radial(float(w.params.get("m", 2.0)), cfg.n)
    if name == "single_quadratic":
        return multiplier_single_quadratic(cfg.n)
    if name == "perturbed":
        return multiplier_perturbed(w)
    raise UsageError(f"unknown multiplier {name!r}")


def _default_multiplier(weight: str) -> str:
    return {"gauss": "radial", "radial": "radial", "x1sq": "single_quadratic", "aniso": "perturbed"}.get(
        weight, "canonical")


# -- subcommands -----------------------------------------------------------

def _timed(fn: Callable[[], Entry]) -> Entry:
    t0 = time.perf_counter()
    e = fn()
    e.wall_clock = time.perf_counter() - t0
    return e


def _identity_entry(rep: idl.IdentityReport, trial: int, tol: float | None) -> Entry:
    checks = []
    if rep.kind == "identity":
        checks.append(check("rel_residual", rep.rel_residual, "<=", tol if tol is not None else rep.tol))
    for k, v in rep.margins.items():
        checks.append(check(f"margin.{k}", v, ">=", -rep.est_error))
    return Entry("identity", rep.name, rep.to_dict(), checks, trial)


def _quad(cfg: RunConfig) -> QuadratureSpec | None:
    if cfg.params.get("identity") == "duality" and not cfg.quadrature:
        return None  # adaptive ladder
    base = idl.BUMP_SPEC
    q = dict(radial_nodes=base.radial_nodes, sphere_level=base.sphere_level, box_nodes=base.box_nodes,
             panel_ratio=base.panel_ratio)
    q.update(cfg.quadrature)
    return QuadratureSpec(**q)


def cmd_verify(cfg: RunConfig) -> ReportFile:
    p = cfg.params
    ident = p["identity"]
    trials = int(p.get("trials", 10))
    if trials < 1:
        raise UsageError("--trials must be at least 1")
    dom = parse_domain(cfg.domain, cfg.n)
    _validate_verify(cfg, dom)
    try:
        w = make_weight(cfg.weight, cfg.n, cfg.weight_params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    q = _quad(cfg)
    tol = cfg.tolerances.get("rel_residual")
    report = ReportFile(cfg)

    if ident == "weighted":
        try:
            kk = idl.KappaK.from_kappa(float(p.get("kappa", 1.0)), cfg.n)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        report.entries.append(Entry("kappa_k", "kappa_k_relation", {"kappa": kk.kappa, "k": kk.k,
                                                                     "c_kappa": kk.c_kappa},
                                    [check("relation_residual", kk.relation_residual(), "<=", KAPPA_K_TOL)]))
    mult = _multiplier(p["multiplier"], w, cfg) if ident == "general" else None

    def run(t: int) -> Entry:
        rng = trial_rng(cfg.seed, t)
        if ident == "trace":
            u = idl.random_bump(dom, rng)
            c, rho = u.support
            d = rng.standard_normal((100, cfg.n))
            X = c + d / np.linalg.norm(d, axis=1)[:, None] * (rho * rng.uniform(0, 1, 100) ** (1 / cfg.n))[:, None]
            margins, scale = idl.trace_margins(u, X)
            k = int(np.argmin(margins / np.maximum(scale, 1e-300)))
            return Entry("trace", "trace_inequality", {"min_margin": float(margins.min()),
                                                       "scale": float(scale.max())},
                         [check("scaled_margin", float(margins[k] / max(scale[k], 1e-300)), ">=", -TRACE_TOL)], t)
        u = idl.random_bump(dom, rng)
        if ident == "duality":
            v = idl.random_bump(dom, rng, center=u.support[0])
            rep = idl.check_adjoint_duality(u, v, w, dom, q)
        elif ident == "bochner":
            rep = idl.check_bochner(u, w, dom, q)
        elif ident == "weighted":
            rep = idl.check_weighted_identity(u, w, kk, dom, q)
        elif ident == "general":
            rep = idl.check_general_identity(u, w, mult, dom, q)
        elif ident == "radial":
            rep = idl.check_radial_identity(u, float(cfg.weight_params.get("m", 2.0)), dom, q)
        elif ident == "single_quadratic":
            rep = idl.check_single_quadratic(u, dom, q)
        elif ident == "perturbed":
            rep = idl.check_perturbed_coercivity(u, w.params["a"], dom, q, eps=float(p.get("eps", idl.EPS_DEFAULT)))
        elif ident == "application":
            rep = idl.check_general_application(u, w, dom, q, k=p.get("k"), eps=p.get("app_eps"))
        elif ident == "apriori2d":
            rep = idl.apriori_2d(u, w, dom, q)
        else:
            raise UsageError(f"unknown identity {ident!r}")
        return _identity_entry(rep, t, tol)

    for t in range(trials):
        report.entries.append(_timed(lambda: run(t)))
    return report


def cmd_obstruction(cfg: RunConfig) -> ReportFile:
    ns = cfg.params["n_list"]
    ms = cfg.params["m_list"]
    for n in ns:
        if n < 3:
            raise UsageError(f"n = {n}: the counterexample needs n >= 3 because the Laplacian of n log|x| is 0 "
                             "for n = 2")
    if any(m < 1 for m in ms):
        raise UsageError("m values must be positive integers")
    tol = {"crosscheck": obs.CROSSCHECK_TOL, "pointwise": obs.POINTWISE_TOL,
           "orthogonality": obs.ORTHOGONALITY_TOL, "spherical_mean": obs.SPHERICAL_MEAN_TOL, **cfg.tolerances}
    report = ReportFile(cfg)
    for n in ns:
        for m in ms:
            def run(n=n, m=m) -> Entry:
                res = obs.counterexample_quadrature_crosscheck(n, m)
                cc = res.quadrature_crosscheck
                checks = [check("ratio_exact", abs(res.ratio - m * m * n * (n - 2)), "==", 0.0),
                          check("ratio_from_norms", abs(res.norm_u_sq / res.weighted_f_integral - res.ratio) / res.ratio,
                                "<=", 1e-12)]
                if cc.get("status") != "unreachable":
                    for k, v in cc["rel_errors"].items():
                        checks.append(check(f"crosscheck.{k}", v, "<=", tol["crosscheck"]))
                    checks.append(check("pointwise_residual", cc["pointwise_residual"], "<=", tol["pointwise"]))
                pairings = {}
                for d in (0, 1, 2):
                    h = kelvin(gen_monogenic_poly(n, d, seed=trial_rng(cfg.seed, d, stream=n)))
                    pairings[f"degree_{d}"] = {
                        "orthogonality": obs.orthogonality_check(n, m, h),
                        "spherical_mean": obs.spherical_mean_zero(h, SPHERE_MEAN_RADIUS),
                    }
                    checks.append(check(f"orthogonality.degree_{d}", pairings[f"degree_{d}"]["orthogonality"], "<=",
                                        tol["orthogonality"]))
                    checks.append(check(f"spherical_mean.degree_{d}", pairings[f"degree_{d}"]["spherical_mean"], "<=",
                                        tol["spherical_mean"]))
                values = {**res.to_dict(), "expected_ratio": m * m * n * (n - 2), "pairings": pairings}
                return Entry("obstruction", f"n={n},m={m}", values, checks)

            report.entries.append(_timed(run))
    return report


def _solve_setup(cfg: RunConfig):
    n = cfg.n
    kind = cfg.weight
    if kind == "gauss":
        w = weight_builtin("radial_power", {"m": 2.0}, n)
    elif kind == "x1sq":
        w = weight_builtin("single_quadratic", None, n)
    elif kind == "aniso":
        w = weight_builtin("aniso_quadratic", {"a": cfg.weight_params["a"]}, n)
    else:
        raise UsageError(f"solve supports weights gauss, x1sq and aniso, not {kind!r}")
    dom = parse_domain(cfg.domain, n)
    rng = trial_rng(cfg.seed, 0)
    if dom.kind == "box":
        lo, hi = dom.params
        c = 0.5 * (lo + hi)
        rho = 0.4 * float(np.min(hi - lo))
    else:
        r0, r1 = dom.params
        c = np.zeros(n)
        c[0] = 0.5 * (r0 + r1)
        rho = 0.45 * (r1 - r0)
    return w, dom, bump_field(c, rho, seed=rng)


def cmd_solve(cfg: RunConfig) -> ReportFile:
    p = cfg.params
    poisson = bool(p.get("poisson", False))
    levels = int(p.get("levels", 3))
    if levels < 2:
        raise UsageError("--levels must be at least 2 so that delta_h is defined")
    base = int(p.get("base", 16 if poisson else 8))
    sizes = [base << k for k in range(levels)]
    try:
        w, dom, src = _solve_setup(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bound = sv.BOUNDS["poisson" if poisson else cfg.weight]
    res_tol = cfg.tolerances.get("residual", sv.RESIDUAL_TOL)
    report = ReportFile(cfg)
    results = []
    for N in sizes:
        t0 = time.perf_counter()
        try:
            grid = sv.make_grid(dom, N)
            dd = sv.discretize_dirac(grid, w)
        except ValueError as exc:
            raise UsageError(f"grid with {N} cells per axis: {exc}") from None
        f = dd.A @ grid.sample(src)
        if poisson:
            _, rep = sv.poisson_solve(dd, f, sv.second_dirac(dd, w))
        else:
            _, rep = sv.minimal_norm_solve(dd, f, bound)
        results.append((N, rep, time.perf_counter() - t0))
    deltas = sv.discretization_deltas([r.norm_ratio for _, r, _ in results], bound)
    for k, (N, rep, wall) in enumerate(results):
        delta = deltas[max(k - 1, 0)]
        checks = [check("converged", float(rep.converged), "==", 1.0),
                  check("rel_residual", rep.rel_residual, "<=", res_tol),
                  check("ratio_vs_bound", rep.norm_ratio, "<=", bound * (1.0 + delta))]
        if poisson:
            checks.append(check("laplacian_residual", rep.extra.get("laplacian_residual", math.nan), "<=", res_tol))
        e = Entry("solve", f"N={N}", {**rep.to_dict(), "cells_per_axis": N, "delta_h": delta, "bound": bound}, checks)
        e.wall_clock = wall
        report.entries.append(e)
    trend = [check(f"delta_decreasing.{k}", deltas[k] - deltas[k + 1], ">", 0.0) for k in range(len(deltas) - 1)]
    report.entries.append(Entry("solve_trend", "delta_h", {"deltas": deltas, "sizes": sizes}, trend))
    return report


def cmd_sharpness(cfg: RunConfig) -> ReportFile:
    n = cfg.n
    ms = cfg.params["m_list"]
    if any(m <= 1 for m in ms):
        raise UsageError("cutoff indices must exceed 1")
    if list(ms) != sorted(ms):
        raise UsageError("cutoff indices must be increasing")
    tol = {"moments": 1e-6, "final_ratio": 0.24, "monotone": 1e-12, **cfg.tolerances}
    report = ReportFile(cfg)
    t0 = time.perf_counter()
    rows = sv.sharpness_sequence(n, ms)
    for r in rows:
        report.entries.append(Entry("sharpness", f"m={r.m:g}", {**vars(r)}, [check("ratio_le_quarter", r.ratio, "<=", 0.25)]))
    ratios = [r.ratio for r in rows]
    checks = [check(f"monotone.{k}", ratios[k + 1] - ratios[k], ">=", -tol["monotone"]) for k in range(len(ratios) - 1)]
    checks.append(check("final_ratio", ratios[-1], ">=", tol["final_ratio"]))
    report.entries.append(Entry("sharpness_trend", "monotone", {"ratios": ratios}, checks,
                                wall_clock=time.perf_counter() - t0))
    t0 = time.perf_counter()
    mom = sv.gaussian_moment_checks(n)
    report.entries.append(Entry("moments", "gaussian_moments", mom, [
        check("norm_x_sq", mom["rel_err_x"], "<=", tol["moments"]),
        check("norm_u0_eq_4_norm_x", mom["rel_err_u0_vs_4x"], "<=", tol["moments"]),
        check("norm_u0_quadrature", mom["rel_err_u0_quadrature"], "<=", tol["moments"]),
        check("incomplete_gamma", abs(mom["norm_x_sq_incomplete_gamma"] - mom["norm_x_sq_closed"]) / mom["norm_x_sq_closed"],
              "<=", tol["moments"]),
    ], wall_clock=time.perf_counter() - t0))
    return report


COMMANDS = {"verify": cmd_verify, "obstruction": cmd_obstruction, "solve": cmd_solve, "sharpness": cmd_sharpness}


def execute(cfg: RunConfig) -> ReportFile:
    if cfg.command not in COMMANDS:
        raise UsageError(f"unknown command {cfg.command!r}")
    return COMMANDS[cfg.command](cfg)


# -- argument handling -----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    # output options are accepted before or after the subcommand
    common = _Parser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (default: $DIRAC_L2_OUTDIR or ./dirac_l2_out)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress the summary line")
    ap = _Parser(prog="dirac-l2", description="Weighted L2 estimates for the Dirac operator: checks and solves.",
                 parents=[common])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", parents=[common], help="integral identities and coercive estimates on random bumps")
    v.add_argument("--identity", choices=IDENTITIES, required=True)
    v.add_argument("--n", type=int, default=3)
    v.add_argument("--weight", choices=WEIGHTS)
    v.add_argument("--m", type=float, help="exponent of the radial weight |x|^m")
    v.add_argument("--a", help="comma-separated coefficients of the anisotropic weight")
    v.add_argument("--kappa", type=float, default=1.0)
    v.add_argument("--eps", type=float, default=idl.EPS_DEFAULT)
    v.add_argument("--multiplier", choices=MULTIPLIERS)
    v.add_argument("--k", type=float, help="k of the auxiliary inequality (application)")
    v.add_argument("--app-eps", type=float, help="eps of the auxiliary inequality (application)")
    v.add_argument("--domain", help="annulus:r0,r1 | exterior:r0,R | box:lo,hi")
    v.add_argument("--trials", type=int, default=10)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, help="override the relative residual tolerance")
    v.add_argument("--radial-nodes", type=int)
    v.add_argument("--sphere-level", type=int)

    o = sub.add_parser("obstruction", parents=[common], help="exterior counterexample table")
    o.add_argument("--n", default="3", help="comma-separated dimensions (>= 3)")
    o.add_argument("--m", default="1,3,10", help="comma-separated positive integers")
    o.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", parents=[common], help="discrete minimal-norm and Poisson solves over refinement levels")
    s.add_argument("--weight", choices=("gauss", "x1sq", "aniso"), default="gauss")
    s.add_argument("--a", help="comma-separated coefficients for --weight aniso")
    s.add_argument("--n", type=int)
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--base", type=int, help="cells per axis on the coarsest level")
    s.add_argument("--poisson", action="store_true")
    s.add_argument("--domain")
    s.add_argument("--seed", type=int, default=0)

    h = sub.add_parser("sharpness", parents=[common], help="cutoff sequence for the Gaussian constant")
    h.add_argument("--n", type=int, default=3)
    h.add_argument("--m", default="4,16,64")

    r = sub.add_parser("rerun", parents=[common], help="run a saved config (a config file or a report.json)")
    r.add_argument("path")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "seed", 0) < 0:
        raise UsageError("--seed must be non-negative")
    if args.command == "verify":
        ident = args.identity
        weight = args.weight or _DEFAULT_WEIGHT.get(ident, "gauss")
        if ident in _FORCED_WEIGHT and args.weight and args.weight != _DEFAULT_WEIGHT[ident]:
            raise UsageError(f"identity {ident!r} fixes the weight to {_DEFAULT_WEIGHT[ident]!r}")
        wp = {}
        if weight == "radial":
            m = 2.0 if args.m is None else args.m
            if m == 0:
                raise UsageError("--m must be nonzero")
            wp["m"] = m
        if weight == "aniso":
            wp["a"] = float_list(args.a) if args.a else default_aniso(args.n, args.eps)
            if len(wp["a"]) != args.n:
                raise UsageError(f"--a needs {args.n} coefficients")
        domain = args.domain or _DEFAULT_DOMAIN.get(ident) or _DEFAULT_DOMAIN.get(weight) or "annulus:1,2"
        params = {"identity": ident, "trials": args.trials}
        if ident == "weighted":
            params["kappa"] = args.kappa
        if ident == "perturbed":
            params["eps"] = args.eps
        if ident == "general":
            params["multiplier"] = args.multiplier or _default_multiplier(weight)
        if ident == "application" and (args.k is not None or args.app_eps is not None):
            if args.k is None or args.app_eps is None:
                raise UsageError("--k and --app-eps go together")
            params["k"], params["app_eps"] = args.k, args.app_eps
        quad = {}
        if args.radial_nodes:
            quad["radial_nodes"] = args.radial_nodes
        if args.sphere_level:
            quad["sphere_level"] = args.sphere_level
        tols = {"rel_residual": args.tol} if args.tol is not None else {}
        return RunConfig("verify", args.n, weight, wp, domain, quad, args.seed, tols, params)
    if args.command == "obstruction":
        return RunConfig("obstruction", seed=args.seed,
                         params={"n_list": int_list(args.n), "m_list": int_list(args.m)})
    if args.command == "solve":
        wp = {}
        n = args.n
        if args.weight == "aniso":
            a = float_list(args.a) if args.a else None
            if n is None:
                n = len(a) if a else 3
            wp["a"] = a or default_aniso(n, idl.EPS_DEFAULT)
            if len(wp["a"]) != n:
                raise UsageError(f"--a needs {n} coefficients")
        n = n or 3
        domain = args.domain or ("box:-1,1" if args.weight == "x1sq" else "annulus:1,2")
        params = {"levels": args.levels, "poisson": args.poisson}
        if args.base:
            params["base"] = args.base
        return RunConfig("solve", n, args.weight, wp, domain, {}, args.seed, {}, params)
    if args.command == "sharpness":
        return RunConfig("sharpness", args.n, "gauss", {}, None, {}, 0, {}, {"m_list": float_list(args.m)})
    raise UsageError(f"unknown command {args.command!r}")


def load_config(path: str) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path} does not hold a config object")
    try:
        return RunConfig.from_dict(doc.get("config", doc) if "schema_version" in doc else doc)
    except TypeError as exc:
        raise UsageError(f"{path} is not a valid config: {exc}") from None


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.path) if args.command == "rerun" else config_from_args(args)
        report = execute(cfg)
    except (UsageError, ConfigurationError, DomainError, PreconditionError) as exc:
        print(f"dirac-l2: usage error: {exc}", file=sys.stderr)
        return 2
    outdir = output_dir(getattr(args, "out", None))
    write_report(report, outdir)
    failed = sum(not e.passed for e in report.entries)
    if not getattr(args, "quiet", False):
        status = "PASS" if report.passed else "FAIL"
        print(f"{cfg.command}: {status} ({len(report.entries) - failed}/{len(report.entries)} entries passed) "
              f"-> {outdir / 'report.json'}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
