"""Bundled validation cases: FEM results against oracles and reference values.

Each case yields report rows ``case,config,oracle,fem,rel_error,tolerance,pass``.
For cases whose tolerance is an absolute band (``R = 6 +- 0.05``) the
``rel_error`` column carries the absolute deviation; for inequality checks it
carries the checked quantity and ``tolerance`` the bound it is compared to.
"""

from __future__ import annotations

import csv
import math
import random
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import minimize_scalar

from .assembly import assemble
from .coeffs import ProblemParams, parse_expr
from .eigsolver import lambda_of_alpha, principal_eigenpair
from .geometry import FourierShape, build_mesh
from .optimizer import Constraint, OptimOptions, disk_deviation, optimize, optimize_free_disk_check, random_shape
from .oracles import BRRProblem, RadialProblem, brr_speed, radial_speed
from .shape_grad import fourier_gradient
from .speed import lambda_prime, spreading_speed, sweep

REPORT_HEADER = ["case", "config", "oracle", "fem", "rel_error", "tolerance", "pass"]

REFERENCE_SPEEDS = {1.5: 0.9923449724, 3.0: 1.288082554}
SWEEP_RADII = np.geomspace(0.13, 50.0, 20)


@dataclass
class Row:
    case: str
    config: str
    oracle: float
    fem: float
    error: float
    tolerance: float
    passed: bool
    criterion: int = 0

    def as_list(self) -> list[str]:
        return [self.case, self.config, f"{self.oracle:.12g}", f"{self.fem:.12g}", f"{self.error:.6g}",
                f"{self.tolerance:.6g}", "true" if self.passed else "false"]


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _reference_params(D: float) -> ProblemParams:
    return ProblemParams(d=1.0, D=D, f_lin=0.5, g_lin=0.0)


def _disk_speed(R: float, params: ProblemParams, h_rel: float = 0.11):
    return spreading_speed(build_mesh(FourierShape.circle(R), h_rel * R), params)


# -- criteria 1 and 2 -------------------------------------------------------


def case_reference_disk(D: float, fine: bool = True) -> list[Row]:
    crit = 1 if D == 1.5 else 2
    rows = []
    levels = [(0.11, 2e-4)] + ([(0.022, 2e-5)] if fine else [])
    for h, tol in levels:
        mesh = build_mesh(FourierShape.circle(1.0), h)
        c = spreading_speed(mesh, _reference_params(D)).c_star
        err = _rel(c, REFERENCE_SPEEDS[D])
        rows.append(Row(f"ref_disk_D{D:g}_n{mesh.n_vertices}", f"unit disk d=1 D={D:g} f=0.5 g=0 h={h:g}",
                        REFERENCE_SPEEDS[D], c, err, tol, err <= tol, crit))
    return rows


# -- criterion 3 ------------------------------------------------------------


def case_radius_sweep(radii: Iterable[float] = SWEEP_RADII, h_rel: float = 0.1) -> list[Row]:
    rows = []
    for D in (1.5, 3.0):
        params = _reference_params(D)
        pts = sweep(FourierShape.circle(1.0), params, "R", radii, target_h=h_rel)
        for p in pts:
            ref = radial_speed(RadialProblem(R=p.param, d=1.0, D=D, f_lin=0.5)).c_star
            c = p.result.c_star if p.result is not None else float("nan")
            err = _rel(c, ref) if p.result is not None else float("inf")
            rows.append(Row(f"radius_sweep_D{D:g}_R{p.param:.4g}", f"disk R={p.param:.6g} d=1 D={D:g} f=0.5 h={h_rel:g}R",
                            ref, c, err, 2e-4, err <= 2e-4, 3))
    return rows


# -- criterion 4 ------------------------------------------------------------


def case_optimal_disk() -> list[Row]:
    def neg(R):
        return -radial_speed(RadialProblem(R=R, d=1.0, D=3.0, f_lin=0.5, n=1000)).c_star

    res = minimize_scalar(neg, bounds=(3.0, 12.0), method="bounded", options={"xatol": 1e-4})
    R = float(res.x)
    c = radial_speed(RadialProblem(R=R, d=1.0, D=3.0, f_lin=0.5)).c_star
    cfg = "radial oracle d=1 D=3 f=0.5 g=0"
    return [
        Row("optimal_disk_R_star", cfg, 6.0, R, abs(R - 6.0), 0.05, abs(R - 6.0) <= 0.05, 4),
        Row("optimal_disk_c_M", cfg, 1.5, c, abs(c - 1.5), 1e-3, abs(c - 1.5) <= 1e-3, 4),
    ]


# -- criterion 5 ------------------------------------------------------------


def case_limits() -> list[Row]:
    rows = []
    p = ProblemParams(d=1.0, D=1.5, f_lin=0.5, g_lin=0.5)
    c = _disk_speed(0.05, p).c_star
    ref = 2.0 * math.sqrt(1.5 * 0.5)
    err = _rel(c, ref)
    rows.append(Row("small_R_limit", "disk R=0.05 d=1 D=1.5 f=0.5 g=0.5", ref, c, err, 0.05, err <= 0.05, 5))
    for D in (1.5, 3.0):
        c = _disk_speed(50.0, _reference_params(D)).c_star
        ref = brr_speed(BRRProblem(d=1.0, D=D, mu=1.0, nu=1.0, f0=0.5, g0=0.0))
        err = _rel(c, ref)
        rows.append(Row(f"large_R_limit_D{D:g}", f"disk R=50 d=1 D={D:g} f=0.5 g=0", ref, c, err, 0.02, err <= 0.02, 5))
    for R in (0.05, 0.02):
        r = _disk_speed(R, ProblemParams(d=1.0, D=1.5, f_lin=0.5, g_lin=-0.5))
        ok = (not r.persistent) and r.c_star == 0.0
        rows.append(Row(f"extinction_R{R:g}", f"disk R={R:g} d=1 D=1.5 f=0.5 g=-0.5", 0.0, r.c_star,
                        r.lambda0, 0.0, ok, 5))
    return rows


# -- criterion 6 ------------------------------------------------------------

COUNTER_D_GRID = (0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0)


def counterexample_params(D: float = 1.0) -> ProblemParams:
    return ProblemParams(d=1.0, D=D, f_lin=0.8, g_lin="y1-0.8")


def counterexample_lambda0(D: float = 1e4, h: float = 0.11) -> float:
    return lambda_of_alpha(build_mesh(FourierShape.circle(1.0), h), counterexample_params(D), 0.0).lam


def case_counterexample() -> list[Row]:
    pts = sweep(FourierShape.circle(1.0), counterexample_params(), "D", COUNTER_D_GRID, target_h=0.11)
    c = [p.result.c_star if p.result is not None else float("nan") for p in pts]
    # largest drop c(D1) - c(D2) over D1 < D2
    drop = max(c[i] - min(c[i + 1 :]) for i in range(len(c) - 1))
    rows = [Row("counterexample_nonmonotone", "unit disk d=1 f=0.8 g=y1-0.8, D grid 0.1..100",
                1e-3, drop, drop, 1e-3, drop > 1e-3, 6)]
    lam0 = counterexample_lambda0()
    mag = abs(lam0)
    ok = lam0 < 0 and 1.0e-3 <= mag <= 2.5e-3
    rows.append(Row("counterexample_lambda0_D1e4_magnitude", "unit disk d=1 f=0.8 g=y1-0.8 D=1e4 h=0.11",
                    1.66e-3, lam0, mag, 2.5e-3, ok, 6))
    return rows


# -- criterion 7 ------------------------------------------------------------


def fd_gradient_rows(f_lin: str, h: float = 0.05, delta: float = 1e-3) -> list[Row]:
    """Fourier gradient against central differences with a full remesh per side.

    The ring count is held fixed so that the perturbed meshes share topology.
    Coefficients whose FD derivative vanishes by symmetry are compared against
    ``1e-3 max_k |FD_k|`` instead of their own (roundoff-level) size.
    """
    params = ProblemParams(d=1.0, D=1.5, f_lin=f_lin, g_lin=0.0)
    shape = FourierShape(1.0, (0.0, 0.1, 0.0, 0.0, 0.0), (0.0,) * 5)
    mesh = build_mesh(shape, h)
    res = spreading_speed(mesh, params)
    grad = fourier_gradient(shape, mesh, params, res)
    v = shape.to_vector()
    fd = np.empty_like(v)
    for k in range(len(v)):
        c = []
        for s in (1.0, -1.0):
            w = v.copy()
            w[k] += s * delta
            c.append(spreading_speed(build_mesh(FourierShape.from_vector(w), h, mesh.n_rings), params,
                                     w0=res.pair.w).c_star)
        fd[k] = (c[0] - c[1]) / (2.0 * delta)
    floor = 1e-3 * np.max(np.abs(fd))
    M = shape.M
    names = ["a0"] + [f"a{k}" for k in range(1, M + 1)] + [f"b{k}" for k in range(1, M + 1)]
    rows = []
    for k, name in enumerate(names):
        err = abs(grad.dJ[k] - fd[k]) / max(abs(fd[k]), floor)
        rows.append(Row(f"shape_grad_{name}_f={f_lin}", f"rho=1+0.1cos2t d=1 D=1.5 f={f_lin} h={h:g}",
                        fd[k], grad.dJ[k], err, 1e-2, err <= 1e-2, 7))
    return rows


def case_shape_gradient() -> list[Row]:
    return fd_gradient_rows("0.5") + fd_gradient_rows("1+exp(-r^2)")


# -- criterion 8 ------------------------------------------------------------


def case_kato(alphas: Iterable[float] = (0.5, 1.0, 2.0), delta: float = 1e-4) -> list[Row]:
    mesh = build_mesh(FourierShape.circle(1.0), 0.11)
    p = _reference_params(1.5)
    rows = []
    for a in alphas:
        pair = lambda_of_alpha(mesh, p, a)
        der = lambda_prime(mesh, p, a, pair)
        fd = (lambda_of_alpha(mesh, p, a + delta, pair.w).lam - lambda_of_alpha(mesh, p, a - delta, pair.w).lam) / (
            2.0 * delta
        )
        err = _rel(der, fd)
        rows.append(Row(f"kato_alpha{a:g}", "unit disk ref-disk h=0.11", fd, der, err, 1e-6, err <= 1e-6, 8))
    return rows


# -- criterion 9 ------------------------------------------------------------


def case_properties(n_expr: int = 1000, seed: int = 0) -> list[Row]:
    rows = []
    mesh = build_mesh(FourierShape.circle(1.0), 0.11)
    p = _reference_params(1.5)

    lam = [lambda_of_alpha(mesh, p, a).lam for a in np.arange(0.2, 2.01, 0.2)]
    worst = min(lam[i] - 0.5 * (lam[i - 1] + lam[i + 1]) for i in range(1, len(lam) - 1))
    rows.append(Row("concavity_alpha_grid", "ref-disk alpha=0.2..2", 0.0, worst, worst, -1e-10, worst >= -1e-10, 9))

    cs = [spreading_speed(mesh, p.with_(kappa=parse_expr(t))).c_star for t in (1.0, 2.0, 4.0)]
    rise = max(cs[1] - cs[0], cs[2] - cs[1])
    rows.append(Row("kappa_doubling_monotone", "ref-disk kappa in {1,2,4}", 0.0, rise, rise, 1e-9, rise <= 1e-9, 9))

    pts = sweep(FourierShape.circle(1.0), p, "D", (0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0), target_h=0.11)
    cd = [q.result.c_star for q in pts]
    fall = max(cd[i] - cd[i + 1] for i in range(len(cd) - 1))
    rows.append(Row("radial_D_monotone", "unit disk f=0.5 g=0 D=0.5..10", 0.0, fall, fall, 1e-6, fall <= 1e-6, 9))

    q = [spreading_speed(mesh, p.with_(D=D)).c_star / math.sqrt(D) for D in (100.0, 400.0)]
    spread = abs(q[0] - q[1]) / max(q)
    rows.append(Row("large_D_sqrt_growth", "ref-disk D in {100,400}", q[0], q[1], spread, 0.25, spread <= 0.25, 9))

    forms = assemble(mesh, p, 1.0)
    pair = principal_eigenpair(forms, mesh.boundary)
    w = pair.w
    rq = float(w @ (forms.A @ w)) / float(w @ (forms.B @ w))
    err = _rel(rq, pair.lam)
    rows.append(Row("rayleigh_identity", "ref-disk alpha=1", pair.lam, rq, err, 1e-10, err <= 1e-10, 9))
    top = max(pair.V.max(), pair.U.max())
    low = min(pair.V.min(), pair.U.min()) / top
    rows.append(Row("eigenpair_positivity", "ref-disk alpha=1", 0.0, low, low, -1e-6, low >= -1e-6, 9))

    bad = parser_equivalence(n_expr, seed)
    rows.append(Row("parser_bruteforce", f"{n_expr} random expressions depth<=4", 0.0, float(bad), float(bad), 0.0,
                    bad == 0, 9))
    return rows


# random expression trees evaluated directly, independent of the parser
_FUNS1 = {"exp": math.exp, "tanh": math.tanh, "cos": math.cos, "sin": math.sin, "sqrt": math.sqrt, "abs": abs}
_FUNS2 = {"min": min, "max": max}


def random_expression(rng: random.Random, depth: int):
    """Return ``(source, value_fn)`` for a random expression of the given depth."""
    if depth == 0 or rng.random() < 0.2:
        choice = rng.random()
        if choice < 0.4:
            x = round(rng.uniform(-3, 3), rng.choice([0, 1, 3]))
            src = f"({x!r})" if x < 0 else repr(x)
            return src, lambda env, x=x: x
        name = rng.choice(["y1", "y2", "r", "theta"])
        return name, lambda env, n=name: env[n]
    kind = rng.random()
    if kind < 0.5:
        op = rng.choice("+-*/^")
        ls, lf = random_expression(rng, depth - 1)
        rs, rf = random_expression(rng, depth - 1)

        def fn(env, op=op, lf=lf, rf=rf):
            a, b = lf(env), rf(env)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                return a / b
            if a < 0 and b != int(b):
                raise ValueError("fractional power of a negative base")
            return a**b

        return f"({ls}){op}({rs})", fn
    if kind < 0.6:
        s, f = random_expression(rng, depth - 1)
        return f"-({s})", lambda env, f=f: -f(env)
    if kind < 0.85:
        name = rng.choice(sorted(_FUNS1))
        s, f = random_expression(rng, depth - 1)
        return f"{name}({s})", lambda env, g=_FUNS1[name], f=f: g(f(env))
    name = rng.choice(sorted(_FUNS2))
    s1, f1 = random_expression(rng, depth - 1)
    s2, f2 = random_expression(rng, depth - 1)
    return f"{name}({s1}, {s2})", lambda env, g=_FUNS2[name], f1=f1, f2=f2: g(f1(env), f2(env))


def _reference(fn, y) -> float | None:
    env = {"y1": y[0], "y2": y[1], "r": math.hypot(*y), "theta": math.atan2(y[1], y[0])}
    try:
        v = fn(env)
    except (ZeroDivisionError, ValueError, OverflowError):
        return None
    if isinstance(v, complex) or not math.isfinite(v):
        return None
    return float(v)


def parser_equivalence(n: int = 1000, seed: int = 0, points_per_expr: int = 3) -> int:
    """Number of random expressions where parser and brute-force evaluation disagree."""
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        src, fn = random_expression(rng, rng.randint(1, 4))
        e = parse_expr(src)
        for _ in range(points_per_expr):
            y = (rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            ref = _reference(fn, y)
            if ref is None:
                continue
            try:
                with np.errstate(all="ignore"):
                    got = float(e(np.array(y)))
            except ArithmeticError:
                bad += 1
                break
            if not (abs(got - ref) <= 1e-12 * max(1.0, abs(ref))):
                bad += 1
                break
    return bad


# -- criterion 10 -----------------------------------------------------------


def case_optimization(seed: int = 1) -> list[Row]:
    rows = []
    con = Constraint("area", math.pi)
    rng = np.random.default_rng(seed)
    run = optimize(random_shape(rng, 16, con), _reference_params(1.5), OptimOptions(constraint=con, M=16))
    dev = disk_deviation(run.shape)
    rows.append(Row("optim_max_area_pi", f"ref-disk M=16 seed={seed} iters={run.iterations} status={run.status}",
                    0.0, dev, dev, 0.02, dev <= 0.02, 10))

    chk = optimize_free_disk_check(ProblemParams(d=1.0, D=3.0, f_lin=0.5, g_lin=0.0))
    rows.append(Row("optim_free_disk_R", f"d=1 D=3 f=0.5 iters={chk.run.iterations}", 6.0, chk.R_hat,
                    abs(chk.R_hat - 6.0), 0.1, abs(chk.R_hat - 6.0) <= 0.1, 10))
    rows.append(Row("optim_free_disk_c", f"d=1 D=3 f=0.5 iters={chk.run.iterations}", 1.5, chk.c_hat,
                    abs(chk.c_hat - 1.5), 0.005, abs(chk.c_hat - 1.5) <= 0.005, 10))

    rng = np.random.default_rng(seed + 1)
    run = optimize(random_shape(rng, 16, con), ProblemParams(d=1.0, D=1.5, f_lin=1.0, g_lin=1.5),
                   OptimOptions(direction="minimize", constraint=con, M=16))
    dev = disk_deviation(run.shape)
    rows.append(Row("optim_min_area_pi", f"f=1 g=1.5 D=1.5 M=16 seed={seed + 1} iters={run.iterations} status={run.status}",
                    0.0, dev, dev, 0.02, dev <= 0.02, 10))
    return rows


# -- registry ----------------------------------------------------------------

CASES: dict[int, Callable[[], list[Row]]] = {
    1: lambda: case_reference_disk(1.5),
    2: lambda: case_reference_disk(3.0),
    3: case_radius_sweep,
    4: case_optimal_disk,
    5: case_limits,
    6: case_counterexample,
    7: case_shape_gradient,
    8: case_kato,
    9: case_properties,
    10: case_optimization,
}

SUITES = {
    "quick": (1, 2, 4, 5, 8),
    "standard": (1, 2, 3, 4, 5, 6, 7, 8, 9),
    "full": tuple(range(1, 11)),
}


def run_suite(name: str = "standard", log: Callable[[str], None] | None = None) -> list[Row]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    rows: list[Row] = []
    for crit in SUITES[name]:
        t = time.perf_counter()
        got = CASES[crit]()
        rows.extend(got)
        if log is not None:
            ok = all(r.passed for r in got)
            log(f"criterion {crit}: {'PASS' if ok else 'FAIL'} ({len(got)} cases, {time.perf_counter() - t:.0f}s)")
    return rows


def write_report(rows: Iterable[Row], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in rows:
            w.writerow(r.as_list())
