"""Projected gradient ascent/descent of the spreading speed over Fourier shapes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .coeffs import ProblemParams
from .eigsolver import EigenSolverError
from .geometry import (
    FourierShape,
    InvalidShapeError,
    MeshQualityError,
    build_mesh,
    project_area,
    project_perimeter,
    rings_for,
    write_shape,
)
from .shape_grad import ShapeGradient, fourier_gradient
from .speed import BracketError, SpeedOptions, SpeedResult, TrialRejected, spreading_speed

GROW = 1.5
SHRINK = 0.5
INVALID_RETRIES = 3

HISTORY_HEADER = ["iter", "c_star", "alpha_star", "dt", "area", "perimeter", "accepted"]


@dataclass(frozen=True)
class Constraint:
    kind: str = "none"  # none | area | perimeter
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "area", "perimeter"):
            raise ValueError(f"unknown constraint {self.kind!r}")
        if self.kind != "none" and not (self.value and self.value > 0):
            raise ValueError(f"{self.kind} constraint needs a positive target")

    def project(self, shape: FourierShape) -> FourierShape:
        if self.kind == "area":
            return project_area(shape, self.value)
        if self.kind == "perimeter":
            return project_perimeter(shape, self.value)
        return shape

    def measure(self, shape: FourierShape) -> float | None:
        if self.kind == "area":
            return shape.area()
        if self.kind == "perimeter":
            return shape.perimeter()
        return None

    def __str__(self) -> str:
        return self.kind if self.kind == "none" else f"{self.kind}({self.value:.17g})"


@dataclass
class OptimOptions:
    direction: str = "maximize"
    constraint: Constraint = field(default_factory=Constraint)
    M: int | None = None
    dt0: float = 0.1
    tol: float = 1e-6
    max_iters: int = 300
    # relative mesh size: the element count stays fixed along the run
    target_h: float = 0.11
    # stationarity test on the constraint-tangent gradient, relative to c*/a0
    grad_tol: float = 1e-6
    # stall test: relative gain over the last ``stall_window`` accepted iterates
    stall_window: int = 10
    stall_tol: float = 1e-6
    speed: SpeedOptions = field(default_factory=SpeedOptions)

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize"):
            raise ValueError("direction must be maximize or minimize")


@dataclass
class HistoryRow:
    iter: int
    c_star: float
    alpha_star: float | None
    dt: float
    area: float
    perimeter: float
    accepted: bool
    shape: FourierShape


@dataclass
class OptimRun:
    direction: str
    constraint: Constraint
    shapes: list[FourierShape] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    history: list[HistoryRow] = field(default_factory=list)
    status: str = "max_iters"
    iterations: int = 0
    solves: int = 0
    last_gradient: ShapeGradient | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> FourierShape:
        return self.shapes[-1]

    @property
    def c_star(self) -> float:
        return self.objectives[-1]


class _Evaluator:
    """Speed and gradient on a fixed mesh topology, warm-started between shapes."""

    def __init__(self, params: ProblemParams, target_h: float, n_rings: int, opts: SpeedOptions, threads: int = 1):
        self.params = params
        self.target_h = target_h
        self.n_rings = n_rings
        self.opts = opts
        self.threads = threads
        self.alpha = opts.alpha_init
        self.w = None
        self.solves = 0

    def __call__(self, shape: FourierShape):
        mesh = build_mesh(shape, self.target_h * shape.a0, self.n_rings)
        res = spreading_speed(mesh, self.params, replace(self.opts, alpha_init=self.alpha), w0=self.w)
        self.solves += res.evals
        if not res.persistent:
            return res, None
        return res, fourier_gradient(shape, mesh, self.params, res, threads=self.threads)

    def commit(self, res: SpeedResult):
        if res.persistent:
            self.alpha = res.alpha_star
            self.w = res.pair.w


def _tangent(grad: np.ndarray, shape: FourierShape, constraint: Constraint) -> np.ndarray:
    """Part of ``grad`` left after removing the constraint direction along ``v``.

    Area and perimeter are homogeneous in the coefficients (degrees 2 and 1),
    so the dilation direction ``v`` is transversal to the constraint set and
    ``grad - (grad . v)/(n_c . v) n_c`` (``n_c`` the constraint gradient)
    vanishes exactly when ``grad`` is a multiple of ``n_c``.
    """
    if constraint.kind == "none":
        return grad
    v = shape.to_vector()
    nc = _constraint_gradient(shape, constraint.kind)
    return grad - (grad @ v) / (nc @ v) * nc


def _constraint_gradient(shape: FourierShape, kind: str) -> np.ndarray:
    M = shape.M
    if kind == "area":
        # area = pi a0^2 + pi/2 sum(a_k^2 + b_k^2)
        return np.concatenate([[2 * math.pi * shape.a0], math.pi * np.asarray(shape.a), math.pi * np.asarray(shape.b)])
    # perimeter: int phi_k rho / |T| dtheta (first variation of the length)
    n = 4096
    th = 2 * math.pi * np.arange(n) / n
    rho, d1, _ = shape.eval(th)
    spd = np.hypot(rho, d1)
    k = np.arange(1, M + 1)[:, None]
    ck, sk = np.cos(k * th), np.sin(k * th)
    # d|T|/dc = (rho phi + rho' phi') / |T|
    g0 = rho / spd
    ga = (rho * ck - d1 * k * sk) / spd
    gb = (rho * sk + d1 * k * ck) / spd
    w = 2 * math.pi / n
    return np.concatenate([[g0.sum() * w], ga.sum(axis=1) * w, gb.sum(axis=1) * w])


def disk_deviation(shape: FourierShape, n: int = 4096) -> float:
    """``max | |x(theta) - c| - R |`` with ``c`` the centroid and ``R`` the area radius.

    For homogeneous coefficients the speed is translation invariant, so an
    optimal disk may sit off the origin; this measures roundness only.
    """
    th = 2 * math.pi * np.arange(n) / n
    rho = shape.radius(th)
    area = shape.area()
    c = np.array([(rho**3 * np.cos(th)).mean(), (rho**3 * np.sin(th)).mean()]) * (2 * math.pi) / (3 * area)
    x = np.column_stack([rho * np.cos(th), rho * np.sin(th)]) - c
    return float(np.max(np.abs(np.hypot(x[:, 0], x[:, 1]) - math.sqrt(area / math.pi))))


def random_shape(rng: np.random.Generator, M: int, constraint: Constraint | None = None) -> FourierShape:
    """``a0`` uniform in [0.5, 2], ``|a_k|, |b_k| <= 0.3 a0 / k^2``, then projected."""
    a0 = float(rng.uniform(0.5, 2.0))
    k = np.arange(1, M + 1)
    bound = 0.3 * a0 / k**2
    a = rng.uniform(-1.0, 1.0, M) * bound
    b = rng.uniform(-1.0, 1.0, M) * bound
    shape = FourierShape(a0, tuple(a.tolist()), tuple(b.tolist()))
    return constraint.project(shape) if constraint is not None else shape


def optimize(
    shape0: FourierShape,
    params: ProblemParams,
    opts: OptimOptions | None = None,
    run_dir: str | Path | None = None,
    threads: int = 1,
) -> OptimRun:
    """Accept/reject gradient steps on the coefficient vector until ``dt < tol``.

    A step that gives an invalid shape (or a mesh that cannot be built) is
    halved up to three times before the run stops with ``shape_invalid``.
    """
    opts = opts or OptimOptions()
    if opts.M is not None and opts.M != shape0.M:
        shape0 = shape0.with_modes(opts.M)
    con = opts.constraint
    shape = con.project(shape0)
    sign = 1.0 if opts.direction == "maximize" else -1.0
    n_rings = rings_for(FourierShape.circle(1.0), opts.target_h)
    ev = _Evaluator(params, opts.target_h, n_rings, opts.speed, threads)
    run = OptimRun(opts.direction, con)
    run.meta = {"n_rings": n_rings, "target_h": opts.target_h}
    out = Path(run_dir) if run_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def record(it, res, dt, shp, accepted):
        row = HistoryRow(it, res.c_star, res.alpha_star, dt, shp.area(), shp.perimeter(), accepted, shp)
        run.history.append(row)
        if out is not None:
            write_shape(shp, out / f"iter_{it:04d}.shape")

    res, grad = ev(shape)
    ev.commit(res)
    if grad is None:
        raise ValueError("initial shape is not persistent; the speed is identically zero")
    dt = float(opts.dt0)
    run.shapes.append(shape)
    run.objectives.append(res.c_star)
    run.steps.append(dt)
    record(0, res, dt, shape, True)
    it = 0
    status = "max_iters"
    while it < opts.max_iters:
        if dt < opts.tol:
            status = "step_below_tol"
            break
        tg = _tangent(grad.dJ, shape, con)
        if np.max(np.abs(tg)) * shape.a0 <= opts.grad_tol * abs(res.c_star):
            status = "converged"
            break
        obj = run.objectives
        if len(obj) > opts.stall_window and abs(obj[-1] - obj[-1 - opts.stall_window]) <= opts.stall_tol * abs(obj[-1]):
            status = "converged"
            break
        it += 1
        trial = None
        for _ in range(INVALID_RETRIES + 1):
            try:
                cand = con.project(FourierShape.from_vector(shape.to_vector() + sign * dt * grad.dJ))
                tres, tgrad = ev(cand)
                trial = (cand, tres, tgrad)
                break
            except (InvalidShapeError, MeshQualityError):
                dt *= SHRINK
            except (TrialRejected, BracketError, EigenSolverError):
                # the solver could not certify this shape; treat as a failed step
                dt *= SHRINK
        if trial is None:
            status = "shape_invalid"
            break
        cand, tres, tgrad = trial
        improved = tgrad is not None and sign * (tres.c_star - res.c_star) > 0
        record(it, tres, dt, cand, improved)
        if improved:
            ev.commit(tres)
            shape, res, grad = cand, tres, tgrad
            dt *= GROW
            run.shapes.append(shape)
            run.objectives.append(res.c_star)
        else:
            dt *= SHRINK
        run.steps.append(dt)
    run.status = status
    run.iterations = it
    run.solves = ev.solves
    run.last_gradient = grad
    if out is not None:
        write_history_csv(run, out / "history.csv")
    return run


def write_history_csv(run: OptimRun, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for r in run.history:
            w.writerow(
                [r.iter, f"{r.c_star:.12g}", "" if r.alpha_star is None else f"{r.alpha_star:.12g}",
                 f"{r.dt:.12g}", f"{r.area:.12g}", f"{r.perimeter:.12g}", int(r.accepted)]
            )


@dataclass
class DiskCheck:
    R_hat: float
    c_hat: float
    run: OptimRun


def optimize_free_disk_check(
    params: ProblemParams,
    R0: float = 3.0,
    M: int = 4,
    opts: OptimOptions | None = None,
) -> DiskCheck:
    """Unconstrained maximisation from a disk of radius ``R0``.

    ``R_hat`` is the radius of the disk with the final area.
    """
    if not params.homogeneous:
        raise ValueError("the free disk check needs homogeneous coefficients")
    opts = replace(opts or OptimOptions(), direction="maximize", constraint=Constraint())
    run = optimize(FourierShape.circle(R0, M), params, opts)
    return DiskCheck(math.sqrt(run.shape.area() / math.pi), run.c_star, run)
