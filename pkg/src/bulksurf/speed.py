"""Spreading speed ``c* = min_{alpha>0} -lambda(alpha)/alpha`` and parameter sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .assembly import assemble
from .coeffs import ProblemParams
from .eigsolver import EigenPair, EigenSolverError, principal_eigenpair
from .geometry import FourierShape, Mesh, build_mesh

EXTINCTION_THRESHOLD = -1e-12
MAX_DOUBLINGS = 60


class BracketError(RuntimeError):
    """``s'(alpha)`` stayed negative through every bracket doubling."""


class TrialRejected(RuntimeError):
    """An evaluator could not produce a trustworthy value at a trial ``alpha``.

    The minimiser treats such a point like a step that failed to decrease
    ``s`` and never moves past it.
    """


@dataclass
class SpeedOptions:
    tol_grad: float = 1e-8
    tol_step: float = 1e-10
    alpha_init: float | None = None
    max_iter: int = 200
    lambda_tol: float = 1e-12


@dataclass
class SpeedResult:
    c_star: float
    alpha_star: float | None
    lambda_at_star: float | None
    persistent: bool
    lambda0: float
    evals: int
    trace: list[tuple[float, float, float]] = field(default_factory=list)
    pair: EigenPair | None = field(default=None, repr=False)
    status: str = "ok"


# -- generic minimiser -----------------------------------------------------

# eval_fn(alpha) -> (lambda, dlambda/dalpha, payload)
EvalFn = Callable[[float], tuple[float, float, object]]


def _s_and_ds(alpha: float, lam: float, dlam: float) -> tuple[float, float]:
    return -lam / alpha, (-dlam * alpha + lam) / (alpha * alpha)


def minimize_speed(
    eval_fn: EvalFn,
    max_diffusivity: float,
    opts: SpeedOptions | None = None,
) -> SpeedResult:
    """Hybrid gradient/secant minimisation of ``s(alpha) = -lambda(alpha)/alpha``.

    ``eval_fn`` returns ``lambda``, its derivative and an opaque payload (the
    eigenpair for the FEM).  The minimiser is shared by the FEM and 1-D solvers.
    """
    opts = opts or SpeedOptions()
    evals = 0

    def ev(a):
        nonlocal evals
        evals += 1
        return eval_fn(a)

    lam0, _, pay0 = ev(0.0)
    if lam0 >= EXTINCTION_THRESHOLD:
        return SpeedResult(0.0, None, None, False, lam0, evals, [], None, "extinct")

    trace: list[tuple[float, float, float]] = []
    lo, hi = 0.0, math.inf
    cap = math.inf  # smallest alpha at which a trial was rejected

    def point(a, trial=True):
        nonlocal lo, hi, cap
        try:
            lam, dlam, pay = ev(a)
        except TrialRejected:
            if not trial:
                raise
            cap = min(cap, a)
            return None
        s, ds = _s_and_ds(a, lam, dlam)
        trace.append((a, s, ds))
        # keep the bracket [lo, hi] around the unique minimiser
        if ds < 0:
            lo = max(lo, a)
        elif ds > 0:
            hi = min(hi, a)
        return a, s, ds, lam, pay

    a_init = opts.alpha_init or math.sqrt(-lam0 / max_diffusivity)
    cur = point(a_init, trial=False)
    prev = None
    n_doubling = 0
    while cur[2] < 0 and hi == math.inf:
        if n_doubling >= MAX_DOUBLINGS:
            raise BracketError("s'(alpha) < 0 after 60 doublings")
        n_doubling += 1
        nxt = point(min(2.0 * cur[0], 0.5 * (cur[0] + cap)))
        if nxt is None:
            continue
        prev, cur = (cur, nxt) if nxt[1] <= cur[1] else (nxt, cur)
        if nxt[1] > cur[1]:
            break

    def done(p):
        return abs(p[2]) * p[0] / abs(p[1]) <= opts.tol_grad

    def better(trial, ref):
        # decrease of s, up to the eigenvalue tolerance carried into s = -lambda/alpha
        slack = opts.lambda_tol * (1.0 + abs(ref[3])) / ref[0]
        return trial[1] < ref[1] + slack

    # gradient step length: a fraction of the current wavenumber
    tau = 0.25 * cur[0] / max(abs(cur[2]), 1e-300)
    status = "max_iter"
    for _ in range(opts.max_iter):
        if done(cur):
            status = "ok"
            break
        a, s, ds = cur[0], cur[1], cur[2]
        cand = None
        if prev is not None and prev[2] != ds:
            t = a - ds * (a - prev[0]) / (ds - prev[2])
            if lo < t < min(hi, cap):
                trial = point(t)
                if trial is not None and better(trial, cur):
                    cand = trial
                    tau = max(tau, abs(t - a) / max(abs(ds), 1e-300))
                elif trial is not None:
                    prev = trial
        if cand is None:
            # halved gradient steps, clipped into the bracket
            step = tau
            for _ in range(60):
                t = a - step * ds
                if t <= lo:
                    t = 0.5 * (a + lo) if lo > 0 else 0.5 * a
                elif t >= min(hi, cap):
                    t = 0.5 * (a + min(hi, cap))
                if abs(t - a) <= opts.tol_step * a:
                    break
                trial = point(t)
                if trial is not None and better(trial, cur):
                    cand = trial
                    break
                if trial is not None:
                    prev = trial
                step *= 0.5
                tau = step
        if cand is None:
            # no decrease left at eigenvalue precision
            status = "ok"
            break
        step_len = abs(cand[0] - a)
        prev, cur = cur, cand
        if step_len <= opts.tol_step * a:
            status = "ok"
            break
    else:
        if done(cur):
            status = "ok"
    a, s, ds, lam, pay = cur
    return SpeedResult(s, a, lam, True, lam0, evals, trace, pay, status)


# -- FEM speed -----------------------------------------------------------------


def lambda_prime(mesh: Mesh, params: ProblemParams, alpha: float, pair: EigenPair) -> float:
    """``-2 alpha (D int U^2 + d int V^2)`` with the B-blocks as quadratic forms."""
    from .assembly import boundary_mass_unit, bulk_mass

    V = pair.V
    U = pair.U_ext
    uu = float(U @ (boundary_mass_unit(mesh) @ U))
    vv = float(V @ (bulk_mass(mesh) @ V))
    return -2.0 * alpha * (params.D * uu + params.d * vv)


def fem_evaluator(mesh: Mesh, params: ProblemParams, w0: np.ndarray | None = None) -> EvalFn:
    """Closure computing ``(lambda, Lambda', pair)`` with eigenvector warm starts."""
    state = {"w": w0}

    def fn(alpha: float):
        forms = assemble(mesh, params, alpha)
        try:
            pair = principal_eigenpair(forms, mesh.boundary, w0=state["w"])
        except EigenSolverError as exc:
            if exc.code == "positivity":
                # under-resolved boundary layer at this alpha; the minimiser steps back
                raise TrialRejected(str(exc)) from exc
            raise
        state["w"] = pair.w
        return pair.lam, lambda_prime(mesh, params, alpha, pair), pair

    return fn


def spreading_speed(
    mesh: Mesh,
    params: ProblemParams,
    opts: SpeedOptions | None = None,
    w0: np.ndarray | None = None,
) -> SpeedResult:
    return minimize_speed(fem_evaluator(mesh, params, w0), max(params.d, params.D), opts)


def persistence_condition(mesh: Mesh, params: ProblemParams) -> float:
    """Quadrature value of ``nu int_boundary g + mu int_section f``.

    A positive value is sufficient for persistence.
    """
    from .assembly import _coefficient_samples

    Mf, _, Mg, _, _ = _coefficient_samples(mesh, params)
    one = np.ones(mesh.n_vertices)
    return float(params.nu * (one @ (Mg @ one)) + params.mu * (one @ (Mf @ one)))


# -- sweeps -----------------------------------------------------------------------

SWEEP_VARS = ("D", "R", "kappa_scale")


@dataclass
class SweepPoint:
    param: float
    result: SpeedResult | None
    status: str


def _point_problem(var, value, shape, params):
    if var == "D":
        return shape, params.with_(D=float(value))
    if var == "R":
        # the unit shape dilated by R; coefficients follow y -> c(y / R)
        return shape.scaled(float(value)), params.rescaled(float(value))
    if var == "kappa_scale":
        return shape, params.with_(kappa=params.kappa.scaled_value(float(value)))
    raise ValueError(f"unknown sweep variable {var!r}; expected one of {SWEEP_VARS}")


def sweep(
    shape: FourierShape,
    params: ProblemParams,
    var: str,
    grid: Iterable[float],
    target_h: float = 0.11,
    opts: SpeedOptions | None = None,
    n_rings: int | None = None,
    warm: bool = True,
) -> list[SweepPoint]:
    """One speed per grid value; R-sweeps remesh the dilated shape at each radius.

    ``target_h`` is relative to the undilated shape, so every radius gets the
    same mesh topology.  Failures are recorded per point.  With ``warm`` each
    point starts from the previous optimum; ``warm=False`` makes every point
    independent of its neighbours (and of how the grid is split).
    """
    if var not in SWEEP_VARS:
        raise ValueError(f"unknown sweep variable {var!r}; expected one of {SWEEP_VARS}")
    opts = opts or SpeedOptions()
    base_mesh = None
    if var != "R":
        base_mesh = build_mesh(shape, target_h, n_rings)
    rings = n_rings if n_rings is not None else (base_mesh.n_rings if base_mesh else None)
    out: list[SweepPoint] = []
    last_alpha = None
    w_prev = None
    for value in grid:
        try:
            shp, prm = _point_problem(var, value, shape, params)
            if var == "R":
                mesh = build_mesh(shp, target_h * float(value), rings)
                rings = mesh.n_rings
                w_prev = None
            else:
                mesh = base_mesh
            local = replace(opts, alpha_init=last_alpha or opts.alpha_init)
            res = spreading_speed(mesh, prm, local, w0=w_prev)
            if res.persistent and warm:
                last_alpha = res.alpha_star
                w_prev = res.pair.w if res.pair is not None else None
            out.append(SweepPoint(float(value), res, res.status))
        except EigenSolverError as exc:
            out.append(SweepPoint(float(value), None, f"error:{exc.code}"))
        except BracketError:
            out.append(SweepPoint(float(value), None, "error:bracket"))
        except TrialRejected:
            out.append(SweepPoint(float(value), None, "error:positivity"))
        except Exception as exc:  # noqa: BLE001 - recorded, the sweep goes on
            out.append(SweepPoint(float(value), None, f"error:{type(exc).__name__}"))
    return out


SWEEP_HEADER = ["param", "c_star", "alpha_star", "lambda0", "lambda_star", "evals", "status"]


def _g12(x) -> str:
    return "" if x is None else f"{x:.12g}"


def write_sweep_csv(points: Sequence[SweepPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for p in points:
            r = p.result
            if r is None:
                w.writerow([_g12(p.param), "", "", "", "", "", p.status])
            else:
                w.writerow(
                    [_g12(p.param), _g12(r.c_star), _g12(r.alpha_star), _g12(r.lambda0),
                     _g12(r.lambda_at_star), r.evals, p.status]
                )
