"""Low-dimensional reference solvers and explicit speed formulas.

``radial_speed`` treats disks and annuli with radial coefficients, where the
principal eigenfunction is radial and ``U`` is one number per boundary circle.
``brr_speed`` treats the road-field problem on a half-plane through its
truncation to ``(0, L)`` with ``V(L) = 0``.  Both discretise with P1 elements
and a lumped mass (a second-order conservative finite-difference scheme), so
every principal eigenproblem is a symmetric tridiagonal one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .coeffs import CoeffExpr, parse_expr
from .speed import SpeedOptions, SpeedResult, minimize_speed

Profile = float | str | CoeffExpr | Callable[[np.ndarray], np.ndarray]


def _profile(p: Profile) -> Callable[[np.ndarray], np.ndarray]:
    if callable(p) and not isinstance(p, CoeffExpr):
        return lambda r: np.broadcast_to(np.asarray(p(r), dtype=float), np.shape(r))
    e = parse_expr(p)
    return lambda r: np.asarray(e(np.column_stack([np.asarray(r, float), np.zeros(np.size(r))])), dtype=float)


# -- tridiagonal generalised eigenproblem --------------------------------------


@dataclass
class _Tridiag:
    """Quadratic form ``sum_e c_e (a_e w_e - b_e w_{e+1})^2 + sum_i q_i w_i^2``.

    Edge ``e`` joins dofs ``e`` and ``e + 1``.  The Rayleigh quotient is
    evaluated in this sum-of-squares form, which avoids the ``eps * |A|``
    cancellation of ``w^T A w`` on fine grids.
    """

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    q: np.ndarray  # alpha-independent diagonal remainder
    bdiag: np.ndarray  # diagonal B
    kin: np.ndarray  # D or d per dof, multiplies alpha^2 B

    def matrix(self, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        dia = self.q - alpha * alpha * self.kin * self.bdiag
        dia = dia.copy()
        dia[:-1] += self.c * self.a**2
        dia[1:] += self.c * self.b**2
        return dia, -self.c * self.a * self.b

    def energy(self, w: np.ndarray, alpha: float) -> float:
        jump = self.a * w[:-1] - self.b * w[1:]
        diag = self.q - alpha * alpha * self.kin * self.bdiag
        return float(np.sum(self.c * jump * jump) + np.sum(diag * w * w))

    def principal(self, alpha: float) -> tuple[float, np.ndarray]:
        s = 1.0 / np.sqrt(self.bdiag)
        dia, off = self.matrix(alpha)
        _, y = eigh_tridiagonal(dia * s * s, off * s[:-1] * s[1:], select="i", select_range=(0, 0))
        w = y[:, 0] * s
        if w.sum() < 0:
            w = -w
        w = w / math.sqrt(float(np.sum(self.bdiag * w * w)))
        return self.energy(w, alpha), w

    def evaluator(self):
        def fn(alpha):
            lam, w = self.principal(alpha)
            # w is B-normalised; Lambda' = w^T A'(alpha) w
            dlam = -2.0 * alpha * float(np.sum(self.kin * self.bdiag * w * w))
            return lam, dlam, w

        return fn


def _p1_lumped(nodes: np.ndarray, weight):
    """Cell stiffness ``weight(mid)/h`` and lumped mass ``int weight phi_i``."""
    h = np.diff(nodes)
    k = weight(0.5 * (nodes[:-1] + nodes[1:])) / h
    w0 = weight(nodes[:-1])
    w1 = weight(nodes[1:])
    mass = np.zeros(len(nodes))
    # exact for a linear weight: int_cell weight * phi = h (2 w_own + w_other) / 6
    mass[:-1] += h * (2 * w0 + w1) / 6.0
    mass[1:] += h * (w0 + 2 * w1) / 6.0
    return k, mass


# -- radial reduction -------------------------------------------------------


@dataclass
class RadialProblem:
    """Disk (``r_in = 0``) or annulus ``r_in < |y| < R`` with radial data."""

    R: float
    r_in: float = 0.0
    d: float = 1.0
    D: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    kappa: Profile = 1.0
    f_lin: Profile = 0.0
    g_lin: Profile = 0.0
    n: int = 4000

    def __post_init__(self):
        if not (self.R > self.r_in >= 0):
            raise ValueError("need R > r_in >= 0")
        if self.n < 2:
            raise ValueError("need at least two cells")


def _radial_system(p: RadialProblem, n: int) -> _Tridiag:
    f = _profile(p.f_lin)
    g = _profile(p.g_lin)
    kap = _profile(p.kappa)
    rho = np.linspace(p.r_in, p.R, n + 1)
    k, m = _p1_lumped(rho, lambda r: np.asarray(r, dtype=float))
    sm, sn = math.sqrt(p.mu), math.sqrt(p.nu)
    # dof order: [U_in], V_0..V_n, U_out
    c = list(p.d * k)
    a = [1.0] * n
    b = [1.0] * n
    q = list(-m * f(rho))
    bd = list(m)
    kin = [p.d] * (n + 1)
    # exchange kappa r (sqrt(nu) V - sqrt(mu) U)^2 and the surface rate -g r U^2
    kR = float(kap(np.array([p.R]))[0]) * p.R
    c.append(kR)
    a.append(sn)
    b.append(sm)
    q.append(-float(g(np.array([p.R]))[0]) * p.R)
    bd.append(p.R)
    kin.append(p.D)
    if p.r_in > 0:
        kr = float(kap(np.array([p.r_in]))[0]) * p.r_in
        c.insert(0, kr)
        a.insert(0, sm)
        b.insert(0, sn)
        q.insert(0, -float(g(np.array([p.r_in]))[0]) * p.r_in)
        bd.insert(0, p.r_in)
        kin.insert(0, p.D)
    arr = lambda x: np.asarray(x, dtype=float)
    return _Tridiag(arr(c), arr(a), arr(b), arr(q), arr(bd), arr(kin))


def radial_lambda(p: RadialProblem, alpha: float, n: int | None = None) -> float:
    return _radial_system(p, n or p.n).principal(alpha)[0]


def radial_speed(p: RadialProblem, richardson: bool = True, opts: SpeedOptions | None = None) -> SpeedResult:
    """Speed for the radial reduction; ``richardson`` combines ``n`` and ``2n`` cells."""
    opts = opts or SpeedOptions(lambda_tol=1e-14)
    coarse = minimize_speed(_radial_system(p, p.n).evaluator(), max(p.d, p.D), opts)
    if not richardson:
        return coarse
    fine = minimize_speed(_radial_system(p, 2 * p.n).evaluator(), max(p.d, p.D), opts)
    if not fine.persistent or not coarse.persistent:
        return fine
    c = (4.0 * fine.c_star - coarse.c_star) / 3.0
    lam = (4.0 * fine.lambda_at_star - coarse.lambda_at_star) / 3.0
    lam0 = (4.0 * fine.lambda0 - coarse.lambda0) / 3.0
    return SpeedResult(c, fine.alpha_star, lam, True, lam0, coarse.evals + fine.evals, fine.trace, fine.pair)


def radial_lambda0(p: RadialProblem) -> float:
    """Richardson-extrapolated ``Lambda(0)``."""
    a = radial_lambda(p, 0.0, p.n)
    b = radial_lambda(p, 0.0, 2 * p.n)
    return (4.0 * b - a) / 3.0


# -- half-plane road-field problem ---------------------------------------------


@dataclass
class BRRProblem:
    d: float = 1.0
    D: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    f0: float = 0.5
    g0: float = 0.0
    L: float = 10.0
    n: int = 2000

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.f0 <= 0:
            raise ValueError("the half-plane problem needs f'(0) > 0")


class TruncationError(RuntimeError):
    """The truncated speed did not settle under L-doubling."""


def _brr_nodes(p: BRRProblem, L: float, n: int) -> np.ndarray:
    # exponential grading: first cell ~ 2e-3 sqrt(d/f'), geometric growth after
    h0 = 2e-3 * math.sqrt(p.d / p.f0)
    t = np.linspace(0.0, 1.0, n + 1)
    if L / n <= h0:
        return L * t
    target = h0 / L
    # solve (exp(b/n) - 1) / (exp(b) - 1) = target for the grading exponent b
    b = brentq(lambda b: math.expm1(b / n) / math.expm1(b) - target, 1e-8, 700.0)
    return L * np.expm1(b * t) / math.expm1(b)


def _brr_system(p: BRRProblem, L: float, n: int) -> _Tridiag:
    y = _brr_nodes(p, L, n)
    k, m = _p1_lumped(y, lambda s: np.ones_like(np.asarray(s, dtype=float)))
    # the node at y = L carries V = 0 and is dropped; its cell keeps k[-1] on the diagonal
    m = m[:-1]
    sm, sn = math.sqrt(p.mu), math.sqrt(p.nu)
    c = np.concatenate([[1.0], p.d * k[:-1]])
    a = np.concatenate([[sm], np.ones(n - 1)])
    b = np.concatenate([[sn], np.ones(n - 1)])
    q = np.concatenate([[-p.g0], -p.f0 * m])
    q[-1] += p.d * k[-1]
    bd = np.concatenate([[1.0], m])
    kin = np.concatenate([[p.D], np.full(n, p.d)])
    return _Tridiag(c, a, b, q, bd, kin)


def _brr_speed_at(p: BRRProblem, L: float, opts: SpeedOptions) -> float:
    c1 = minimize_speed(_brr_system(p, L, p.n).evaluator(), max(p.d, p.D), opts).c_star
    c2 = minimize_speed(_brr_system(p, L, 2 * p.n).evaluator(), max(p.d, p.D), opts).c_star
    return (4.0 * c2 - c1) / 3.0


def brr_speed(p: BRRProblem, rtol: float = 1e-8, max_doublings: int = 20) -> float:
    """``c*_BRR`` from the truncated problem, doubling ``L`` until it settles."""
    opts = SpeedOptions(lambda_tol=1e-14)
    L = p.L
    prev = _brr_speed_at(p, L, opts)
    for _ in range(max_doublings):
        L *= 2.0
        cur = _brr_speed_at(p, L, opts)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise TruncationError(f"c*_BRR still moving at L = {L:g}")


def brr_bound_state(p: BRRProblem, alpha: float) -> float:
    """Half-plane ``Lambda_BRR(alpha)`` from the explicit exponential eigenfunction.

    With ``V = exp(-beta y)`` the road condition reduces to
    ``(mu + (d - D) alpha^2 + f' - g' + d beta^2) (d beta + nu) = mu nu``;
    without a root ``beta > 0`` the bottom of the spectrum is ``-d alpha^2 - f'``.
    """
    K = p.mu + (p.d - p.D) * alpha * alpha + p.f0 - p.g0
    if K >= p.mu:
        return -p.d * alpha * alpha - p.f0
    phi = lambda b: (K + p.d * b * b) * (p.d * b + p.nu) - p.mu * p.nu
    hi = 1.0
    while phi(hi) < 0:
        hi *= 2.0
    beta = brentq(phi, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return -p.d * alpha * alpha - p.f0 - p.d * beta * beta


def brr_speed_exact(p: BRRProblem) -> float:
    """Minimise ``-Lambda_BRR(alpha)/alpha`` using :func:`brr_bound_state` (numerical derivative)."""

    def fn(a):
        h = 1e-6 * max(a, 1e-3)
        lam = brr_bound_state(p, a)
        dlam = (brr_bound_state(p, a + h) - brr_bound_state(p, a - h)) / (2 * h) if a > 0 else 0.0
        return lam, dlam, None

    return minimize_speed(fn, max(p.d, p.D), SpeedOptions(tol_grad=1e-7, lambda_tol=1e-13)).c_star


# -- closed forms -------------------------------------------------------------------


@dataclass
class ClosedForms:
    c_star_f: float | None
    c_star_avg_g: float | None
    D_star: float | None
    d_star: float | None
    c_M: float | None
    R_star: float | None
    regime: str


def regime(x: float, y: float) -> str:
    """Monotonicity of ``R -> c*(R)`` for disks at ``x = D/d``, ``y = g'/f'``."""
    if math.isclose(x, 1.0, abs_tol=1e-12) and math.isclose(y, 1.0, abs_tol=1e-12):
        return "constant"
    if y <= 2.0 - x:
        return "increasing"
    if x > 0.5 and y >= x / (2.0 * x - 1.0):
        return "decreasing"
    return "interior_maximum"


def closed_forms(d: float, D: float, f0: float, g0: float, mu: float = 1.0, nu: float = 1.0, N: int = 2) -> ClosedForms:
    c_f = 2.0 * math.sqrt(d * f0) if f0 > 0 else None
    c_g = 2.0 * math.sqrt(D * g0) if g0 > 0 else None
    D_star = d * (2.0 - g0 / f0) if f0 > 0 else None
    d_star = D * (2.0 - f0 / g0) if g0 > 0 else None
    reg = regime(D / d, g0 / f0) if f0 > 0 else ("decreasing" if g0 > 0 else "extinct")
    c_M = R_star = None
    if reg == "interior_maximum":
        c_M = abs(D * f0 - d * g0) / math.sqrt((D - d) * (f0 - g0))
        num = c_M * c_M - 4.0 * D * g0
        den = c_M * c_M - 4.0 * d * f0
        if num >= 0 and den > 0:
            R_star = N * (nu / mu) * math.sqrt(num) / math.sqrt(den)
    return ClosedForms(c_f, c_g, D_star, d_star, c_M, R_star, reg)
