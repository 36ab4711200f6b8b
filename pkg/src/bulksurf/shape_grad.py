"""Shape derivative of the regularised speed with respect to Fourier coefficients.

For a plane curve the Hessian of the signed distance acts on the unit tangent
as the curvature, so the two surface-diffusion terms of the integrand combine
into ``-D H |grad_tau U|^2``.  Normal derivatives of ``V`` are taken from the
Robin exchange condition instead of the discrete gradient.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .assembly import triangle_gradients
from .coeffs import ProblemParams
from .eigsolver import EigenPair
from .geometry import FourierShape, Mesh
from .speed import SpeedResult


class UnsupportedConfiguration(ValueError):
    """The integrand is only implemented for constant ``kappa`` and ``g``."""


@dataclass
class ShapeGradient:
    dJ: np.ndarray  # (a0, a_1..a_M, b_1..b_M)
    F_values: np.ndarray
    alpha_star: float

    @property
    def M(self) -> int:
        return (len(self.dJ) - 1) // 2


def _check_supported(params: ProblemParams) -> float:
    if not params.kappa.is_constant or not params.g_lin.is_constant:
        raise UnsupportedConfiguration(
            "shape gradient needs constant kappa and g_lin; normal derivatives of the coefficients are not modelled"
        )
    return float(params.kappa.constant)


def _node_gradients(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Area-weighted average of the P1 gradients of ``values`` around each boundary node."""
    _, area, grads = triangle_gradients(mesh)
    g_t = np.einsum("ti,tik->tk", values[mesh.triangles], grads)
    acc = np.zeros((mesh.n_vertices, 2))
    wsum = np.zeros(mesh.n_vertices)
    for j in range(3):
        np.add.at(acc, mesh.triangles[:, j], area[:, None] * g_t)
        np.add.at(wsum, mesh.triangles[:, j], area)
    b = mesh.boundary
    return acc[b] / wsum[b][:, None]


def _chain_derivative(mesh: Mesh, values_on_chain: np.ndarray) -> np.ndarray:
    """Arclength derivative at boundary nodes from the two adjacent chords."""
    ell = mesh.edge_lengths()  # edge i joins node i and i+1
    ell_prev = np.roll(ell, 1)
    nxt = np.roll(values_on_chain, -1)
    prv = np.roll(values_on_chain, 1)
    return (nxt - prv) / (ell + ell_prev)


def _node_weights(mesh: Mesh) -> np.ndarray:
    ell = mesh.edge_lengths()
    return 0.5 * (ell + np.roll(ell, 1))


def shape_integrand(mesh: Mesh, params: ProblemParams, alpha: float, pair: EigenPair) -> np.ndarray:
    """Integrand ``F_eps`` at the boundary nodes, in chain order."""
    kap = _check_supported(params)
    # constant kappa only rescales the exchange rates
    mu, nu = kap * params.mu, kap * params.nu
    smn = np.sqrt(mu * nu)
    d, D, eps, lam = params.d, params.D, params.eps, pair.lam
    b = mesh.boundary
    V = pair.V[b]
    U = pair.U
    H = mesh.bnd_curvature
    pts = mesh.vertices[b]
    f = np.broadcast_to(np.asarray(params.f_lin(pts), dtype=float), V.shape)
    g = float(params.g_lin.constant)

    Vn = (smn * U - nu * V) / d
    Vt = _chain_derivative(mesh, V)
    Ut = _chain_derivative(mesh, U)
    gU = _node_gradients(mesh, pair.U_ext)
    Un = np.einsum("ik,ik->i", gU, mesh.bnd_normal)
    a2 = alpha * alpha

    F = (
        d * (Vt**2 + Vn**2)
        - (d * a2 + f) * V**2
        + nu * (2.0 * V * Vn + H * V**2)
        - 2.0 * smn * (U * Vn + H * U * V)
        - (D * a2 + g - mu) * H * U**2
        - D * H * Ut**2
        - lam * V**2
        - lam * H * U**2
        + eps * np.einsum("ik,ik->i", gU, gU)
        - 2.0 * eps * Un**2
    )
    return F


def mode_fields(shape: FourierShape, theta: np.ndarray) -> np.ndarray:
    """``theta . n`` per unit arclength for ``theta = rhat * phi_k``, rows in coefficient order."""
    rho, d1, _ = shape.eval(theta)
    w = rho / np.hypot(rho, d1)
    M = shape.M
    rows = [np.ones_like(theta)]
    rows += [np.cos(k * theta) for k in range(1, M + 1)]
    rows += [np.sin(k * theta) for k in range(1, M + 1)]
    return np.asarray(rows) * w


def fourier_gradient(
    shape: FourierShape,
    mesh: Mesh,
    params: ProblemParams,
    speed: SpeedResult,
    threads: int = 1,
) -> ShapeGradient:
    """Gradient of ``J_eps = c*`` with respect to ``(a0, a_k, b_k)``.

    ``alpha*`` is a critical point of ``s``, so only the fixed-``alpha``
    derivative of the eigenvalue contributes.
    """
    if not speed.persistent or speed.pair is None:
        raise ValueError("shape gradient needs a persistent speed result with its eigenpair")
    alpha = float(speed.alpha_star)
    F = shape_integrand(mesh, params, alpha, speed.pair)
    rows = mode_fields(shape, mesh.bnd_theta)
    wF = F * _node_weights(mesh)

    def one(k):
        return -float(rows[k] @ wF) / alpha

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            dJ = np.array(list(pool.map(one, range(len(rows)))))
    else:
        dJ = np.array([one(k) for k in range(len(rows))])
    return ShapeGradient(dJ, F, alpha)


def translation_gradient(mesh: Mesh, grad: ShapeGradient) -> np.ndarray:
    """Derivative of ``J_eps`` along the rigid translations ``e1`` and ``e2``."""
    wF = grad.F_values * _node_weights(mesh)
    return -(mesh.bnd_normal.T @ wF) / grad.alpha_star


def write_gradient_csv(grad: ShapeGradient, path) -> None:
    """Debug dump with one row per coefficient: ``mode,type,value``."""
    M = grad.M
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "type", "value"])
        w.writerow([0, "a", f"{grad.dJ[0]:.17g}"])
        for k in range(1, M + 1):
            w.writerow([k, "a", f"{grad.dJ[k]:.17g}"])
        for k in range(1, M + 1):
            w.writerow([k, "b", f"{grad.dJ[M + k]:.17g}"])
