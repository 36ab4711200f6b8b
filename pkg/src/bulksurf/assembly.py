"""Sparse P1 assembly of the regularised bulk-surface eigenproblem.

Unknowns are stacked as ``w = (V, U)``: ``V`` lives on every vertex, and so does
``U`` through its harmonic extension into the bulk.  ``V``-dof ``i`` is ``i`` and
``U``-dof ``i`` is ``n + i``.  With ``(phi, psi)`` the test functions for
``(U, V)`` the assembled form is::

    A(W, Psi) = d (grad V, grad psi) - ((d a^2 + f) V, psi)
              - <kappa (sqrt(mu nu) U - nu V), psi> - <kappa sqrt(mu nu) V, phi>
              - <(D a^2 + g - kappa mu) U, phi> + D <U', phi'> + eps (grad U, grad phi)

    B(W, Psi) = (V, psi) + <U, phi>

where ``( , )`` integrates over the section and ``< , >`` over its boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .coeffs import ProblemParams
from .geometry import Mesh

# Gauss points on [0, 1]
_G2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True)
class DofLayout:
    n_bulk: int

    @property
    def total(self) -> int:
        return 2 * self.n_bulk

    def v(self, i):
        return i

    def u(self, i):
        return self.n_bulk + np.asarray(i)

    def split(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(U, V)`` nodal arrays."""
        return w[self.n_bulk :], w[: self.n_bulk]


@dataclass(eq=False)
class AssembledForms:
    A: sp.csr_matrix
    B: sp.csr_matrix
    alpha: float
    params: ProblemParams
    layout: DofLayout
    lower_bound: float
    B_u: sp.csr_matrix
    B_v: sp.csr_matrix


# -- element kernels ---------------------------------------------------------


def _tri_geometry(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    # gradients of the three barycentric functions, shape (nt, 3, 2)
    grads = np.empty((len(p), 3, 2))
    grads[:, 1] = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    grads[:, 2] = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return p, area, grads


def _cached(mesh: Mesh, key, builder):
    if key not in mesh._cache:
        mesh._cache[key] = builder()
    return mesh._cache[key]


def triangle_gradients(mesh: Mesh):
    return _cached(mesh, "tri_geom", lambda: _tri_geometry(mesh))


def _coo(n, rows, cols, vals):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    def build():
        _, area, g = triangle_gradients(mesh)
        local = area[:, None, None] * np.einsum("tik,tjk->tij", g, g)
        t = mesh.triangles
        return _coo(mesh.n_vertices, np.repeat(t, 3, axis=1), np.tile(t, 3), local)

    return _cached(mesh, "K", build)


def _midpoints(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    return np.stack([(p[:, 0] + p[:, 1]) / 2, (p[:, 1] + p[:, 2]) / 2, (p[:, 2] + p[:, 0]) / 2], axis=1)


# barycentric values at the three edge midpoints (rows: quadrature point)
_MID_VALS = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def weighted_mass(mesh: Mesh, coef_at_midpoints: np.ndarray | float = 1.0) -> sp.csr_matrix:
    """Bulk mass matrix ``(c V, psi)`` by the 3-point edge-midpoint rule."""
    _, area, _ = triangle_gradients(mesh)
    c = np.broadcast_to(np.asarray(coef_at_midpoints, dtype=float), (len(area), 3))
    # sum_q (area/3) c_q phi_i(q) phi_j(q)
    local = np.einsum("tq,qi,qj->tij", c * (area[:, None] / 3.0), _MID_VALS, _MID_VALS)
    t = mesh.triangles
    return _coo(mesh.n_vertices, np.repeat(t, 3, axis=1), np.tile(t, 3), local)


def bulk_mass(mesh: Mesh) -> sp.csr_matrix:
    return _cached(mesh, "M", lambda: weighted_mass(mesh))


def _boundary_gauss(mesh: Mesh):
    e = mesh.boundary_edges
    p0 = mesh.vertices[e[:, 0]]
    p1 = mesh.vertices[e[:, 1]]
    ell = np.linalg.norm(p1 - p0, axis=1)
    pts = np.stack([p0 + g * (p1 - p0) for g in _G2], axis=1)  # (ne, 2, 2)
    vals = np.array([[1 - g, g] for g in _G2])  # (q, local node)
    return e, ell, pts, vals


def boundary_mass(mesh: Mesh, coef_at_gauss: np.ndarray | float = 1.0) -> sp.csr_matrix:
    """``<c U, phi>`` on the boundary chain, 2-point Gauss per segment."""
    e, ell, _, vals = _boundary_gauss(mesh)
    c = np.broadcast_to(np.asarray(coef_at_gauss, dtype=float), (len(ell), 2))
    local = np.einsum("eq,qi,qj->eij", c * (ell[:, None] / 2.0), vals, vals)
    return _coo(mesh.n_vertices, np.repeat(e, 2, axis=1), np.tile(e, 2), local)


def boundary_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """``<U', phi'>`` along the boundary chain with chord-length elements."""

    def build():
        e = mesh.boundary_edges
        ell = mesh.edge_lengths()
        local = np.array([[1.0, -1.0], [-1.0, 1.0]])[None] / ell[:, None, None]
        return _coo(mesh.n_vertices, np.repeat(e, 2, axis=1), np.tile(e, 2), local)

    return _cached(mesh, "Kb", build)


def boundary_mass_unit(mesh: Mesh) -> sp.csr_matrix:
    return _cached(mesh, "Mb", lambda: boundary_mass(mesh))


def _coefficient_samples(mesh: Mesh, params: ProblemParams):
    """Cache coefficient values at quadrature points, keyed by expression."""
    key = ("coef", params.kappa.tree, params.f_lin.tree, params.g_lin.tree)

    def build():
        mids = _midpoints(mesh)
        _, _, gpts, _ = _boundary_gauss(mesh)
        f = np.asarray(params.f_lin(mids.reshape(-1, 2))).reshape(-1, 3)
        kap = np.asarray(params.kappa(gpts.reshape(-1, 2))).reshape(-1, 2)
        g = np.asarray(params.g_lin(gpts.reshape(-1, 2))).reshape(-1, 2)
        if kap.min() < 0 or kap.max() <= 0:
            raise ValueError("kappa must be nonnegative and not identically zero on the boundary")
        Mf = weighted_mass(mesh, f)
        Mk = boundary_mass(mesh, kap)
        Mg = boundary_mass(mesh, g)
        return Mf, Mk, Mg, float(f.max()), float(g.max())

    return _cached(mesh, key, build)


def assemble_B(mesh: Mesh) -> sp.csr_matrix:
    def build():
        return sp.block_diag([bulk_mass(mesh), boundary_mass_unit(mesh)], format="csr")

    return _cached(mesh, "B", build)


def lower_bound(mesh: Mesh, params: ProblemParams, alpha: float) -> float:
    """``L(alpha)`` such that the spectrum lies above ``-L(alpha)``."""
    _, _, _, fmax, gmax = _coefficient_samples(mesh, params)
    a2 = alpha * alpha
    return max(params.D * a2 + gmax, params.d * a2 + fmax)


def assemble_A(mesh: Mesh, params: ProblemParams, alpha: float) -> sp.csr_matrix:
    K = stiffness_matrix(mesh)
    M = bulk_mass(mesh)
    Kb = boundary_stiffness(mesh)
    Mb = boundary_mass_unit(mesh)
    Mf, Mk, Mg, _, _ = _coefficient_samples(mesh, params)
    a2 = alpha * alpha
    smn = np.sqrt(params.mu * params.nu)
    Avv = params.d * K - params.d * a2 * M - Mf + params.nu * Mk
    Avu = -smn * Mk
    Auu = params.D * Kb - params.D * a2 * Mb - Mg + params.mu * Mk + params.eps * K
    A = sp.bmat([[Avv, Avu], [Avu.T, Auu]], format="csr")
    # exact symmetry: average away round-off from the separate insertions
    return ((A + A.T) * 0.5).tocsr()


def assemble(mesh: Mesh, params: ProblemParams, alpha: float) -> AssembledForms:
    n = mesh.n_vertices
    z = sp.csr_matrix((n, n))
    return AssembledForms(
        A=assemble_A(mesh, params, alpha),
        B=assemble_B(mesh),
        alpha=float(alpha),
        params=params,
        layout=DofLayout(n),
        lower_bound=lower_bound(mesh, params, alpha),
        B_u=sp.block_diag([z, boundary_mass_unit(mesh)], format="csr"),
        B_v=sp.block_diag([bulk_mass(mesh), z], format="csr"),
    )


def dump_coo(matrix: sp.spmatrix, path) -> None:
    """Coordinate text dump: ``row col value`` per line, 17 significant digits."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with Path(path).open("w") as fh:
        for i in order:
            fh.write(f"{m.row[i]} {m.col[i]} {m.data[i]:.17g}\n")
