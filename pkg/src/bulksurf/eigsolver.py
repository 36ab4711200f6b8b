"""Principal eigenpair of ``A w = lambda B w`` by shift-invert inverse iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import AssembledForms, DofLayout, assemble
from .coeffs import ProblemParams
from .geometry import Mesh

POSITIVITY_TOL = 1e-6
LANCZOS_STEPS = 60


class EigenSolverError(RuntimeError):
    """Raised with ``code`` in {factorization, no_convergence, positivity}."""

    def __init__(self, message: str, code: str):
        super().__init__(message)
        self.code = code


@dataclass
class EigenPair:
    lam: float
    w: np.ndarray
    iterations: int
    residual: float
    layout: DofLayout
    boundary: np.ndarray
    alpha: float = 0.0

    @property
    def V(self) -> np.ndarray:
        return self.w[: self.layout.n_bulk]

    @property
    def U_ext(self) -> np.ndarray:
        """``U`` on every vertex (its harmonic extension off the boundary)."""
        return self.w[self.layout.n_bulk :]

    @property
    def U(self) -> np.ndarray:
        """``U`` on the boundary nodes, in chain order."""
        return self.U_ext[self.boundary]


def _factor(A, B, sigma):
    for _ in range(4):
        try:
            return splu((A - sigma * B).tocsc()), sigma
        except RuntimeError:
            sigma -= 1.0
    raise EigenSolverError("A - sigma B could not be factorised", "factorization")


def _inf_norm(M) -> float:
    return float(abs(M).sum(axis=1).max())


def _rounding_floor(absA, w) -> float:
    # attainable accuracy of w^T A w in floating point; matters for small
    # sections where ||A|| is large against |lambda|
    aw = np.abs(w)
    return 16.0 * np.finfo(float).eps * float(aw @ (absA @ aw))


def _check_positive(w, layout, boundary, B):
    if float(np.sum(B @ w)) < 0:
        w = -w
    V = w[: layout.n_bulk]
    U = w[layout.n_bulk :][boundary]
    top = max(V.max(), U.max())
    ok = top > 0 and V.min() >= -POSITIVITY_TOL * top and U.min() >= -POSITIVITY_TOL * top
    return w, ok


def _lanczos(lu, B, w, steps=LANCZOS_STEPS):
    """Ritz acceleration of inverse iteration on ``T = (A - sigma B)^-1 B``.

    ``T`` is self-adjoint for the B inner product.  The largest Ritz value on
    the Krylov space of ``w`` (fully reorthogonalised) belongs to the
    eigenvalue nearest ``sigma``; its B-normalised Ritz vector is returned.
    """
    Q = np.empty((steps + 1, w.size))
    TQ = np.empty((steps, w.size))
    Q[0] = w / np.sqrt(w @ (B @ w))
    m = steps
    for j in range(steps):
        z = lu.solve(B @ Q[j])
        TQ[j] = z
        for _ in range(2):
            # two Gram-Schmidt passes in the B inner product
            z = z - Q[: j + 1].T @ (Q[: j + 1] @ (B @ z))
        nrm = float(np.sqrt(abs(z @ (B @ z))))
        if nrm <= 1e-13:
            m = j + 1
            break
        Q[j + 1] = z / nrm
    BQ = (B @ Q[:m].T).T
    T = BQ @ TQ[:m].T
    T = 0.5 * (T + T.T)
    _, vecs = np.linalg.eigh(T)
    x = Q[:m].T @ vecs[:, -1]
    return x / np.sqrt(x @ (B @ x)), m


def principal_eigenpair(
    forms: AssembledForms,
    boundary: np.ndarray,
    w0: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 500,
    vec_tol: float = 1e-10,
) -> EigenPair:
    """Smallest eigenvalue and its positive, B-normalised eigenvector.

    The shift ``-L(alpha) - 1`` sits below the whole spectrum, so plain
    inverse iteration converges to the principal pair.  When the contraction
    rate is poor (clustered spectra on large sections) the iterate is replaced
    by a Lanczos Ritz vector built from the same factorisation and plain
    iteration resumes from there; each Krylov vector counts as one step.

    The eigenvalue test is floored by the rounding error of ``w^T A w``.
    Besides it, the B-norm change of the vector must drop
    below ``vec_tol``: eigenvalues converge quadratically in the vector error,
    and the derivative ``Lambda'`` is computed from the vector.
    """
    A, B = forms.A, forms.B
    absA = abs(A)
    lu, sigma = _factor(A, B, -forms.lower_bound - 1.0)
    w = np.ones(A.shape[0]) if w0 is None else np.array(w0, dtype=float)
    w = w / np.sqrt(w @ (B @ w))
    lam = float(w @ (A @ w))
    deltas: list[float] = []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        x = lu.solve(B @ w)
        x = x / np.sqrt(x @ (B @ x))
        dw = x - w
        step = float(np.sqrt(abs(dw @ (B @ dw))))
        w = x
        new = float(w @ (A @ w))
        delta = abs(new - lam)
        lam = new
        if step <= vec_tol and delta <= tol * (1 + abs(lam)) + _rounding_floor(absA, w):
            converged = True
            break
        deltas.append(delta)
        slow = len(deltas) >= 8 and deltas[-2] > 0 and deltas[-1] / deltas[-2] > 0.25
        if slow and it + LANCZOS_STEPS < max_iter:
            w, used = _lanczos(lu, B, w)
            it += used
            lam = float(w @ (A @ w))
            deltas.clear()
    if not converged:
        raise EigenSolverError(f"inverse iteration did not converge in {max_iter} steps", "no_convergence")
    w, pos = _check_positive(w, forms.layout, boundary, B)
    if not pos:
        raise EigenSolverError("principal eigenvector is not positive", "positivity")
    r = A @ w - lam * (B @ w)
    residual = float(np.linalg.norm(r) / (_inf_norm(A) * np.linalg.norm(w)))
    return EigenPair(lam, w, it, residual, forms.layout, np.asarray(boundary), forms.alpha)


def lambda_of_alpha(
    mesh: Mesh, params: ProblemParams, alpha: float, w0: np.ndarray | None = None
) -> EigenPair:
    return principal_eigenpair(assemble(mesh, params, alpha), mesh.boundary, w0=w0)
