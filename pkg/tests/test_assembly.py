import math

import numpy as np
import pytest
import scipy.sparse as sp

from bulksurf.assembly import assemble, assemble_A, assemble_B, boundary_mass_unit, bulk_mass, dump_coo
from bulksurf.coeffs import ProblemParams
from bulksurf.geometry import FourierShape, build_mesh


def test_mass_totals(unit_mesh):
    one = np.ones(unit_mesh.n_vertices)
    assert one @ (bulk_mass(unit_mesh) @ one) == pytest.approx(math.pi, rel=5e-3)
    assert one @ (boundary_mass_unit(unit_mesh) @ one) == pytest.approx(2 * math.pi, rel=5e-3)


def test_interior_u_rows_of_B_vanish(unit_mesh):
    B = assemble_B(unit_mesh).tocsr()
    n = unit_mesh.n_vertices
    interior = np.setdiff1d(np.arange(n), unit_mesh.boundary)
    rows = B[n + interior]
    assert rows.nnz == 0 or np.max(np.abs(rows.data)) == 0.0


def test_symmetry(unit_mesh, ref_params):
    A = assemble_A(unit_mesh, ref_params.with_(f_lin="1+exp(-r^2)"), 0.7)
    assert abs(A - A.T).max() == 0.0


@pytest.mark.parametrize("shape", [FourierShape(1.0), FourierShape(1.0, (0.1, 0.2), (0.0, -0.1))])
def test_constants_are_exact_eigenfunction(shape):
    mesh = build_mesh(shape, 0.2)
    p = ProblemParams(d=1.0, D=1.5)
    A = assemble_A(mesh, p, 0.0)
    w = np.ones(A.shape[0])
    norm_A = sp.linalg.norm(A, ord=np.inf)
    assert np.linalg.norm(A @ w, np.inf) <= 1e-8 * norm_A * np.linalg.norm(w, np.inf)


def test_u_mass_quadratic_form(unit_mesh):
    p = ProblemParams(d=1.0, D=1.5, kappa=2.0, g_lin="y1")
    alpha = 0.3
    A = assemble_A(unit_mesh, p, alpha)
    n = unit_mesh.n_vertices
    w = np.concatenate([np.zeros(n), np.ones(n)])
    # int of (kappa mu - D alpha^2 - y1) over the boundary polygon; y1 integrates to 0
    expected = (2.0 - 1.5 * alpha**2) * unit_mesh.boundary_length()
    assert w @ (A @ w) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_alpha_doubling(unit_mesh, ref_params, rng):
    alpha = 0.8
    n = unit_mesh.n_vertices
    w = rng.normal(size=2 * n)
    A1 = assemble_A(unit_mesh, ref_params, alpha)
    A2 = assemble_A(unit_mesh, ref_params, 2 * alpha)
    V, U = w[:n], w[n:]
    uu = U @ (boundary_mass_unit(unit_mesh) @ U)
    vv = V @ (bulk_mass(unit_mesh) @ V)
    lhs = w @ (A2 @ w) - w @ (A1 @ w)
    assert lhs == pytest.approx(-3 * alpha**2 * (1.5 * uu + 1.0 * vv), rel=1e-10)


def test_forms_layout(unit_mesh, ref_params):
    f = assemble(unit_mesh, ref_params, 1.0)
    assert f.A.shape == f.B.shape == (2 * unit_mesh.n_vertices,) * 2
    assert abs(f.B_u + f.B_v - f.B).max() == 0.0
    assert f.lower_bound == pytest.approx(1.5 + 0.0)


def test_coo_dump(tmp_path, unit_mesh):
    B = assemble_B(unit_mesh)
    dump_coo(B, tmp_path / "B.coo")
    data = np.loadtxt(tmp_path / "B.coo")
    back = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=B.shape)
    assert abs(back - B).max() == 0.0
