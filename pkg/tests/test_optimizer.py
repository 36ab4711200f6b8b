import csv
import math

import numpy as np
import pytest

from bulksurf.coeffs import ProblemParams
from bulksurf.geometry import FourierShape, read_shape
from bulksurf.optimizer import (
    Constraint,
    OptimOptions,
    _constraint_gradient,
    _tangent,
    disk_deviation,
    optimize,
    random_shape,
)


def test_constraint_validation():
    with pytest.raises(ValueError):
        Constraint("volume", 1.0)
    with pytest.raises(ValueError):
        Constraint("area", None)
    assert str(Constraint()) == "none"
    s = FourierShape(2.0, (0.1,))
    assert Constraint("area", math.pi).project(s).area() == pytest.approx(math.pi, rel=1e-12)
    assert Constraint("perimeter", 1.0).measure(Constraint("perimeter", 1.0).project(s)) == pytest.approx(1.0)


@pytest.mark.parametrize("kind, fn", [("area", FourierShape.area), ("perimeter", FourierShape.perimeter)])
def test_constraint_gradient_fd(kind, fn):
    s = FourierShape(1.1, (0.05, -0.1, 0.02), (0.03, 0.0, -0.04))
    g = _constraint_gradient(s, kind)
    v = s.to_vector()
    h = 1e-6
    fd = []
    for k in range(len(v)):
        w1, w2 = v.copy(), v.copy()
        w1[k] += h
        w2[k] -= h
        fd.append((fn(FourierShape.from_vector(w1)) - fn(FourierShape.from_vector(w2))) / (2 * h))
    assert np.allclose(g, fd, atol=1e-8)


def test_tangent_removes_dilation(rng):
    s = FourierShape(1.0, (0.1, 0.05), (0.0, -0.02))
    for kind in ("area", "perimeter"):
        g = rng.normal(size=5)
        tg = _tangent(g, s, Constraint(kind, 1.0))
        assert abs(tg @ s.to_vector()) <= 1e-12 * np.linalg.norm(g)
        # a Lagrange-multiple of the constraint gradient is stationary
        nc = _constraint_gradient(s, kind)
        assert np.max(np.abs(_tangent(2.5 * nc, s, Constraint(kind, 1.0)))) <= 1e-12 * np.linalg.norm(nc)


def test_random_shape_reproducible():
    con = Constraint("area", math.pi)
    a = random_shape(np.random.default_rng(4), 8, con)
    b = random_shape(np.random.default_rng(4), 8, con)
    assert a == b
    assert a.area() == pytest.approx(math.pi, rel=1e-12)
    raw = random_shape(np.random.default_rng(4), 8)
    k = np.arange(1, 9)
    assert np.all(np.abs(raw.a) <= 0.3 * raw.a0 / k**2)
    assert 0.5 <= raw.a0 <= 2.0


def test_disk_deviation():
    assert disk_deviation(FourierShape(1.0, (0.0,) * 3)) == pytest.approx(0.0, abs=1e-12)
    # a small shift of the unit circle is round to second order
    shifted = FourierShape(1.0, (0.01,))
    assert disk_deviation(shifted) < 1e-3 < np.max(np.abs(shifted.radius(np.linspace(0, 6.28, 100)) - 1))
    assert disk_deviation(FourierShape(1.0, (0.0, 0.05))) == pytest.approx(0.05, rel=0.05)


def test_start_at_optimal_disk():
    p = ProblemParams(d=1.0, D=3.0, f_lin=0.5)
    run = optimize(FourierShape.circle(6.0, 2), p, OptimOptions(max_iters=40))
    assert run.status == "converged"
    g0 = run.history[0]
    assert abs(math.sqrt(run.shape.area() / math.pi) - 6.0) <= 0.01
    assert run.c_star == pytest.approx(1.5, abs=1e-4)
    assert g0.c_star == pytest.approx(1.5, abs=1e-4)


def test_small_D_keeps_growing(tmp_path):
    p = ProblemParams(d=1.0, D=1.5, f_lin=0.5)
    run = optimize(FourierShape.circle(1.0, 2), p, OptimOptions(max_iters=8), run_dir=tmp_path)
    assert run.status in ("max_iters", "step_below_tol")
    areas = [s.area() for s in run.shapes]
    assert all(b > a for a, b in zip(areas, areas[1:]))
    assert all(b > a for a, b in zip(run.objectives, run.objectives[1:]))
    assert run.c_star < math.sqrt(2.0)
    with open(tmp_path / "history.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "c_star", "alpha_star", "dt", "area", "perimeter", "accepted"]
    assert len(rows) - 1 == len(run.history)
    last = run.history[-1]
    assert read_shape(tmp_path / f"iter_{last.iter:04d}.shape") == last.shape


def test_step_below_tol_and_shrink():
    # a huge initial step rejects until dt falls under tol
    p = ProblemParams(d=1.0, D=3.0, f_lin=0.5)
    run = optimize(FourierShape.circle(6.0, 1), p, OptimOptions(dt0=1e3, tol=1e-1, max_iters=30, stall_window=100))
    assert run.status in ("step_below_tol", "converged")
    assert run.steps[0] == 1e3
    assert all(s > 0 for s in run.steps)


def test_minimize_direction():
    p = ProblemParams(d=1.0, D=3.0, f_lin=0.5)
    run = optimize(FourierShape.circle(3.0, 1), p, OptimOptions(direction="minimize", max_iters=3))
    assert all(b < a for a, b in zip(run.objectives, run.objectives[1:]))


def test_extinct_start_rejected():
    with pytest.raises(ValueError):
        optimize(FourierShape.circle(1.0, 1), ProblemParams(f_lin=-1.0, g_lin=-1.0), OptimOptions(max_iters=2))
