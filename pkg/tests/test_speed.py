import math

import numpy as np
import pytest

from bulksurf.coeffs import ProblemParams
from bulksurf.eigsolver import lambda_of_alpha
from bulksurf.geometry import FourierShape, build_mesh
from bulksurf.speed import (
    SpeedOptions,
    lambda_prime,
    minimize_speed,
    persistence_condition,
    spreading_speed,
    sweep,
    write_sweep_csv,
)


def test_minimiser_on_parabola():
    # lambda = l0 - d alpha^2: c* = 2 sqrt(-l0 d) at alpha = sqrt(-l0/d)
    l0, d = -0.3, 2.0
    res = minimize_speed(lambda a: (l0 - d * a * a, -2 * d * a, None), d)
    assert res.c_star == pytest.approx(2 * math.sqrt(-l0 * d), rel=1e-12)
    assert res.alpha_star == pytest.approx(math.sqrt(-l0 / d), rel=1e-6)


def test_minimiser_extinction():
    res = minimize_speed(lambda a: (0.1 - a * a, -2 * a, None), 1.0)
    assert not res.persistent and res.c_star == 0.0 and res.status == "extinct"


def test_lambda_prime_zero_at_origin(unit_mesh, ref_params):
    pair = lambda_of_alpha(unit_mesh, ref_params, 0.0)
    assert lambda_prime(unit_mesh, ref_params, 0.0, pair) == 0.0


def test_kato_against_fd(unit_mesh, ref_params):
    d = 1e-4
    pair = lambda_of_alpha(unit_mesh, ref_params, 1.0)
    der = lambda_prime(unit_mesh, ref_params, 1.0, pair)
    fd = (lambda_of_alpha(unit_mesh, ref_params, 1 + d).lam - lambda_of_alpha(unit_mesh, ref_params, 1 - d).lam) / (
        2 * d
    )
    assert der == pytest.approx(fd, rel=1e-6)
    assert abs(der) <= 2 * 1.0 * max(ref_params.d, ref_params.D)


@pytest.mark.parametrize("D, ref", [(1.5, 0.9923449724), (3.0, 1.288082554)])
def test_reference_disk_coarse(unit_mesh, D, ref):
    res = spreading_speed(unit_mesh, ProblemParams(d=1.0, D=D, f_lin=0.5))
    assert res.status == "ok"
    assert abs(res.c_star - ref) / ref <= 2e-4
    # c* = -Lambda(alpha*)/alpha*
    assert res.c_star == pytest.approx(-res.lambda_at_star / res.alpha_star, rel=1e-14)


@pytest.mark.parametrize("kappa", ["1", "3", "0.5+0.25*cos(theta)"])
def test_extinction_negative_rates(unit_mesh, kappa):
    p = ProblemParams(f_lin=-1.0, g_lin=-1.0, kappa=kappa)
    res = spreading_speed(unit_mesh, p)
    assert not res.persistent and res.c_star == 0.0
    assert persistence_condition(unit_mesh, p) < 0


def test_persistence_condition_value(unit_mesh, ref_params):
    assert persistence_condition(unit_mesh, ref_params) == pytest.approx(0.5 * math.pi, rel=5e-3)


def test_kappa_scale_sweep_nonincreasing():
    pts = sweep(FourierShape(1.0), ProblemParams(d=1.0, D=1.5, f_lin=0.5), "kappa_scale", [1, 2, 4], target_h=0.2)
    c = [p.result.c_star for p in pts]
    assert c[0] >= c[1] >= c[2]


def test_radial_D_sweep_nondecreasing():
    pts = sweep(FourierShape(1.0), ProblemParams(d=1.0, f_lin=0.5), "D", [0.5, 1, 2, 4], target_h=0.2)
    c = [p.result.c_star for p in pts]
    assert all(b >= a - 1e-6 for a, b in zip(c, c[1:]))


def test_R_sweep_uses_fixed_topology():
    pts = sweep(FourierShape(1.0), ProblemParams(d=1.0, D=1.5, f_lin=0.5), "R", [0.5, 2.0], target_h=0.2)
    assert all(p.status == "ok" for p in pts)


def test_sweep_records_failures():
    pts = sweep(FourierShape(1.0), ProblemParams(d=1.0, D=1.5, f_lin=0.5), "D", [1.0, -1.0], target_h=0.3)
    assert pts[0].status == "ok"
    assert pts[1].status.startswith("error:") and pts[1].result is None


def test_cold_sweep_independent_of_split():
    p = ProblemParams(d=1.0, f_lin=0.8, g_lin="y1-0.8")
    whole = sweep(FourierShape(1.0), p, "D", [0.5, 1.0, 2.0], target_h=0.2, warm=False)
    tail = sweep(FourierShape(1.0), p, "D", [2.0], target_h=0.2, warm=False)
    assert whole[-1].result.c_star == tail[0].result.c_star


def test_sweep_csv(tmp_path):
    pts = sweep(FourierShape(1.0), ProblemParams(f_lin=-1, g_lin=-1), "D", [1.0], target_h=0.3)
    write_sweep_csv(pts, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "param,c_star,alpha_star,lambda0,lambda_star,evals,status"
    assert lines[1].startswith("1,0,,") and lines[1].endswith(",extinct")


def test_max_iter_status(unit_mesh):
    res = spreading_speed(unit_mesh, ProblemParams(d=1.0, D=3.0, f_lin=0.5), SpeedOptions(max_iter=1, tol_grad=1e-14))
    assert res.status in ("max_iter", "ok")
