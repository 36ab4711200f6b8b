import math

import pytest

from bulksurf.oracles import (
    BRRProblem,
    RadialProblem,
    brr_bound_state,
    brr_speed,
    brr_speed_exact,
    closed_forms,
    radial_speed,
    regime,
)

# annulus 0.5 < r < 1, d=1, D=1.5, f=0.5: Richardson value of n = 2000/4000/8000
ANNULUS_C = 0.7771570703090581  # [DERIVED]
# half-plane speed at d=1, D=3, f'=0.5, g'=0; truncated solver and exponential bound state agree to 3e-10
BRR_D3 = 1.4783990687453012  # [DERIVED]


@pytest.mark.parametrize("D, ref", [(1.5, 0.9923449724), (3.0, 1.288082554)])
def test_radial_reference_values(D, ref):
    c = radial_speed(RadialProblem(R=1.0, d=1.0, D=D, f_lin=0.5, n=4000)).c_star
    assert c == pytest.approx(ref, rel=1e-6)


def test_annulus_self_convergence():
    c = [
        radial_speed(RadialProblem(R=1.0, r_in=0.5, d=1.0, D=1.5, f_lin=0.5, n=n), richardson=False).c_star
        for n in (2000, 4000, 8000)
    ]
    order = math.log2((c[0] - c[1]) / (c[1] - c[2]))
    assert order == pytest.approx(2.0, abs=0.05)
    assert radial_speed(RadialProblem(R=1.0, r_in=0.5, d=1.0, D=1.5, f_lin=0.5)).c_star == pytest.approx(
        ANNULUS_C, rel=1e-9
    )


def test_radial_heterogeneous_profile_runs():
    c0 = radial_speed(RadialProblem(R=1.0, d=1.0, D=1.5, f_lin=1.0)).c_star
    c1 = radial_speed(RadialProblem(R=1.0, d=1.0, D=1.5, f_lin="1+exp(-r^2)")).c_star
    assert c1 > c0


@pytest.mark.parametrize("D, tol", [(1.5, 1e-6), (2.0, 1e-4)])
def test_brr_below_threshold(D, tol):
    assert brr_speed(BRRProblem(d=1.0, D=D, f0=0.5, g0=0.0)) == pytest.approx(math.sqrt(2.0), abs=tol)


def test_brr_above_threshold():
    p = BRRProblem(d=1.0, D=3.0, f0=0.5, g0=0.0)
    c = brr_speed(p)
    assert c > math.sqrt(2.0) + 1e-3
    assert c == pytest.approx(BRR_D3, rel=1e-9)
    # second route: the explicit exponential eigenfunction of the half-plane
    assert brr_speed_exact(p) == pytest.approx(c, rel=1e-8)


def test_bound_state_without_root():
    p = BRRProblem(d=1.0, D=1.0, f0=0.5, g0=0.0)
    assert brr_bound_state(p, 0.0) == pytest.approx(-0.5, abs=1e-15)


def test_closed_forms():
    cf = closed_forms(1.0, 3.0, 0.5, 0.0)
    assert cf.c_M == pytest.approx(1.5, rel=1e-15)
    assert cf.R_star == pytest.approx(6.0, rel=1e-15)
    assert cf.c_star_f == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert cf.D_star == 2.0
    assert cf.regime == "interior_maximum"


def test_regimes():
    assert regime(1.0, 1.0) == "constant"
    assert regime(1.5, 0.0) == "increasing"
    assert regime(1.0, 1.5) == "decreasing"
    assert regime(3.0, 0.0) == "interior_maximum"


def test_radial_rejects_bad_geometry():
    with pytest.raises(ValueError):
        RadialProblem(R=0.5, r_in=0.5)
