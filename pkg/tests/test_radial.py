import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbshape.radial import BallSpec, RadialChain, oracle, self_check, sphere_area

# hand-derived values on the unit disk with f = 1
UNIT_DISK = {
    ("u", 0.0): 0.25,
    ("v", 0.0): 3 / 64,
    ("grad_u_bdry", None): 0.5,
    ("grad_v_bdry", None): 1 / 16,
    ("grad_w_bdry", None): 1 / 96,
    ("grad_z_bdry", None): 1 / 192,
    ("int_u", None): math.pi / 8,
    ("J4", None): 0.0,
}


@pytest.mark.parametrize("key", list(UNIT_DISK))
def test_unit_disk_frozen_values(key):
    q, r = key
    assert oracle(BallSpec(2, 1.0), q, r) == pytest.approx(UNIT_DISK[key], abs=1e-15)


def test_radii():
    assert oracle(BallSpec(), "Serrin_radius", k=0.5) == 1.0
    assert oracle(BallSpec(), "P_radius", c=1 / 32) == pytest.approx(1.0, rel=1e-15)
    assert oracle(BallSpec(3), "grad_u_bdry") == pytest.approx(1 / 3)
    assert oracle(BallSpec(), "JP", c=1 / 32) == pytest.approx(math.pi / 48)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("bad", [dict(quantity="nope"), dict(quantity="u"), dict(quantity="u", r=2.0),
                                 dict(quantity="JP"), dict(quantity="Serrin_radius", k=-1.0)])
def test_oracle_rejects_bad_input(bad):
    q = bad.pop("quantity")
    with pytest.raises(ValueError):
        oracle(BallSpec(), q, **bad)


def test_ball_spec_validation():
    with pytest.raises(ValueError):
        BallSpec(1, 1.0)
    with pytest.raises(ValueError):
        BallSpec(2, 0.0)


dims = st.integers(2, 7)
radii = st.floats(0.1, 5.0, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(dims, radii)
def test_cubic_flux_identity_on_balls(n, r):
    spec = BallSpec(n, r)
    gu, gv = oracle(spec, "grad_u_bdry"), oracle(spec, "grad_v_bdry")
    assert gu == pytest.approx(r / n, rel=1e-12)
    assert gv == pytest.approx(n / (n + 2) * gu ** 3, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(dims, radii)
def test_j4_vanishes_on_balls(n, r):
    spec = BallSpec(n, r)
    scale = oracle(spec, "int_grad_u2")
    assert abs(oracle(spec, "J4")) <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(dims, radii)
def test_green_balance_on_balls(n, r):
    ch = RadialChain(BallSpec(n, r))
    per = ch.perimeter
    for name, src in ch.sources().items():
        assert ch.flux(name) * per == pytest.approx(ch.integral(src), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(dims, radii)
def test_self_check(n, r):
    gaps = self_check(BallSpec(n, r), samples=20)
    scale = max(1.0, r ** 8)
    assert gaps["laplacian"] <= 1e-12 * scale
    assert gaps["flux_quadrature"] <= 1e-10 * scale


def test_polynomial_source():
    # f = r^2 on the unit disk: u = (1 - r^4) / 16, flux 1/4
    assert oracle(BallSpec(), "grad_u_bdry", source={2: 1.0}) == pytest.approx(0.25)
    assert oracle(BallSpec(), "u", 0.0, source={2: 1.0}) == pytest.approx(1 / 16)
