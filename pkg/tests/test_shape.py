import csv
import math

import pytest

from fbshape.geometry import DeformationField, StarDomain
from fbshape.pde import Constant, disk_indicator
from fbshape.radial import BallSpec, oracle
from fbshape.shape import (FunctionalId, ShapeState, derivative_checks, fd_shape_derivative, shape_derivative,
                           stationarity_report, write_derivcheck_csv)

DISK = StarDomain.circle(1.0)
WOBBLY = StarDomain(1.0, (0.05, -0.04, 0.02), (0.03, 0.0, -0.02))


def test_parse_functional_ids():
    assert FunctionalId.parse("j_p:0.03125") == FunctionalId("J_P", 0.03125)
    assert FunctionalId.parse("RATIO_3").label == "RATIO_3"
    with pytest.raises(ValueError):
        FunctionalId.parse("J_P")
    with pytest.raises(ValueError):
        FunctionalId.parse("BOGUS")


@pytest.mark.parametrize("tag,quantity", [("INT_U", "int_u"), ("F_INT_U2", "int_u2"),
                                          ("G_DIRICHLET", "int_grad_u2"), ("INT_UV", "int_uv"),
                                          ("VOL", "volume"), ("PER", "perimeter")])
def test_disk_values_match_oracle(tag, quantity):
    state = ShapeState(DISK)
    assert state.value(FunctionalId(tag)) == pytest.approx(oracle(BallSpec(), quantity), rel=1e-3)


def test_disk_dilation_derivatives_match_oracle_radius_derivatives():
    # d/dR of R-homogeneous ball quantities at R = 1 equals degree * value
    state = ShapeState(DISK)
    dil = DeformationField(1.0)
    for tag, degree in (("VOL", 2), ("PER", 1), ("INT_U", 4), ("F_INT_U2", 6), ("INT_UV", 8)):
        value = state.value(FunctionalId(tag))
        assert state.derivative(FunctionalId(tag), dil) == pytest.approx(degree * value, rel=2e-3)


@pytest.mark.parametrize("fid", [FunctionalId("G_DIRICHLET"), FunctionalId("J_P", 1 / 32), FunctionalId("RATIO_4"),
                                 FunctionalId("J4")])
@pytest.mark.parametrize("field", [DeformationField.mode("cos", 2), DeformationField.mode("sin", 3)])
def test_analytic_matches_central_difference(fid, field):
    a = shape_derivative(WOBBLY, fid, field, h=0.04)
    fd = fd_shape_derivative(WOBBLY, fid, field, h=0.04)
    scale = max(abs(fd), abs(ShapeState(WOBBLY, h=0.04).value(fid)))
    assert abs(a - fd) <= 1e-2 * scale


def test_general_source_derivative():
    src = disk_indicator(0.5)
    fid = FunctionalId("F_INT_U2")
    field = DeformationField.mode("cos", 1)
    a = shape_derivative(WOBBLY, fid, field, src, h=0.04)
    fd = fd_shape_derivative(WOBBLY, fid, field, src, h=0.04)
    assert a == pytest.approx(fd, rel=1e-2, abs=1e-2 * ShapeState(WOBBLY, src, 0.04).value(fid))


def test_unit_source_only_functionals():
    with pytest.raises(ValueError):
        ShapeState(DISK, Constant(2.0), h=0.1).value(FunctionalId("J4"))


def test_derivcheck_csv(tmp_path):
    rows = derivative_checks(WOBBLY, [FunctionalId("VOL")], [DeformationField(1.0)], h=0.08)
    write_derivcheck_csv(rows, tmp_path / "d.csv")
    with open(tmp_path / "d.csv") as fh:
        got = list(csv.DictReader(fh))
    assert got[0]["functional"] == "VOL" and float(got[0]["rel_gap"]) < 1e-3


def test_stationarity_report_on_disk_reports_condition_mismatch():
    rep = stationarity_report(DISK, basis=[DeformationField(1.0)], h=0.04)
    first = rep[0]
    assert first.value == pytest.approx(8.0, rel=1e-2)
    assert first.lhs_mean == pytest.approx(0.5, rel=1e-2)
    assert first.rhs_mean == pytest.approx(0.125, rel=1e-2)
    # the dilation derivative of VOL/INT_U is -2 VOL/INT_U on a ball, never zero
    assert first.max_abs_derivative == pytest.approx(16.0, rel=2e-2)
    assert all(math.isfinite(e.condition_residual) for e in rep)
