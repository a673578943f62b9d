import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbshape.geometry import ConvexBody, DeformationField, StarDomain
from fbshape.meshing import triangulate, triangulate_polygon
from fbshape.pde import (Constant, DirichletSolver, Indicator, RadialPolynomial, disk_indicator,
                         green_identity_report, line_density, solve_chain, solve_derivative_chain,
                         solve_dirichlet, source_from_json)

_MESH = triangulate(StarDomain(1.0, (0.06, 0.04), (0.03,)), 0.05)
_SOLVER = DirichletSolver(_MESH)


def test_disk_torsion_converges_quadratically():
    errs = []
    for h in (0.04, 0.02, 0.01):
        mesh = triangulate(StarDomain.circle(1.0), h)
        u = solve_dirichlet(mesh, Constant(1.0)).values
        exact = (1 - np.sum(mesh.nodes ** 2, axis=1)) / 4
        errs.append(np.abs(u - exact).max())
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_unit_square_center_value():
    mesh = triangulate_polygon(ConvexBody.rectangle(-0.5, -0.5, 0.5, 0.5), 0.02)
    u = solve_dirichlet(mesh, Constant(1.0)).values
    # series value of the torsion function at the center of the unit square
    exact = 0.0
    for m in range(1, 80, 2):
        for n in range(1, 80, 2):
            exact += 16 / (math.pi ** 4 * m * n * (m * m + n * n)) * (-1) ** ((m + n) // 2 - 1)
    assert u[0] == pytest.approx(exact, rel=2e-3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 10.0))
def test_discrete_maximum_principle(seed, spike):
    f = np.random.default_rng(seed).uniform(0.0, 1.0, _MESH.n_nodes)
    f[seed % _MESH.n_nodes] += spike
    u = _SOLVER.solve(_SOLVER.load_of(f))
    assert u.min() >= -1e-14


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_solve_is_linear(a, b):
    f1 = np.cos(_MESH.nodes[:, 0])
    f2 = _MESH.nodes[:, 1] ** 2
    u1 = _SOLVER.solve(_SOLVER.load_of(f1))
    u2 = _SOLVER.solve(_SOLVER.load_of(f2))
    u = _SOLVER.solve(_SOLVER.load_of(a * f1 + b * f2))
    assert np.allclose(u, a * u1 + b * u2, atol=1e-12)


def test_green_balance_is_exact_for_every_stage():
    chain = solve_chain(_MESH, Constant(1.0))
    for s in ("u", "v", "w", "z"):
        assert _MESH.boundary_integral(chain.flux[s]) == pytest.approx(chain.source_integral(s), rel=1e-12)


def test_indicator_load_is_exact_mass():
    mesh = triangulate(StarDomain.circle(1.0), 0.05)
    src = Indicator(ConvexBody.rectangle(-0.3, -0.2, 0.4, 0.1), 2.0)
    assert src.load(mesh).sum() == pytest.approx(2.0 * 0.7 * 0.3, rel=1e-10)
    disk = disk_indicator(0.5)
    assert disk.load(mesh).sum() == pytest.approx(math.pi * 0.25, rel=1e-4)


def test_line_density_total_mass():
    src = line_density(1.5, 2.0, 0.01)
    mesh = triangulate(StarDomain.circle(1.5), 0.05)
    assert src.load(mesh).sum() == pytest.approx(3.0, rel=1e-10)


def test_radial_polynomial_source():
    src = RadialPolynomial((1.0, 0.0, -1.0))
    mesh = triangulate(StarDomain.circle(1.0), 0.02)
    # int (1 - r^2) over the unit disk = pi / 2
    assert src.load(mesh).sum() == pytest.approx(math.pi / 2, rel=1e-3)


def test_source_json():
    assert isinstance(source_from_json({"type": "constant", "value": 2}), Constant)
    assert isinstance(source_from_json({"type": "disk_indicator", "radius": 0.5}), Indicator)
    with pytest.raises((ValueError, KeyError)):
        source_from_json({"type": "nope"})


def test_support_inside():
    assert disk_indicator(0.5).support_inside(StarDomain.circle(1.0))
    assert not disk_indicator(0.5).support_inside(StarDomain.circle(0.4))


def test_derivative_chain_for_dilation_of_disk():
    mesh = triangulate(StarDomain.circle(1.0), 0.02)
    chain = solve_chain(mesh, Constant(1.0))
    d = solve_derivative_chain(mesh, chain, DeformationField(1.0))
    # dilating the unit disk: u' = d/dR (R^2 - r^2) / 4 = R / 2
    assert np.allclose(d.fields["u"], 0.5, atol=1e-4)
    for g in green_identity_report(mesh, chain, d):
        assert abs(g.gap) < 2e-3
