import math

import numpy as np
import pytest

from fbshape.geometry import ConvexBody, StarDomain, measures
from fbshape.meshing import triangulate, triangulate_polygon


def _orientation(mesh):
    p = mesh.nodes[mesh.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]


@pytest.mark.parametrize("domain", [StarDomain.circle(1.0), StarDomain(1.0, (0.1, 0.08, 0.03), (0.05,)),
                                    StarDomain(1.0, (0, 0, 0.15))])
def test_ring_mesh_is_valid(domain):
    mesh = triangulate(domain, 0.04)
    assert np.all(_orientation(mesh) > 0)
    assert mesh.min_angle() > 15.0
    # boundary nodes lie on the curve
    r = np.linalg.norm(mesh.nodes[mesh.boundary], axis=1)
    assert np.allclose(r, domain.rho(mesh.boundary_theta), atol=1e-12)
    assert mesh.area == pytest.approx(measures(domain)[0], rel=2e-3)
    assert np.allclose(mesh.nodes[0], domain.center)


def test_ring_mesh_every_node_used():
    mesh = triangulate(StarDomain(1.0, (0.1,)), 0.05)
    assert len(np.unique(mesh.triangles)) == mesh.n_nodes


def test_fixed_layout_keeps_topology():
    d = StarDomain(1.0, (0.05, 0.02))
    m1 = triangulate(d, 0.04)
    m2 = triangulate(StarDomain(1.0, (0.06, 0.02)), 0.04, m1.layout)
    assert np.array_equal(m1.triangles, m2.triangles)
    assert np.array_equal(m1.boundary, m2.boundary)


def test_mesh_size_scales_node_count():
    d = StarDomain.circle(1.0)
    n1, n2 = triangulate(d, 0.04).n_nodes, triangulate(d, 0.02).n_nodes
    assert 3.5 < n2 / n1 < 4.5


@pytest.mark.parametrize("body", [ConvexBody.rectangle(-0.5, -0.5, 0.5, 0.5),
                                  ConvexBody.rectangle(-1, -0.5, 1, 0.5),
                                  ConvexBody.regular(7, 1.0)])
def test_polygon_mesh_is_valid(body):
    mesh = triangulate_polygon(body, 0.04)
    assert np.all(_orientation(mesh) > 0)
    assert mesh.min_angle() > 20.0
    assert mesh.area == pytest.approx(body.area, rel=1e-12)
    assert mesh.boundary_integral(np.ones(len(mesh.boundary))) == pytest.approx(body.perimeter, rel=1e-12)


def test_mesh_dump_writes_files(tmp_path):
    triangulate(StarDomain.circle(1.0), 0.1).dump(tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"nodes.csv", "tris.csv"} <= names
    assert math.isfinite(float((tmp_path / "nodes.csv").read_text().splitlines()[1].split(",")[1]))
