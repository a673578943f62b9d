"""Structured ring triangulations of star domains and convex polygons.

Nodes sit on scaled copies of the boundary curve (rings at radii j/n_r of
the boundary, measured from the center).  Each ring is split into arcs
whose endpoints lie on fixed rays; consecutive rings are stitched arc by
arc with a zipper that only looks at node indices, so the connectivity
depends on the node counts alone.  Re-meshing a slightly deformed domain
with the same :attr:`Mesh.layout` therefore moves nodes smoothly without
changing the topology, which finite-difference shape derivatives rely on.

Star domains use two arcs split at theta = 0 and theta = pi, and the lower
arc is zipped in mirrored order, so a domain symmetric under
theta -> -theta gets an exactly mirror-symmetric mesh.  Between rings with
equal node counts each quadrilateral is split around its centroid, which
keeps the stencil of every boundary node symmetric and uniform.

Convex polygons, which need neither fixed topology nor mirror symmetry,
are meshed by Delaunay triangulation of a resampled boundary and a
hexagonal interior lattice.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import MeshingError
from .geometry import ConvexBody, StarDomain

MIN_ANGLE_DEG = 20.0
OUTER_LAYER = 0.8


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray  # boundary node ids, counterclockwise loop
    boundary_theta: np.ndarray  # polar angle of each boundary node about ``center``
    center: np.ndarray
    h: float
    layout: tuple

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def is_boundary(self) -> np.ndarray:
        flag = np.zeros(len(self.nodes), dtype=bool)
        flag[self.boundary] = True
        return flag

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.stack([self.boundary, np.roll(self.boundary, -1)], axis=1)

    @property
    def edge_vectors(self) -> np.ndarray:
        e = self.boundary_edges
        return self.nodes[e[:, 1]] - self.nodes[e[:, 0]]

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=1)

    @property
    def edge_normals(self) -> np.ndarray:
        d = self.edge_vectors
        n = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1)[:, None]

    @property
    def edge_midpoints(self) -> np.ndarray:
        e = self.boundary_edges
        return 0.5 * (self.nodes[e[:, 0]] + self.nodes[e[:, 1]])

    @property
    def node_weights(self) -> np.ndarray:
        """Trapezoid arclength weight of each boundary node (half of each adjacent edge)."""
        ln = self.edge_lengths
        return 0.5 * (ln + np.roll(ln, 1))

    def boundary_integral(self, nodal) -> float:
        """Integral over the boundary polygon of the piecewise-linear interpolant."""
        return float(np.dot(self.node_weights, nodal))

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def angles(self) -> np.ndarray:
        """Interior angles in degrees, shape (n_triangles, 3)."""
        p = self.nodes[self.triangles]
        out = np.empty(self.triangles.shape)
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out[:, i] = np.degrees(np.arccos(np.clip(cosang, -1, 1)))
        return out

    def min_angle(self) -> float:
        return float(self.angles().min())

    def dump(self, directory: str | Path) -> None:
        """Write ``nodes.csv`` (id,x,y,boundary_flag) and ``tris.csv`` (n1,n2,n3)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        flag = self.is_boundary
        with open(directory / "nodes.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "x", "y", "boundary_flag"])
            for i, (x, y) in enumerate(self.nodes):
                w.writerow([i, repr(float(x)), repr(float(y)), int(flag[i])])
        with open(directory / "tris.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n1", "n2", "n3"])
            w.writerows(self.triangles.tolist())


def _zip(a: list[int], b: list[int], out: list[tuple[int, int, int]]) -> None:
    """Triangulate the strip between chains ``a`` (inner) and ``b`` (outer)."""
    na, nb = len(a) - 1, len(b) - 1
    i = j = 0
    while i < na or j < nb:
        if j == nb or (i < na and (i + 1) * nb <= (j + 1) * na):
            out.append((a[i], a[i + 1], b[j]))
            i += 1
        else:
            out.append((a[i], b[j + 1], b[j]))
            j += 1


def _ring_mesh(center: np.ndarray, corners: np.ndarray, arcs: list[Callable[[np.ndarray], np.ndarray]],
               arc_lengths: np.ndarray, mirrored: list[bool], h: float, layout) -> Mesh:
    """Assemble a ring mesh from arcs joining consecutive ``corners``.

    ``arcs[a]`` maps arclength fractions in [0, 1] to boundary points
    (relative to ``center``) between ``corners[a]`` and ``corners[a+1]``.
    """
    n_arcs = len(arcs)
    if layout is None:
        dist = [np.linalg.norm(arc(np.linspace(0, 1, 65)), axis=1) for arc in arcs]
        reach = max(float(np.linalg.norm(corners, axis=1).max()), max(float(d.max()) for d in dist))
        n_r = max(2, int(math.ceil(reach / h)))
        min_seg = 2 if n_arcs < 3 else 1
        # tangential spacing follows the radial spacing of each arc, which shrinks near the center
        h_arc = [h * float(d.mean()) / reach for d in dist]
        # rings beyond OUTER_LAYER carry the boundary node count (no seams next to the boundary)
        counts = tuple(tuple(max(min_seg, int(math.ceil(min(1.0, j / (n_r * OUTER_LAYER)) * arc_lengths[a] / h_arc[a])))
                             for a in range(n_arcs)) for j in range(1, n_r + 1))
        layout = (n_r, counts)
    n_r, counts = layout
    if len(counts) != n_r or any(len(c) != n_arcs for c in counts):
        raise MeshingError("layout does not match the boundary arc structure")

    nodes = [np.zeros(2)]
    prev = [[0] for _ in range(n_arcs)]
    tris: list[tuple[int, int, int]] = []
    cache = [dict() for _ in range(n_arcs)]
    for j in range(1, n_r + 1):
        s = j / n_r
        corner_ids = []
        for c in corners:
            nodes.append(s * c)
            corner_ids.append(len(nodes) - 1)
        chains = []
        for a in range(n_arcs):
            n = counts[j - 1][a]
            if n not in cache[a]:
                cache[a][n] = arcs[a](np.arange(1, n) / n)
            ids = [corner_ids[a]]
            for p in cache[a][n]:
                nodes.append(s * p)
                ids.append(len(nodes) - 1)
            ids.append(corner_ids[(a + 1) % n_arcs])
            chains.append(ids)
        for a in range(n_arcs):
            if j > 1 and len(prev[a]) == len(chains[a]):
                # equal counts: split each quad around its centroid (symmetric stencils)
                for i in range(len(chains[a]) - 1):
                    q = (prev[a][i], prev[a][i + 1], chains[a][i + 1], chains[a][i])
                    nodes.append(sum(nodes[k] for k in q) / 4.0)
                    mid = len(nodes) - 1
                    tris.extend((q[k], q[(k + 1) % 4], mid) for k in range(4))
            elif mirrored[a]:
                _zip(prev[a][::-1], chains[a][::-1], tris)
            else:
                _zip(prev[a], chains[a], tris)
        prev = chains

    loop = []
    for a in range(n_arcs):
        loop.extend(prev[a][:-1])
    nodes_arr = np.asarray(nodes) + center
    tri = np.asarray(tris, dtype=np.int64)
    p = nodes_arr[tri]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    signed = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    flip = signed < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    if np.any(np.abs(signed) <= 1e-14 * h * h):
        raise MeshingError("degenerate triangle produced")
    bnd = np.asarray(loop, dtype=np.int64)
    rel = nodes_arr[bnd] - center
    theta = np.arctan2(rel[:, 1], rel[:, 0])
    return Mesh(nodes_arr, tri, bnd, theta, np.asarray(center, dtype=float), h, layout)


def _check(mesh: Mesh) -> Mesh:
    if np.any(mesh.triangle_areas() <= 0):
        raise MeshingError("inverted triangle")
    ang = mesh.min_angle()
    if ang < MIN_ANGLE_DEG:
        raise MeshingError(f"minimum angle {ang:.1f} deg below {MIN_ANGLE_DEG} deg")
    return mesh


def _arclength_inverse(speed_fn: Callable[[np.ndarray], np.ndarray], t0: float, t1: float,
                       n: int = 2048) -> Callable[[np.ndarray], np.ndarray]:
    t = np.linspace(t0, t1, n + 1)
    sp = speed_fn(t)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.diff(t))])
    frac = cum / cum[-1]
    return lambda f: np.interp(f, frac, t)


def triangulate(domain: StarDomain, h: float, layout=None) -> Mesh:
    """Ring mesh of a star domain with target edge length ``h``.

    ``layout`` (taken from an earlier mesh) fixes the node counts so that
    nearby domains share one connectivity.
    """
    if not h > 0 or h > domain.a0 / 4:
        raise MeshingError(f"target edge length h={h} must be in (0, a0/4]")
    c = np.asarray(domain.center)

    def curve(theta):
        return domain.point(theta) - c

    upper = _arclength_inverse(domain.speed, 0.0, np.pi)
    lower = _arclength_inverse(lambda t: domain.speed(-t), 0.0, np.pi)
    arcs = [lambda f: curve(upper(f)),
            # lower half traversed counterclockwise from theta = pi to 2 pi
            lambda f: curve(-lower(1.0 - f))]
    tt = np.linspace(0, np.pi, 2049)
    lens = np.array([np.trapezoid(domain.speed(tt), tt), np.trapezoid(domain.speed(-tt), tt)])
    corners = np.array([curve(0.0), curve(np.pi)])
    mesh = _ring_mesh(c, corners, arcs, lens, [False, True], h, layout)
    return _check(mesh)


def _resample_boundary(v: np.ndarray, h: float, corner_deg: float) -> np.ndarray:
    """Points along the polygon at spacing about ``h``, keeping every corner.

    Vertices turning by less than ``corner_deg`` are not kept, so finely
    sampled smooth bodies get evenly spaced boundary nodes.
    """
    e_in = v - np.roll(v, 1, axis=0)
    e_out = np.roll(v, -1, axis=0) - v
    turn = np.degrees(np.abs(np.arctan2(e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0],
                                        np.einsum("ij,ij->i", e_in, e_out))))
    corners = np.nonzero(turn >= corner_deg)[0]
    n = len(v)
    if len(corners) == 0:
        corners = np.array([0])
    out = []
    for a, i0 in enumerate(corners):
        i1 = corners[(a + 1) % len(corners)]
        idx = np.arange(i0, i1 + (n if i1 <= i0 else 0) + 1) % n
        pts = v[idx]
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        k = max(1, int(math.ceil(cum[-1] / h)))
        s = np.arange(k) * cum[-1] / k
        out.append(np.stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])], axis=1))
    return np.concatenate(out)


def triangulate_polygon(body: ConvexBody, h: float, smoothing: int = 3, corner_deg: float = 15.0) -> Mesh:
    """Delaunay mesh of a convex polygon: resampled boundary plus a hexagonal interior lattice.

    The lattice is anchored at the centroid, so the centroid is node 0.
    Interior nodes closer than ``h/2`` to the boundary are dropped, and a
    few Laplacian smoothing passes even out the boundary layer (a pass is
    kept only if no triangle inverts).
    """
    from scipy.spatial import Delaunay

    v = body.vertices
    c = body.centroid
    normals, offsets = body.halfplanes()
    inr = float(np.min(offsets - normals @ c))
    if not h > 0 or h > inr:
        raise MeshingError(f"target edge length h={h} too coarse for the polygon")
    bnd = _resample_boundary(v, h, corner_deg)
    lo, hi = v.min(axis=0), v.max(axis=0)
    dy = h * math.sqrt(3) / 2
    rows = np.arange(math.floor((lo[1] - c[1]) / dy), math.ceil((hi[1] - c[1]) / dy) + 1)
    cols = np.arange(math.floor((lo[0] - c[0]) / h) - 1, math.ceil((hi[0] - c[0]) / h) + 2)
    gx, gy = np.meshgrid(cols * h, rows * dy)
    gx = gx + 0.5 * h * (rows[:, None] % 2)
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1) + c
    depth = np.min(offsets[None, :] - grid @ normals.T, axis=1)
    inner = grid[depth >= 0.5 * h]
    # the centroid first, so point evaluations at the center read node 0
    k0 = int(np.argmin(np.linalg.norm(inner - c, axis=1)))
    inner = np.concatenate([inner[k0:k0 + 1], np.delete(inner, k0, axis=0)])
    nodes = np.concatenate([inner, bnd])
    tri = Delaunay(nodes).simplices.astype(np.int64)
    p = nodes[tri]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tri = tri[np.abs(signed) > 1e-12 * h * h]
    flip = ((nodes[tri[:, 1], 0] - nodes[tri[:, 0], 0]) * (nodes[tri[:, 2], 1] - nodes[tri[:, 0], 1])
            - (nodes[tri[:, 1], 1] - nodes[tri[:, 0], 1]) * (nodes[tri[:, 2], 0] - nodes[tri[:, 0], 0])) < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    n_in = len(inner)
    boundary = np.arange(n_in, len(nodes))
    nodes = _smooth(nodes, tri, n_in, smoothing)
    rel = nodes[boundary] - c
    mesh = Mesh(nodes, tri, boundary, np.arctan2(rel[:, 1], rel[:, 0]), c.copy(), h, ("delaunay", len(nodes)))
    return _check(mesh)


def _smooth(nodes: np.ndarray, tri: np.ndarray, n_free: int, passes: int) -> np.ndarray:
    """Jacobi Laplacian smoothing of the first ``n_free`` nodes (the interior ones)."""
    import scipy.sparse as sp

    n = len(nodes)
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
    adj = ((adj + adj.T) > 0).astype(float)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    for _ in range(passes):
        avg = (adj @ nodes) / deg[:, None]
        trial = nodes.copy()
        trial[:n_free] = avg[:n_free]
        p = trial[tri]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        if np.any(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] <= 0):
            break
        nodes = trial
    return nodes
