"""Piecewise-linear Galerkin solver for the chained Dirichlet problems.

    -Lap u = f,   -Lap v = u,   -Lap w = v,   -Lap z = u^2 / 2     (zero on the boundary)

and their domain derivatives for a normal deformation ``V.nu``

    -Lap u' = 0,      u' = |grad u| V.nu
    -Lap v' = u',     v' = |grad v| V.nu
    -Lap w' = v',     w' = |grad w| V.nu
    -Lap z' = u u',   z' = |grad z| V.nu

Normal derivatives on the boundary are recovered variationally: the
residual of the discrete equation tested against boundary hat functions is
inverted with the boundary mass matrix.  The recovered fluxes satisfy
Green's formula exactly at the discrete level.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .geometry import ConvexBody, DeformationField, StarDomain, polygon_area, polygon_centroid
from .meshing import Mesh

# 7-point, degree-5 rule on the reference triangle (barycentric points, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_QP = np.array([[1 / 3, 1 / 3, 1 / 3],
                [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
                [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2]])
_QW = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


# --------------------------------------------------------------------------
# sources
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def evaluate(self, points) -> np.ndarray:
        return np.full(np.asarray(points).shape[:-1], float(self.value))

    def load(self, mesh: Mesh, mass: sp.spmatrix | None = None) -> np.ndarray:
        if mass is None:
            mass = assemble(mesh)[1]
        return float(self.value) * np.asarray(mass.sum(axis=1)).ravel()

    def support_inside(self, domain) -> bool:
        return True

    def to_json(self) -> dict:
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class RadialPolynomial:
    """f(x) = sum_p coeffs[p] |x - center|^p."""

    coeffs: tuple[float, ...]
    center: tuple[float, float] = (0.0, 0.0)

    def evaluate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        r = np.hypot(p[..., 0] - self.center[0], p[..., 1] - self.center[1])
        return np.polynomial.polynomial.polyval(r, self.coeffs)

    def load(self, mesh: Mesh, mass=None) -> np.ndarray:
        return quadrature_load(mesh, self.evaluate)

    def support_inside(self, domain) -> bool:
        return True

    def to_json(self) -> dict:
        return {"type": "radial", "coeffs": list(self.coeffs), "center": list(self.center)}


@dataclass(frozen=True)
class Indicator:
    """value * chi_C for a convex polygon C; integrated exactly by clipping."""

    body: ConvexBody
    value: float = 1.0

    def evaluate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        inside = self.body.contains(p.reshape(-1, 2)).reshape(p.shape[:-1])
        return np.where(inside, float(self.value), 0.0)

    def load(self, mesh: Mesh, mass=None) -> np.ndarray:
        out = np.zeros(mesh.n_nodes)
        lo, hi = self.body.vertices.min(axis=0), self.body.vertices.max(axis=0)
        p = mesh.nodes[mesh.triangles]
        cand = np.nonzero(np.all(p.max(axis=1) >= lo, axis=1) & np.all(p.min(axis=1) <= hi, axis=1))[0]
        inside = self.body.contains(p[cand].reshape(-1, 2)).reshape(-1, 3).all(axis=1)
        full = cand[inside]
        if len(full):
            area = mesh.triangle_areas()[full]
            np.add.at(out, mesh.triangles[full].ravel(), np.repeat(area / 3.0, 3))
        for t in cand[~inside]:
            tri = p[t]
            piece = self.body.clip(tri)
            if len(piece) < 3:
                continue
            a = polygon_area(piece)
            if a <= 0:
                continue
            lam = _barycentric(tri, polygon_centroid(piece))
            np.add.at(out, mesh.triangles[t], a * lam)
        return float(self.value) * out

    def support_inside(self, domain) -> bool:
        if isinstance(domain, StarDomain):
            return bool(np.all(domain.contains(self.body.vertices, strict=False)))
        return bool(np.all(domain.contains(self.body.vertices, tol=1e-12)))

    def to_json(self) -> dict:
        return {"type": "indicator", "vertices": self.body.vertices.tolist(), "value": self.value}


def line_density(a: float, length: float, width: float, center=(0.0, 0.0)) -> Indicator:
    """Thin-rectangle stand-in for ``a * delta`` on a segment: mass ``a`` per unit length."""
    return Indicator(ConvexBody.thin_rectangle(length, width, center), a / width)


def disk_indicator(radius: float, center=(0.0, 0.0), n: int = 512, value: float = 1.0) -> Indicator:
    return Indicator(ConvexBody.regular(n, radius, center), value)


@dataclass(frozen=True, eq=False)
class NodalSource:
    """Piecewise-linear source given by nodal values on a mesh."""

    values: np.ndarray

    def load(self, mesh: Mesh, mass=None) -> np.ndarray:
        if mass is None:
            mass = assemble(mesh)[1]
        return mass @ self.values


def source_from_json(data: dict):
    kind = data.get("type", "constant")
    if kind == "constant":
        return Constant(float(data.get("value", 1.0)))
    if kind == "radial":
        return RadialPolynomial(tuple(data["coeffs"]), tuple(data.get("center", (0.0, 0.0))))
    if kind == "indicator":
        return Indicator(ConvexBody(np.asarray(data["vertices"], dtype=float)), float(data.get("value", 1.0)))
    if kind == "disk_indicator":
        return disk_indicator(float(data["radius"]), tuple(data.get("center", (0.0, 0.0))),
                              int(data.get("n", 512)), float(data.get("value", 1.0)))
    if kind == "line_density":
        return line_density(float(data["a"]), float(data["length"]), float(data["width"]),
                            tuple(data.get("center", (0.0, 0.0))))
    raise ValueError(f"unknown source type {kind!r}")


def _barycentric(tri: np.ndarray, x: np.ndarray) -> np.ndarray:
    t = np.array([[tri[0, 0], tri[1, 0], tri[2, 0]], [tri[0, 1], tri[1, 1], tri[2, 1]], [1, 1, 1]])
    return np.linalg.solve(t, np.array([x[0], x[1], 1.0]))


def quadrature_load(mesh: Mesh, fn) -> np.ndarray:
    """Load vector int f phi_i with a degree-5 rule per triangle."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.triangle_areas()
    qx = np.einsum("qk,tkd->tqd", _QP, p)
    fq = fn(qx)
    local = np.einsum("q,tq,qk->tk", _QW, fq, _QP) * area[:, None]
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out


# --------------------------------------------------------------------------
# assembly and solves
# --------------------------------------------------------------------------

def assemble(mesh: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness and consistent mass matrices of P1 elements."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.triangle_areas()
    if np.any(area <= 0):
        raise SolverError("degenerate or inverted triangle")
    # gradients of barycentric coordinates: rot90 of the opposite edge / (2 area)
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    g = np.stack([np.stack([-e[:, 1], e[:, 0]], axis=1) for e in (e0, e1, e2)], axis=1) / (2 * area)[:, None, None]
    kloc = np.einsum("tid,tjd->tij", g, g) * area[:, None, None]
    mref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mloc = area[:, None, None] * mref
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    k = sp.coo_matrix((kloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    m = sp.coo_matrix((mloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return k, m


class DirichletSolver:
    """One factorization of the interior stiffness block, reused by every solve on a mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.K, self.M = assemble(mesh)
        bnd = mesh.boundary
        flag = mesh.is_boundary
        self.interior = np.nonzero(~flag)[0]
        self.bnd = bnd
        self.K_ii = self.K[self.interior][:, self.interior].tocsc()
        self.K_ib = self.K[self.interior][:, bnd].tocsr()
        self.K_b = self.K[bnd].tocsr()
        try:
            self._lu = spla.splu(self.K_ii)
        except RuntimeError as exc:
            raise SolverError(f"singular stiffness matrix: {exc}") from exc
        ln = mesh.edge_lengths
        nb = len(bnd)
        i = np.arange(nb)
        j = (i + 1) % nb
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([i, j, j, i])
        vals = np.concatenate([ln / 3, ln / 3, ln / 6, ln / 6])
        self.M_bnd = sp.coo_matrix((vals, (rows, cols)), shape=(nb, nb)).tocsc()
        self._lu_bnd = spla.splu(self.M_bnd)
        self.ones_mass = np.asarray(self.M.sum(axis=1)).ravel()

    def load_of(self, source) -> np.ndarray:
        if isinstance(source, np.ndarray):
            return self.M @ source
        return source.load(self.mesh, self.M)

    def solve(self, load: np.ndarray, g: np.ndarray | None = None) -> np.ndarray:
        """Nodal solution with boundary values ``g`` (ordered as ``mesh.boundary``)."""
        x = np.zeros(self.mesh.n_nodes)
        rhs = load[self.interior].copy()
        if g is not None:
            x[self.bnd] = g
            rhs -= self.K_ib @ g
        xi = self._lu.solve(rhs)
        res = rhs - self.K_ii @ xi
        scale = max(np.linalg.norm(rhs), 1e-300)
        if np.linalg.norm(res) > 1e-10 * scale:
            xi += self._lu.solve(res)
            res = rhs - self.K_ii @ xi
            if np.linalg.norm(res) > 1e-10 * scale:
                raise SolverError("direct solve did not reach relative residual 1e-10")
        x[self.interior] = xi
        return x

    def normal_derivative(self, x: np.ndarray, load: np.ndarray) -> np.ndarray:
        """Signed nodal d x / d nu on the boundary from the discrete residual."""
        r = self.K_b @ x - load[self.bnd]
        return self._lu_bnd.solve(r)

    def integral(self, x: np.ndarray) -> float:
        return float(self.ones_mass @ x)


def edge_average(nodal: np.ndarray) -> np.ndarray:
    return 0.5 * (nodal + np.roll(nodal, -1))


@dataclass(frozen=True, eq=False)
class Field:
    mesh: Mesh
    values: np.ndarray

    def boundary_values(self) -> np.ndarray:
        return self.values[self.mesh.boundary]

    def dump(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_id", "value"])
            for i, v in enumerate(self.values):
                w.writerow([i, repr(float(v))])


def solve_dirichlet(mesh: Mesh, source, solver: DirichletSolver | None = None) -> Field:
    """P1 solution of -Lap u = f with u = 0 on the boundary."""
    solver = solver or DirichletSolver(mesh)
    return Field(mesh, solver.solve(solver.load_of(source)))


def boundary_flux(mesh: Mesh, field: Field, source, solver: DirichletSolver | None = None) -> np.ndarray:
    """Per-edge |grad u| = -du/dnu for a field vanishing on the boundary."""
    solver = solver or DirichletSolver(mesh)
    q = solver.normal_derivative(field.values, solver.load_of(source))
    return edge_average(-q)


STAGES = ("u", "v", "w", "z")


@dataclass(eq=False)
class Chain:
    """u, v, w, z on one mesh with nodal boundary fluxes |grad .| (ordered as mesh.boundary)."""

    mesh: Mesh
    solver: DirichletSolver
    fields: dict[str, np.ndarray]
    loads: dict[str, np.ndarray]
    flux: dict[str, np.ndarray]

    @property
    def u(self):
        return self.fields["u"]

    @property
    def v(self):
        return self.fields["v"]

    @property
    def w(self):
        return self.fields["w"]

    @property
    def z(self):
        return self.fields["z"]

    def edge_flux(self, stage: str) -> np.ndarray:
        return edge_average(self.flux[stage])

    def source_integral(self, stage: str) -> float:
        return float(self.loads[stage].sum())

    def dump_flux(self, stage: str, path: str | Path) -> None:
        mid = self.mesh.edge_midpoints
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["edge_id", "arc_midpoint_x", "arc_midpoint_y", "flux"])
            for i, (p, q) in enumerate(zip(mid, self.edge_flux(stage))):
                w.writerow([i, repr(float(p[0])), repr(float(p[1])), repr(float(q))])


def solve_chain(mesh: Mesh, source, stages: tuple[str, ...] = STAGES,
                solver: DirichletSolver | None = None) -> Chain:
    """Sequential solves sharing one factorization; later stages are optional."""
    solver = solver or DirichletSolver(mesh)
    fields, loads, flux = {}, {}, {}

    def run(name, load):
        x = solver.solve(load)
        fields[name], loads[name] = x, load
        flux[name] = -solver.normal_derivative(x, load)

    run("u", solver.load_of(source))
    if "v" in stages or "w" in stages:
        run("v", solver.M @ fields["u"])
    if "w" in stages:
        run("w", solver.M @ fields["v"])
    if "z" in stages:
        run("z", solver.M @ (0.5 * fields["u"] ** 2))
    return Chain(mesh, solver, fields, loads, flux)


@dataclass(eq=False)
class DerivativeChain:
    """Domain derivatives with signed nodal normal derivatives ``dnu`` on the boundary."""

    mesh: Mesh
    vn: np.ndarray
    fields: dict[str, np.ndarray]
    loads: dict[str, np.ndarray]
    dnu: dict[str, np.ndarray]

    def edge_dnu(self, stage: str) -> np.ndarray:
        return edge_average(self.dnu[stage])


def solve_derivative_chain(mesh: Mesh, chain: Chain, field: DeformationField | np.ndarray,
                           stages: tuple[str, ...] = STAGES) -> DerivativeChain:
    """Domain derivatives u', v', w', z' for the normal speed ``field``.

    ``field`` may be a :class:`DeformationField` (evaluated at the polar
    angle of each boundary node) or nodal values of ``V.nu`` on the boundary.
    """
    solver = chain.solver
    vn = field(mesh.boundary_theta) if callable(field) else np.asarray(field, dtype=float)
    fields, loads, dnu = {}, {}, {}
    zero = np.zeros(mesh.n_nodes)

    def run(name, load):
        x = solver.solve(load, chain.flux[name] * vn)
        fields[name], loads[name] = x, load
        dnu[name] = solver.normal_derivative(x, load)

    run("u", zero)
    if "v" in stages or "w" in stages:
        run("v", solver.M @ fields["u"])
    if "w" in stages:
        run("w", solver.M @ fields["v"])
    if "z" in stages:
        run("z", solver.M @ (chain.u * fields["u"]))
    return DerivativeChain(mesh, vn, fields, loads, dnu)


@dataclass(frozen=True)
class IdentityGap:
    name: str
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return (self.lhs - self.rhs) / max(abs(self.rhs), 1e-300)

    def to_json(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "gap": self.gap}


def green_identity_report(mesh: Mesh, chain: Chain, dchain: DerivativeChain) -> list[IdentityGap]:
    """Boundary-flux identities of the derivative chain (f = 1 setting).

        int -dv'/dnu = int |grad u|^2 V.nu
        int -dw'/dnu = 2 int |grad u||grad v| V.nu
        int -dz'/dnu = int |grad u||grad v| V.nu
    """
    fu, fv, vn = chain.flux["u"], chain.flux["v"], dchain.vn
    bi = mesh.boundary_integral
    uv = bi(fu * fv * vn)
    return [
        IdentityGap("v_prime_flux", bi(-dchain.dnu["v"]), bi(fu * fu * vn)),
        IdentityGap("w_prime_flux", bi(-dchain.dnu["w"]), 2 * uv),
        IdentityGap("z_prime_flux", bi(-dchain.dnu["z"]), uv),
    ]
