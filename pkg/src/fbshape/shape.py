"""Shape functionals on star domains and their boundary-integral derivatives.

Everything is evaluated from one :class:`ShapeState` (mesh, chain u, v, w,
boundary curvature) so that values, analytic derivatives and the boundary
conditions of the ratio functionals all share a single set of solves.
Volume and perimeter come from the exact radial function; every other
functional comes from the finite-element chain.

Derivative formulas, with q_s = |grad s| on the boundary and Vn = V.nu:

    VOL        int Vn
    PER        int H Vn
    INT_U      int q_u q_psi Vn          (psi the torsion function)
    F_INT_U2   2 int q_u q_v Vn
    G_DIRICHLET int q_u^2 Vn
    INT_UV     2 int q_u q_w Vn + int q_v^2 Vn
    J_P(c)     c dVOL - dF / 2
    J4         int [(2N-2) q_u^2 - 2N(N-1) H q_u^3] Vn - 3N int q_u^2 du'/dnu
    RATIO_k    quotient rule on its (F, G) pair
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import DeformationField, StarDomain, boundary_trace, deform, measures, mode_basis
from .meshing import triangulate
from .pde import Constant, DirichletSolver, solve_chain, solve_derivative_chain

N_DIM = 2
DEFAULT_H_FACTOR = 0.02
TAGS = ("VOL", "PER", "F_INT_U2", "G_DIRICHLET", "INT_U", "INT_UV", "J_P", "J4",
        "RATIO_1", "RATIO_2", "RATIO_3", "RATIO_4", "RATIO_5")
# (numerator, denominator) of the five ratio functionals
RATIOS = {
    1: ("VOL", "INT_U"),
    2: ("INT_U", "F_INT_U2"),
    3: ("VOL", "F_INT_U2"),
    4: ("INT_UV", "F_INT_U2"),
    5: ("INT_UV", "INT_U"),
}
_UNIT_SOURCE_ONLY = {"J4", "RATIO_1", "RATIO_2", "RATIO_3", "RATIO_4", "RATIO_5"}


@dataclass(frozen=True)
class FunctionalId:
    tag: str
    c: float | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown functional {self.tag!r}")
        if self.tag == "J_P":
            if self.c is None or not (self.c > 0 and np.isfinite(self.c)):
                raise ValueError("J_P needs a finite c > 0")

    @classmethod
    def parse(cls, text: str) -> "FunctionalId":
        """``"VOL"``, ``"RATIO_3"`` or ``"J_P:0.03125"``."""
        tag, _, par = text.partition(":")
        return cls(tag.strip().upper(), float(par) if par else None)

    @property
    def label(self) -> str:
        return f"{self.tag}:{self.c:g}" if self.c is not None else self.tag


def is_unit_source(source) -> bool:
    return isinstance(source, Constant) and source.value == 1.0


def default_h(domain: StarDomain) -> float:
    return DEFAULT_H_FACTOR * domain.a0


class ShapeState:
    """Mesh, chain and boundary geometry of one domain, shared by all functionals."""

    def __init__(self, domain: StarDomain, source=None, h: float | None = None, layout=None,
                 trace_samples: int = 1024):
        self.domain = domain
        self.source = Constant(1.0) if source is None else source
        self.h = default_h(domain) if h is None else h
        self.mesh = triangulate(domain, self.h, layout)
        self.solver = DirichletSolver(self.mesh)
        self.chain = solve_chain(self.mesh, self.source, ("u", "v", "w"), self.solver)
        if is_unit_source(self.source):
            self.torsion_flux = self.chain.flux["u"]
        else:
            ones = self.solver.ones_mass
            psi = self.solver.solve(ones)
            self.torsion_flux = -self.solver.normal_derivative(psi, ones)
        self.curvature = domain.curvature(self.mesh.boundary_theta)
        self.trace = boundary_trace(domain, trace_samples)
        self.area, self.perimeter = measures(domain)
        self._primitive = None

    @property
    def layout(self):
        return self.mesh.layout

    def flux(self, stage: str) -> np.ndarray:
        return self.chain.flux[stage]

    def primitives(self) -> dict[str, float]:
        if self._primitive is None:
            ch, M = self.chain, self.solver.M
            u, v = ch.u, ch.v
            qu = ch.flux["u"]
            g = float(u @ ch.loads["u"])
            self._primitive = {
                "VOL": self.area,
                "PER": self.perimeter,
                "INT_U": self.solver.integral(u),
                "F_INT_U2": float(u @ (M @ u)),
                "G_DIRICHLET": g,
                "INT_UV": float(u @ (M @ v)),
                "CUBE": self.mesh.boundary_integral(qu ** 3),
            }
        return self._primitive

    def value(self, fid: FunctionalId) -> float:
        _require_source(fid, self.source)
        p = self.primitives()
        if fid.tag in p:
            return p[fid.tag]
        if fid.tag == "J_P":
            return fid.c * p["VOL"] - 0.5 * p["F_INT_U2"]
        if fid.tag == "J4":
            return N_DIM * p["CUBE"] - (N_DIM + 2) * p["G_DIRICHLET"]
        num, den = RATIOS[int(fid.tag[-1])]
        return p[num] / p[den]

    def boundary_speed(self, field) -> np.ndarray:
        return field(self.mesh.boundary_theta)

    def primitive_derivatives(self, field: DeformationField) -> dict[str, float]:
        bi = self.mesh.boundary_integral
        vn = self.boundary_speed(field)
        vt = field(self.trace.theta)
        qu, qv, qw = self.flux("u"), self.flux("v"), self.flux("w")
        return {
            "VOL": self.trace.integrate(vt),
            "PER": self.trace.integrate(self.trace.curvature * vt),
            "INT_U": bi(qu * self.torsion_flux * vn),
            "F_INT_U2": 2 * bi(qu * qv * vn),
            "G_DIRICHLET": bi(qu * qu * vn),
            "INT_UV": 2 * bi(qu * qw * vn) + bi(qv * qv * vn),
        }

    def u_prime_dnu(self, field: DeformationField) -> np.ndarray:
        """Signed nodal normal derivative of the domain derivative u'."""
        d = solve_derivative_chain(self.mesh, self.chain, self.boundary_speed(field), ("u",))
        return d.dnu["u"]

    def derivative(self, fid: FunctionalId, field: DeformationField,
                   prim: dict[str, float] | None = None) -> float:
        _require_source(fid, self.source)
        d = prim if prim is not None else self.primitive_derivatives(field)
        if fid.tag in d:
            return d[fid.tag]
        if fid.tag == "J_P":
            return fid.c * d["VOL"] - 0.5 * d["F_INT_U2"]
        if fid.tag == "J4":
            n = N_DIM
            qu = self.flux("u")
            vn = self.boundary_speed(field)
            bi = self.mesh.boundary_integral
            geo = bi(((2 * n - 2) * qu ** 2 - 2 * n * (n - 1) * self.curvature * qu ** 3) * vn)
            return geo - 3 * n * bi(qu ** 2 * self.u_prime_dnu(field))
        num, den = RATIOS[int(fid.tag[-1])]
        p = self.primitives()
        return (d[num] * p[den] - p[num] * d[den]) / p[den] ** 2

    def oc_constraint(self, field: DeformationField) -> float:
        """int |grad u|^2 du'/dnu, the second optimality line of the cubic-flux functional."""
        return self.mesh.boundary_integral(self.flux("u") ** 2 * self.u_prime_dnu(field))


def _require_source(fid: FunctionalId, source) -> None:
    if fid.tag in _UNIT_SOURCE_ONLY and not is_unit_source(source):
        raise ValueError(f"{fid.tag} is defined for the source f = 1 only")


def functional_value(domain: StarDomain, fid: FunctionalId, source=None, h: float | None = None) -> float:
    return ShapeState(domain, source, h).value(fid)


def shape_derivative(domain: StarDomain, fid: FunctionalId, field: DeformationField, source=None,
                     h: float | None = None) -> float:
    return ShapeState(domain, source, h).derivative(fid, field)


def fd_values(domain: StarDomain, fids: Sequence[FunctionalId], field: DeformationField, source=None,
              eps: float = 1e-3, h: float | None = None, layout=None) -> dict[str, float]:
    """Central differences of several functionals from one pair of re-meshed solves.

    Both deformed domains reuse the node layout of ``domain``'s mesh so the
    discrete functionals vary smoothly with ``eps``.
    """
    h = default_h(domain) if h is None else h
    if layout is None:
        layout = triangulate(domain, h).layout
    plus = ShapeState(deform(domain, field, eps), source, h, layout)
    minus = ShapeState(deform(domain, field, -eps), source, h, layout)
    return {f.label: (plus.value(f) - minus.value(f)) / (2 * eps) for f in fids}


def fd_shape_derivative(domain: StarDomain, fid: FunctionalId, field: DeformationField, source=None,
                        eps: float = 1e-3, h: float | None = None) -> float:
    return fd_values(domain, [fid], field, source, eps, h)[fid.label]


@dataclass
class DerivativeCheck:
    functional: str
    field_mode: str
    analytic: float
    fd: float
    scale: float

    @property
    def rel_gap(self) -> float:
        return abs(self.analytic - self.fd) / max(abs(self.fd), self.scale)


def derivative_checks(domain: StarDomain, fids: Sequence[FunctionalId], fields: Iterable[DeformationField],
                      source=None, eps: float = 1e-3, h: float | None = None) -> list[DerivativeCheck]:
    """Analytic versus central-difference derivatives for every (functional, field) pair.

    The comparison scale of each functional is its own magnitude, so
    derivatives that vanish by symmetry are judged against the size of the
    functional rather than against zero.
    """
    state = ShapeState(domain, source, h)
    out = []
    for field in fields:
        prim = state.primitive_derivatives(field)
        fd = fd_values(domain, fids, field, source, eps, state.h, state.layout)
        for f in fids:
            scale = abs(state.value(f))
            out.append(DerivativeCheck(f.label, field.label(), state.derivative(f, field, prim), fd[f.label], scale))
    return out


def write_derivcheck_csv(rows: Sequence[DerivativeCheck], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["functional", "field_mode", "analytic", "fd", "rel_gap"])
        for r in rows:
            w.writerow([r.functional, r.field_mode, repr(r.analytic), repr(r.fd), repr(r.rel_gap)])


# boundary conditions produced by setting the ratio derivatives to zero: lhs(q_u, q_v) = rhs(q_u, J)
RATIO_CONDITIONS = {
    1: ("|grad u| = 1/J", lambda qu, qv: qu, lambda qu, j: np.full_like(qu, 1 / j)),
    2: ("|grad v| = |grad u|/(2J)", lambda qu, qv: qv, lambda qu, j: qu / (2 * j)),
    3: ("|grad v||grad u| = |grad u|/(2J)", lambda qu, qv: qv * qu, lambda qu, j: qu / (2 * j)),
    4: ("|grad v| = 2J|grad u|", lambda qu, qv: qv, lambda qu, j: 2 * j * qu),
    5: ("|grad v| = J|grad u|", lambda qu, qv: qv, lambda qu, j: j * qu),
}


@dataclass
class StationarityEntry:
    functional: str
    value: float
    max_abs_derivative: float
    worst_field: str
    condition: str
    lhs_mean: float
    rhs_mean: float
    condition_residual: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def stationarity_report(domain: StarDomain, ratios: Sequence[FunctionalId] | None = None,
                        basis: Sequence[DeformationField] | None = None,
                        h: float | None = None) -> list[StationarityEntry]:
    """Largest ratio derivative over a field basis and the sup residual of each ratio's boundary condition.

    Nothing is asserted here: the conditions are evaluated as written and
    reported next to the measured derivatives.
    """
    ratios = ratios or [FunctionalId(f"RATIO_{k}") for k in range(1, 6)]
    basis = basis or mode_basis(domain.modes)
    state = ShapeState(domain, None, h)
    qu, qv = state.flux("u"), state.flux("v")
    prims = [(f, state.primitive_derivatives(f)) for f in basis]
    out = []
    for fid in ratios:
        if not fid.tag.startswith("RATIO_"):
            raise ValueError(f"{fid.tag} is not a ratio functional")
        j = state.value(fid)
        ders = [(abs(state.derivative(fid, f, d)), f.label()) for f, d in prims]
        worst = max(ders)
        text, lhs_fn, rhs_fn = RATIO_CONDITIONS[int(fid.tag[-1])]
        lhs, rhs = lhs_fn(qu, qv), rhs_fn(qu, j)
        w = state.mesh.node_weights
        out.append(StationarityEntry(fid.label, j, worst[0], worst[1], text,
                                     float(w @ lhs / w.sum()), float(w @ rhs / w.sum()),
                                     float(np.max(np.abs(lhs - rhs)))))
    return out
