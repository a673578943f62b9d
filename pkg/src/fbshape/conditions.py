"""Integral inequalities and overdetermined boundary conditions as signed reports.

Inequality entries compare a left side with a right side and carry one of
three verdicts: ``strict`` (lhs > rhs), ``violated`` (lhs < rhs) or
``boundary-case`` when the two agree to within

    1e-9 * max(|lhs|, |rhs|, 1) + band,

where ``band`` is the numerical tolerance of the inputs (zero for closed-form
measures, a discretization estimate for finite-element integrals).

Boundary-condition entries ("profiles") fit the best constant of
``lhs = constant * profile`` on the boundary and report the sup deviation
relative to it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConditionError, DomainError
from .geometry import ConvexBody, DeformationField, StarDomain, measures, polygon_area
from .meshing import triangulate, triangulate_polygon
from .pde import Constant, DirichletSolver, Indicator, solve_chain, solve_derivative_chain

N_DIM = 2
_REL = 1e-9
# relative accuracy assumed for finite-element integrals at the default resolution
FEM_BAND = 2e-3


def verdict(lhs: float, rhs: float, band: float = 0.0) -> str:
    if abs(lhs - rhs) <= _REL * max(abs(lhs), abs(rhs), 1.0) + band:
        return "boundary-case"
    return "strict" if lhs > rhs else "violated"


@dataclass
class ConditionEntry:
    name: str
    lhs: float
    rhs: float
    verdict: str
    branch: str
    band: float = 0.0
    detail: dict = field(default_factory=dict)


@dataclass
class ProfileEntry:
    name: str
    condition: str
    best_constant: float
    sup_deviation: float
    expected: float | None = None


@dataclass
class ConditionParams:
    k: float | None = None
    c: float | None = None
    band: float = 0.0
    M_C: float | None = None  # filled in by existence_report


@dataclass
class ConditionReport:
    entries: list[ConditionEntry] = field(default_factory=list)
    profiles: list[ProfileEntry] = field(default_factory=list)
    params: ConditionParams | None = None

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def profile(self, name: str) -> ProfileEntry:
        for p in self.profiles:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_json(self) -> dict:
        out = {"entries": [asdict(e) for e in self.entries], "profiles": [asdict(p) for p in self.profiles]}
        if self.params is not None:
            out["params"] = asdict(self.params)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# measures of the body C
# --------------------------------------------------------------------------

def _polygon_of(body, samples: int = 4096) -> np.ndarray:
    if isinstance(body, ConvexBody):
        return body.vertices
    return body.point(2 * np.pi * np.arange(samples) / samples)


def body_measures(body) -> tuple[float, float]:
    if isinstance(body, ConvexBody):
        return body.area, body.perimeter
    return measures(body)


def source_integral(source, body) -> tuple[float, float]:
    """(integral of ``source`` over ``body``, numerical band).

    Constants and polygon indicators are integrated exactly; other sources
    are integrated on a mesh of the body.
    """
    if isinstance(source, Constant):
        return float(source.value) * body_measures(body)[0], 0.0
    if isinstance(source, Indicator):
        piece = source.body.clip(_polygon_of(body))
        return float(source.value) * (polygon_area(piece) if len(piece) >= 3 else 0.0), 0.0
    mesh = _mesh_of(body)
    return float(source.load(mesh).sum()), FEM_BAND


def _mesh_of(body):
    if isinstance(body, ConvexBody):
        n, c = body.halfplanes()
        inr = float(np.min(c - n @ body.centroid))
        size = math.sqrt(body.area / math.pi)
        return triangulate_polygon(body, min(0.02 * size, inr / 2))
    return triangulate(body, 0.02 * body.a0)


def torsion_integral(source, body) -> float:
    """Integral of u_C, the solution of -Lap u = f on C with u = 0 on its boundary."""
    mesh = _mesh_of(body)
    solver = DirichletSolver(mesh)
    u = solver.solve(solver.load_of(source))
    return solver.integral(u)


# --------------------------------------------------------------------------
# existence conditions
# --------------------------------------------------------------------------

def existence_report(c_body, source, params: ConditionParams) -> ConditionReport:
    """Existence inequalities for the flux problem (level k) and the product problem (level c).

    ``c_body`` is a :class:`ConvexBody` or a convex :class:`StarDomain`
    (a disk, with exact measures).  A body flagged as a thin rectangle also
    gets the line-density entry: the effective mass per unit length against
    the segment threshold 2k.
    """
    if isinstance(c_body, StarDomain):
        if np.any(c_body.curvature(np.linspace(0, 2 * np.pi, 1024)) < 0):
            raise DomainError("the body C must be convex")
    elif not isinstance(c_body, ConvexBody):
        raise ConditionError("C must be a ConvexBody or a convex StarDomain")
    area, per = body_measures(c_body)
    mass, mass_band = source_integral(source, c_body)
    report = ConditionReport(params=params)
    if params.k is not None:
        rhs = params.k * per
        band = params.band + mass_band * abs(mass)
        report.entries.append(ConditionEntry(
            "flux_existence", mass, rhs, verdict(mass, rhs, band),
            "solution exists" if mass > rhs else "no solution", band,
            {"integral_f": mass, "perimeter": per, "k": params.k}))
        if isinstance(c_body, ConvexBody) and c_body.thin_eps is not None:
            length = per / 2 - c_body.thin_eps
            a_eff = mass / length
            report.entries.append(ConditionEntry(
                "line_density_existence", a_eff, 2 * params.k, verdict(a_eff, 2 * params.k, band / length),
                "solution exists" if a_eff > 2 * params.k else "no solution", band / length,
                {"eps": c_body.thin_eps, "length": length,
                 "threshold_at_eps": params.k * per / length}))
    int_u = torsion_integral(source, c_body) if params.c is not None or not _is_thin(c_body) else None
    if int_u is not None:
        params.M_C = mass * int_u / per ** 2
    if params.c is not None:
        lhs = mass * int_u
        rhs = params.c * per ** 2
        band = params.band + FEM_BAND * abs(lhs)
        report.entries.append(ConditionEntry(
            "product_existence", lhs, rhs, verdict(lhs, rhs, band),
            "solution containing C exists" if lhs > rhs else "inconclusive", band,
            {"integral_f": mass, "integral_u_C": int_u, "perimeter": per, "c": params.c, "M_C": params.M_C}))
    return report


def _is_thin(body) -> bool:
    return isinstance(body, ConvexBody) and body.thin_eps is not None


def line_density_threshold(k: float, length: float, width: float, iters: int = 100) -> float:
    """Line density a at which the flux entry changes sign for a thin rectangle of the given width."""
    from .pde import line_density

    body = ConvexBody.thin_rectangle(length, width)

    def sign(a: float) -> bool:
        rep = existence_report(body, line_density(a, length, width), ConditionParams(k=k))
        e = rep.entry("flux_existence")
        return e.lhs > e.rhs

    lo, hi = 0.0, 1.0
    while not sign(hi):
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if sign(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def extrapolate_to_zero(widths: Sequence[float], values: Sequence[float]) -> float:
    """Linear extrapolation in the width from two samples."""
    (e1, e2), (a1, a2) = widths, values
    return a1 - e1 * (a2 - a1) / (e2 - e1)


# --------------------------------------------------------------------------
# overdetermined boundary conditions
# --------------------------------------------------------------------------

def best_constant(lhs: np.ndarray, profile: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    """Boundary average ratio int lhs / int profile and the relative sup deviation."""
    c = float(weights @ lhs / (weights @ profile))
    dev = float(np.max(np.abs(lhs - c * profile)) / max(np.max(np.abs(c * profile)), 1e-300))
    return c, dev


def overdetermined_residuals(domain: StarDomain, source=None, h: float | None = None) -> ConditionReport:
    """Best constants and deviations of the ball-characterizing boundary conditions.

    The curvature entry always uses f = N; the other entries use ``source``
    (default f = 1).  Entries involving x.nu require the boundary to be
    star-shaped about the center (x.nu > 0).
    """
    source = Constant(1.0) if source is None else source
    h = 0.02 * domain.a0 if h is None else h
    mesh = triangulate(domain, h)
    solver = DirichletSolver(mesh)
    w = mesh.node_weights
    theta = mesh.boundary_theta
    curv = domain.curvature(theta)
    rep = ConditionReport()

    ball = solve_chain(mesh, Constant(float(N_DIM)), ("u",), solver)
    if np.all(curv > 0):
        c, dev = best_constant(ball.flux["u"], 1.0 / curv, w)
        rep.profiles.append(ProfileEntry("flux_inverse_curvature", "|grad u| = 1/H with f = N", c, dev, 1.0))

    ch = solve_chain(mesh, source, ("u", "v"), solver)
    qu, qv = ch.flux["u"], ch.flux["v"]
    rel = mesh.nodes[mesh.boundary] - mesh.center
    # outward normal at boundary nodes from the exact curve
    r, r1 = domain.rho(theta), domain.drho(theta)
    tx, ty = r1 * np.cos(theta) - r * np.sin(theta), r1 * np.sin(theta) + r * np.cos(theta)
    support = (rel[:, 0] * ty - rel[:, 1] * tx) / np.hypot(tx, ty)
    one = np.ones_like(qu)

    for name, text, lhs, prof in [
        ("grad_v_constant", "|grad v| = c", qv, one),
        ("grad_v_over_grad_u", "|grad v| = c |grad u|", qv, qu),
        ("oc_cubic", "|grad v| = c |grad u|^3", qv, qu ** 3),
        ("grad_u_constant", "|grad u| = c", qu, one),
        ("flux_product_constant", "|grad u||grad v| = c", qu * qv, one),
    ]:
        c, dev = best_constant(lhs, prof, w)
        expected = N_DIM / (N_DIM + 2) if name == "oc_cubic" else None
        rep.profiles.append(ProfileEntry(name, text, c, dev, expected))

    starshaped = bool(np.all(support > 0))
    if starshaped:
        c, dev = best_constant(qv, support, w)
        rep.profiles.append(ProfileEntry("grad_v_support", "|grad v| = c x.nu", c, dev))

    # lower-bound hypotheses: the largest constant for which each holds
    bounds = [("grad_u_lower", "|grad u| >= k", qu), ("product_lower", "|grad u||grad v| >= c", qu * qv),
              ("ratio_lower", "|grad v| >= k |grad u|", qv / qu)]
    if starshaped:
        bounds.append(("support_ratio_lower", "|grad v| >= k x.nu", qv / support))
    for name, text, vals in bounds:
        rep.entries.append(ConditionEntry(name, float(vals.min()), float(vals.max()), "strict",
                                          "largest admissible constant = lhs", 0.0, {"condition": text}))
    if not starshaped:
        rep.entries.append(ConditionEntry("starshaped", float(support.min()), 0.0, "violated",
                                          "x.nu entries skipped"))

    # second optimality line of the cubic-flux functional, for a dilation
    d = solve_derivative_chain(mesh, ch, DeformationField(1.0), ("u",))
    val = mesh.boundary_integral(qu ** 2 * d.dnu["u"])
    scale = mesh.boundary_integral(qu ** 3)
    rep.entries.append(ConditionEntry("oc_constraint_dilation", abs(val) / scale, 0.0,
                                      verdict(abs(val) / scale, 0.0, FEM_BAND),
                                      "int |grad u|^2 du'/dnu relative to int |grad u|^3", FEM_BAND,
                                      {"value": val}))
    return rep


# --------------------------------------------------------------------------
# harmonic mean-value test
# --------------------------------------------------------------------------

def didenko_fields() -> list[DeformationField]:
    """Constant field and 1 + cos/sin perturbations; all have nonzero boundary mean on a disk."""
    out = [DeformationField(1.0)]
    out += [DeformationField(1.0, tuple(0.5 if j == k else 0.0 for j in range(1, k + 1))) for k in range(1, 5)]
    out += [DeformationField(1.0, (), tuple(0.5 if j == k else 0.0 for j in range(1, k + 1))) for k in range(1, 4)]
    return out


@dataclass
class DidenkoReport:
    labels: list[str]
    volume_integrals: list[float]
    boundary_integrals: list[float]
    usable: list[bool]
    ratios: list[float]
    spread: float
    mean_ratio: float
    expected_ball: float  # |Omega| / |boundary|, equal to R/N on a ball
    ball: bool

    def to_json(self) -> dict:
        return asdict(self)


def didenko_ratio(domain: StarDomain, fields: Sequence[DeformationField] | None = None,
                  h: float | None = None, tol: float = 0.02) -> DidenkoReport:
    """Ratios int u' dx / int u' dsigma per field with f = 1, and their relative spread.

    A field is unusable when its boundary integral is negligible against
    the boundary integral of |u'|.  ``ball`` is true when the spread is
    within ``tol`` and the mean ratio matches |Omega|/|boundary| within ``tol``.
    """
    fields = list(fields) if fields is not None else didenko_fields()
    h = 0.02 * domain.a0 if h is None else h
    mesh = triangulate(domain, h)
    ch = solve_chain(mesh, Constant(1.0), ("u",))
    vol, bnd, use, rat = [], [], [], []
    for f in fields:
        d = solve_derivative_chain(mesh, ch, f, ("u",))
        trace = ch.flux["u"] * d.vn
        b = mesh.boundary_integral(trace)
        a = ch.solver.integral(d.fields["u"])
        ok = abs(b) > 1e-6 * mesh.boundary_integral(np.abs(trace))
        vol.append(a)
        bnd.append(b)
        use.append(bool(ok))
        rat.append(a / b if ok else float("nan"))
    good = [r for r, u in zip(rat, use) if u]
    if not good:
        raise ConditionError("every field has a vanishing boundary integral")
    mean = float(np.mean(good))
    spread = float((max(good) - min(good)) / abs(mean))
    area, per = measures(domain)
    expected = area / per
    ball = spread <= tol and abs(mean - expected) <= tol * expected
    return DidenkoReport([f.label() for f in fields], vol, bnd, use, rat, spread, mean, expected, ball)
