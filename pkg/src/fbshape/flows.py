"""Boundary flows driven by the residual of an overdetermined condition.

Each iteration solves the chain on the current domain, evaluates the
residual r on the boundary and moves the boundary with the normal speed

    V.nu = sum_j a_j phi_j,   a = argmin || W^(1/2) (D r . a + r) ||,

where phi_j runs over the 2M+1 Fourier fields of the domain and D r . phi_j
is the linearized change of the residual under phi_j, obtained from one
derivative-chain solve per field.  Directions the residual does not see
(translations, and dilations for the scale-invariant condition) are cut by
the singular-value cutoff ``rcond``.  The step length is halved until the
sup-norm of the residual decreases.

Linearizations used, with q_s = |grad s| on the boundary and H the curvature:

    D q_u = -du'/dnu + (f - H q_u) Vn
    D q_v = -dv'/dnu - H q_v Vn
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SupportError
from .geometry import ConvexBody, DeformationField, StarDomain, deform, has_c_gnp, hausdorff_distance, \
    measures, mode_basis
from .meshing import triangulate
from .pde import Constant, DirichletSolver, edge_average, solve_chain, solve_derivative_chain, source_from_json

N_DIM = 2
PROBLEMS = ("SERRIN", "QS", "P", "OC")


@dataclass(frozen=True, eq=False)
class ProblemId:
    tag: str
    k: float | None = None
    c: float | None = None
    source: object = None

    def __post_init__(self):
        if self.tag not in PROBLEMS:
            raise ValueError(f"unknown problem {self.tag!r}")
        if self.tag in ("SERRIN", "QS") and not (self.k is not None and self.k > 0):
            raise ValueError(f"{self.tag} needs k > 0")
        if self.tag == "P" and not (self.c is not None and self.c > 0):
            raise ValueError("P needs c > 0")
        if self.tag in ("SERRIN", "OC") or self.source is None:
            object.__setattr__(self, "source", Constant(1.0))

    @classmethod
    def serrin(cls, k: float) -> "ProblemId":
        return cls("SERRIN", k=k)

    @classmethod
    def qs(cls, source, k: float) -> "ProblemId":
        return cls("QS", k=k, source=source)

    @classmethod
    def p(cls, source, c: float) -> "ProblemId":
        return cls("P", c=c, source=source)

    @classmethod
    def oc(cls) -> "ProblemId":
        return cls("OC")

    @property
    def stages(self) -> tuple[str, ...]:
        return ("u",) if self.tag in ("SERRIN", "QS") else ("u", "v")

    def to_json(self) -> dict:
        out = {"tag": self.tag}
        if self.k is not None:
            out["k"] = self.k
        if self.c is not None:
            out["c"] = self.c
        out["source"] = self.source.to_json()
        return out


class _Evaluation:
    """Chain and nodal residual of one problem on one domain."""

    def __init__(self, domain: StarDomain, problem: ProblemId, h_factor: float):
        if problem.tag == "QS" and not problem.source.support_inside(domain):
            raise SupportError("source support is not inside the domain")
        self.domain = domain
        self.problem = problem
        self.mesh = triangulate(domain, h_factor * domain.a0)
        self.solver = DirichletSolver(self.mesh)
        self.chain = solve_chain(self.mesh, problem.source, problem.stages, self.solver)
        self.curvature = domain.curvature(self.mesh.boundary_theta)
        self.qu = self.chain.flux["u"]
        self.qv = self.chain.flux.get("v")
        self.residual = self._residual(self.qu, self.qv)
        self.sup = float(np.max(np.abs(self.residual)))

    def _residual(self, qu, qv) -> np.ndarray:
        p = self.problem
        if p.tag in ("SERRIN", "QS"):
            return qu - p.k
        if p.tag == "P":
            return qu * qv - p.c
        return qv - N_DIM / (N_DIM + 2) * qu ** 3

    def linearization(self, fld: DeformationField) -> np.ndarray:
        vn = fld(self.mesh.boundary_theta)
        d = solve_derivative_chain(self.mesh, self.chain, vn, self.problem.stages)
        f_b = self.problem.source.evaluate(self.mesh.nodes[self.mesh.boundary])
        dqu = -d.dnu["u"] + (f_b - self.curvature * self.qu) * vn
        p = self.problem
        if p.tag in ("SERRIN", "QS"):
            return dqu
        dqv = -d.dnu["v"] - self.curvature * self.qv * vn
        if p.tag == "P":
            return dqu * self.qv + self.qu * dqv
        return dqv - 3 * N_DIM / (N_DIM + 2) * self.qu ** 2 * dqu

    def newton_field(self, rcond: float) -> DeformationField:
        basis = mode_basis(self.domain.modes)
        jac = np.stack([self.linearization(b) for b in basis], axis=1)
        sw = np.sqrt(self.mesh.node_weights)
        coef = np.linalg.lstsq(sw[:, None] * jac, -sw * self.residual, rcond=rcond)[0]
        return DeformationField.from_vector(coef)


@dataclass
class ResidualReport:
    edge_residual: np.ndarray
    sup: float
    midpoints: np.ndarray

    def to_json(self) -> dict:
        return {"sup": self.sup, "n_edges": len(self.edge_residual),
                "min": float(self.edge_residual.min()), "max": float(self.edge_residual.max())}


def residual(domain: StarDomain, problem: ProblemId, h_factor: float = 0.02) -> ResidualReport:
    """Per-edge signed residual of the overdetermined condition and its sup norm."""
    ev = _Evaluation(domain, problem, h_factor)
    r = edge_average(ev.residual)
    return ResidualReport(r, float(np.max(np.abs(r))), ev.mesh.edge_midpoints)


@dataclass
class FlowParams:
    step0: float = 1.0
    tol: float = 1e-3
    max_iters: int = 40
    constraint: ConvexBody | None = None
    h_factor: float = 0.02
    rcond: float = 1e-4


@dataclass
class FlowResult:
    domain: StarDomain
    initial: StarDomain
    iterations: int
    history: list[float]
    areas: list[float]
    perimeters: list[float]
    verdict: str  # converged | max-iters | step-collapse
    circle_center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    circle_radius: float = 0.0
    circle_distance: float = 0.0

    @property
    def residual(self) -> float:
        return self.history[-1]

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "iterations": self.iterations, "residual": self.residual,
                "circle_center": [float(x) for x in self.circle_center],
                "circle_radius": self.circle_radius, "circle_distance": self.circle_distance,
                "domain": self.domain.to_json()}


def fit_circle(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Algebraic least-squares circle through ``points``."""
    x, y = points[:, 0], points[:, 1]
    a = np.stack([x, y, np.ones_like(x)], axis=1)
    sol = np.linalg.lstsq(a, x * x + y * y, rcond=None)[0]
    center = sol[:2] / 2
    return center, float(np.sqrt(sol[2] + center @ center))


def circle_distance(domain: StarDomain, samples: int = 2048) -> tuple[np.ndarray, float, float]:
    """Best-fit circle of the boundary and the Hausdorff distance between the two curves."""
    theta = 2 * np.pi * np.arange(samples) / samples
    pts = domain.point(theta)
    center, radius = fit_circle(pts)
    circ = center + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return center, radius, hausdorff_distance(pts, circ)


def _admissible(domain: StarDomain, problem: ProblemId, constraint: ConvexBody | None) -> bool:
    if problem.tag == "QS" and not problem.source.support_inside(domain):
        return False
    return constraint is None or has_c_gnp(domain, constraint).holds


def run_flow(problem: ProblemId, init: StarDomain, params: FlowParams | None = None) -> FlowResult:
    params = params or FlowParams()
    if params.constraint is not None and not has_c_gnp(init, params.constraint).holds:
        raise DomainError("initial domain does not satisfy C-GNP for the constraint body")
    domain = init
    ev = _Evaluation(domain, problem, params.h_factor)
    history = [ev.sup]
    area, per = measures(domain)
    areas, pers = [area], [per]
    verdict = "max-iters"
    it = 0
    while True:
        if ev.sup <= params.tol:
            verdict = "converged"
            break
        if it >= params.max_iters:
            break
        direction = ev.newton_field(params.rcond)
        t = params.step0
        accepted = None
        while t >= 1e-8 * params.step0:
            try:
                trial = deform(domain, direction, t)
                if _admissible(trial, problem, params.constraint):
                    cand = _Evaluation(trial, problem, params.h_factor)
                    if cand.sup < ev.sup:
                        accepted = cand
                        break
            except DomainError:
                pass
            t *= 0.5
        if accepted is None:
            verdict = "step-collapse"
            break
        it += 1
        ev, domain = accepted, accepted.domain
        history.append(ev.sup)
        area, per = measures(domain)
        areas.append(area)
        pers.append(per)
    center, radius, dist = circle_distance(domain)
    return FlowResult(domain, init, it, history, areas, pers, verdict, center, radius, dist)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def write_history_csv(result: FlowResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "residual", "area", "perimeter"])
        for i, (r, a, p) in enumerate(zip(result.history, result.areas, result.perimeters)):
            w.writerow([i, repr(r), repr(a), repr(p)])


def write_domain_json(domain: StarDomain, path: str | Path) -> None:
    Path(path).write_text(json.dumps(domain.to_json(), indent=2) + "\n")


def _svg_path(points: np.ndarray) -> str:
    head = f"M {points[0, 0]:.6f} {-points[0, 1]:.6f}"
    body = " ".join(f"L {x:.6f} {-y:.6f}" for x, y in points[1:])
    return f"{head} {body} Z"


def boundary_svg(curves: list[tuple[np.ndarray, str]], history: list[float] | None = None) -> str:
    """Static SVG of closed curves (y axis up) with an optional log-residual sparkline."""
    allp = np.concatenate([c for c, _ in curves])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    pad = 0.05 * float((hi - lo).max())
    x0, y0 = lo[0] - pad, -hi[1] - pad
    w, h = hi[0] - lo[0] + 2 * pad, hi[1] - lo[1] + 2 * pad
    sw = 0.004 * max(w, h)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6f} {y0:.6f} {w:.6f} {h:.6f}">']
    for pts, color in curves:
        parts.append(f'<path d="{_svg_path(pts)}" fill="none" stroke="{color}" stroke-width="{sw:.6f}"/>')
    if history and len(history) > 1:
        vals = np.log10(np.maximum(np.asarray(history), 1e-300))
        span = max(float(vals.max() - vals.min()), 1e-12)
        xs = x0 + pad + np.linspace(0, 0.3 * w, len(vals))
        ys = y0 + pad + 0.15 * h * (vals.max() - vals) / span
        pts = " ".join(f"{x:.6f},{y:.6f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="gray" stroke-width="{sw:.6f}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_flow_svg(result: FlowResult, path: str | Path, samples: int = 512) -> None:
    theta = 2 * np.pi * np.arange(samples) / samples
    svg = boundary_svg([(result.initial.point(theta), "steelblue"), (result.domain.point(theta), "crimson")],
                       result.history)
    Path(path).write_text(svg)


def problem_from_args(tag: str, k: float | None = None, c: float | None = None,
                      source: dict | None = None) -> ProblemId:
    src = source_from_json(source) if source else None
    tag = tag.upper()
    if tag == "SERRIN":
        return ProblemId.serrin(k)
    if tag == "OC":
        return ProblemId.oc()
    if tag == "QS":
        return ProblemId.qs(src, k)
    return ProblemId.p(src, c)
