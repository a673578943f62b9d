"""Cheeger constant and Cheeger set of convex polygons.

For a convex planar body the Cheeger set is the union of all disks of
radius r inside it, i.e. the inner parallel body Omega^-r dilated by r,
where r is the unique root of |Omega^-r| = pi r^2.  Then h = 1/r and the
set has area r * perimeter, so its ratio is exactly 1/r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conditions import ConditionEntry, body_measures, source_integral, verdict
from .errors import DomainError
from .geometry import ConvexBody, clip_halfplane, polygon_area, polygon_perimeter


def inner_parallel(body: ConvexBody, r: float) -> np.ndarray:
    """Vertices of {x : dist(x, complement) >= r} (possibly empty)."""
    n, c = body.halfplanes()
    poly = body.vertices.copy()
    for ni, ci in zip(n, c):
        poly = clip_halfplane(poly, ni, ci - r)
        if len(poly) == 0:
            break
    return poly


def _area(poly: np.ndarray) -> float:
    return polygon_area(poly) if len(poly) >= 3 else 0.0


def _perimeter(poly: np.ndarray) -> float:
    if len(poly) < 2:
        return 0.0
    return polygon_perimeter(poly)


@dataclass
class CheegerResult:
    h: float
    r: float
    inner: np.ndarray = field(repr=False)  # vertices of the inner parallel body
    body_area: float
    body_perimeter: float
    set_area: float
    set_perimeter: float

    @property
    def ratio(self) -> float:
        return self.set_perimeter / self.set_area

    def boundary_points(self, per_arc: int = 32) -> np.ndarray:
        """Samples of the rounded boundary: each inner vertex contributes an arc of radius r."""
        p = self.inner
        m = len(p)
        pts = []
        for i in range(m):
            prev, cur, nxt = p[i - 1], p[i], p[(i + 1) % m]
            a0 = _outward_angle(prev, cur)
            a1 = _outward_angle(cur, nxt)
            if a1 < a0:
                a1 += 2 * np.pi
            t = np.linspace(a0, a1, per_arc)
            pts.append(cur + self.r * np.stack([np.cos(t), np.sin(t)], axis=1))
        return np.concatenate(pts)

    def svg_path(self) -> str:
        """SVG path (y axis flipped) of straight edges joined by circular arcs."""
        p = self.inner
        m = len(p)
        r = self.r
        cmds = []
        for i in range(m):
            prev, cur, nxt = p[i - 1], p[i], p[(i + 1) % m]
            a0, a1 = _outward_angle(prev, cur), _outward_angle(cur, nxt)
            s = cur + r * np.array([math.cos(a0), math.sin(a0)])
            e = cur + r * np.array([math.cos(a1), math.sin(a1)])
            sweep_big = 1 if (a1 - a0) % (2 * np.pi) > np.pi else 0
            cmds.append(f"{'M' if i == 0 else 'L'} {s[0]:.9f} {-s[1]:.9f}")
            cmds.append(f"A {r:.9f} {r:.9f} 0 {sweep_big} 0 {e[0]:.9f} {-e[1]:.9f}")
        cmds.append("Z")
        return " ".join(cmds)

    def svg(self, body: ConvexBody) -> str:
        v = body.vertices
        lo, hi = v.min(axis=0), v.max(axis=0)
        pad = 0.05 * float((hi - lo).max())
        x0, y0 = lo[0] - pad, -hi[1] - pad
        w, hh = hi[0] - lo[0] + 2 * pad, hi[1] - lo[1] + 2 * pad
        sw = 0.004 * max(w, hh)
        outline = " ".join(f"{x:.9f},{-y:.9f}" for x, y in v)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6f} {y0:.6f} {w:.6f} {hh:.6f}">\n'
                f'<polygon points="{outline}" fill="none" stroke="steelblue" stroke-width="{sw:.6f}"/>\n'
                f'<path d="{self.svg_path()}" fill="none" stroke="crimson" stroke-width="{sw:.6f}"/>\n'
                "</svg>\n")

    def to_json(self) -> dict:
        return {"h": self.h, "r": self.r, "body_area": self.body_area, "body_perimeter": self.body_perimeter,
                "set_area": self.set_area, "set_perimeter": self.set_perimeter,
                "inner_vertices": self.inner.tolist()}


def _outward_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle of the outward normal of the counterclockwise edge a -> b."""
    d = b - a
    return math.atan2(-d[0], d[1])


def cheeger_convex(body: ConvexBody, tol: float = 1e-10) -> CheegerResult:
    """Cheeger constant of a convex polygon by bisection on |Omega^-r| = pi r^2."""
    if not isinstance(body, ConvexBody):
        raise DomainError("Cheeger sets are computed for convex polygons only")
    n, c = body.halfplanes()
    inr_hi = float(np.max(c - n @ body.centroid)) + 1.0
    lo, hi = 0.0, inr_hi
    # the inradius bounds r: beyond it the inner body is empty
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _area(inner_parallel(body, mid)) > math.pi * mid * mid:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    inner = inner_parallel(body, r)
    a_in, p_in = _area(inner), _perimeter(inner)
    set_area = a_in + r * p_in + math.pi * r * r
    set_per = p_in + 2 * math.pi * r
    return CheegerResult(1.0 / r, r, inner, body.area, body.perimeter, set_area, set_per)


def f_cheeger_ratio(domain, source) -> float:
    """int_domain f / |boundary| for a StarDomain or ConvexBody."""
    mass, _ = source_integral(source, domain)
    return mass / body_measures(domain)[1]


def cheeger_condition(c_body: ConvexBody, source) -> ConditionEntry:
    """int_C f against sqrt(h(C)) |boundary of C|."""
    res = cheeger_convex(c_body)
    mass, band = source_integral(source, c_body)
    rhs = math.sqrt(res.h) * c_body.perimeter
    band = band * abs(mass)
    return ConditionEntry("cheeger_existence", mass, rhs, verdict(mass, rhs, band),
                          "solution exists" if mass > rhs else "inconclusive", band,
                          {"h": res.h, "r": res.r, "perimeter": c_body.perimeter})
