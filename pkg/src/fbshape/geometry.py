"""Star-shaped planar domains, convex bodies and boundary geometry.

A :class:`StarDomain` is described by its radial function about a center,

    rho(theta) = a0 + sum_k (a_k cos k theta + b_k sin k theta),  k = 1..M,

so every quantity used by the solvers (normals, curvature, arclength,
support function) is available in closed form from the coefficients.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, StepTooLarge

DEFAULT_MODES = 16
_MEASURE_SAMPLES = 4096


def _pad(coeffs: Sequence[float], m: int) -> tuple[float, ...]:
    out = [float(c) for c in coeffs][:m]
    return tuple(out + [0.0] * (m - len(out)))


@dataclass(frozen=True)
class StarDomain:
    """Domain bounded by the polar graph ``r = rho(theta)`` about ``center``.

    ``cos_coeffs[k-1]`` and ``sin_coeffs[k-1]`` hold the amplitudes of mode
    ``k``.  Both lists are padded with zeros to the mode cutoff ``modes``.
    ``rho_min`` defaults to ``a0 / 20``.
    """

    a0: float
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    center: tuple[float, float] = (0.0, 0.0)
    modes: int = DEFAULT_MODES
    rho_min: float | None = None

    def __post_init__(self):
        if not (self.a0 > 0 and math.isfinite(self.a0)):
            raise DomainError(f"mean radius must be positive, got {self.a0}")
        m = max(self.modes, len(self.cos_coeffs), len(self.sin_coeffs))
        object.__setattr__(self, "modes", m)
        object.__setattr__(self, "cos_coeffs", _pad(self.cos_coeffs, m))
        object.__setattr__(self, "sin_coeffs", _pad(self.sin_coeffs, m))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.rho_min is None:
            object.__setattr__(self, "rho_min", self.a0 / 20.0)
        coeffs = np.array(self.cos_coeffs + self.sin_coeffs)
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("non-finite Fourier amplitude")
        theta = np.linspace(0.0, 2 * np.pi, max(8 * m, 256), endpoint=False)
        low = float(self.rho(theta).min())
        if low < self.rho_min:
            raise DomainError(f"radial function drops to {low:.4g} < rho_min={self.rho_min:.4g}")

    @classmethod
    def circle(cls, radius: float, center=(0.0, 0.0), modes: int = DEFAULT_MODES) -> "StarDomain":
        return cls(float(radius), (), (), center, modes)

    @property
    def symmetric(self) -> bool:
        return not any(self.sin_coeffs)

    def _series(self, theta, order: int = 0) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        k = np.arange(1, self.modes + 1)
        kt = np.multiply.outer(theta, k)
        a = np.asarray(self.cos_coeffs)
        b = np.asarray(self.sin_coeffs)
        if order == 0:
            return self.a0 + np.cos(kt) @ a + np.sin(kt) @ b
        if order == 1:
            return (-np.sin(kt) * k) @ a + (np.cos(kt) * k) @ b
        return (-np.cos(kt) * k**2) @ a + (-np.sin(kt) * k**2) @ b

    def rho(self, theta) -> np.ndarray:
        return self._series(theta, 0)

    def drho(self, theta) -> np.ndarray:
        return self._series(theta, 1)

    def d2rho(self, theta) -> np.ndarray:
        return self._series(theta, 2)

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        r = self.rho(theta)
        return np.stack([self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)], axis=-1)

    def speed(self, theta) -> np.ndarray:
        """|d x / d theta| = sqrt(rho^2 + rho'^2)."""
        return np.hypot(self.rho(theta), self.drho(theta))

    def curvature(self, theta) -> np.ndarray:
        r, r1, r2 = self.rho(theta), self.drho(theta), self.d2rho(theta)
        return (r * r + 2 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5

    def polar(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Polar radius and angle of ``points`` about the center."""
        p = np.asarray(points, dtype=float)
        dx = p[..., 0] - self.center[0]
        dy = p[..., 1] - self.center[1]
        return np.hypot(dx, dy), np.arctan2(dy, dx)

    def contains(self, points, strict: bool = True) -> np.ndarray:
        r, th = self.polar(points)
        rb = self.rho(th)
        return r < rb if strict else r <= rb * (1 + 1e-12)

    def scaled(self, factor: float) -> "StarDomain":
        """Dilation about the center."""
        return StarDomain(self.a0 * factor, tuple(factor * c for c in self.cos_coeffs),
                          tuple(factor * c for c in self.sin_coeffs), self.center, self.modes,
                          None if self.rho_min is None else self.rho_min * factor)

    def coefficients(self) -> np.ndarray:
        """Flat vector ``[a0, a_1..a_M, b_1..b_M]``."""
        return np.concatenate([[self.a0], self.cos_coeffs, self.sin_coeffs])

    def to_json(self) -> dict:
        return {"center": list(self.center), "a0": self.a0,
                "cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs)}

    @classmethod
    def from_json(cls, data: dict, modes: int = DEFAULT_MODES) -> "StarDomain":
        return cls(float(data["a0"]), tuple(data.get("cos", ())), tuple(data.get("sin", ())),
                   tuple(data.get("center", (0.0, 0.0))), modes)


def load_domain(path: str | Path, modes: int = DEFAULT_MODES) -> StarDomain:
    return StarDomain.from_json(json.loads(Path(path).read_text()), modes)


def random_star_domain(rng: np.random.Generator, amplitude: float = 0.08, n_modes: int = 4,
                       a0: float = 1.0, modes: int = DEFAULT_MODES) -> StarDomain:
    """Smooth random perturbation of a circle; mode k has amplitude <= amplitude / k."""
    k = np.arange(1, n_modes + 1)
    a = rng.uniform(-amplitude, amplitude, n_modes) / k * a0
    b = rng.uniform(-amplitude, amplitude, n_modes) / k * a0
    return StarDomain(a0, tuple(a), tuple(b), (0.0, 0.0), modes)


# --------------------------------------------------------------------------
# convex bodies and polygon utilities
# --------------------------------------------------------------------------

def polygon_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    x, y = vertices[:, 0], vertices[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * a)


def polygon_perimeter(vertices: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(vertices, -1, axis=0) - vertices, axis=1).sum())


def clip_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of ``poly`` where ``normal . x <= offset`` (Sutherland-Hodgman)."""
    if len(poly) == 0:
        return poly
    d = poly @ normal - offset
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        dp, dq = d[i], d[(i + 1) % n]
        if dp <= 0:
            out.append(p)
        if (dp < 0 < dq) or (dq < 0 < dp):
            out.append(p + (q - p) * (dp / (dp - dq)))
    return np.array(out).reshape(-1, 2)


@dataclass(frozen=True)
class ConvexBody:
    """Convex polygon with counterclockwise vertices.

    ``thin_eps`` marks a thin rectangle standing in for a segment (its
    width); it is informational and does not change the geometry.
    """

    vertices: np.ndarray = field(repr=False)
    thin_eps: float | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise DomainError("a convex body needs at least 3 vertices")
        if polygon_area(v) < 0:
            v = v[::-1].copy()
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        scale = np.max(np.linalg.norm(e, axis=1)) ** 2
        if np.any(cross < -1e-12 * scale):
            raise DomainError("polygon is not convex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def rectangle(cls, x0, y0, x1, y1, thin_eps=None) -> "ConvexBody":
        return cls(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]), thin_eps)

    @classmethod
    def regular(cls, n: int, radius: float = 1.0, center=(0.0, 0.0)) -> "ConvexBody":
        t = 2 * np.pi * np.arange(n) / n
        return cls(np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1))

    @classmethod
    def thin_rectangle(cls, length: float, width: float, center=(0.0, 0.0)) -> "ConvexBody":
        cx, cy = center
        return cls.rectangle(cx - length / 2, cy - width / 2, cx + length / 2, cy + width / 2,
                             thin_eps=width)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def perimeter(self) -> float:
        return polygon_perimeter(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.vertices)

    def halfplanes(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward unit normals ``n_i`` and offsets ``c_i`` with body = {n_i . x <= c_i}."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1)[:, None]
        return n, np.einsum("ij,ij->i", n, v)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        n, c = self.halfplanes()
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.all(p @ n.T <= c + tol, axis=1)

    def clip(self, poly: np.ndarray) -> np.ndarray:
        """Intersection of a convex polygon ``poly`` with this body."""
        n, c = self.halfplanes()
        out = np.asarray(poly, dtype=float)
        for ni, ci in zip(n, c):
            out = clip_halfplane(out, ni, ci)
            if len(out) == 0:
                break
        return out

    def boundary_samples(self, pitch: float) -> np.ndarray:
        v = self.vertices
        pts = []
        for p, q in zip(v, np.roll(v, -1, axis=0)):
            k = max(1, int(math.ceil(np.linalg.norm(q - p) / pitch)))
            t = np.arange(k) / k
            pts.append(p + t[:, None] * (q - p))
        return np.concatenate(pts)

    def to_json(self) -> dict:
        out = {"vertices": self.vertices.tolist()}
        if self.thin_eps is not None:
            out["thin_eps"] = self.thin_eps
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ConvexBody":
        return cls(np.asarray(data["vertices"], dtype=float), data.get("thin_eps"))


def load_convex(path: str | Path) -> ConvexBody:
    return ConvexBody.from_json(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# boundary sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    theta: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray
    support: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def boundary_trace(domain: StarDomain, m: int = 256) -> BoundaryTrace:
    """Equispaced-angle samples of the boundary with normals, curvature and arclength weights.

    The weights are the periodic trapezoid rule in ``theta``, which is
    spectrally accurate for the smooth radial graphs used here.
    """
    if m < 64:
        raise ValueError("boundary_trace needs at least 64 samples")
    theta = 2 * np.pi * np.arange(m) / m
    r, r1 = domain.rho(theta), domain.drho(theta)
    if np.any(r <= 0):
        raise DomainError("non-positive radial function")
    c, s = np.cos(theta), np.sin(theta)
    tx, ty = r1 * c - r * s, r1 * s + r * c
    speed = np.hypot(tx, ty)
    normals = np.stack([ty, -tx], axis=1) / speed[:, None]
    pts = domain.point(theta)
    rel = pts - np.asarray(domain.center)
    return BoundaryTrace(theta, pts, normals, domain.curvature(theta), speed * (2 * np.pi / m),
                         np.einsum("ij,ij->i", rel, normals))


def measures(domain: StarDomain) -> tuple[float, float]:
    """(area, perimeter) by the periodic trapezoid rule."""
    n = max(_MEASURE_SAMPLES, 64 * domain.modes)
    theta = 2 * np.pi * np.arange(n) / n
    r = domain.rho(theta)
    if np.any(r <= 0):
        raise DomainError("non-positive radial function")
    area = np.pi * float(np.mean(r * r))
    per = 2 * np.pi * float(np.mean(np.hypot(r, domain.drho(theta))))
    return area, per


# --------------------------------------------------------------------------
# deformation fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeformationField:
    """Normal speed ``V.nu`` as a truncated Fourier series in the polar angle."""

    c0: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        m = max(len(self.cos_coeffs), len(self.sin_coeffs))
        object.__setattr__(self, "cos_coeffs", _pad(self.cos_coeffs, m))
        object.__setattr__(self, "sin_coeffs", _pad(self.sin_coeffs, m))
        if not np.all(np.isfinite([self.c0, *self.cos_coeffs, *self.sin_coeffs])):
            raise ValueError("non-finite deformation amplitude")

    @property
    def modes(self) -> int:
        return len(self.cos_coeffs)

    @classmethod
    def mode(cls, kind: str, k: int) -> "DeformationField":
        """Single basis field: ``("const", 0)``, ``("cos", k)`` or ``("sin", k)``."""
        if kind == "const":
            return cls(1.0)
        amp = [0.0] * k
        amp[k - 1] = 1.0
        return cls(0.0, tuple(amp), ()) if kind == "cos" else cls(0.0, (), tuple(amp))

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "DeformationField":
        vec = np.asarray(vec, dtype=float)
        m = (len(vec) - 1) // 2
        return cls(float(vec[0]), tuple(vec[1:m + 1]), tuple(vec[m + 1:]))

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.c0)
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            if a:
                out = out + a * np.cos(k * theta)
            if b:
                out = out + b * np.sin(k * theta)
        return out

    def label(self) -> str:
        nz = [f"cos{k}" for k, a in enumerate(self.cos_coeffs, 1) if a]
        nz += [f"sin{k}" for k, b in enumerate(self.sin_coeffs, 1) if b]
        if self.c0:
            nz.insert(0, "const")
        return "+".join(nz) if nz else "zero"


def mode_basis(m: int = DEFAULT_MODES) -> list[DeformationField]:
    """The 2M+1 fields 1, cos k theta, sin k theta for k = 1..M."""
    out = [DeformationField.mode("const", 0)]
    out += [DeformationField.mode("cos", k) for k in range(1, m + 1)]
    out += [DeformationField.mode("sin", k) for k in range(1, m + 1)]
    return out


def fourier_project(values: np.ndarray, m: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Coefficients up to mode ``m`` of equispaced periodic samples."""
    n = len(values)
    g = np.fft.rfft(values) / n
    a0 = float(g[0].real)
    a = 2 * g[1:m + 1].real
    b = -2 * g[1:m + 1].imag
    if len(a) < m:
        a = np.concatenate([a, np.zeros(m - len(a))])
        b = np.concatenate([b, np.zeros(m - len(b))])
    return a0, a, b


def deform(domain: StarDomain, field: DeformationField, t: float) -> StarDomain:
    """Move the boundary by ``t * V.nu`` along the normal, to first order.

    The radial increment is ``t * V.nu * sqrt(rho^2 + rho'^2) / rho``,
    projected back onto the domain's Fourier modes.  Since ``rho`` lives in
    that span the first variation of the area is unaffected by the
    projection.
    """
    m = domain.modes
    n = max(1024, 16 * m)
    theta = 2 * np.pi * np.arange(n) / n
    r = domain.rho(theta)
    sigma = np.hypot(r, domain.drho(theta)) / r
    a0, a, b = fourier_project(field(theta) * sigma, m)
    try:
        return StarDomain(domain.a0 + t * a0,
                          tuple(np.asarray(domain.cos_coeffs) + t * a),
                          tuple(np.asarray(domain.sin_coeffs) + t * b),
                          domain.center, m, domain.rho_min)
    except DomainError as exc:
        raise StepTooLarge(f"deformation step t={t:g} is too large: {exc}") from exc


# --------------------------------------------------------------------------
# Hausdorff distance
# --------------------------------------------------------------------------

def hausdorff_distance(a, b) -> float:
    """max(sup_a d(a, B), sup_b d(b, A)) over finite samples."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("Hausdorff distance of an empty sample")
    dab = cKDTree(b).query(a)[0].max()
    dba = cKDTree(a).query(b)[0].max()
    return float(max(dab, dba))


def sample_pitch(points) -> float:
    """Largest nearest-neighbour spacing; bounds the sampling error of a Hausdorff estimate."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 2:
        return 0.0
    d, _ = cKDTree(p).query(p, k=2)
    return float(d[:, 1].max())


def filled_samples(domain: StarDomain, n_boundary: int = 512, n_grid: int = 64) -> np.ndarray:
    """Boundary samples plus interior grid points of the closed domain."""
    bnd = domain.point(2 * np.pi * np.arange(n_boundary) / n_boundary)
    lo, hi = bnd.min(axis=0), bnd.max(axis=0)
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], n_grid), np.linspace(lo[1], hi[1], n_grid))
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return np.concatenate([bnd, grid[domain.contains(grid)]])


# --------------------------------------------------------------------------
# C-GNP / C-SP admissibility
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormalCone:
    """K_x = {y : (y - x).(z - x) <= 0 for every vertex z of C}."""

    apex: np.ndarray
    generators: np.ndarray  # rows z - x

    @classmethod
    def at(cls, x, body: ConvexBody) -> "NormalCone":
        x = np.asarray(x, dtype=float)
        return cls(x, body.vertices - x)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        d = np.asarray(points, dtype=float).reshape(-1, 2) - self.apex
        return np.max(d @ self.generators.T, axis=1) <= tol

    def depth(self, points) -> np.ndarray:
        """Normalized margin: negative inside the cone, positive outside."""
        d = np.asarray(points, dtype=float).reshape(-1, 2) - self.apex
        dn = np.linalg.norm(d, axis=1)
        gn = np.linalg.norm(self.generators, axis=1).max()
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.max(d @ self.generators.T, axis=1) / (dn * gn)


@dataclass(frozen=True, eq=False)
class CgnpVerdict:
    status: str  # "holds" | "fails" | "not-containing-C"
    witness: np.ndarray | None
    pitch: float
    margin: float

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def to_json(self) -> dict:
        return {"status": self.status,
                "witness": None if self.witness is None else self.witness.tolist(),
                "pitch": self.pitch, "margin": self.margin}


_CONE_TOL = 1e-9


def has_c_gnp(domain: StarDomain, body: ConvexBody, n_boundary: int = 512,
              n_grid: int = 64) -> CgnpVerdict:
    """Sampled test of the C-SP (equivalently C-GNP) property.

    ``int(C)`` must lie in the closed domain, and for each boundary sample
    ``x`` outside ``C`` the normal cone ``K_x`` must miss every interior and
    boundary sample of the domain (other than ``x`` itself).  The verdict
    reports the sampling pitch and the smallest normalized cone margin.
    """
    _, per = measures(domain)
    n_boundary = max(n_boundary, 512)
    pitch = per / n_boundary
    c_pts = body.boundary_samples(pitch / 4)
    if not np.all(domain.contains(c_pts, strict=False)):
        bad = c_pts[~domain.contains(c_pts, strict=False)][0]
        return CgnpVerdict("not-containing-C", bad, pitch, -math.inf)

    theta = 2 * np.pi * np.arange(n_boundary) / n_boundary
    xs = domain.point(theta)
    ys = filled_samples(domain, n_boundary, n_grid)
    scale = float(np.ptp(ys, axis=0).max())
    outside = ~body.contains(xs, tol=1e-12 * scale)
    margin = math.inf
    for x in xs[outside]:
        depth = NormalCone.at(x, body).depth(ys)
        far = np.linalg.norm(ys - x, axis=1) > 1e-9 * scale
        depth = depth[far]
        hit = depth <= -_CONE_TOL
        if np.any(hit):
            return CgnpVerdict("fails", x.copy(), pitch, float(depth.min()))
        margin = min(margin, float(depth.min()))
    return CgnpVerdict("holds", None, pitch, margin)


def cgnp_deformation_stability(domain: StarDomain, body: ConvexBody, field: DeformationField,
                               t_max: float) -> float:
    """Largest sampled step ``t <= t_max`` keeping the C-GNP property along ``field``.

    Bisection to a pitch of ``1e-3 * t_max``; a step that breaks the radial
    floor counts as a failure.
    """
    if not has_c_gnp(domain, body).holds:
        raise DomainError("initial domain does not satisfy C-GNP")
    if t_max <= 0:
        return 0.0

    def ok(t: float) -> bool:
        try:
            return has_c_gnp(deform(domain, field, t), body).holds
        except StepTooLarge:
            return False

    if ok(t_max):
        return float(t_max)
    lo, hi = 0.0, float(t_max)
    while hi - lo > 1e-3 * t_max:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
