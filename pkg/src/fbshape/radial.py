"""Closed-form radial solutions on balls in any dimension N >= 2.

For a radial source s(r) = sum c_p r^p the Dirichlet problem -Lap q = s on
B_R, q(R) = 0 is solved term by term: the radial Laplacian maps r^(p+2) to
(p+2)(p+N) r^p, so

    q(r) = sum -c_p r^(p+2) / ((p+2)(p+N)) + const.

Coefficients are kept as exact fractions (R is converted exactly from its
binary value), so the chain u, v, w, z and every derived quantity is exact
up to the final float conversion and the surface measure of the sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy.integrate import quad

QUANTITIES = ("u", "v", "w", "z", "grad_u_bdry", "grad_v_bdry", "grad_w_bdry", "grad_z_bdry",
              "int_u", "int_u2", "int_grad_u2", "int_uv", "volume", "perimeter",
              "J4", "JP", "Serrin_radius", "P_radius")
_POINTWISE = ("u", "v", "w", "z")


class Poly(dict):
    """Polynomial in r as {power: Fraction}."""

    def __call__(self, r: float) -> float:
        return float(sum(float(c) * r ** p for p, c in self.items()))

    def deriv(self) -> "Poly":
        return Poly({p - 1: c * p for p, c in self.items() if p > 0})

    def __mul__(self, other: "Poly") -> "Poly":
        out = Poly()
        for p, a in self.items():
            for q, b in other.items():
                out[p + q] = out.get(p + q, Fraction(0)) + a * b
        return Poly({p: c for p, c in out.items() if c != 0})

    def scale(self, s: Fraction) -> "Poly":
        return Poly({p: c * s for p, c in self.items()})

    def value_exact(self, r: Fraction) -> Fraction:
        return sum((c * r ** p for p, c in self.items()), Fraction(0))


def solve_radial(source: Mapping[int, Fraction], n: int, radius: Fraction) -> Poly:
    """Exact solution of -Lap q = source on B_radius with q = 0 on the sphere."""
    q = Poly()
    for p, c in source.items():
        if c:
            q[p + 2] = -Fraction(c) / ((p + 2) * (p + n))
    q[0] = -q.value_exact(radius)
    return q


def radial_laplacian(q: Poly, n: int) -> Poly:
    """q'' + (N-1)/r q' for polynomials whose odd and constant terms are harmless."""
    d1, d2 = q.deriv(), q.deriv().deriv()
    out = Poly(d2)
    for p, c in d1.items():
        out[p - 1] = out.get(p - 1, Fraction(0)) + (n - 1) * c
    return Poly({p: c for p, c in out.items() if c != 0})


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^(N-1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class BallSpec:
    N: int = 2
    R: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.N}")
        if not self.R > 0:
            raise ValueError(f"radius must be positive, got {self.R}")


class RadialChain:
    """u, v, w, z on a ball for the radial polynomial source ``f`` (default f = 1)."""

    def __init__(self, spec: BallSpec, source: Mapping[int, float] | None = None):
        self.spec = spec
        n = int(spec.N)
        self.n = n
        self.R = Fraction(spec.R)
        src = {0: Fraction(1)} if source is None else {int(p): Fraction(c) for p, c in source.items()}
        self.source = Poly(src)
        self.u = solve_radial(self.source, n, self.R)
        self.v = solve_radial(self.u, n, self.R)
        self.w = solve_radial(self.v, n, self.R)
        self.half_u2 = (self.u * self.u).scale(Fraction(1, 2))
        self.z = solve_radial(self.half_u2, n, self.R)

    def stage(self, name: str) -> Poly:
        return getattr(self, name)

    def flux(self, name: str) -> float:
        """|grad q| at the boundary, i.e. -q'(R)."""
        return float(-self.stage(name).deriv().value_exact(self.R))

    def integral(self, poly: Poly) -> float:
        """Integral over the ball of a radial polynomial."""
        n = self.n
        exact = sum((c * self.R ** (p + n) / (p + n) for p, c in poly.items()), Fraction(0))
        return sphere_area(n) * float(exact)

    @property
    def volume(self) -> float:
        return sphere_area(self.n) * float(self.R) ** self.n / self.n

    @property
    def perimeter(self) -> float:
        return sphere_area(self.n) * float(self.R) ** (self.n - 1)

    def sources(self) -> dict[str, Poly]:
        return {"u": self.source, "v": self.u, "w": self.v, "z": self.half_u2}


def oracle(spec: BallSpec, quantity: str, r: float | None = None, *, c: float | None = None,
           k: float | None = None, source: Mapping[int, float] | None = None) -> float:
    """Closed-form value of ``quantity`` on the ball ``spec``.

    Pointwise quantities (u, v, w, z) need ``r``; ``JP`` and ``P_radius``
    need the product level ``c``; ``Serrin_radius`` needs the flux level
    ``k``.  The radii do not depend on ``spec.R``.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; choose from {', '.join(QUANTITIES)}")
    n = int(spec.N)
    if quantity == "Serrin_radius":
        if k is None or not k > 0:
            raise ValueError("Serrin_radius needs k > 0")
        return n * k
    if quantity == "P_radius":
        if c is None or not c > 0:
            raise ValueError("P_radius needs c > 0")
        return (c * n ** 3 * (n + 2)) ** 0.25
    ch = RadialChain(spec, source)
    if quantity in _POINTWISE:
        if r is None:
            raise ValueError(f"quantity {quantity} needs a radius r")
        if r < 0 or r > spec.R:
            raise ValueError(f"r={r} outside [0, R={spec.R}]")
        return ch.stage(quantity)(r)
    if quantity.startswith("grad_"):
        return ch.flux(quantity[5])
    if quantity == "int_u":
        return ch.integral(ch.u)
    if quantity == "int_u2":
        return ch.integral(ch.u * ch.u)
    if quantity == "int_uv":
        return ch.integral(ch.u * ch.v)
    if quantity == "int_grad_u2":
        du = ch.u.deriv()
        return ch.integral(du * du)
    if quantity == "volume":
        return ch.volume
    if quantity == "perimeter":
        return ch.perimeter
    if quantity == "J4":
        # N int |grad u|^3 dsigma - (N+2) int |grad u|^2 dx, evaluated exactly
        du = ch.u.deriv()
        g = -du.value_exact(ch.R)
        surf = n * g ** 3 * ch.R ** (n - 1)
        vol = sum(((cc * ch.R ** (p + n)) / (p + n) for p, cc in (du * du).items()), Fraction(0))
        return sphere_area(n) * float(surf - (n + 2) * vol)
    # JP
    if c is None:
        raise ValueError("JP needs the product level c")
    return c * ch.volume - 0.5 * ch.integral(ch.u * ch.u)


def self_check(spec: BallSpec, samples: int = 100, source: Mapping[int, float] | None = None) -> dict:
    """Algebraic and quadrature cross-checks of the stored polynomials.

    Returns the largest Laplacian mismatch over ``samples`` radii and the
    largest gap between -q'(R) and R^(1-N) int_0^R s^(N-1) source(s) ds.
    """
    ch = RadialChain(spec, source)
    n = ch.n
    radii = np.linspace(0.0, spec.R, samples)
    lap_gap = 0.0
    flux_gap = 0.0
    for name, src in ch.sources().items():
        q = ch.stage(name)
        lap = radial_laplacian(q, n)
        for r in radii:
            lap_gap = max(lap_gap, abs(lap(r) + src(r)))
        lap_gap = max(lap_gap, abs(q(spec.R)))
        integral = quad(lambda s: s ** (n - 1) * src(s), 0.0, spec.R, epsabs=1e-14, epsrel=1e-13)[0]
        flux_gap = max(flux_gap, abs(ch.flux(name) - spec.R ** (1 - n) * integral))
    return {"laplacian": lap_gap, "flux_quadrature": flux_gap}
