"""Numerical laboratory for overdetermined free-boundary problems on planar star domains."""

__version__ = "0.1.0"
