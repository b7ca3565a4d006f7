"""Numerical laboratory for zero-range particle systems."""

__version__ = "0.1.0"
