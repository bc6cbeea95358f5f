"""Damped and pure Newton methods for underdetermined nonlinear systems."""
__version__ = "1.0.0"
