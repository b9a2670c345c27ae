"""Analytic optimal control of the continuous mountain-car benchmark and
Chebyshev-polynomial policy training."""

__version__ = "0.1.0"
