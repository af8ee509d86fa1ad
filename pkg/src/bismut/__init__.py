"""Numerical geometry of the Strominger-Bismut connection on Hermitian metrics."""

__version__ = "0.1.0"
