"""Numerical toolkit for degenerate Kolmogorov operators on Gaussian spaces."""

__version__ = "0.1.0"
