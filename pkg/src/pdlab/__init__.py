"""Numerical laboratory for p-Dirichlet structures on finite weighted graphs."""

__version__ = "0.1.0"
