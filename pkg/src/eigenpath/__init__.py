"""Eigenstate preparation by randomized-time evolution along eigenpaths."""

__version__ = "0.1.0"
