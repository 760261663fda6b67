"""Numerical laboratory for non-Hermitian three-mode Dicke models."""

__version__ = "0.1.0"
