"""Submanifolds with a potential of normals, their duality, and flat Frobenius realizations."""

__version__ = "0.1.0"
