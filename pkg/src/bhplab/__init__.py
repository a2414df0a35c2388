"""Numerical laboratory for boundary Harnack principles on Lipschitz and NTA domains."""

__version__ = "0.1.0"
