"""Numerical Cauchy problem for Lorentzian metrics with a parallel null vector."""

__version__ = "0.1.0"
