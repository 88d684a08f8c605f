"""Numerical twistor correspondence for split-signature conformal structures on S^2 x S^2."""

__version__ = "0.1.0"
