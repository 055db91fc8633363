"""Nearest-integer complex continued fractions over the five Euclidean imaginary quadratic rings."""

__version__ = "0.1.0"
