"""Trotterized controlled phase rotations from cubic gates: compilation, simulation and
bosonic-code applications."""

__version__ = "0.1.0"
