"""Quantum-heat statistics of finite-level systems under repeated projective measurements."""

__version__ = "0.1.0"
