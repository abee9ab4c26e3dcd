"""Nonogram solving with line propagation, learned guidance, symmetry and genetic search."""

__version__ = "0.1.0"
