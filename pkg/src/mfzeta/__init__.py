"""Thermodynamic and multifractal formalism for graph-directed systems."""

__version__ = "0.1.0"
