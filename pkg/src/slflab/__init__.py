"""Numerical laboratory for rough-coefficient SDEs and their Fokker-Planck densities."""

__version__ = "0.1.0"
