# Spectral laboratory for Schrödinger-type operators on truncated grids

__version__ = "0.3.0"
