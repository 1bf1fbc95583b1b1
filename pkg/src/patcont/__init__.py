"""Continuation and bifurcation toolkit for 2D Turing patterns.

Core pieces: reaction kinetics and dispersion analysis (`model`), Neumann
grids and fields (`grid`), semi-implicit time stepping (`timestep`),
pseudo-arclength continuation (`continuation`), the Landau/Ginzburg-Landau
reduction (`amplitude`), and a batch CLI (`cli`).
"""

from . import amplitude, continuation, grid, model, timestep

__all__ = ["amplitude", "continuation", "grid", "model", "timestep"]
__version__ = "0.1.0"
