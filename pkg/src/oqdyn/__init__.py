"""Open quantum system dynamics: empirical master equations (Lindblad,
Bloch-Redfield), hierarchical equations of motion, QuAPI-family path
integrals, transfer tensors, and quantum-classical path integral, behind a
shared propagate-style interface."""

from . import bath, cli, core, empirical, heom, integrator, pathint, qcpi, redfield, ttm
from .core import units

__version__ = "0.1.0"

__all__ = [
    "bath",
    "cli",
    "core",
    "empirical",
    "heom",
    "integrator",
    "pathint",
    "qcpi",
    "redfield",
    "ttm",
    "units",
]
