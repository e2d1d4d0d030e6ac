"""Gauged Gaussian fermionic PEPS for Z_N / U(1) lattice gauge theory with exact cross-checks."""
from . import dualizer, exact, fock, fpeps, gaussian, lattice, pfaffian, sampler, spectra
from .exact import DimensionCapError, HamiltonianParams
from .fpeps import FPEPS, SiteTensorParams
from .lattice import LatticeGeometry

__version__ = "0.1.0"

__all__ = ["dualizer", "exact", "fock", "fpeps", "gaussian", "lattice", "pfaffian", "sampler", "spectra",
           "DimensionCapError", "HamiltonianParams", "FPEPS", "SiteTensorParams", "LatticeGeometry"]
