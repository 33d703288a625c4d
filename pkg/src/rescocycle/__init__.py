"""Residue cocycle of a Dirac operator with a torsion 3-form.

Exact rational jet computations at a point (heat coefficients, Getzler
symbols, local index densities) and float quadrature on flat tori.
"""
from .kernels import BACKEND

__version__ = "0.1.0"
