"""Vanishing geodesic distance for critical Sobolev metrics on diffeomorphism groups.

Numerical witnesses: Monte Carlo W^{s,p} norms, explicit displacing flows of
the unit cube, and a log-space ledger of their path-length bounds.
"""
from .construction import ConstructionParams, assemble_phi_k, cost_ledger
from .norms import Sampler, SobolevParams, calibrate_constants, gagliardo_seminorm, sobolev_norm

__version__ = "0.1.0"

__all__ = [
    "ConstructionParams", "assemble_phi_k", "cost_ledger", "Sampler", "SobolevParams",
    "calibrate_constants", "gagliardo_seminorm", "sobolev_norm",
]
