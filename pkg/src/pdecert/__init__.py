"""Certified steady states and spectral stability for 1D parabolic PDEs.

Rigorous existence proofs (Newton-Kantorovich radii polynomial) and unstable
eigenvalue counts (Gershgorin / generalized-eigenproblem enclosures) in
weighted l1 spaces of Chebyshev-Gegenbauer coefficients.
"""

from .interval import Interval, gamma_ratio
from .seqspace import CoeffSeq, basis_ek

__all__ = ["Interval", "gamma_ratio", "CoeffSeq", "basis_ek"]
__version__ = "0.1.0"
