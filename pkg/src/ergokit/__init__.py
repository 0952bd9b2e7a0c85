"""Ergodicity diagnostics for the inhomogeneous transverse-field Ising chain.

Modules: ``numerics`` (linear algebra and fits), ``model`` (Hamiltonian and
off-diagonal weight), ``spectral`` (level statistics and form factor),
``dynamics`` (OTOCs), ``krylov`` (operator Krylov complexity),
``entanglement`` (von Neumann entropies) and ``cli`` (experiment runner).
"""

from .errors import *  # noqa: F401,F403
from .model import ChainConfig, build_h0, build_hamiltonian, off_diagonal_weight
from .numerics import Spectrum, eigh_symmetric

__version__ = "0.1.0"
