"""Tensor-network engine for lattice phi^4 theory in 1+1 dimensions.

Finite chains are solved by single-site DMRG on open, periodic and twisted
periodic boundaries; the infinite vacuum by a uniform MPS minimised with
preconditioned conjugate gradients. Masses come from kink energies and
from the decay of the connected two-point function.
"""
__version__ = "0.1.0"

from .model import ModelSpec, validate  # noqa: E402
from .mpo import MPO, build_hamiltonian_mpo  # noqa: E402
from .mps import FiniteMPS  # noqa: E402
from .dmrg import SweepConfig, GroundResult, minimize, kink_mass  # noqa: E402
from .umps import UniformMPS, umps_minimize, umps_energy_density  # noqa: E402

__all__ = [
    "ModelSpec", "validate", "MPO", "build_hamiltonian_mpo", "FiniteMPS", "SweepConfig",
    "GroundResult", "minimize", "kink_mass", "UniformMPS", "umps_minimize", "umps_energy_density",
]
