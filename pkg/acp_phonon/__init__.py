"""
Phonon spectra of model Kohn-Sham systems

Dynamical matrices by frozen phonon finite differences, density functional
perturbation theory and the adaptively compressed polarizability operator.

Copyright (c) 2019 The acp-phonon developers
"""
import logging

from ._version import __version__
from .utils import AcpException, ConfigError, ModelError, ScfError, EigensolverError, ResponseError
from .lattice import (PlaneWaveGrid, YukawaKernel, AtomicConfiguration, build_grid, grid_for_cell, chain_1d,
                      triangular_2d, remove_atoms, pseudocharge, pseudopotential_gradient)
from .ground_state import ScfOptions, GroundState, scf, forces, total_energy, relax
from .response import ResponseOptions, sternheimer_solve, apply_chi0, dyson_solve_dfpt
from .acp import AcpOptions, randomized_id, build_compressed_chi0, acp_solve
from .phonon import (PhononResult, dynamical_matrix_response, dynamical_matrix_fd, phonon_modes, phonon_dos,
                     spectrum_error)
from .config import RunConfig

logging.getLogger(__name__).addHandler(logging.NullHandler())
