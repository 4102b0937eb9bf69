"""
ACP-PHONON - Shared fixtures for the unit tests

Small periodic chains on coarse grids so that dense reference solutions
(assembled Hamiltonian, Adler-Wiser chi0, kernel matrix) are cheap.

Copyright (c) 2019 The acp-phonon developers
"""
import os

import numpy as np

from acp_phonon.lattice import YukawaKernel, chain_1d, grid_for_cell, perturb_positions
from acp_phonon.ground_state import ScfOptions, scf
from acp_phonon.response import ResponseOptions

SLOW_TESTS = bool(os.environ.get("ACP_PHONON_SLOW_TESTS", ""))
FULL_BENCHMARK = bool(os.environ.get("ACP_PHONON_FULL_BENCHMARK", ""))

# Coarse 1D setting: 4 atoms at spacing 2.4 on a 64 point grid
N_ATOMS = 4
SPACING = 2.4
SIGMA = 0.3
GRID_SPACING = 0.15

_CACHE = {}

def scf_options(**kwargs):
    opts = {"scf_tol" : 1e-10, "eig_tol" : 1e-10, "max_scf_iters" : 200, "eigensolver" : "dense"}
    opts.update(kwargs)
    return ScfOptions(**opts)

def response_options(**kwargs):
    opts = {"tol" : 1e-11, "max_iters" : 500, "dyson_tol" : 1e-10, "dyson_max_iters" : 200, "n_workers" : 1}
    opts.update(kwargs)
    return ResponseOptions(**opts)

def chain(n_atoms=N_ATOMS, perturbation=0.0, seed=1):
    config = chain_1d(n_atoms, SPACING, SIGMA)
    if perturbation > 0:
        config = perturb_positions(config, perturbation, seed)
    return config

def system(n_atoms=N_ATOMS, eps0=1.0, perturbation=0.0):
    """
    :return: Tuple of grid, kernel and configuration
    """
    config = chain(n_atoms, perturbation)
    return grid_for_cell(config.cell_lengths, GRID_SPACING), YukawaKernel(0.1, eps0), config

def ground_state(n_atoms=N_ATOMS, eps0=1.0, perturbation=0.0):
    """
    Converged ground state, cached per parameter set
    """
    key = (n_atoms, eps0, perturbation)
    if key not in _CACHE:
        grid, kernel, config = system(n_atoms, eps0, perturbation)
        _CACHE[key] = scf(grid, kernel, config, scf_options())
    return _CACHE[key]

def relative_error(ref, val):
    return np.linalg.norm(np.asarray(val) - np.asarray(ref)) / np.linalg.norm(ref)
