"""
ACP-PHONON - Self-consistent ground state

LOBPCG plus Anderson mixing for the model Kohn-Sham problem with Yukawa
interaction and no exchange-correlation term, together with total energy,
analytic forces and steepest descent relaxation.

The ion-ion energy is the interaction of the smeared pseudocharges minus
their position independent self energies,

    E_II = 1/(2V) sum_k K(k) (|T(k)|^2 - sum_I |S_I(k)|^2),   T = sum_I S_I

evaluated in Fourier space, so that its first and second derivatives are
analytic.

Copyright (c) 2019 The acp-phonon developers
"""
from __future__ import division

import math
import logging
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .lattice import (pseudocharge, structure_factors, pseudopotential_gradient, hamiltonian_apply,
                      hamiltonian_matrix, kinetic_preconditioner, yukawa_apply)
from .mixing import AndersonMixer
from .utils import LogSource, ModelError, ScfError, EigensolverError

EIGENSOLVERS = ("lobpcg", "dense")
MIN_GAP = 1e-6

LOG = logging.getLogger(__name__)

# LOBPCG residuals are checked after each solve. Filter set at import, solves run in worker threads
warnings.filterwarnings("ignore", message=r"Exited", category=UserWarning, module=r"scipy\.sparse\.linalg")

class ScfOptions(object):
    """
    Options for the self-consistent field iteration

    ``eig_tol`` is the eigensolver tolerance at the start of the iteration.
    It is tightened towards ``eig_tol_floor`` as the density converges.
    """

    def __init__(self, scf_tol=1e-8, eig_tol=1e-6, max_scf_iters=100, mixing_history=10, mixing_beta=0.5,
                 n_extra=None, eig_tol_floor=1e-10, eigensolver="lobpcg", max_eig_iters=500, seed=0):
        for name, value in (("scf_tol", scf_tol), ("eig_tol", eig_tol), ("eig_tol_floor", eig_tol_floor)):
            if not value > 0:
                raise ModelError("%s must be positive, got %s" % (name, str(value)))
        if max_scf_iters < 1:
            raise ModelError("max_scf_iters must be at least 1")
        if eigensolver not in EIGENSOLVERS:
            raise ModelError("Unknown eigensolver '%s', must be one of %s" % (eigensolver, EIGENSOLVERS))
        if n_extra is not None and n_extra < 1:
            raise ModelError("n_extra must be at least 1")
        self.scf_tol = float(scf_tol)
        self.eig_tol = float(eig_tol)
        self.eig_tol_floor = float(eig_tol_floor)
        self.max_scf_iters = int(max_scf_iters)
        self.mixing_history = int(mixing_history)
        self.mixing_beta = float(mixing_beta)
        self.n_extra = n_extra
        self.eigensolver = eigensolver
        self.max_eig_iters = int(max_eig_iters)
        self.seed = seed

    def extra_states(self, n_electrons):
        if self.n_extra is not None:
            return int(self.n_extra)
        return max(4, int(math.ceil(0.1 * n_electrons)))

class GroundState(object):
    """
    Converged Kohn-Sham ground state

    Orbitals are normalized with the grid volume element, so that
    orbitals.T @ orbitals * dV is the identity.

    :ivar orbitals: Occupied orbitals, shape (N_g, N_e)
    :ivar eigenvalues: Occupied eigenvalues, ascending
    :ivar unoccupied_eigenvalues: The extra eigenvalues above the Fermi level
    :ivar density: Density built from ``orbitals``
    :ivar input_density: Density which generated ``potential``
    :ivar potential: Effective potential of the Hamiltonian with eigenpairs ``orbitals``
    :ivar residual_history: Relative density residual per SCF iteration
    """

    def __init__(self, grid, kernel, config, orbitals, eigenvalues, unoccupied_eigenvalues, density,
                 input_density, potential, residual_history):
        self.grid = grid
        self.kernel = kernel
        self.config = config
        self.orbitals = orbitals
        self.eigenvalues = eigenvalues
        self.unoccupied_eigenvalues = unoccupied_eigenvalues
        self.density = density
        self.input_density = input_density
        self.potential = potential
        self.residual_history = list(residual_history)
        for arr in (orbitals, eigenvalues, unoccupied_eigenvalues, density, input_density, potential):
            arr.flags.writeable = False

    @property
    def n_electrons(self):
        return self.orbitals.shape[1]

    @property
    def homo(self):
        return float(self.eigenvalues[-1])

    @property
    def lumo(self):
        return float(self.unoccupied_eigenvalues[0])

    @property
    def gap(self):
        return self.lumo - self.homo

    @property
    def iterations(self):
        return len(self.residual_history)

    def apply_hamiltonian(self, psi):
        return hamiltonian_apply(self.grid, self.potential, psi)

def effective_potential(grid, kernel, config, rho):
    """
    :return: V = K * (rho + m)
    """
    m = pseudocharge(config, grid)[0]
    return yukawa_apply(kernel, grid, rho + m)

def initial_density(grid, config):
    """
    Neutral starting density: -m clamped at zero and rescaled to N_e electrons
    """
    rho = np.maximum(-pseudocharge(config, grid)[0], 0)
    return rho * config.n_electrons / grid.integrate(rho)

def lobpcg(apply_H, n_eigs, tol, initial_guess=None, preconditioner=None, n_points=None, max_iters=500,
           seed=0, raise_on_failure=True):
    """
    Lowest eigenpairs of a symmetric operator by LOBPCG

    :param apply_H: Callable applying the operator to an (N, k) block
    :param n_eigs: Number of eigenpairs
    :param tol: Residual tolerance ||H x - e x|| for unit vectors x
    :param initial_guess: Optional (N, n_eigs) starting block
    :param preconditioner: Optional callable applied to (N, k) blocks
    :param n_points: Operator dimension, needed without an initial guess
    :return: Tuple of ascending eigenvalues, orthonormal eigenvectors and residual norms
    """
    if initial_guess is not None:
        guess = np.array(initial_guess, dtype=np.float64)
        n_points = guess.shape[0]
    elif n_points is None:
        raise ValueError("Need operator dimension or initial guess")
    else:
        guess = np.random.default_rng(seed).standard_normal((n_points, n_eigs))
    if n_eigs > n_points:
        raise ModelError("Cannot compute %i eigenpairs of a %i dimensional operator" % (n_eigs, n_points))

    def _matmat(X):
        return apply_H(np.asarray(X).reshape(n_points, -1))

    op = scipy.sparse.linalg.LinearOperator((n_points, n_points), matvec=_matmat, matmat=_matmat,
                                            dtype=np.float64)
    precond = None
    if preconditioner is not None:
        precond = scipy.sparse.linalg.LinearOperator((n_points, n_points), matvec=preconditioner,
                                                     matmat=preconditioner, dtype=np.float64)

    evals, evecs = scipy.sparse.linalg.lobpcg(op, guess, M=precond, tol=tol, maxiter=max_iters, largest=False)
    order = np.argsort(evals)
    evals, evecs = evals[order], evecs[:, order]
    evecs = np.linalg.qr(evecs)[0]
    # Rayleigh-Ritz on the returned block for consistent pairs
    hsub = np.dot(evecs.T, apply_H(evecs))
    evals, rot = scipy.linalg.eigh(0.5 * (hsub + hsub.T))
    evecs = np.dot(evecs, rot)
    resid = np.linalg.norm(apply_H(evecs) - evecs * evals, axis=0)
    if np.max(resid) > tol:
        msg = "LOBPCG did not converge: max residual %.3e > %.3e" % (np.max(resid), tol)
        if raise_on_failure:
            raise EigensolverError(msg, residual=float(np.max(resid)))
        LOG.debug(msg)
    return evals, evecs, resid

class _ScfSolver(LogSource):
    """
    Self-consistent field iteration for one configuration
    """

    def __init__(self, grid, kernel, config, options):
        self.grid = grid
        self.kernel = kernel
        self.config = config
        self.options = options
        self.n_electrons = config.n_electrons
        self.n_states = self.n_electrons + options.extra_states(self.n_electrons)
        if self.n_states > grid.n_points:
            raise ModelError("%i states requested on a grid of %i points" % (self.n_states, grid.n_points))
        self.m = pseudocharge(config, grid)[0]
        self.precond = kinetic_preconditioner(grid)

    def eigenstates(self, potential, tol, guess):
        if self.options.eigensolver == "dense":
            ham = hamiltonian_matrix(self.grid, potential)
            evals, evecs = scipy.linalg.eigh(ham, subset_by_index=[0, self.n_states - 1])
            resid = np.zeros(self.n_states)
        else:
            evals, evecs, resid = lobpcg(lambda X: hamiltonian_apply(self.grid, potential, X), self.n_states, tol,
                                         initial_guess=guess, preconditioner=self.precond,
                                         n_points=self.grid.n_points, max_iters=self.options.max_eig_iters,
                                         seed=self.options.seed, raise_on_failure=False)
        return evals, evecs, resid

    def run(self, rho_in=None, guess=None, eig_tol=None):
        options = self.options
        if rho_in is None:
            rho_in = initial_density(self.grid, self.config)
        if guess is not None:
            guess = np.asarray(guess) * math.sqrt(self.grid.volume_element)
            if guess.shape[1] < self.n_states:
                fill = np.random.default_rng(options.seed).standard_normal(
                    (self.grid.n_points, self.n_states - guess.shape[1]))
                guess = np.hstack([guess, fill])
            guess = guess[:, :self.n_states]

        mixer = AndersonMixer(options.mixing_history, options.mixing_beta)
        history = []
        if eig_tol is None:
            eig_tol = options.eig_tol
        for iteration in range(1, options.max_scf_iters + 1):
            potential = yukawa_apply(self.kernel, self.grid, rho_in + self.m)
            evals, evecs, eig_resid = self.eigenstates(potential, eig_tol, guess)
            guess = evecs
            orbitals = evecs[:, :self.n_electrons] / math.sqrt(self.grid.volume_element)
            rho_out = np.sum(orbitals**2, axis=1)
            resid = np.linalg.norm(rho_out - rho_in) / np.linalg.norm(rho_in)
            history.append(float(resid))
            self.debug("SCF iteration %i: residual %.3e, eig tol %.1e" % (iteration, resid, eig_tol))
            if resid <= options.scf_tol:
                break
            eig_tol = max(options.eig_tol_floor, min(options.eig_tol, 0.1 * resid))
            rho_in = mixer.step(rho_in, rho_out)
        else:
            raise ScfError("SCF did not converge in %i iterations, residual %.3e" % (options.max_scf_iters, resid),
                           residual_history=history)

        if np.max(eig_resid) > eig_tol:
            self.warn("Final SCF eigensolve did not reach tolerance: max residual %.3e > %.3e" % (
                np.max(eig_resid), eig_tol))
        gs = GroundState(self.grid, self.kernel, self.config, orbitals, evals[:self.n_electrons],
                         evals[self.n_electrons:], rho_out, np.array(rho_in), potential, history)
        if gs.gap < MIN_GAP:
            raise ScfError("HOMO-LUMO gap %.3e is below %.0e, system is not insulating" % (gs.gap, MIN_GAP),
                           residual_history=history)
        self.debug("SCF converged in %i iterations, gap %.6f" % (iteration, gs.gap))
        return gs

def scf(grid, kernel, config, options=None, initial_density=None, initial_orbitals=None, initial_eig_tol=None):
    """
    Solve the model Kohn-Sham problem self-consistently

    :param initial_density: Optional starting density
    :param initial_orbitals: Optional starting orbitals (dV-normalized), used
                             as the initial eigensolver block
    :param initial_eig_tol: Eigensolver tolerance of the first iteration,
                            defaults to ``options.eig_tol``
    :return: ``GroundState``
    """
    if options is None:
        options = ScfOptions()
    return _ScfSolver(grid, kernel, config, options).run(initial_density, initial_orbitals, initial_eig_tol)

def ion_ion_energy(config, grid, kernel):
    """
    :return: Interaction energy of the smeared pseudocharges without self energies
    """
    sfac = structure_factors(config, grid)
    total = np.sum(sfac, axis=1)
    symbol = kernel.symbol(grid)
    return float(np.sum(symbol * (np.abs(total)**2 - np.sum(np.abs(sfac)**2, axis=1))) / (2 * grid.volume))

def ion_ion_gradient(config, grid, kernel):
    """
    :return: dE_II/dR, shape (N_A, d)
    """
    sfac = structure_factors(config, grid)
    total = np.sum(sfac, axis=1)
    symbol = kernel.symbol(grid)
    grad = np.empty((config.n_atoms, grid.dim))
    for axis in range(grid.dim):
        deriv = -1j * grid.frequencies[:, axis][:, np.newaxis] * sfac
        grad[:, axis] = np.sum(symbol[:, np.newaxis] * np.real(np.conj(total)[:, np.newaxis] * deriv), axis=0)
    return grad / grid.volume

def ion_ion_forces(config, grid, kernel):
    return -ion_ion_gradient(config, grid, kernel)

def ion_ion_hessian(config, grid, kernel):
    """
    :return: Second derivatives of E_II, shape (d * N_A, d * N_A) with index I * d + a
    """
    sfac = structure_factors(config, grid)
    total = np.sum(sfac, axis=1)
    symbol = kernel.symbol(grid)
    natoms, dim = config.n_atoms, grid.dim
    hess = np.zeros((natoms, dim, natoms, dim))
    for a in range(dim):
        for b in range(dim):
            weight = symbol * grid.frequencies[:, a] * grid.frequencies[:, b]
            pair = np.real(np.dot(np.conj(sfac).T, weight[:, np.newaxis] * sfac))
            diag = np.real(np.dot(weight * np.conj(total), sfac))
            hess[:, a, :, b] = pair - np.diag(diag)
    return hess.reshape(natoms * dim, natoms * dim) / grid.volume

def total_energy(gs):
    """
    Total energy at the SCF fixed point

    Evaluated as the band energy minus the electron-electron double counting,
    sum_i e_i - 1/2 <rho, K rho> + E_II, which is the band energy form
    sum_i e_i - 1/2 <rho - m, K (rho + m)> with the pseudocharge self
    energies removed. The density is the one that generated the potential.
    """
    rho = gs.input_density
    hartree = 0.5 * gs.grid.inner(rho, yukawa_apply(gs.kernel, gs.grid, rho))
    return float(np.sum(gs.eigenvalues) - hartree + ion_ion_energy(gs.config, gs.grid, gs.kernel))

def harris_energy(grid, kernel, config, rho, n_states=None):
    """
    Harris-Foulkes energy of a trial density, using a dense eigensolver

    Equal to ``total_energy`` at self-consistency and stationary there.
    """
    potential = effective_potential(grid, kernel, config, rho)
    n_states = n_states or config.n_electrons
    evals = scipy.linalg.eigh(hamiltonian_matrix(grid, potential), eigvals_only=True,
                              subset_by_index=[0, n_states - 1])
    hartree = 0.5 * grid.inner(rho, yukawa_apply(kernel, grid, rho))
    return float(np.sum(evals[:config.n_electrons]) - hartree + ion_ion_energy(config, grid, kernel))

def forces(gs):
    """
    :return: Hellmann-Feynman forces, shape (N_A, d)
    """
    grad = pseudopotential_gradient(gs.config, gs.grid, gs.kernel)
    electronic = -gs.grid.inner(grad, gs.density[:, np.newaxis]).reshape(gs.config.n_atoms, gs.grid.dim)
    return electronic - ion_ion_gradient(gs.config, gs.grid, gs.kernel)

class RelaxResult(object):
    """
    :ivar config: Final configuration
    :ivar energies: Total energy before the first and after every step
    :ivar ground_state: Ground state of the final configuration
    """

    def __init__(self, config, energies, ground_state):
        self.config = config
        self.energies = list(energies)
        self.ground_state = ground_state

def relax(grid, kernel, config, steps, step_size=1.0, options=None, ground_state=None):
    """
    Steepest descent relaxation R <- R + step_size * F

    :param ground_state: Optional converged ground state of ``config``
    :return: ``RelaxResult``
    """
    if steps < 0:
        raise ModelError("Number of relaxation steps must be non-negative")
    gs = ground_state if ground_state is not None else scf(grid, kernel, config, options)
    energies = [total_energy(gs)]
    for step in range(1, steps + 1):
        force = forces(gs)
        config = config.with_positions(config.positions + step_size * force)
        try:
            gs = scf(grid, kernel, config, options, initial_density=gs.input_density,
                     initial_orbitals=gs.orbitals)
        except ScfError as exc:
            raise ScfError("SCF failed at relaxation step %i: %s" % (step, exc), step=step,
                           residual_history=exc.residual_history)
        energies.append(total_energy(gs))
        LOG.debug("Relaxation step %i: energy %.10f, max force %.3e" % (step, energies[-1], np.max(np.abs(force))))
    return RelaxResult(config, energies, gs)
