"""
ACP-PHONON - Periodic model systems

Plane wave grids, the Yukawa interaction kernel, Gaussian pseudocharges and
their potentials, atomic configurations and the Kohn-Sham Hamiltonian.

Fields are stored in real space as arrays of shape (N_g,) for a single
field or (N_g, n_cols) for a batch. Pseudocharges and everything derived
from them are built in Fourier space from the analytic Gaussian transform,
so they are exactly periodic and translate exactly with the atoms.

With structure factors S_I(k) = -Z_I exp(-sigma^2 |k|^2 / 2) exp(-i k.R_I)
the discrete transform of the pseudocharge of atom I is S_I / dV, where dV
is the grid volume element.

Copyright (c) 2019 The acp-phonon developers
"""
from __future__ import division

import math

import numpy as np
import scipy.fft

from .utils import ModelError, get_num_threads

class PlaneWaveGrid(object):
    """
    Uniform periodic grid with Fourier space metadata

    Grid points are flattened in C order, so for 2D grids the last
    dimension varies fastest.

    :ivar dim: Spatial dimension (1 or 2)
    :ivar cell_lengths: Cell length per dimension (bohr)
    :ivar points_per_dim: Grid count per dimension
    :ivar frequencies: Wavevector per grid point, shape (N_g, dim), FFT ordering
    :ivar coordinates: Position per grid point, shape (N_g, dim)
    :ivar volume_element: Quadrature weight of one grid point
    """

    def __init__(self, dim, cell_lengths, points_per_dim):
        if dim not in (1, 2):
            raise ModelError("Only 1D and 2D grids are supported, got dim=%s" % str(dim))
        cell_lengths = np.atleast_1d(np.asarray(cell_lengths, dtype=np.float64))
        points = np.atleast_1d(np.asarray(points_per_dim))
        if cell_lengths.shape != (dim,) or points.shape != (dim,):
            raise ModelError("Need %i cell lengths and grid counts" % dim)
        if np.any(cell_lengths <= 0):
            raise ModelError("Cell lengths must be positive: %s" % cell_lengths)
        for npts in points:
            if int(npts) != npts or npts < 4 or npts % 2 != 0:
                raise ModelError("Grid counts must be even integers >= 4, got %s" % str(points.tolist()))

        self.dim = dim
        self.cell_lengths = cell_lengths
        self.points_per_dim = tuple(int(npts) for npts in points)
        self.shape = self.points_per_dim
        self.n_points = int(np.prod(self.shape))
        self.volume = float(np.prod(cell_lengths))
        self.volume_element = self.volume / self.n_points
        self.spacing = cell_lengths / np.array(self.shape)

        axes_k = [2 * np.pi * np.fft.fftfreq(npts, d=length / npts)
                  for npts, length in zip(self.shape, cell_lengths)]
        axes_x = [np.arange(npts) * length / npts for npts, length in zip(self.shape, cell_lengths)]
        self.frequencies = np.stack([kk.ravel() for kk in np.meshgrid(*axes_k, indexing="ij")], axis=1)
        self.coordinates = np.stack([xx.ravel() for xx in np.meshgrid(*axes_x, indexing="ij")], axis=1)
        self.k2 = np.sum(self.frequencies**2, axis=1)
        for arr in (self.cell_lengths, self.spacing, self.frequencies, self.coordinates, self.k2):
            arr.flags.writeable = False

    def __repr__(self):
        return "PlaneWaveGrid(dim=%i, cell_lengths=%s, points_per_dim=%s)" % (
            self.dim, self.cell_lengths.tolist(), list(self.points_per_dim))

    def _axes(self):
        return tuple(range(self.dim))

    def fft(self, f):
        """
        Discrete Fourier transform of a field or batch of fields

        :param f: Array of shape (N_g,) or (N_g, n_cols)
        :return: Complex array of the same shape
        """
        f = np.asarray(f)
        extra = f.shape[1:]
        fhat = scipy.fft.fftn(f.reshape(self.shape + extra), axes=self._axes(), workers=get_num_threads())
        return fhat.reshape((self.n_points,) + extra)

    def ifft(self, fhat):
        """
        Inverse of ``fft``, returning the real part
        """
        fhat = np.asarray(fhat)
        extra = fhat.shape[1:]
        f = scipy.fft.ifftn(fhat.reshape(self.shape + extra), axes=self._axes(), workers=get_num_threads())
        return np.ascontiguousarray(f.real.reshape((self.n_points,) + extra))

    def apply_symbol(self, symbol, f):
        """
        Apply a Fourier multiplier given per grid frequency
        """
        f = np.asarray(f, dtype=np.float64)
        symbol = np.asarray(symbol).reshape((self.n_points,) + (1,) * (f.ndim - 1))
        return self.ifft(symbol * self.fft(f))

    def integrate(self, f):
        """ Integral over the cell, per column for batches """
        return np.sum(f, axis=0) * self.volume_element

    def inner(self, f, g):
        """ L2 inner product, per column for batches """
        return np.sum(f * g, axis=0) * self.volume_element

def build_grid(dim, cell_lengths, points_per_dim):
    """
    :return: ``PlaneWaveGrid`` for the given cell and grid counts
    """
    return PlaneWaveGrid(dim, cell_lengths, points_per_dim)

def grid_for_cell(cell_lengths, spacing):
    """
    Build the coarsest grid whose spacing does not exceed ``spacing``

    Counts are rounded up to even numbers and at least 4.
    """
    if spacing <= 0:
        raise ModelError("Grid spacing must be positive, got %s" % str(spacing))
    cell_lengths = np.atleast_1d(np.asarray(cell_lengths, dtype=np.float64))
    points = []
    for length in cell_lengths:
        npts = max(4, int(math.ceil(length / spacing - 1e-9)))
        if npts % 2:
            npts += 1
        points.append(npts)
    return PlaneWaveGrid(len(cell_lengths), cell_lengths, points)

class YukawaKernel(object):
    """
    Screened interaction with Fourier symbol 4 pi / (eps0 (|k|^2 + kappa^2))

    ``scale`` multiplies the whole symbol. It exists so that the response
    of a decoupled system (scale 0) can be computed through the same code.
    """

    def __init__(self, kappa, eps0, scale=1.0):
        if not kappa > 0:
            raise ModelError("Yukawa screening kappa must be positive, got %s" % str(kappa))
        if not eps0 > 0:
            raise ModelError("Yukawa eps0 must be positive, got %s" % str(eps0))
        if scale < 0:
            raise ModelError("Kernel scale must be non-negative")
        self.kappa = float(kappa)
        self.eps0 = float(eps0)
        self.scale = float(scale)

    def __repr__(self):
        return "YukawaKernel(kappa=%g, eps0=%g, scale=%g)" % (self.kappa, self.eps0, self.scale)

    def scaled(self, factor):
        return YukawaKernel(self.kappa, self.eps0, self.scale * factor)

    def symbol(self, grid):
        """ :return: Kernel symbol at every grid frequency """
        return self.scale * 4 * np.pi / (self.eps0 * (grid.k2 + self.kappa**2))

    def apply(self, grid, f):
        return grid.apply_symbol(self.symbol(grid), f)

    def inverse_apply(self, grid, v):
        if self.scale == 0:
            raise ModelError("Zero-scaled kernel has no inverse")
        return grid.apply_symbol(1 / self.symbol(grid), v)

    def matrix(self, grid):
        """ Dense kernel matrix, for small grids only """
        return self.apply(grid, np.eye(grid.n_points))

def yukawa_apply(kernel, grid, f):
    """
    :return: v with Fourier coefficients K(k) f(k)
    """
    return kernel.apply(grid, f)

def yukawa_inverse_apply(kernel, grid, v):
    """
    :return: f with Fourier coefficients v(k) / K(k)
    """
    return kernel.inverse_apply(grid, v)

class AtomicConfiguration(object):
    """
    Atoms in a periodic cell

    Positions are wrapped into the cell on construction. Instances are not
    modified after construction, the ``with_*`` methods return new objects.
    """

    def __init__(self, positions, charges, sigma, masses, cell_lengths):
        cell_lengths = np.atleast_1d(np.asarray(cell_lengths, dtype=np.float64))
        dim = cell_lengths.size
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, dim)
        natoms = positions.shape[0]
        if natoms == 0:
            raise ModelError("Configuration has no atoms")
        if np.any(cell_lengths <= 0):
            raise ModelError("Cell lengths must be positive")

        charges = np.asarray(charges)
        if charges.ndim == 0:
            charges = np.full(natoms, charges)
        if charges.shape != (natoms,):
            raise ModelError("Need one charge per atom")
        if np.any(charges != np.round(charges)) or np.any(charges <= 0):
            raise ModelError("Charges must be positive integers")

        masses = np.asarray(masses, dtype=np.float64)
        if masses.ndim == 0:
            masses = np.full(natoms, float(masses))
        if masses.shape != (natoms,):
            raise ModelError("Need one mass per atom")
        if np.any(masses <= 0):
            raise ModelError("Masses must be positive")
        if not sigma > 0:
            raise ModelError("Gaussian width sigma must be positive, got %s" % str(sigma))

        self.cell_lengths = cell_lengths
        self.positions = np.mod(positions, cell_lengths)
        self.charges = charges.astype(int)
        self.sigma = float(sigma)
        self.masses = masses
        for arr in (self.cell_lengths, self.positions, self.charges, self.masses):
            arr.flags.writeable = False

    @property
    def dim(self):
        return self.cell_lengths.size

    @property
    def n_atoms(self):
        return self.positions.shape[0]

    @property
    def n_electrons(self):
        return int(np.sum(self.charges))

    def __repr__(self):
        return "AtomicConfiguration(n_atoms=%i, dim=%i, cell_lengths=%s)" % (
            self.n_atoms, self.dim, self.cell_lengths.tolist())

    def with_positions(self, positions):
        return AtomicConfiguration(positions, self.charges, self.sigma, self.masses, self.cell_lengths)

    def with_masses(self, masses):
        return AtomicConfiguration(self.positions, self.charges, self.sigma, masses, self.cell_lengths)

    def displaced(self, atom, axis, step):
        """ :return: Copy with atom ``atom`` moved by ``step`` along ``axis`` """
        positions = np.array(self.positions)
        positions[atom, axis] += step
        return self.with_positions(positions)

    def translated(self, vector):
        return self.with_positions(self.positions + np.asarray(vector, dtype=np.float64)[np.newaxis, :])

def chain_1d(n_atoms, spacing, sigma=0.3, charge=1, mass=1.0):
    """
    Equally spaced atoms on a periodic line of length n_atoms * spacing
    """
    if n_atoms < 2:
        raise ModelError("A chain needs at least 2 atoms, got %i" % n_atoms)
    if spacing <= 0:
        raise ModelError("Atom spacing must be positive")
    positions = np.arange(n_atoms, dtype=np.float64)[:, np.newaxis] * spacing
    return AtomicConfiguration(positions, charge, sigma, mass, [n_atoms * spacing])

def triangular_2d(k_cells, spacing, sigma=0.24, charge=1, mass=1.0):
    """
    Triangular lattice in a rectangular periodic supercell

    The rectangular unit cell (spacing, spacing * sqrt(3)) holds atoms at
    (0, 0) and (spacing / 2, spacing * sqrt(3) / 2) and is tiled
    k_cells x k_cells times.
    """
    if k_cells < 1:
        raise ModelError("Need at least one unit cell, got %i" % k_cells)
    if spacing <= 0:
        raise ModelError("Atom spacing must be positive")
    height = spacing * math.sqrt(3)
    positions = []
    for ix in range(k_cells):
        for iy in range(k_cells):
            origin = np.array([ix * spacing, iy * height])
            positions.append(origin)
            positions.append(origin + [spacing / 2, height / 2])
    return AtomicConfiguration(positions, charge, sigma, mass, [k_cells * spacing, k_cells * height])

def remove_atoms(config, indices):
    """
    :return: Configuration with the atoms at ``indices`` deleted
    """
    indices = [int(idx) for idx in indices]
    if len(set(indices)) != len(indices):
        raise ModelError("Duplicate atom index in %s" % indices)
    for idx in indices:
        if idx < 0 or idx >= config.n_atoms:
            raise ModelError("Atom index %i out of range for %i atoms" % (idx, config.n_atoms))
    if len(indices) == config.n_atoms:
        raise ModelError("Cannot remove every atom")
    keep = np.setdiff1d(np.arange(config.n_atoms), indices)
    return AtomicConfiguration(config.positions[keep], config.charges[keep], config.sigma,
                               config.masses[keep], config.cell_lengths)

def random_vacancies(config, count, seed):
    """
    Remove ``count`` distinct atoms chosen by a seeded generator

    :return: Tuple of new configuration and sorted removed indices
    """
    if count < 0 or count >= config.n_atoms:
        raise ModelError("Cannot remove %i of %i atoms" % (count, config.n_atoms))
    rng = np.random.default_rng(seed)
    indices = sorted(int(idx) for idx in rng.choice(config.n_atoms, size=count, replace=False))
    return remove_atoms(config, indices), indices

def perturb_positions(config, amplitude, seed):
    """
    Displace every atom by a seeded uniform random vector in [-amplitude, amplitude]^d
    """
    if amplitude < 0:
        raise ModelError("Perturbation amplitude must be non-negative")
    rng = np.random.default_rng(seed)
    return config.with_positions(config.positions + rng.uniform(-amplitude, amplitude, size=config.positions.shape))

def check_resolution(config, grid):
    """
    Reject grids that do not resolve the Gaussian pseudocharges
    """
    if config.dim != grid.dim or not np.allclose(config.cell_lengths, grid.cell_lengths):
        raise ModelError("Grid cell %s does not match configuration cell %s" % (
            grid.cell_lengths.tolist(), config.cell_lengths.tolist()))
    if np.max(grid.spacing) > config.sigma / 2 * (1 + 1e-9):
        raise ModelError("Grid spacing %g does not resolve pseudocharge width %g (need <= sigma/2)" % (
            np.max(grid.spacing), config.sigma))

def structure_factors(config, grid):
    """
    :return: Complex array S_I(k), shape (N_g, N_A)
    """
    check_resolution(config, grid)
    form = np.exp(-0.5 * config.sigma**2 * grid.k2)
    phase = np.exp(-1j * np.dot(grid.frequencies, config.positions.T))
    return -config.charges[np.newaxis, :] * form[:, np.newaxis] * phase

def pseudocharge(config, grid):
    """
    :return: Tuple of total pseudocharge m, shape (N_g,), and per-atom
             pseudocharges m_I, shape (N_g, N_A)
    """
    per_atom = grid.ifft(structure_factors(config, grid) / grid.volume_element)
    return np.sum(per_atom, axis=1), per_atom

def pseudopotential(config, grid, kernel):
    """
    :return: Per-atom local potentials V_I = K * m_I, shape (N_g, N_A)
    """
    symbol = kernel.symbol(grid)[:, np.newaxis]
    return grid.ifft(symbol * structure_factors(config, grid) / grid.volume_element)

def pseudopotential_gradient(config, grid, kernel):
    """
    Derivatives of each atomic potential with respect to its own position

    :return: G of shape (N_g, d * N_A), column I * d + a holding dV_I/dR_{I,a}
    """
    sfac = structure_factors(config, grid) / grid.volume_element
    symbol = kernel.symbol(grid)
    cols = np.empty((grid.n_points, config.n_atoms, grid.dim), dtype=np.complex128)
    for axis in range(grid.dim):
        cols[:, :, axis] = (-1j * grid.frequencies[:, axis] * symbol)[:, np.newaxis] * sfac
    return grid.ifft(cols.reshape(grid.n_points, -1))

def pseudopotential_hessian_diag(config, grid, kernel):
    """
    Second derivatives of each atomic potential with respect to its own position

    :return: Array of shape (N_g, N_A, d, d)
    """
    sfac = structure_factors(config, grid) / grid.volume_element
    symbol = kernel.symbol(grid)
    dim = grid.dim
    hess = np.empty((grid.n_points, config.n_atoms, dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            mult = -grid.frequencies[:, a] * grid.frequencies[:, b] * symbol
            hess[:, :, a, b] = grid.ifft(mult[:, np.newaxis] * sfac)
            hess[:, :, b, a] = hess[:, :, a, b]
    return hess

def kinetic_apply(grid, psi):
    """ -1/2 Laplacian applied to a field or batch """
    return grid.apply_symbol(0.5 * grid.k2, psi)

def hamiltonian_apply(grid, potential, psi):
    """
    Apply H = -1/2 Laplacian + V to a field or batch of fields
    """
    psi = np.asarray(psi, dtype=np.float64)
    if psi.ndim == 1:
        return kinetic_apply(grid, psi) + potential * psi
    return kinetic_apply(grid, psi) + potential[:, np.newaxis] * psi

def hamiltonian_matrix(grid, potential):
    """ Dense Hamiltonian matrix, for small grids only """
    ham = hamiltonian_apply(grid, potential, np.eye(grid.n_points))
    return 0.5 * (ham + ham.T)

def kinetic_preconditioner(grid, shift=1.0):
    """
    :return: Callable applying (|k|^2 / 2 + shift)^-1 to a field or batch
    """
    symbol = 1 / (0.5 * grid.k2 + shift)
    return lambda psi: grid.apply_symbol(symbol, psi)
