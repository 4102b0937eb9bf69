"""
ACP-PHONON - Dynamical matrices and phonon spectra

The Hessian of the total energy has three parts: the response term
g_{I,a}^T chi g_{J,b}, the diagonal term int rho d2V_I/dR_I^2 and the
ion-ion term. The response term comes from either the DFPT Dyson solver or
the adaptively compressed polarizability. A frozen phonon finite difference
of analytic forces is provided as an independent reference.

Matrix indices are I * d + a for atom I and direction a.

Copyright (c) 2019 The acp-phonon developers
"""
from __future__ import division

import numpy as np
import scipy.linalg

from .acp import AcpOptions, acp_solve
from .ground_state import ScfOptions, scf, forces, ion_ion_hessian
from .lattice import pseudopotential_gradient, pseudopotential_hessian_diag
from .response import ResponseOptions, dyson_solve_dfpt, map_tasks
from .utils import LogSource, ModelError, ResponseError, ScfError, StageTimer, get_num_threads

METHODS = ("fd", "dfpt", "acp")
RESPONSE_METHODS = ("dfpt", "acp")
METRICS = ("linf_freq", "rel_l2_batch")

class PhononResult(object):
    """
    Phonon frequencies and modes of a dynamical matrix

    :ivar dynamical_matrix: Symmetric (d N_A) x (d N_A) matrix
    :ivar frequencies: Ascending frequencies sqrt(max(lambda, 0))
    :ivar modes: Orthonormal eigenvectors as columns
    :ivar method: Method tag
    :ivar clamped_count: Number of negative eigenvalues clamped to zero
    """

    def __init__(self, dynamical_matrix, frequencies, modes, method=None, clamped_count=0, eigenvalues=None):
        self.dynamical_matrix = dynamical_matrix
        self.frequencies = frequencies
        self.modes = modes
        self.method = method
        self.clamped_count = clamped_count
        self.eigenvalues = eigenvalues

    @property
    def n_modes(self):
        return self.frequencies.size

class DynamicalMatrixReport(object):
    """
    :ivar asymmetry: max |H - H^T| before symmetrization
    :ivar response: Report of the response solver, if any
    """

    def __init__(self, method):
        self.method = method
        self.asymmetry = None
        self.response = None
        self.timer = StageTimer()
        self.scf_solves = 0

    def as_dict(self):
        ret = {
            "method" : self.method,
            "asymmetry" : self.asymmetry,
        }
        if self.response is not None:
            ret["response"] = self.response.as_dict()
        if self.scf_solves:
            ret["scf_solves"] = self.scf_solves
        return ret

def mass_weight(hessian, masses, dim):
    """ :return: H_{(I,a),(J,b)} / sqrt(M_I M_J) """
    weights = 1 / np.sqrt(np.repeat(np.asarray(masses, dtype=np.float64), dim))
    return hessian * weights[:, np.newaxis] * weights[np.newaxis, :]

def symmetrize(mat):
    return 0.5 * (mat + mat.T)

def diagonal_term(gs):
    """
    :return: Block diagonal matrix with blocks int rho d2V_I/dR_a dR_b
    """
    natoms, dim = gs.config.n_atoms, gs.grid.dim
    hess = pseudopotential_hessian_diag(gs.config, gs.grid, gs.kernel)
    blocks = np.einsum("g,giab->iab", gs.density, hess) * gs.grid.volume_element
    mat = np.zeros((natoms * dim, natoms * dim))
    for atom in range(natoms):
        mat[atom*dim:(atom+1)*dim, atom*dim:(atom+1)*dim] = blocks[atom]
    return mat

class _ResponseAssembly(LogSource):

    def __init__(self, gs, kernel, method, acp_options, response_options, callback):
        if method not in RESPONSE_METHODS:
            raise ModelError("Unknown response method '%s', must be one of %s" % (method, RESPONSE_METHODS))
        self.gs = gs
        self.kernel = kernel
        self.method = method
        self.acp_options = acp_options or AcpOptions()
        self.response_options = response_options or ResponseOptions()
        self.callback = callback

    def run(self):
        gs = self.gs
        report = DynamicalMatrixReport(self.method)
        with report.timer.stage("gradient"):
            G = pseudopotential_gradient(gs.config, gs.grid, self.kernel)
        with report.timer.stage("response"):
            if self.method == "dfpt":
                U, report.response = dyson_solve_dfpt(gs, self.kernel, G, self.response_options)
            else:
                U, report.response = acp_solve(gs, self.kernel, G, self.acp_options, self.response_options,
                                               callback=self.callback)
        with report.timer.stage("assembly"):
            hessian = np.dot(G.T, U) * gs.grid.volume_element
            hessian += diagonal_term(gs)
            hessian += ion_ion_hessian(gs.config, gs.grid, self.kernel)
            report.asymmetry = float(np.max(np.abs(hessian - hessian.T)))
            dmat = symmetrize(mass_weight(hessian, gs.config.masses, gs.grid.dim))
        self.debug("%s dynamical matrix asymmetry before symmetrization: %.3e" % (self.method, report.asymmetry))
        return dmat, U, report

def dynamical_matrix_response(gs, kernel, method, acp_options=None, response_options=None, callback=None):
    """
    Dynamical matrix with the response term from DFPT or ACP

    :return: Tuple of D, the response chi G and ``DynamicalMatrixReport``
    """
    return _ResponseAssembly(gs, kernel, method, acp_options, response_options, callback).run()

def dynamical_matrix_fd(grid, kernel, config, delta=0.01, scf_options=None, ground_state=None, n_workers=None):
    """
    Frozen phonon dynamical matrix by central differences of analytic forces

        D_{(I,a),(J,b)} = -(F_{J,b}(R + delta e_{I,a}) - F_{J,b}(R - delta e_{I,a})) / (2 delta sqrt(M_I M_J))

    One SCF per displaced configuration, warm started from the reference
    ground state. Displaced structures are not relaxed.

    :return: Tuple of D and ``DynamicalMatrixReport``
    """
    if not delta > 0:
        raise ModelError("Finite difference step must be positive")
    scf_options = scf_options or ScfOptions()
    report = DynamicalMatrixReport("fd")
    with report.timer.stage("scf"):
        ref = ground_state if ground_state is not None else scf(grid, kernel, config, scf_options)
    dim = grid.dim
    tasks = [(atom, axis, sign) for atom in range(config.n_atoms) for axis in range(dim) for sign in (1, -1)]

    def _forces(task):
        atom, axis, sign = task
        displaced = config.displaced(atom, axis, sign * delta)
        try:
            gs = scf(grid, kernel, displaced, scf_options, initial_density=ref.input_density,
                     initial_orbitals=ref.orbitals)
        except ScfError as exc:
            raise ScfError("SCF failed for displacement of atom %i along axis %i by %+g: %s" % (
                atom, axis, sign * delta, exc), step=task, residual_history=exc.residual_history)
        return forces(gs).ravel()

    with report.timer.stage("displacements"):
        results = map_tasks(_forces, tasks, n_workers or get_num_threads())
    report.scf_solves = len(tasks)

    hessian = np.empty((config.n_atoms * dim, config.n_atoms * dim))
    for idx in range(config.n_atoms * dim):
        hessian[idx] = -(results[2*idx] - results[2*idx + 1]) / (2 * delta)
    report.asymmetry = float(np.max(np.abs(hessian - hessian.T)))
    return symmetrize(mass_weight(hessian, config.masses, dim)), report

def phonon_modes(D, method=None):
    """
    Diagonalize a dynamical matrix

    Negative eigenvalues are clamped to zero and counted.

    :return: ``PhononResult``
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ModelError("Dynamical matrix must be square, got shape %s" % str(D.shape))
    evals, modes = scipy.linalg.eigh(symmetrize(D))
    negative = evals < 0
    freqs = np.sqrt(np.where(negative, 0.0, evals))
    return PhononResult(D, freqs, modes, method, int(np.sum(negative)), evals)

def default_omega_grid(frequencies, sigma, n_points=2001):
    """
    Uniform grid covering [min - 6 sigma, max + 6 sigma]
    """
    frequencies = np.asarray(frequencies)
    return np.linspace(np.min(frequencies) - 6 * sigma, np.max(frequencies) + 6 * sigma, n_points)

def phonon_dos(frequencies, sigma, omega_grid):
    """
    Gaussian smeared density of states normalized to unit integral

        rho(w) = 1/n sum_k exp(-(w - w_k)^2 / (2 sigma^2)) / sqrt(2 pi sigma^2)
    """
    if not sigma > 0:
        raise ModelError("DOS smearing must be positive, got %s" % str(sigma))
    frequencies = np.asarray(frequencies, dtype=np.float64)
    omega_grid = np.asarray(omega_grid, dtype=np.float64)
    diff = omega_grid[:, np.newaxis] - frequencies[np.newaxis, :]
    delta = np.exp(-diff**2 / (2 * sigma**2)) / np.sqrt(2 * np.pi * sigma**2)
    return np.sum(delta, axis=1) / frequencies.size

def _as_frequencies(value):
    if isinstance(value, PhononResult):
        return value.frequencies
    return np.asarray(value, dtype=np.float64)

def spectrum_error(reference, candidate, metric="linf_freq"):
    """
    :param metric: ``linf_freq`` for max |w_ref - w_cand| over sorted
                   frequencies, or ``rel_l2_batch`` for ||U_ref - U_cand|| / ||U_ref||
    """
    if metric == "linf_freq":
        ref, cand = np.sort(_as_frequencies(reference)), np.sort(_as_frequencies(candidate))
        if ref.shape != cand.shape:
            raise ResponseError("Cannot compare %i and %i frequencies" % (ref.size, cand.size))
        return float(np.max(np.abs(ref - cand)))
    elif metric == "rel_l2_batch":
        ref, cand = np.asarray(reference, dtype=np.float64), np.asarray(candidate, dtype=np.float64)
        if ref.shape != cand.shape:
            raise ResponseError("Cannot compare batches of shape %s and %s" % (ref.shape, cand.shape))
        return float(np.linalg.norm(ref - cand) / np.linalg.norm(ref))
    else:
        raise ModelError("Unknown metric '%s', must be one of %s" % (metric, METRICS))

def compare_methods(results, responses=None):
    """
    Cross-method errors

    Frequencies are compared with DFPT, or with FD when DFPT was not run.
    Response batches are compared with DFPT.

    :param results: Mapping method -> ``PhononResult``
    :param responses: Optional mapping method -> chi G
    :return: Dictionary of errors
    """
    reference = "dfpt" if "dfpt" in results else ("fd" if "fd" in results else None)
    comparison = {"reference" : reference, "linf_freq" : {}, "rel_l2_batch" : {}}
    if reference is None:
        return comparison
    for method in sorted(results):
        if method != reference:
            comparison["linf_freq"][method] = spectrum_error(results[reference], results[method], "linf_freq")
    responses = responses or {}
    if "dfpt" in responses:
        for method in sorted(responses):
            if method != "dfpt":
                comparison["rel_l2_batch"][method] = spectrum_error(responses["dfpt"], responses[method],
                                                                    "rel_l2_batch")
    return comparison
