"""
ACP-PHONON - Density functional perturbation theory

Projection onto the unoccupied space, Sternheimer solves, application of the
irreducible polarizability chi0 and the self-consistent Dyson solve for the
reducible response chi G.

The projected Sternheimer operator Q(s - H)Q is singular on the occupied
space. The solves use (Q(s - H)Q - P) with P the occupied projector, which
is negative definite for s below the LUMO and leaves solutions in range(Q).

Copyright (c) 2019 The acp-phonon developers
"""
from __future__ import division

import concurrent.futures

import numpy as np
import scipy.linalg

from .krylov import block_minres
from .lattice import hamiltonian_apply, hamiltonian_matrix, kinetic_preconditioner
from .mixing import AndersonMixer
from .utils import LogSource, ModelError, ResponseError, StageTimer, get_num_threads

GAP_MARGIN = 1e-6

class ResponseOptions(object):
    """
    Options for Sternheimer and Dyson solves

    :ivar tol: Relative MINRES tolerance
    :ivar max_iters: MINRES iteration cap
    :ivar dyson_tol: Relative update tolerance of the Dyson iteration
    :ivar block_size: Maximum number of systems solved together in one block
    :ivar precondition: Use the kinetic preconditioner in MINRES
    :ivar reuse_guesses: Keep Sternheimer solutions as initial guesses for
                         the next outer iteration
    """

    def __init__(self, tol=1e-8, max_iters=2000, dyson_tol=1e-7, dyson_max_iters=100, mixing_history=10,
                 mixing_beta=0.5, block_size=256, precondition=False, reuse_guesses=True, n_workers=None):
        for name, value in (("tol", tol), ("dyson_tol", dyson_tol)):
            if not value > 0:
                raise ModelError("%s must be positive, got %s" % (name, str(value)))
        if max_iters < 1 or dyson_max_iters < 1 or block_size < 1:
            raise ModelError("Iteration caps and block size must be at least 1")
        self.tol = float(tol)
        self.max_iters = int(max_iters)
        self.dyson_tol = float(dyson_tol)
        self.dyson_max_iters = int(dyson_max_iters)
        self.mixing_history = int(mixing_history)
        self.mixing_beta = float(mixing_beta)
        self.block_size = int(block_size)
        self.precondition = bool(precondition)
        self.reuse_guesses = bool(reuse_guesses)
        self.n_workers = n_workers

    @property
    def workers(self):
        return self.n_workers or get_num_threads()

class MinresStats(object):
    """ Running totals of MINRES work """

    def __init__(self):
        self.solves = 0
        self.iterations = 0

    def add(self, info):
        self.solves += info.iterations.size
        self.iterations += info.total_iterations

    def as_dict(self):
        return {"solves" : self.solves, "iterations" : self.iterations}

def map_tasks(func, tasks, n_workers):
    """
    Run ``func`` over ``tasks`` in a thread pool, returning results in task order
    """
    tasks = list(tasks)
    if n_workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=min(n_workers, len(tasks))) as executor:
        return list(executor.map(func, tasks))

def occupied_project(gs, v):
    """ :return: P v = Psi (Psi^T v) dV """
    coeffs = np.dot(gs.orbitals.T, v) * gs.grid.volume_element
    return np.dot(gs.orbitals, coeffs)

def project_unoccupied(gs, v):
    """ :return: Q v = v - Psi (Psi^T v) dV for a field or batch """
    v = np.asarray(v, dtype=np.float64)
    return v - occupied_project(gs, v)

class SternheimerOperator(object):
    """
    Applies (Q(s - H)Q - P) with a shift s per column
    """

    def __init__(self, gs, shifts, precondition=False):
        shifts = np.atleast_1d(np.asarray(shifts, dtype=np.float64))
        if shifts.size and np.max(shifts) >= gs.lumo - GAP_MARGIN:
            raise ResponseError("Sternheimer shift %.6f is within %.0e of the LUMO %.6f" % (
                np.max(shifts), GAP_MARGIN, gs.lumo))
        self.gs = gs
        self.shifts = shifts
        self.precond = kinetic_preconditioner(gs.grid) if precondition else None

    def apply(self, V, cols):
        gs = self.gs
        PV = occupied_project(gs, V)
        QV = V - PV
        Y = self.shifts[cols][np.newaxis, :] * QV - hamiltonian_apply(gs.grid, gs.potential, QV)
        return Y - occupied_project(gs, Y) - PV

    def preconditioner(self):
        if self.precond is None:
            return None
        return lambda V, cols: self.precond(V)

    def solve(self, rhs, x0, options):
        """
        :return: Tuple of solutions and ``MinresInfo`` for the projected right hand sides
        """
        rhs = project_unoccupied(self.gs, rhs)
        return block_minres(self.apply, rhs, X0=x0, apply_M=self.preconditioner(), tol=options.tol,
                            maxiter=options.max_iters)

def _check_converged(info, what, index_map=None):
    if not np.all(info.converged):
        failed = int(np.flatnonzero(~info.converged)[0])
        index = failed if index_map is None else index_map[failed]
        raise ResponseError("%s did not converge for index %s: residual %.3e" % (
            what, str(index), info.residuals[failed]), index=index, residual=float(info.residuals[failed]))

def _column_chunks(ncols, size):
    return [slice(start, min(start + size, ncols)) for start in range(0, ncols, size)]

def sternheimer_solve_batch(gs, shifts, rhs, options=None, x0=None, stats=None):
    """
    Solve (Q(s_j - H)Q - P) z_j = Q b_j for every column j

    :param shifts: Shift per column
    :param rhs: Right hand sides, shape (N_g, n)
    :param x0: Optional initial guesses, shape (N_g, n)
    :return: Solutions, shape (N_g, n)
    """
    options = options or ResponseOptions()
    rhs = np.asarray(rhs, dtype=np.float64)
    shifts = np.broadcast_to(np.asarray(shifts, dtype=np.float64), (rhs.shape[1],))
    result = np.zeros_like(rhs)

    def _solve(chunk):
        op = SternheimerOperator(gs, shifts[chunk], options.precondition)
        guess = None if x0 is None else x0[:, chunk]
        return op.solve(rhs[:, chunk], guess, options)

    chunks = _column_chunks(rhs.shape[1], options.block_size)
    for chunk, (sol, info) in zip(chunks, map_tasks(_solve, chunks, options.workers)):
        _check_converged(info, "Sternheimer solve", index_map=np.arange(rhs.shape[1])[chunk])
        result[:, chunk] = sol
        if stats is not None:
            stats.add(info)
    return result

def sternheimer_solve(gs, shift, rhs, tol=None, options=None, x0=None):
    """
    :return: Solution z of (Q(shift - H)Q - P) z = Q rhs for a single field
    """
    options = options or ResponseOptions()
    if tol is not None:
        options = _with_tol(options, tol)
    guess = None if x0 is None else np.asarray(x0)[:, np.newaxis]
    return sternheimer_solve_batch(gs, [shift], np.asarray(rhs)[:, np.newaxis], options, guess)[:, 0]

def _with_tol(options, tol):
    copy = ResponseOptions.__new__(ResponseOptions)
    copy.__dict__.update(options.__dict__)
    copy.tol = float(tol)
    return copy

def apply_chi0_batch(gs, G, options=None, guesses=None, stats=None):
    """
    Apply chi0 to every column of G by Sternheimer solves

        chi0 g = 2 sum_i psi_i * z_i,  (Q(e_i - H)Q - P) z_i = Q(psi_i * g)

    :param G: Perturbations, shape (N_g, n)
    :param guesses: Optional solutions of a previous call, shape (N_g, N_e * n)
    :return: Tuple of chi0 G, shape (N_g, n), and the Sternheimer solutions in
             column order i * n + j (None unless ``options.reuse_guesses``)
    """
    options = options or ResponseOptions()
    G = np.asarray(G, dtype=np.float64)
    ncols, nocc = G.shape[1], gs.n_electrons
    if guesses is not None and guesses.shape != (gs.grid.n_points, nocc * ncols):
        guesses = None

    col_chunks = _column_chunks(ncols, options.block_size)
    group = max(1, options.block_size // ncols)
    orb_groups = [np.arange(start, min(start + group, nocc)) for start in range(0, nocc, group)]
    tasks = [(orbs, cols) for orbs in orb_groups for cols in col_chunks]

    def _solve(task):
        orbs, cols = task
        width = cols.stop - cols.start
        psi = gs.orbitals[:, orbs]
        rhs = (psi[:, :, np.newaxis] * G[:, np.newaxis, cols]).reshape(gs.grid.n_points, -1)
        shifts = np.repeat(gs.eigenvalues[orbs], width)
        x0 = None
        if guesses is not None:
            index = (orbs[:, np.newaxis] * ncols + np.arange(cols.start, cols.stop)[np.newaxis, :]).ravel()
            x0 = guesses[:, index]
        op = SternheimerOperator(gs, shifts, options.precondition)
        sol, info = op.solve(rhs, x0, options)
        _check_converged(info, "Sternheimer solve", index_map=np.repeat(orbs, width))
        part = 2 * np.sum(psi[:, :, np.newaxis] * sol.reshape(gs.grid.n_points, len(orbs), width), axis=1)
        return part, sol, info

    U = np.zeros_like(G)
    solutions = np.zeros((gs.grid.n_points, nocc * ncols)) if options.reuse_guesses else None
    for (orbs, cols), (part, sol, info) in zip(tasks, map_tasks(_solve, tasks, options.workers)):
        U[:, cols] += part
        if solutions is not None:
            index = (orbs[:, np.newaxis] * ncols + np.arange(cols.start, cols.stop)[np.newaxis, :]).ravel()
            solutions[:, index] = sol
        if stats is not None:
            stats.add(info)
    return U, solutions

def apply_chi0(gs, g, options=None):
    """
    :return: chi0 g for a single field g
    """
    return apply_chi0_batch(gs, np.asarray(g, dtype=np.float64)[:, np.newaxis], options)[0][:, 0]

class DysonReport(object):
    """
    Diagnostics of a Dyson solve

    :ivar residual_history: Relative update norm per iteration
    :ivar minres: MINRES work totals
    :ivar timings: Seconds per stage
    """

    def __init__(self):
        self.residual_history = []
        self.minres = MinresStats()
        self.timer = StageTimer()
        self.converged = False

    @property
    def iterations(self):
        return len(self.residual_history)

    def as_dict(self):
        return {
            "iterations" : self.iterations,
            "converged" : self.converged,
            "residual_history" : list(self.residual_history),
            "minres" : self.minres.as_dict(),
        }

class _DysonSolver(LogSource):

    def __init__(self, gs, kernel, options):
        self.gs = gs
        self.kernel = kernel
        self.options = options

    def run(self, G, tol, max_iters):
        gs, options = self.gs, self.options
        report = DysonReport()
        G = np.asarray(G, dtype=np.float64)
        if not np.any(G):
            report.converged = True
            return np.zeros_like(G), report

        with report.timer.stage("chi0"):
            U_in, sols = apply_chi0_batch(gs, G, options, stats=report.minres)
        ref = np.linalg.norm(U_in)
        if ref == 0:
            report.converged = True
            return U_in, report

        mixer = AndersonMixer(options.mixing_history, options.mixing_beta)
        for iteration in range(1, max_iters + 1):
            with report.timer.stage("chi0"):
                perturbation = G + self.kernel.apply(gs.grid, U_in)
                U_out, sols = apply_chi0_batch(gs, perturbation, options, guesses=sols, stats=report.minres)
            resid = np.linalg.norm(U_out - U_in) / ref
            report.residual_history.append(float(resid))
            self.debug("Dyson iteration %i: residual %.3e" % (iteration, resid))
            if resid <= tol:
                report.converged = True
                return U_in, report
            with report.timer.stage("mixing"):
                U_in = mixer.step(U_in, U_out)

        raise ResponseError("Dyson iteration did not converge in %i iterations, residual %.3e" % (max_iters, resid),
                            residual=float(resid), residual_history=list(report.residual_history))

def dyson_solve_dfpt(gs, kernel, G, options=None, tol=None, max_iters=None):
    """
    Solve U = chi0 G + chi0 K U by Anderson accelerated fixed point iteration

    Convergence is measured as ||U_out - U_in|| / ||chi0 G|| in the stacked
    Frobenius norm. On exit the returned U satisfies the Dyson equation to
    that residual.

    :return: Tuple of U ~ chi G and ``DysonReport``
    """
    options = options or ResponseOptions()
    tol = options.dyson_tol if tol is None else tol
    max_iters = options.dyson_max_iters if max_iters is None else max_iters
    return _DysonSolver(gs, kernel, options).run(G, tol, max_iters)

def adler_wiser_chi0(gs):
    """
    Dense chi0 from the full spectrum of the ground state Hamiltonian

    Sums over all unoccupied states, for small grids only. The returned
    matrix X acts on sampled fields, u = X g.
    """
    grid = gs.grid
    evals, evecs = scipy.linalg.eigh(hamiltonian_matrix(grid, gs.potential))
    psi = evecs / np.sqrt(grid.volume_element)
    nocc = gs.n_electrons
    occ, unocc = psi[:, :nocc], psi[:, nocc:]
    chi0 = np.zeros((grid.n_points, grid.n_points))
    for idx in range(nocc):
        pairs = occ[:, idx:idx+1] * unocc
        weights = 2 / (evals[idx] - evals[nocc:])
        chi0 += np.dot(pairs * weights, pairs.T)
    return chi0 * grid.volume_element

def dense_dyson(gs, kernel, G):
    """
    :return: (I - chi0 K)^-1 chi0 G with dense chi0 and kernel matrices
    """
    chi0 = adler_wiser_chi0(gs)
    kmat = kernel.matrix(gs.grid)
    lhs = np.eye(gs.grid.n_points) - np.dot(chi0, kmat)
    return scipy.linalg.solve(lhs, np.dot(chi0, G))
