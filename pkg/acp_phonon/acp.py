"""
ACP-PHONON - Adaptively compressed polarizability operator

The response chi0 G for a fixed set of perturbations G is compressed as
chi0 ~ W Pi^T, where Pi^T samples a field at N_mu selected grid points.
The points come from a randomized interpolative decomposition of the
products psi_i * g_j, and the shift dependence of the Sternheimer
equations is disentangled by Lagrange interpolation on Chebyshev nodes
spanning the occupied spectrum.

The Dyson equation is solved for U~ = U + K^-1 G, which satisfies
U~ = chi0 K U~ + K^-1 G. Each outer iteration compresses chi0 for the
current K U~ and solves the resulting low rank fixed point exactly by the
Sherman-Morrison-Woodbury identity.

Copyright (c) 2019 The acp-phonon developers
"""
from __future__ import division

import logging

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.interpolate

from .response import ResponseOptions, MinresStats, sternheimer_solve_batch
from .utils import LogSource, ModelError, ResponseError, StageTimer

LOG = logging.getLogger(__name__)

class AcpOptions(object):
    """
    Options for the compressed polarizability

    :ivar n_cheb: Number of Chebyshev nodes N_c
    :ivar id_threshold: Relative pivot threshold for the rank of the ID
    :ivar srft_oversampling: Number of sketched columns of G, r
    :ivar max_outer_iters: Cap on adaptive outer iterations
    :ivar outer_tol: Relative update tolerance of the outer iteration
    :ivar seed: Base seed, outer iteration k uses seed + k - 1
    :ivar fixed_rank: If set, use exactly this many points instead of the threshold
    :ivar require_convergence: Raise if the outer iteration cap is reached
    """

    def __init__(self, n_cheb=20, id_threshold=1e-5, srft_oversampling=8, max_outer_iters=4, outer_tol=1e-6,
                 seed=0, fixed_rank=None, require_convergence=False):
        if n_cheb < 1:
            raise ModelError("Need at least one Chebyshev node")
        if not 0 < id_threshold < 1:
            raise ModelError("ID threshold must be in (0, 1), got %s" % str(id_threshold))
        if srft_oversampling < 1:
            raise ModelError("SRFT oversampling must be at least 1")
        if max_outer_iters < 1:
            raise ModelError("Need at least one outer iteration")
        if not outer_tol > 0:
            raise ModelError("Outer tolerance must be positive")
        if fixed_rank is not None and fixed_rank < 1:
            raise ModelError("Fixed rank must be at least 1")
        self.n_cheb = int(n_cheb)
        self.id_threshold = float(id_threshold)
        self.srft_oversampling = int(srft_oversampling)
        self.max_outer_iters = int(max_outer_iters)
        self.outer_tol = float(outer_tol)
        self.seed = int(seed)
        self.fixed_rank = None if fixed_rank is None else int(fixed_rank)
        self.require_convergence = bool(require_convergence)

def chebyshev_nodes(eps_lo, eps_hi, n_cheb):
    """
    Chebyshev nodes mapped to [eps_lo, eps_hi]

        e_c = (lo + hi) / 2 + (lo - hi) / 2 * cos(pi (c - 1/2) / N_c),  c = 1..N_c
    """
    if eps_lo > eps_hi:
        raise ModelError("Invalid interval [%g, %g]" % (eps_lo, eps_hi))
    if n_cheb < 1:
        raise ModelError("Need at least one Chebyshev node")
    theta = np.pi * (np.arange(1, n_cheb + 1) - 0.5) / n_cheb
    nodes = 0.5 * (eps_lo + eps_hi) + 0.5 * (eps_lo - eps_hi) * np.cos(theta)
    return np.clip(nodes, eps_lo, eps_hi)

def lagrange_coefficients(nodes, eps):
    """
    Lagrange basis weights l_c(eps)

    :param nodes: Distinct interpolation nodes
    :param eps: Scalar or array of evaluation points
    :return: Weights, shape (n_nodes,) for scalar eps, else (len(eps), n_nodes)
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    if np.unique(nodes).size != nodes.size:
        raise ResponseError("Interpolation nodes must be distinct")
    scalar = np.ndim(eps) == 0
    eps = np.atleast_1d(np.asarray(eps, dtype=np.float64))
    if nodes.size == 1:
        weights = np.ones((eps.size, 1))
    else:
        weights = scipy.interpolate.BarycentricInterpolator(nodes, np.eye(nodes.size))(eps)
    return weights[0] if scalar else weights

class InterpolativeDecomposition(object):
    """
    Row interpolative decomposition M ~ Xi M[rows, :]

    :ivar selected_rows: Grid indices r_mu
    :ivar interpolation_vectors: Xi, shape (N_g, N_mu), identity at the selected rows
    :ivar threshold: Relative pivot threshold used
    :ivar seed: Seed of the sketch
    :ivar pivots: Absolute pivoted QR diagonal, |R_kk|
    """

    def __init__(self, selected_rows, interpolation_vectors, threshold, seed=None, pivots=None):
        self.selected_rows = np.asarray(selected_rows)
        self.interpolation_vectors = interpolation_vectors
        self.threshold = threshold
        self.seed = seed
        self.pivots = pivots

    @property
    def rank(self):
        return self.selected_rows.size

    @property
    def pivot_ratio(self):
        """ |R_kk| / |R_11| at the last kept pivot, None without pivots """
        if self.pivots is None or self.rank == 0:
            return None
        return float(self.pivots[self.rank - 1] / self.pivots[0])

    def reconstruct(self, M):
        """ :return: Xi M[rows, :] """
        return np.dot(self.interpolation_vectors, np.asarray(M)[self.selected_rows])

def srft_sketch(G, width, rng):
    """
    Subsampled random Fourier transform across the columns of G

    Columns are multiplied by random unit phases, transformed by a DFT over
    the column index and ``width`` of them are kept at random.

    :return: Complex sketch, shape (N_g, min(width, n_cols))
    """
    G = np.asarray(G, dtype=np.float64)
    ncols = G.shape[1]
    if width > ncols:
        LOG.warning("Sketch width %i exceeds %i columns, clamping" % (width, ncols))
        width = ncols
    phases = np.exp(2j * np.pi * rng.random(ncols))
    transformed = scipy.fft.fft(G * phases[np.newaxis, :], axis=1) / np.sqrt(ncols)
    keep = np.sort(rng.choice(ncols, size=width, replace=False))
    return transformed[:, keep]

def interpolative_decomposition(sketch, threshold, fixed_rank=None, seed=None):
    """
    Interpolative decomposition of the rows of a sketched matrix

    Pivoted QR of sketch^T gives R P^T. The rank N_mu is the number of
    diagonal entries with |R_kk| >= threshold |R_11|, or ``fixed_rank``.
    The interpolation matrix satisfies Xi^T[:, P] = [I, R11^-1 R12].

    :param sketch: Real or complex array, shape (N_g, s). Complex sketches
                   are split into stacked real and imaginary columns.
    :return: ``InterpolativeDecomposition``
    """
    sketch = np.asarray(sketch)
    # Re and Im columns together span the complex sketch over the reals, so
    # the selected rows and a real Xi come from one real pivoted QR
    if np.iscomplexobj(sketch):
        sketch = np.hstack([sketch.real, sketch.imag])
    npoints = sketch.shape[0]
    rmat, perm = scipy.linalg.qr(sketch.T, mode="r", pivoting=True)
    diag = np.abs(np.diag(rmat))
    maxrank = diag.size

    if diag.size == 0 or diag[0] == 0:
        raise ResponseError("Cannot decompose a zero matrix")
    if fixed_rank is not None:
        rank = min(fixed_rank, maxrank)
        if rank < fixed_rank:
            LOG.warning("Requested rank %i exceeds sketch rank %i" % (fixed_rank, maxrank))
    else:
        below = np.flatnonzero(diag < threshold * diag[0])
        if below.size:
            rank = int(below[0])
        else:
            rank = maxrank
            LOG.warning("ID threshold %g not reached within sketch width %i" % (threshold, maxrank))

    coeffs = scipy.linalg.solve_triangular(rmat[:rank, :rank], rmat[:rank, rank:])
    xi_t = np.zeros((rank, npoints))
    xi_t[:, perm[:rank]] = np.eye(rank)
    xi_t[:, perm[rank:]] = coeffs
    return InterpolativeDecomposition(perm[:rank], np.ascontiguousarray(xi_t.T), threshold, seed, diag)

def randomized_id(gs, G_cols, options, seed=None):
    """
    Interpolative decomposition of M_ij = psi_i * g_j without forming M

    G is sketched by an SRFT keeping ``srft_oversampling`` columns. Each row
    of the sketch of M is the Kronecker product of the orbital row with the
    sketched G row, giving r * N_e columns.

    :return: ``InterpolativeDecomposition``
    """
    G_cols = np.asarray(G_cols, dtype=np.float64)
    if G_cols.ndim != 2 or G_cols.shape[1] == 0:
        raise ResponseError("Need a nonempty set of columns to decompose")
    seed = options.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    gsk = srft_sketch(G_cols, options.srft_oversampling, rng)
    msk = (gs.orbitals[:, :, np.newaxis] * gsk[:, np.newaxis, :]).reshape(gs.grid.n_points, -1)
    return interpolative_decomposition(msk, options.id_threshold, options.fixed_rank, seed)

class CompressedPolarizability(object):
    """
    Low rank chi0 ~ W Pi^T

    :ivar W: Shape (N_g, N_mu)
    :ivar selected_rows: Grid indices sampled by Pi^T
    :ivar chebyshev_nodes: Nodes used for the shift interpolation
    :ivar decomposition: ``InterpolativeDecomposition`` of the source perturbations
    """

    def __init__(self, W, selected_rows, chebyshev_nodes, decomposition=None):
        self.W = W
        self.selected_rows = np.asarray(selected_rows)
        self.chebyshev_nodes = chebyshev_nodes
        self.decomposition = decomposition

    @property
    def rank(self):
        return self.selected_rows.size

    def apply(self, g):
        """ :return: W g[rows] for a field or batch """
        return np.dot(self.W, np.asarray(g)[self.selected_rows])

    def dense(self):
        """ Dense N_g x N_g matrix W Pi^T, for small grids only """
        mat = np.zeros((self.W.shape[0], self.W.shape[0]))
        mat[:, self.selected_rows] = self.W
        return mat

def _node_set(gs, n_cheb):
    lo, hi = float(gs.eigenvalues[0]), float(gs.eigenvalues[-1])
    if hi - lo <= 1e-12 * max(1.0, abs(lo)):
        return np.array([lo])
    return chebyshev_nodes(lo, hi, n_cheb)

def match_guesses(previous_rows, previous, rows):
    """
    Initial guesses for the columns of a new interpolation set

    Column mu takes the previous solution of the same grid row r_mu, columns
    with a newly selected row start from zero.
    """
    x0 = np.zeros((previous.shape[0], len(rows)))
    index = dict((int(row), col) for col, row in enumerate(previous_rows))
    for col, row in enumerate(rows):
        if int(row) in index:
            x0[:, col] = previous[:, index[int(row)]]
    return x0

def build_compressed_chi0(gs, G_prime, options, response_options=None, seed=None, guesses=None, stats=None):
    """
    Compressed chi0 adapted to the perturbations G'

    For every Chebyshev node e_c and interpolation vector xi_mu solve
    (Q(e_c - H)Q - P) z_{c,mu} = Q xi_mu and assemble

        W_mu = 2 sum_c z_{c,mu} * sum_i l_c(e_i) psi_i psi_i(r_mu)

    :param guesses: Optional tuple of the previous selected rows and the list
                    of previous solutions per node
    :return: Tuple of ``CompressedPolarizability`` and the solutions per node
             (None unless guesses are reused)
    """
    response_options = response_options or ResponseOptions()
    G_prime = np.asarray(G_prime, dtype=np.float64)
    if not np.all(np.isfinite(G_prime)):
        raise ResponseError("Perturbations for compression are not finite")
    decomp = randomized_id(gs, G_prime, options, seed)
    rows = decomp.selected_rows
    xi = decomp.interpolation_vectors
    nodes = _node_set(gs, options.n_cheb)
    weights = lagrange_coefficients(nodes, gs.eigenvalues)

    W = np.zeros((gs.grid.n_points, decomp.rank))
    solutions = [] if response_options.reuse_guesses else None
    psi_rows = gs.orbitals[rows]
    prev_rows, prev_solutions = guesses if guesses is not None else (None, [])
    for cidx, node in enumerate(nodes):
        x0 = None
        if cidx < len(prev_solutions) and prev_solutions[cidx] is not None:
            x0 = match_guesses(prev_rows, prev_solutions[cidx], rows)
        try:
            zeta = sternheimer_solve_batch(gs, node, xi, response_options, x0=x0, stats=stats)
        except ResponseError as exc:
            raise ResponseError("Compressed Sternheimer solve failed at node %i, vector %s: %s" % (
                cidx, str(exc.index), exc), index=(cidx, exc.index), residual=exc.residual)
        assembly = np.dot(gs.orbitals * weights[:, cidx][np.newaxis, :], psi_rows.T)
        W += 2 * zeta * assembly
        if solutions is not None:
            solutions.append(zeta)
    return CompressedPolarizability(W, rows, nodes, decomp), solutions

class AcpReport(object):
    """
    Diagnostics of an adaptive compression solve

    :ivar ranks: N_mu per outer iteration
    :ivar update_norms: Relative update norm per outer iteration
    :ivar seeds: Sketch seed per outer iteration
    :ivar conditions: Condition number of the SMW core matrix per outer iteration
    :ivar pivot_ratios: |R_kk| / |R_11| at N_mu per outer iteration
    """

    def __init__(self):
        self.ranks = []
        self.update_norms = []
        self.seeds = []
        self.conditions = []
        self.pivot_ratios = []
        self.minres = MinresStats()
        self.timer = StageTimer()
        self.converged = False

    @property
    def iterations(self):
        return len(self.ranks)

    def as_dict(self):
        return {
            "outer_iterations" : self.iterations,
            "converged" : self.converged,
            "n_mu" : list(self.ranks),
            "update_norms" : list(self.update_norms),
            "seeds" : list(self.seeds),
            "smw_condition" : list(self.conditions),
            "pivot_ratios" : list(self.pivot_ratios),
            "minres" : self.minres.as_dict(),
        }

class _AcpSolver(LogSource):

    def __init__(self, gs, kernel, options, response_options):
        self.gs = gs
        self.kernel = kernel
        self.options = options
        self.response_options = response_options or ResponseOptions()

    def smw_update(self, chi, G, B):
        """
        Exact solution of U~ = W (K U~)[rows] + B

        With X = (K U~)[rows] this is (I - (K W)[rows]) X = G[rows].
        """
        rows = chi.selected_rows
        core = np.eye(chi.rank) - self.kernel.apply(self.gs.grid, chi.W)[rows]
        cond = np.linalg.cond(core)
        if not np.isfinite(cond) or cond * np.finfo(np.float64).eps > 1:
            raise ResponseError("SMW core matrix is singular (condition %.3e)" % cond, condition=float(cond))
        lu_piv = scipy.linalg.lu_factor(core)
        return B + np.dot(chi.W, scipy.linalg.lu_solve(lu_piv, G[rows])), cond

    def run(self, G, callback):
        gs, options = self.gs, self.options
        report = AcpReport()
        G = np.asarray(G, dtype=np.float64)
        if not np.any(G):
            report.converged = True
            return np.zeros_like(G), report

        with report.timer.stage("inverse_kernel"):
            B = self.kernel.inverse_apply(gs.grid, G)
        U_t = B
        guesses = None
        for outer in range(1, options.max_outer_iters + 1):
            seed = options.seed + outer - 1
            with report.timer.stage("perturbation"):
                G_prime = G if outer == 1 else self.kernel.apply(gs.grid, U_t)
            with report.timer.stage("compression"):
                chi, solutions = build_compressed_chi0(gs, G_prime, options, self.response_options, seed=seed,
                                                       guesses=guesses, stats=report.minres)
            guesses = (chi.selected_rows, solutions) if solutions is not None else None
            with report.timer.stage("smw"):
                U_new, cond = self.smw_update(chi, G, B)

            unorm = np.linalg.norm(U_new - B)
            update = np.linalg.norm(U_new - U_t) / unorm if unorm > 0 else 0.0
            U_t = U_new
            report.ranks.append(chi.rank)
            report.update_norms.append(float(update))
            report.seeds.append(seed)
            report.conditions.append(float(cond))
            report.pivot_ratios.append(chi.decomposition.pivot_ratio)
            self.debug("ACP outer iteration %i: N_mu %i, update %.3e" % (outer, chi.rank, update))
            if callback is not None:
                callback(outer, U_t - B)
            if update < options.outer_tol:
                report.converged = True
                break

        if not report.converged:
            msg = "ACP outer iteration reached %i iterations, update %.3e" % (options.max_outer_iters,
                                                                              report.update_norms[-1])
            if options.require_convergence:
                raise ResponseError(msg, residual=report.update_norms[-1],
                                    residual_history=list(report.update_norms))
            self.warn(msg)
        return U_t - B, report

def acp_solve(gs, kernel, G, options=None, response_options=None, callback=None):
    """
    chi G by adaptively compressed polarizability and SMW updates

    :param callback: Optional ``callback(k, U_k)`` called after every outer iteration
    :return: Tuple of U ~ chi G and ``AcpReport``
    """
    options = options or AcpOptions()
    return _AcpSolver(gs, kernel, options, response_options).run(G, callback)
