"""
ACP-PHONON - Block MINRES

MINRES run simultaneously on a block of independent symmetric systems.
The recurrences are those of the scipy implementation (Paige and Saunders)
with every scalar replaced by a per-column vector. Converged columns are
removed from the active block so later iterations only touch unfinished
systems.

Copyright (c) 2019 The acp-phonon developers
"""
import numpy as np

from .utils import ResponseError

class MinresInfo(object):
    """
    Convergence information for a block MINRES solve

    :ivar iterations: Iterations used per column
    :ivar converged: Boolean mask of converged columns
    :ivar residuals: Final relative residual estimate per column
    """

    def __init__(self, ncols):
        self.iterations = np.zeros(ncols, dtype=int)
        self.converged = np.zeros(ncols, dtype=bool)
        self.residuals = np.zeros(ncols)

    @property
    def total_iterations(self):
        return int(np.sum(self.iterations))

    @property
    def max_residual(self):
        if self.residuals.size == 0:
            return 0.0
        return float(np.max(self.residuals))

def _colsum(a, b):
    return np.einsum("ij,ij->j", a, b)

def block_minres(apply_A, B, X0=None, apply_M=None, tol=1e-8, maxiter=2000):
    """
    Solve A_j x_j = b_j for every column j of B

    :param apply_A: Callable ``apply_A(V, cols)`` applying the operator of
                    each column in ``cols`` to the matching column of V
    :param B: Right hand sides, shape (n, m)
    :param X0: Optional initial guesses, shape (n, m)
    :param apply_M: Optional symmetric positive definite preconditioner
                    ``apply_M(V, cols)``
    :param tol: Relative tolerance on the (preconditioned) residual norm
    :param maxiter: Iteration cap per column
    :return: Tuple of solutions, shape (n, m), and ``MinresInfo``
    """
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2:
        raise ValueError("Right hand side block must be two dimensional")
    nrows, ncols = B.shape
    info = MinresInfo(ncols)
    eps = np.finfo(np.float64).eps

    if apply_M is None:
        apply_M = lambda V, cols: V

    if X0 is None:
        X = np.zeros((nrows, ncols))
    else:
        X = np.array(X0, dtype=np.float64, copy=True)
        if X.shape != B.shape:
            raise ValueError("Initial guess shape %s does not match %s" % (X.shape, B.shape))

    all_cols = np.arange(ncols)
    bnorm = np.sqrt(np.maximum(_colsum(B, apply_M(B, all_cols)), 0))

    # Zero right hand side has the zero solution
    zero = bnorm == 0
    X[:, zero] = 0
    info.converged[zero] = True

    active = all_cols[~zero]
    if active.size == 0:
        return X, info

    if X0 is None:
        R1 = B[:, active].copy()
    else:
        R1 = B[:, active] - apply_A(X[:, active], active)
    Y = apply_M(R1, active)
    beta1 = _colsum(R1, Y)
    if np.any(beta1 < 0):
        raise ResponseError("Preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)

    done = beta1 <= tol * bnorm[active]
    info.converged[active[done]] = True
    info.residuals[active[done]] = beta1[done] / bnorm[active[done]]
    keep = ~done
    active, R1, Y, beta1 = active[keep], R1[:, keep], Y[:, keep], beta1[keep]
    Xa = X[:, active]
    bn = bnorm[active]

    nact = active.size
    oldb = np.zeros(nact)
    beta = beta1.copy()
    dbar = np.zeros(nact)
    epsln = np.zeros(nact)
    phibar = beta1.copy()
    cs = -np.ones(nact)
    sn = np.zeros(nact)
    W = np.zeros((nrows, nact))
    W2 = np.zeros((nrows, nact))
    R2 = R1

    itn = 0
    while active.size > 0 and itn < maxiter:
        itn += 1
        V = Y / beta
        Y = apply_A(V, active)
        if itn >= 2:
            Y = Y - (beta / oldb) * R1
        alpha = _colsum(V, Y)
        Y = Y - (alpha / beta) * R2
        R1 = R2
        R2 = Y
        Y = apply_M(R2, active)
        oldb = beta
        beta = _colsum(R2, Y)
        if np.any(beta < 0):
            raise ResponseError("Preconditioner is not positive definite")
        beta = np.sqrt(beta)

        oldeps = epsln
        delta = cs * dbar + sn * alpha
        gbar = sn * dbar - cs * alpha
        epsln = sn * beta
        dbar = -cs * beta
        gamma = np.maximum(np.sqrt(gbar**2 + beta**2), eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        W1 = W2
        W2 = W
        W = (V - oldeps * W1 - delta * W2) / gamma
        Xa += phi * W
        info.iterations[active] = itn

        # Lanczos breakdown means the Krylov space holds the exact solution
        done = (phibar <= tol * bn) | (beta <= eps * beta1)
        if np.any(done):
            finished = active[done]
            X[:, finished] = Xa[:, done]
            info.converged[finished] = True
            info.residuals[finished] = phibar[done] / bn[done]
            keep = ~done
            active = active[keep]
            if active.size == 0:
                break
            Xa, V, Y, R1, R2, W, W2 = [a[:, keep] for a in (Xa, V, Y, R1, R2, W, W2)]
            oldb, beta, beta1, dbar, epsln, phibar, cs, sn, bn = [
                a[keep] for a in (oldb, beta, beta1, dbar, epsln, phibar, cs, sn, bn)
            ]

    if active.size > 0:
        X[:, active] = Xa
        info.residuals[active] = phibar / bn

    return X, info
