"""
ACP-PHONON - Anderson mixing for fixed point iterations

Used for the SCF density and for the stacked Dyson batch. Arrays of any
shape are accepted, the history is kept flattened.

Copyright (c) 2019 The acp-phonon developers
"""
import collections

import numpy as np
import scipy.linalg

from .utils import LogSource

class AndersonMixer(LogSource):
    """
    Anderson acceleration of x = F(x)

    Given x_in and x_out = F(x_in) the residual is r = x_out - x_in. The
    update is

        x_next = x_in + beta * r - (dX + beta * dR) gamma

    where gamma minimizes ||r - dR gamma|| over the stored differences.
    With fewer than two history entries this reduces to linear mixing.
    """

    def __init__(self, depth=10, beta=0.5):
        if depth < 0:
            raise ValueError("Mixing depth must be non-negative")
        if beta <= 0:
            raise ValueError("Mixing parameter must be positive")
        self.depth = int(depth)
        self.beta = float(beta)
        self._x_hist = collections.deque([], maxlen=self.depth + 1)
        self._r_hist = collections.deque([], maxlen=self.depth + 1)

    def reset(self):
        self._x_hist.clear()
        self._r_hist.clear()

    def __len__(self):
        return len(self._x_hist)

    def step(self, x_in, x_out):
        """
        :param x_in: Input of the last fixed point evaluation
        :param x_out: Output of the last fixed point evaluation
        :return: Next input, same shape as ``x_in``
        """
        shape = np.shape(x_in)
        x_in = np.asarray(x_in, dtype=np.float64).ravel()
        resid = np.asarray(x_out, dtype=np.float64).ravel() - x_in

        self._x_hist.append(x_in.copy())
        self._r_hist.append(resid.copy())

        x_next = x_in + self.beta * resid
        if self.depth == 0 or len(self._x_hist) < 2:
            return x_next.reshape(shape)

        xs, rs = list(self._x_hist), list(self._r_hist)
        dx = np.stack([xs[idx] - xs[idx-1] for idx in range(1, len(xs))], axis=1)
        dr = np.stack([rs[idx] - rs[idx-1] for idx in range(1, len(rs))], axis=1)

        gamma = scipy.linalg.lstsq(dr, resid, lapack_driver="gelsd")[0]
        if not np.all(np.isfinite(gamma)):
            self.warn("Anderson coefficients not finite - restarting history")
            self.reset()
            return x_next.reshape(shape)

        x_next -= np.dot(dx + self.beta * dr, gamma)
        return x_next.reshape(shape)
