"""
ACP-PHONON - Tests for Anderson mixing

Copyright (c) 2019 The acp-phonon developers
"""
import unittest

import numpy as np

from acp_phonon.mixing import AndersonMixer

class AndersonMixerTest(unittest.TestCase):

    def _linear_map(self, n=20, seed=0):
        rng = np.random.default_rng(seed)
        q = np.linalg.qr(rng.standard_normal((n, n)))[0]
        # Contraction with eigenvalues up to 0.95, slow for plain iteration
        mat = np.dot(q * np.linspace(-0.5, 0.95, n), q.T)
        shift = rng.standard_normal(n)
        fixed = np.linalg.solve(np.eye(n) - mat, shift)
        return (lambda x: np.dot(mat, x) + shift), fixed

    def testFirstStepIsLinear(self):
        mixer = AndersonMixer(5, 0.3)
        x_in, x_out = np.zeros(4), np.ones(4)
        self.assertTrue(np.allclose(mixer.step(x_in, x_out), 0.3))
        self.assertEqual(len(mixer), 1)

    def testConvergesOnLinearProblem(self):
        func, fixed = self._linear_map()
        mixer = AndersonMixer(10, 0.5)
        x = np.zeros_like(fixed)
        for _ in range(60):
            x = mixer.step(x, func(x))
        self.assertTrue(np.allclose(x, fixed, atol=1e-8))

    def testFasterThanLinearMixing(self):
        func, fixed = self._linear_map(seed=1)
        anderson, linear = AndersonMixer(10, 0.5), AndersonMixer(0, 0.5)
        xa = xl = np.zeros_like(fixed)
        for _ in range(25):
            xa = anderson.step(xa, func(xa))
            xl = linear.step(xl, func(xl))
        self.assertTrue(np.linalg.norm(xa - fixed) < 1e-3 * np.linalg.norm(xl - fixed))

    def testShapePreserved(self):
        mixer = AndersonMixer(3, 0.5)
        x = np.zeros((5, 2))
        for _ in range(4):
            x = mixer.step(x, x + 1)
            self.assertEqual(x.shape, (5, 2))

    def testHistoryBounded(self):
        mixer = AndersonMixer(2, 0.5)
        x = np.zeros(3)
        for _ in range(6):
            x = mixer.step(x, 0.5 * x + 1)
        self.assertEqual(len(mixer), 3)
        mixer.reset()
        self.assertEqual(len(mixer), 0)

    def testInvalidParameters(self):
        with self.assertRaises(ValueError):
            AndersonMixer(-1, 0.5)
        with self.assertRaises(ValueError):
            AndersonMixer(2, 0.0)

if __name__ == '__main__':
    unittest.main()
