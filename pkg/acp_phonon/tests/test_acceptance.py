"""
ACP-PHONON - Acceptance tests on the full size model systems

These take minutes to hours and are skipped unless ACP_PHONON_SLOW_TESTS
is set. The scaling benchmark additionally needs ACP_PHONON_FULL_BENCHMARK.

Copyright (c) 2019 The acp-phonon developers
"""
import shutil
import tempfile
import unittest

import numpy as np

from acp_phonon.config import RunConfig
from acp_phonon.ground_state import scf, relax
from acp_phonon.lattice import pseudopotential_gradient
from acp_phonon.response import apply_chi0_batch
from acp_phonon.acp import build_compressed_chi0
from acp_phonon.phonon import dynamical_matrix_response, dynamical_matrix_fd, phonon_modes, spectrum_error
from acp_phonon.process import BenchmarkProcess
from acp_phonon.templates import preset

from .common import SLOW_TESTS, FULL_BENCHMARK, relative_error

def preset_config(name, **numerics):
    rc = RunConfig.from_yaml(*preset(name))
    if numerics:
        rc = rc.copy(numerics=numerics)
    return rc

def optical_error(reference, candidate, dim=1):
    """ L-infinity frequency error over all but the d acoustic modes """
    ref, cand = phonon_modes(reference), phonon_modes(candidate)
    return spectrum_error(ref.frequencies[dim:], cand.frequencies[dim:], "linf_freq")

def solve(rc):
    config, _ = rc.configuration()
    grid = rc.grid(config)
    kernel = rc.kernel()
    gs = scf(grid, kernel, config, rc.scf_options())
    if rc.system["relax-steps"] > 0:
        gs = relax(grid, kernel, config, rc.system["relax-steps"], rc.system["relax-step-size"],
                   rc.scf_options(), ground_state=gs).ground_state
    return gs

@unittest.skipIf(not SLOW_TESTS, "Set ACP_PHONON_SLOW_TESTS to run acceptance tests")
class GapTest(unittest.TestCase):

    def testInsulator(self):
        gs = solve(preset_config("insulator1d"))
        self.assertEqual(gs.config.n_atoms, 60)
        self.assertAlmostEqual(gs.grid.cell_lengths[0], 144.0)
        self.assertTrue(abs(gs.gap - 0.6763) <= 0.02 * 0.6763)
        self.assertTrue(abs(np.min(gs.density) - 0.1935) <= 0.02 * 0.1935)
        self.assertTrue(abs(np.max(gs.density) - 0.6927) <= 0.02 * 0.6927)

    def testSemiconductor(self):
        gs = solve(preset_config("semiconductor1d"))
        self.assertTrue(abs(gs.gap - 0.1012) <= 0.05 * 0.1012)

    def testTriangular(self):
        gs = solve(preset_config("triangular2d"))
        self.assertEqual(gs.config.n_atoms, 98)
        self.assertTrue(abs(gs.gap - 1.2637) <= 0.05 * 1.2637)

    def testDefect(self):
        gs = solve(preset_config("defect2d"))
        self.assertEqual(gs.config.n_atoms, 69)
        self.assertTrue(abs(gs.gap - 1.3500) <= 0.10 * 1.3500)

@unittest.skipIf(not SLOW_TESTS, "Set ACP_PHONON_SLOW_TESTS to run acceptance tests")
class InsulatorPhononTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.rc = preset_config("insulator1d", **{"id-threshold" : 1e-5, "sternheimer-tol" : 1e-10,
                                                "dyson-tol" : 1e-9, "outer-tol" : 1e-8})
        cls.gs = solve(cls.rc)
        cls.kernel = cls.rc.kernel()
        cls.G = pseudopotential_gradient(cls.gs.config, cls.gs.grid, cls.kernel)
        cls.D_dfpt, cls.U_dfpt, _ = dynamical_matrix_response(cls.gs, cls.kernel, "dfpt",
                                                              response_options=cls.rc.response_options())

    def testFixedRankCompression(self):
        """ With 20 nodes the error of chi0 G does not grow with N_mu and is small at N_mu = 6 N_e """
        chi0g, _ = apply_chi0_batch(self.gs, self.G, self.rc.response_options())
        errors = []
        for factor in (3, 4, 5, 6):
            rc = self.rc.copy(numerics={"id-rank" : factor * self.gs.n_electrons})
            chi, _ = build_compressed_chi0(self.gs, self.G, rc.acp_options(), rc.response_options())
            errors.append(relative_error(chi0g, chi.apply(self.G)))
        for coarse, fine in zip(errors[:-1], errors[1:]):
            self.assertTrue(fine <= coarse)
        self.assertTrue(errors[-1] <= 1e-4)

    def testAcpAccuracy(self):
        D, U, report = dynamical_matrix_response(self.gs, self.kernel, "acp", self.rc.acp_options(),
                                                 self.rc.response_options())
        ranks = report.response.ranks
        self.assertTrue(len(ranks) <= 4)
        self.assertTrue(abs(ranks[-1] - 359) <= 0.15 * 359)
        self.assertTrue(spectrum_error(self.U_dfpt, U, "rel_l2_batch") <= 5e-5)
        self.assertTrue(optical_error(self.D_dfpt, D) <= 1e-4)

    def testLooseThreshold(self):
        rc = self.rc.copy(numerics={"id-threshold" : 1e-3})
        errors = []
        D, U, report = dynamical_matrix_response(self.gs, self.kernel, "acp", rc.acp_options(),
                                                 rc.response_options(),
                                                 callback=lambda k, U: errors.append(
                                                     spectrum_error(self.U_dfpt, U, "rel_l2_batch")))
        self.assertTrue(abs(report.response.ranks[-1] - 241) <= 0.15 * 241)
        self.assertTrue(0.034 / 3 <= errors[0] <= 0.034 * 3)
        self.assertTrue(errors[-1] <= 8e-4 * 3)
        self.assertTrue(errors[0] >= 10 * errors[-1])
        self.assertTrue(len(report.response.ranks) <= 4)
        self.assertTrue(optical_error(self.D_dfpt, D) <= 1e-3)

    def testFiniteDifference(self):
        fd_coarse, _ = dynamical_matrix_fd(self.gs.grid, self.kernel, self.gs.config, 0.01,
                                           self.rc.scf_options(), ground_state=self.gs)
        fd_fine, _ = dynamical_matrix_fd(self.gs.grid, self.kernel, self.gs.config, 0.001,
                                         self.rc.scf_options(), ground_state=self.gs)
        self.assertTrue(optical_error(self.D_dfpt, fd_coarse) <= 2e-3)
        self.assertTrue(optical_error(fd_coarse, fd_fine) <= 1e-3)

@unittest.skipIf(not (SLOW_TESTS and FULL_BENCHMARK), "Set ACP_PHONON_FULL_BENCHMARK to run the scaling benchmark")
class ScalingTest(unittest.TestCase):

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def _slopes(self, rc, sizes):
        table = BenchmarkProcess(self.tmpdir).run({"config" : rc, "sizes" : sizes, "methods" : ["dfpt", "acp"]})
        self.assertTrue(all(msg == "" for msg in table["error"]))
        return {method : table[table["method"] == method]["slope"].iloc[0] for method in ("dfpt", "acp")}

    def testChain(self):
        slopes = self._slopes(preset_config("insulator1d"), [30, 60, 90, 120, 150])
        self.assertTrue(slopes["acp"] < slopes["dfpt"])

    def testTriangular(self):
        slopes = self._slopes(preset_config("triangular2d"), [8, 18, 32, 50, 72, 98])
        self.assertTrue(abs(slopes["dfpt"] - 3.9) <= 0.5)
        self.assertTrue(abs(slopes["acp"] - 3.0) <= 0.5)

if __name__ == '__main__':
    unittest.main()
