"""
ACP-PHONON - Tests for the SCF ground state, energies and forces

Copyright (c) 2019 The acp-phonon developers
"""
import logging
import unittest

import numpy as np

from acp_phonon.ground_state import (ScfOptions, scf, lobpcg, total_energy, harris_energy, forces, relax,
                                     ion_ion_energy, ion_ion_gradient, ion_ion_forces, ion_ion_hessian)
from acp_phonon.utils import ModelError, ScfError, EigensolverError

from .common import system, ground_state, scf_options

class ScfOptionsTest(unittest.TestCase):

    def testExtraStates(self):
        self.assertEqual(ScfOptions().extra_states(10), 4)
        self.assertEqual(ScfOptions().extra_states(60), 6)
        self.assertEqual(ScfOptions().extra_states(61), 7)
        self.assertEqual(ScfOptions(n_extra=2).extra_states(60), 2)

    def testInvalid(self):
        with self.assertRaises(ModelError):
            ScfOptions(eigensolver="davidson")
        with self.assertRaises(ModelError):
            ScfOptions(scf_tol=0)

class LobpcgTest(unittest.TestCase):

    def testDiagonalOperator(self):
        diag = np.arange(1, 101, dtype=np.float64)
        evals, evecs, resid = lobpcg(lambda X: diag[:, np.newaxis] * X, 5, 1e-8, n_points=100,
                                     preconditioner=lambda X: X / diag[:, np.newaxis])
        self.assertTrue(np.allclose(evals, [1, 2, 3, 4, 5]))
        self.assertTrue(np.allclose(np.dot(evecs.T, evecs), np.eye(5)))
        self.assertTrue(np.all(resid <= 1e-8))

    def testFailureRaises(self):
        diag = np.linspace(1, 2, 200)
        with self.assertRaises(EigensolverError):
            lobpcg(lambda X: diag[:, np.newaxis] * X, 6, 1e-14, n_points=200, max_iters=1)

    def testUnconvergedLoggedAtDebug(self):
        """ Without raising, a short run is reported at debug level only """
        diag = np.linspace(1, 2, 200)
        with self.assertLogs("acp_phonon.ground_state", level="DEBUG") as logs:
            _, _, resid = lobpcg(lambda X: diag[:, np.newaxis] * X, 6, 1e-14, n_points=200, max_iters=1,
                                 raise_on_failure=False)
        self.assertTrue(np.max(resid) > 1e-14)
        self.assertTrue(all(record.levelno == logging.DEBUG for record in logs.records))
        self.assertTrue(any("did not converge" in record.getMessage() for record in logs.records))

class GroundStateTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.gs = ground_state()

    def testConverged(self):
        self.assertTrue(self.gs.residual_history[-1] <= 1e-10)
        self.assertEqual(self.gs.n_electrons, 4)
        self.assertTrue(self.gs.gap > 0.1)

    def testPerfectLatticeForceFree(self):
        """ Every atom of an equally spaced chain is at a symmetric position """
        self.assertTrue(np.max(np.abs(forces(self.gs))) < 1e-9)

    def testOrthonormalOrbitals(self):
        gram = np.dot(self.gs.orbitals.T, self.gs.orbitals) * self.gs.grid.volume_element
        self.assertTrue(np.allclose(gram, np.eye(4), atol=1e-10))

    def testDensityNormalized(self):
        self.assertAlmostEqual(self.gs.grid.integrate(self.gs.density), 4.0, places=10)
        self.assertTrue(np.all(self.gs.density >= 0))

    def testEigenpairs(self):
        """ Orbitals are eigenfunctions of the stored Hamiltonian """
        hpsi = self.gs.apply_hamiltonian(self.gs.orbitals)
        self.assertTrue(np.allclose(hpsi, self.gs.orbitals * self.gs.eigenvalues, atol=1e-8))
        self.assertTrue(np.all(np.diff(self.gs.eigenvalues) >= 0))
        self.assertTrue(self.gs.lumo > self.gs.homo)

    def testLobpcgMatchesDense(self):
        grid, kernel, config = system()
        gs = scf(grid, kernel, config, ScfOptions(scf_tol=1e-9, eig_tol=1e-8, eigensolver="lobpcg"))
        self.assertTrue(np.allclose(gs.eigenvalues, self.gs.eigenvalues, atol=1e-6))
        self.assertAlmostEqual(gs.gap, self.gs.gap, places=6)

    def testWarmStart(self):
        gs = scf(self.gs.grid, self.gs.kernel, self.gs.config, scf_options(),
                 initial_density=self.gs.input_density, initial_orbitals=self.gs.orbitals)
        self.assertTrue(gs.iterations <= 2)
        self.assertTrue(np.allclose(gs.density, self.gs.density, atol=1e-8))

    def testIterationCap(self):
        grid, kernel, config = system()
        with self.assertRaises(ScfError) as ctx:
            scf(grid, kernel, config, scf_options(max_scf_iters=1))
        self.assertEqual(len(ctx.exception.residual_history), 1)

    def testTooManyStates(self):
        grid, kernel, config = system()
        with self.assertRaises(ModelError):
            scf(grid, kernel, config, scf_options(n_extra=grid.n_points))

class EnergyTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.gs = ground_state(perturbation=0.1)

    def testHarrisEqualsTotal(self):
        gs = self.gs
        harris = harris_energy(gs.grid, gs.kernel, gs.config, gs.input_density)
        self.assertAlmostEqual(harris, total_energy(gs), places=9)

    def testHarrisStationary(self):
        """ First order change of the Harris energy vanishes at self-consistency """
        gs = self.gs
        x = gs.grid.coordinates[:, 0]
        drho = np.cos(2 * np.pi * x / gs.grid.cell_lengths[0]) * np.mean(gs.input_density)
        base = total_energy(gs)
        small = harris_energy(gs.grid, gs.kernel, gs.config, gs.input_density + 5e-3 * drho) - base
        large = harris_energy(gs.grid, gs.kernel, gs.config, gs.input_density + 1e-2 * drho) - base
        self.assertTrue(3.0 < large / small < 5.0)

    def testForcesMatchEnergy(self):
        gs, step = self.gs, 1e-4
        options = scf_options()
        force = forces(gs)
        for atom in (0, 2):
            energies = []
            for sign in (1, -1):
                displaced = gs.config.displaced(atom, 0, sign * step)
                energies.append(total_energy(scf(gs.grid, gs.kernel, displaced, options,
                                                 initial_density=gs.input_density)))
            fd = -(energies[0] - energies[1]) / (2 * step)
            self.assertAlmostEqual(force[atom, 0], fd, places=6)

    def testIonIonGradient(self):
        config, grid, kernel, step = self.gs.config, self.gs.grid, self.gs.kernel, 1e-5
        grad = ion_ion_gradient(config, grid, kernel)
        self.assertTrue(np.allclose(ion_ion_forces(config, grid, kernel), -grad))
        for atom in range(config.n_atoms):
            plus = ion_ion_energy(config.displaced(atom, 0, step), grid, kernel)
            minus = ion_ion_energy(config.displaced(atom, 0, -step), grid, kernel)
            self.assertAlmostEqual(grad[atom, 0], (plus - minus) / (2 * step), places=6)

    def testIonIonHessian(self):
        config, grid, kernel, step = self.gs.config, self.gs.grid, self.gs.kernel, 1e-5
        hess = ion_ion_hessian(config, grid, kernel)
        self.assertTrue(np.allclose(hess, hess.T))
        for atom in range(config.n_atoms):
            plus = ion_ion_gradient(config.displaced(atom, 0, step), grid, kernel)[:, 0]
            minus = ion_ion_gradient(config.displaced(atom, 0, -step), grid, kernel)[:, 0]
            fd = (plus - minus) / (2 * step)
            self.assertTrue(np.allclose(hess[atom], fd, atol=1e-6 * np.max(np.abs(hess))))

    def testIonIonTranslation(self):
        """ Ion-ion forces sum to zero and the energy is invariant under translation """
        config, grid, kernel = self.gs.config, self.gs.grid, self.gs.kernel
        self.assertAlmostEqual(np.sum(ion_ion_forces(config, grid, kernel)), 0.0, places=10)
        self.assertAlmostEqual(ion_ion_energy(config.translated([0.37]), grid, kernel),
                               ion_ion_energy(config, grid, kernel), places=10)

    def testRelaxLowersEnergy(self):
        gs = self.gs
        result = relax(gs.grid, gs.kernel, gs.config, 3, step_size=0.2, options=scf_options(), ground_state=gs)
        self.assertEqual(len(result.energies), 4)
        self.assertTrue(result.energies[-1] < result.energies[0])
        self.assertTrue(np.allclose(result.ground_state.config.positions, result.config.positions))

    def testRelaxZeroSteps(self):
        gs = self.gs
        result = relax(gs.grid, gs.kernel, gs.config, 0, ground_state=gs)
        self.assertTrue(result.ground_state is gs)
        self.assertEqual(len(result.energies), 1)

    def testRelaxFailureReportsStep(self):
        gs = self.gs
        with self.assertRaises(ScfError) as ctx:
            relax(gs.grid, gs.kernel, gs.config, 2, step_size=0.2, options=scf_options(max_scf_iters=1),
                  ground_state=gs)
        self.assertEqual(ctx.exception.step, 1)

if __name__ == '__main__':
    unittest.main()
