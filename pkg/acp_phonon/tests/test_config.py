"""
ACP-PHONON - Tests for run configuration loading

Copyright (c) 2019 The acp-phonon developers
"""
import os
import shutil
import tempfile
import unittest

import numpy as np

from acp_phonon.config import RunConfig
from acp_phonon.templates import PRESETS, preset, render
from acp_phonon.utils import ConfigError

class RunConfigTest(unittest.TestCase):

    def testDefaultsMaterialized(self):
        rc = RunConfig.from_yaml("system:\n  n-atoms: 10\n")
        self.assertEqual(rc.model, "chain1d")
        self.assertEqual(rc.system["n-atoms"], 10)
        self.assertAlmostEqual(rc.system["spacing"], 2.4)
        self.assertAlmostEqual(rc.physics["kappa"], 0.1)
        self.assertAlmostEqual(rc.numerics["scf-tol"], 1e-8)
        self.assertEqual(rc.phonon["methods"], ["dfpt", "acp"])
        self.assertEqual(rc.output["formats"], ["csv", "json"])

    def testTriangularDefaults(self):
        rc = RunConfig.from_yaml("system:\n  model: triangular2d\n")
        self.assertAlmostEqual(rc.system["spacing"], 1.2)
        self.assertAlmostEqual(rc.physics["eps0"], 0.05)
        self.assertAlmostEqual(rc.physics["sigma"], 0.24)
        self.assertEqual(rc.numerics["n-cheb"], 30)
        config, removed = rc.configuration()
        self.assertEqual(config.n_atoms, 2 * 7**2)
        self.assertEqual(removed, [])

    def testEmptyDocument(self):
        self.assertEqual(RunConfig.from_yaml("").model, "chain1d")

    def testUnknownKey(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("numerics:\n  scf-tolerance: 1e-6\n")

    def testUnknownSection(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("solver:\n  tol: 1\n")

    def testUnknownModel(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("system:\n  model: cubic3d\n")

    def testBadValue(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("system:\n  n-atoms: many\n")
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("system:\n  n-atoms: 4.5\n")
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("phonon:\n  methods: [fd, magic]\n")
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("numerics:\n  eigensolver: davidson\n")
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("physics:\n  eps0: -1\n")

    def testMalformedYaml(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("system: [unclosed\n")
        with self.assertRaises(ConfigError):
            RunConfig.from_yaml("- just\n- a list\n")

    def testStringNumbers(self):
        """ YAML reads 1e-6 without a decimal point as a string """
        rc = RunConfig.from_yaml("numerics:\n  scf-tol: 1e-6\n")
        self.assertAlmostEqual(rc.numerics["scf-tol"], 1e-6)
        self.assertAlmostEqual(rc.scf_options().scf_tol, 1e-6)

    def testCommaSeparatedList(self):
        rc = RunConfig.from_yaml("phonon:\n  methods: fd,dfpt\n")
        self.assertEqual(rc.phonon["methods"], ["fd", "dfpt"])

    def testYamlRoundTrip(self):
        rc = RunConfig.from_yaml("system:\n  n-atoms: 12\nnumerics:\n  seed: 5\n")
        again = RunConfig.from_yaml(rc.to_yaml())
        self.assertEqual(again.as_dict(), rc.as_dict())

    def testLoadFile(self):
        tmpdir = tempfile.mkdtemp()
        try:
            path = os.path.join(tmpdir, "run.yml")
            with open(path, "w") as f:
                f.write("system:\n  n-atoms: 8\n")
            rc = RunConfig.load(path)
            self.assertEqual(rc.system["n-atoms"], 8)
            self.assertEqual(rc.source, path)
            with self.assertRaises(ConfigError):
                RunConfig.load(os.path.join(tmpdir, "missing.yml"))
        finally:
            shutil.rmtree(tmpdir)

    def testCopy(self):
        rc = RunConfig.from_yaml("")
        seeded = rc.with_seed(9)
        self.assertEqual(seeded.numerics["seed"], 9)
        self.assertEqual(rc.numerics["seed"], 0)
        self.assertEqual(seeded.acp_options().seed, 9)
        with self.assertRaises(ConfigError):
            rc.copy(numerics={"bogus" : 1})

    def testWithSize(self):
        self.assertEqual(RunConfig.from_yaml("").with_size(30).system["n-atoms"], 30)
        rc = RunConfig.from_yaml("system:\n  model: triangular2d\n")
        self.assertEqual(rc.with_size(32).system["k-cells"], 4)
        with self.assertRaises(ConfigError):
            rc.with_size(30)

    def testVacanciesAndPerturbation(self):
        rc = RunConfig.from_yaml("system:\n  n-atoms: 10\n  vacancies: [3]\n  vacancy-count: 2\n"
                                 "  vacancy-seed: 4\n  perturbation: 0.05\n")
        config, removed = rc.configuration()
        self.assertEqual(config.n_atoms, 7)
        self.assertEqual(len(removed), 3)
        self.assertEqual(removed[0], 3)
        self.assertEqual(len(set(removed)), 3)
        again, _ = rc.configuration()
        self.assertTrue(np.allclose(config.positions, again.positions))

    def testOptionObjects(self):
        rc = RunConfig.from_yaml("numerics:\n  sternheimer-tol: 1e-9\n  id-rank: 40\n  block-size: 16\n")
        self.assertAlmostEqual(rc.response_options().tol, 1e-9)
        self.assertEqual(rc.response_options().block_size, 16)
        self.assertEqual(rc.acp_options().fixed_rank, 40)
        self.assertAlmostEqual(rc.kernel().eps0, 1.0)

    def testGridResolvesCharges(self):
        rc = RunConfig.from_yaml("system:\n  n-atoms: 4\n")
        config, _ = rc.configuration()
        grid = rc.grid(config)
        self.assertEqual(grid.points_per_dim, (64,))

class TemplateTest(unittest.TestCase):

    def testPresetsLoad(self):
        for name in PRESETS:
            defaults, overrides = preset(name)
            rc = RunConfig.from_yaml(defaults, overrides, source=name)
            self.assertTrue(rc.model in ("chain1d", "triangular2d"))

    def testSemiconductor(self):
        rc = RunConfig.from_yaml(*preset("semiconductor1d"))
        self.assertAlmostEqual(rc.physics["eps0"], 10.0)

    def testDefectPreset(self):
        rc = RunConfig.from_yaml(*preset("defect2d"))
        self.assertEqual(rc.system["k-cells"], 6)
        self.assertEqual(rc.system["vacancy-count"], 3)
        self.assertEqual(rc.system["relax-steps"], 15)
        config, removed = rc.configuration()
        self.assertEqual(config.n_atoms, 69)

    def testRenderParameters(self):
        self.assertTrue("n-atoms: 90" in render("chain1d", n_atoms=90))

if __name__ == '__main__':
    unittest.main()
