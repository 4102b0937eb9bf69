"""
ACP-PHONON - Default run configurations

Each model has a YAML template rendered with %-substitution. The rendered
template supplies every key of a run configuration, user files override it.
"""

CHAIN_1D_YAML = """
system:
  model: chain1d
  n-atoms: %(n_atoms)i
  spacing: 2.4
  vacancies: []
  vacancy-count: 0
  vacancy-seed: 0
  perturbation: 0.0
  perturbation-seed: 0
  relax-steps: 0
  relax-step-size: 1.0

physics:
  kappa: 0.1
  eps0: %(eps0)s
  sigma: 0.3
  charge: 1
  masses: 1.0

numerics:
  grid-spacing: 0.15
  eigensolver: lobpcg
  scf-tol: 1.0e-8
  eig-tol: 1.0e-6
  eig-tol-floor: 1.0e-10
  max-scf-iters: 100
  mixing-history: 10
  mixing-beta: 0.5
  n-extra: null
  sternheimer-tol: 1.0e-8
  sternheimer-max-iters: 2000
  dyson-tol: 1.0e-7
  dyson-max-iters: 100
  block-size: 256
  precondition: false
  reuse-guesses: true
  n-cheb: 20
  id-threshold: 1.0e-5
  id-rank: null
  srft-oversampling: 8
  max-outer-iters: 4
  outer-tol: 1.0e-6
  seed: 0

phonon:
  methods: [dfpt, acp]
  fd-delta: 0.01
  dos-sigma: 0.01
  omega-grid: null

output:
  directory: %(directory)s
  formats: [csv, json]
  checkpoint: false
"""

TRIANGULAR_2D_YAML = """
system:
  model: triangular2d
  k-cells: %(k_cells)i
  spacing: 1.2
  vacancies: []
  vacancy-count: 0
  vacancy-seed: 0
  perturbation: 0.0
  perturbation-seed: 0
  relax-steps: 0
  relax-step-size: 1.0

physics:
  kappa: 0.1
  eps0: 0.05
  sigma: 0.24
  charge: 1
  masses: 1.0

numerics:
  grid-spacing: 0.10
  eigensolver: lobpcg
  scf-tol: 1.0e-8
  eig-tol: 1.0e-6
  eig-tol-floor: 1.0e-10
  max-scf-iters: 100
  mixing-history: 10
  mixing-beta: 0.5
  n-extra: null
  sternheimer-tol: 1.0e-8
  sternheimer-max-iters: 2000
  dyson-tol: 1.0e-7
  dyson-max-iters: 100
  block-size: 256
  precondition: false
  reuse-guesses: false
  n-cheb: 30
  id-threshold: 1.0e-5
  id-rank: null
  srft-oversampling: 16
  max-outer-iters: 2
  outer-tol: 1.0e-6
  seed: 0

phonon:
  methods: [dfpt, acp]
  fd-delta: 0.01
  dos-sigma: 0.08
  omega-grid: null

output:
  directory: %(directory)s
  formats: [csv, json]
  checkpoint: false
"""

# 72 atom lattice with three random vacancies, partially relaxed
DEFECT_2D_OVERRIDES = """
system:
  vacancy-count: 3
  vacancy-seed: %(seed)i
  relax-steps: 15
"""

DEFAULT_TEMPLATES = {
    "chain1d" : (CHAIN_1D_YAML, {"n_atoms" : 60, "eps0" : "1.0", "directory" : "out"}),
    "triangular2d" : (TRIANGULAR_2D_YAML, {"k_cells" : 7, "directory" : "out"}),
}

PRESETS = {
    "insulator1d" : ("chain1d", {}, ""),
    "semiconductor1d" : ("chain1d", {"eps0" : "10.0"}, ""),
    "triangular2d" : ("triangular2d", {}, ""),
    "defect2d" : ("triangular2d", {"k_cells" : 6}, DEFECT_2D_OVERRIDES % {"seed" : 0}),
}

def render(model, **params):
    """
    :return: Default YAML text for ``model`` with optional parameter overrides
    """
    template, defaults = DEFAULT_TEMPLATES[model]
    values = dict(defaults)
    values.update(params)
    return template % values

def preset(name):
    """
    :return: Tuple of default YAML text and override YAML text for a named experiment
    """
    model, params, overrides = PRESETS[name]
    return render(model, **params), overrides
