"""
ACP-PHONON - Run configuration

A run configuration is a YAML document with the sections ``system``,
``physics``, ``numerics``, ``phonon`` and ``output``. Keys are hyphenated.
Defaults come from the model template in ``templates``; unknown sections
or keys are rejected.

Copyright (c) 2019 The acp-phonon developers
"""
import copy
import math
import io

import six
import yaml

from .acp import AcpOptions
from .ground_state import ScfOptions
from .lattice import (YukawaKernel, chain_1d, triangular_2d, remove_atoms, random_vacancies, perturb_positions,
                      grid_for_cell, check_resolution)
from .phonon import METHODS
from .response import ResponseOptions
from .templates import DEFAULT_TEMPLATES, render
from .utils import ConfigError

SECTIONS = ("system", "physics", "numerics", "phonon", "output")
FORMATS = ("csv", "json")

def _to_float(value):
    if isinstance(value, bool):
        raise ValueError("boolean is not a number")
    return float(value)

def _to_int(value):
    if isinstance(value, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(value, float) and value != int(value):
        raise ValueError("%s is not an integer" % value)
    return int(value)

def _to_bool(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, six.string_types) and value.lower() in ("true", "yes", "on", "1", "false", "no", "off", "0"):
        return value.lower() in ("true", "yes", "on", "1")
    raise ValueError("%s is not a boolean" % value)

def _to_str(value):
    if not isinstance(value, six.string_types):
        raise ValueError("%s is not a string" % value)
    return value

def _optional(conv):
    return lambda value: None if value is None else conv(value)

def _list_of(conv):
    def _conv(value):
        if value is None:
            return []
        if isinstance(value, six.string_types):
            value = [item.strip() for item in value.split(",") if item.strip()]
        if not isinstance(value, (list, tuple)):
            raise ValueError("%s is not a list" % value)
        return [conv(item) for item in value]
    return _conv

def _masses(value):
    if isinstance(value, (list, tuple)):
        return [_to_float(item) for item in value]
    return _to_float(value)

def _omega_grid(value):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ValueError("omega-grid must be [min, max, n_points]")
    return [_to_float(value[0]), _to_float(value[1]), _to_int(value[2])]

SCHEMA = {
    "system" : {
        "model" : _to_str,
        "n-atoms" : _to_int,
        "k-cells" : _to_int,
        "spacing" : _to_float,
        "vacancies" : _list_of(_to_int),
        "vacancy-count" : _to_int,
        "vacancy-seed" : _to_int,
        "perturbation" : _to_float,
        "perturbation-seed" : _to_int,
        "relax-steps" : _to_int,
        "relax-step-size" : _to_float,
    },
    "physics" : {
        "kappa" : _to_float,
        "eps0" : _to_float,
        "sigma" : _to_float,
        "charge" : _to_int,
        "masses" : _masses,
    },
    "numerics" : {
        "grid-spacing" : _to_float,
        "eigensolver" : _to_str,
        "scf-tol" : _to_float,
        "eig-tol" : _to_float,
        "eig-tol-floor" : _to_float,
        "max-scf-iters" : _to_int,
        "mixing-history" : _to_int,
        "mixing-beta" : _to_float,
        "n-extra" : _optional(_to_int),
        "sternheimer-tol" : _to_float,
        "sternheimer-max-iters" : _to_int,
        "dyson-tol" : _to_float,
        "dyson-max-iters" : _to_int,
        "block-size" : _to_int,
        "precondition" : _to_bool,
        "reuse-guesses" : _to_bool,
        "n-cheb" : _to_int,
        "id-threshold" : _to_float,
        "id-rank" : _optional(_to_int),
        "srft-oversampling" : _to_int,
        "max-outer-iters" : _to_int,
        "outer-tol" : _to_float,
        "seed" : _to_int,
    },
    "phonon" : {
        "methods" : _list_of(_to_str),
        "fd-delta" : _to_float,
        "dos-sigma" : _to_float,
        "omega-grid" : _omega_grid,
    },
    "output" : {
        "directory" : _to_str,
        "formats" : _list_of(_to_str),
        "checkpoint" : _to_bool,
    },
}

def _parse_yaml(text, source):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("Could not parse %s: %s" % (source, exc))
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("%s must be a mapping of sections" % source)
    return data

class RunConfig(object):
    """
    Fully materialized run configuration

    Section contents are available as dictionaries, e.g.
    ``config.numerics["scf-tol"]``.
    """

    def __init__(self, sections, source="<config>"):
        self.source = source
        self._sections = sections
        self._validate()

    @classmethod
    def load(cls, path):
        try:
            with io.open(path, encoding="utf-8") as f:
                text = f.read()
        except (IOError, OSError) as exc:
            raise ConfigError("Could not read config file %s: %s" % (path, exc))
        return cls.from_yaml(text, source=path)

    @classmethod
    def from_yaml(cls, text, overrides=None, source="<config>"):
        user = _parse_yaml(text, source)
        if overrides:
            for section, values in _parse_yaml(overrides, source).items():
                user.setdefault(section, {})
                if not isinstance(user[section], dict) or not isinstance(values, dict):
                    raise ConfigError("Section '%s' must be a mapping" % section)
                user[section].update(values)
        return cls.from_dict(user, source)

    @classmethod
    def from_dict(cls, user, source="<config>"):
        if not isinstance(user, dict):
            raise ConfigError("%s must be a mapping of sections" % source)
        for section, values in user.items():
            if section not in SECTIONS:
                raise ConfigError("Unknown section '%s' in %s" % (section, source))
            if values is not None and not isinstance(values, dict):
                raise ConfigError("Section '%s' in %s must be a mapping" % (section, source))

        model = (user.get("system") or {}).get("model", "chain1d")
        if model not in DEFAULT_TEMPLATES:
            raise ConfigError("Unknown model '%s', must be one of %s" % (model, sorted(DEFAULT_TEMPLATES)))
        sections = _parse_yaml(render(model), "default template")

        for section in SECTIONS:
            for key, value in (user.get(section) or {}).items():
                if key not in sections[section]:
                    raise ConfigError("Unknown key '%s' in section '%s' of %s" % (key, section, source))
                sections[section][key] = value
            for key, value in sections[section].items():
                try:
                    sections[section][key] = SCHEMA[section][key](value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError("Invalid value for '%s' in section '%s': %s" % (key, section, exc))
        return cls(sections, source)

    def _validate(self):
        methods = self.phonon["methods"]
        for method in methods:
            if method not in METHODS:
                raise ConfigError("Unknown phonon method '%s', must be one of %s" % (method, METHODS))
        for fmt in self.output["formats"]:
            if fmt not in FORMATS:
                raise ConfigError("Unknown output format '%s', must be one of %s" % (fmt, FORMATS))
        if not self.numerics["grid-spacing"] > 0:
            raise ConfigError("grid-spacing must be positive")
        if not self.phonon["dos-sigma"] > 0 or not self.phonon["fd-delta"] > 0:
            raise ConfigError("dos-sigma and fd-delta must be positive")
        if self.system["relax-steps"] < 0 or self.system["vacancy-count"] < 0:
            raise ConfigError("relax-steps and vacancy-count must be non-negative")

        # Build everything once so invalid physics is reported at load time
        self.scf_options()
        self.response_options()
        self.acp_options()
        self.kernel()
        config, _ = self.configuration()
        check_resolution(config, self.grid(config))

    @property
    def model(self):
        return self.system["model"]

    def __getattr__(self, name):
        sections = self.__dict__.get("_sections", {})
        if name in sections:
            return sections[name]
        raise AttributeError(name)

    def as_dict(self):
        return copy.deepcopy(self._sections)

    def to_yaml(self):
        return yaml.safe_dump(self.as_dict(), default_flow_style=False, sort_keys=False)

    def copy(self, **section_updates):
        """
        :param section_updates: Mapping section -> dict of hyphenated keys to replace
        :return: New validated ``RunConfig``
        """
        sections = self.as_dict()
        for section, values in section_updates.items():
            for key, value in values.items():
                if key not in sections[section]:
                    raise ConfigError("Unknown key '%s' in section '%s'" % (key, section))
                sections[section][key] = SCHEMA[section][key](value)
        return RunConfig(sections, self.source)

    def with_seed(self, seed):
        return self.copy(numerics={"seed" : seed})

    def with_size(self, n_atoms):
        """
        Same configuration for a system of ``n_atoms`` atoms
        """
        if self.model == "chain1d":
            return self.copy(system={"n-atoms" : n_atoms})
        k_cells = int(round(math.sqrt(n_atoms / 2.0)))
        if 2 * k_cells**2 != n_atoms:
            raise ConfigError("Triangular lattice sizes must be 2 k^2, got %i" % n_atoms)
        return self.copy(system={"k-cells" : k_cells})

    def base_configuration(self):
        """ :return: Perfect lattice before vacancies and perturbation """
        system, physics = self.system, self.physics
        if self.model == "chain1d":
            config = chain_1d(system["n-atoms"], system["spacing"], physics["sigma"], physics["charge"])
        else:
            config = triangular_2d(system["k-cells"], system["spacing"], physics["sigma"], physics["charge"])
        return config.with_masses(physics["masses"])

    def configuration(self):
        """
        Atomic configuration with vacancies and random perturbation applied

        :return: Tuple of configuration and list of removed atom indices,
                 numbered as in the perfect lattice
        """
        system = self.system
        config = self.base_configuration()
        removed = list(system["vacancies"])
        remaining = [idx for idx in range(config.n_atoms) if idx not in removed]
        if removed:
            config = remove_atoms(config, removed)
        if system["vacancy-count"] > 0:
            config, extra = random_vacancies(config, system["vacancy-count"], system["vacancy-seed"])
            removed += [remaining[idx] for idx in extra]
        if system["perturbation"] > 0:
            config = perturb_positions(config, system["perturbation"], system["perturbation-seed"])
        return config, removed

    def grid(self, config):
        return grid_for_cell(config.cell_lengths, self.numerics["grid-spacing"])

    def kernel(self):
        return YukawaKernel(self.physics["kappa"], self.physics["eps0"])

    def scf_options(self):
        num = self.numerics
        return ScfOptions(scf_tol=num["scf-tol"], eig_tol=num["eig-tol"], max_scf_iters=num["max-scf-iters"],
                          mixing_history=num["mixing-history"], mixing_beta=num["mixing-beta"],
                          n_extra=num["n-extra"], eig_tol_floor=num["eig-tol-floor"],
                          eigensolver=num["eigensolver"], seed=num["seed"])

    def response_options(self):
        num = self.numerics
        return ResponseOptions(tol=num["sternheimer-tol"], max_iters=num["sternheimer-max-iters"],
                               dyson_tol=num["dyson-tol"], dyson_max_iters=num["dyson-max-iters"],
                               mixing_history=num["mixing-history"], mixing_beta=num["mixing-beta"],
                               block_size=num["block-size"], precondition=num["precondition"],
                               reuse_guesses=num["reuse-guesses"])

    def acp_options(self):
        num = self.numerics
        return AcpOptions(n_cheb=num["n-cheb"], id_threshold=num["id-threshold"],
                          srft_oversampling=num["srft-oversampling"], max_outer_iters=num["max-outer-iters"],
                          outer_tol=num["outer-tol"], seed=num["seed"], fixed_rank=num["id-rank"])
