"""
ACP-PHONON - Processes behind the command line subcommands

Each process takes a dictionary of options which it consumes with
``options.pop``. Options left over after ``run`` are reported as unused.
Processes keep a text log of the run which is written to ``run.log`` in
the output directory.

Copyright (c) 2019 The acp-phonon developers
"""
import os
import math
import collections

import six
import numpy as np
import pandas as pd

from .ground_state import scf, relax, total_energy
from .phonon import (METHODS, dynamical_matrix_fd, dynamical_matrix_response, phonon_modes, phonon_dos,
                     default_omega_grid, compare_methods, spectrum_error)
from .output import (write_json, write_frame, dmatrix_frame, frequencies_frame, dos_frame, density_frame,
                     save_checkpoint, load_checkpoint, restore_ground_state, ensure_dir)
from .utils import AcpException, ConfigError, LogSource, StageTimer

CHECKPOINT_FILE = "ground_state.npz"

class Process(LogSource):
    """
    Base class for processes writing into an output directory
    """
    PROCESS_NAME = None

    def __init__(self, outdir):
        self.outdir = outdir
        self.timer = StageTimer()
        self._log = six.StringIO()

    def log(self, msg):
        self._log.write(msg)

    def get_log(self):
        return self._log.getvalue()

    def output_path(self, filename):
        return os.path.join(self.outdir, filename)

    def execute(self, options):
        """ Run the process and write the run log """
        options = dict(options)
        ensure_dir(self.outdir)
        try:
            self.run(options)
            for key in sorted(options):
                self.warn("%s: unused option '%s'" % (self.PROCESS_NAME, key))
            self.log("COMPLETE\n")
        except AcpException as exc:
            self.log("FAILED: %s\n" % exc)
            raise
        finally:
            with open(self.output_path("run.log"), "w") as f:
                f.write(self.get_log())

    def run(self, options):
        raise NotImplementedError()

    def prepare_system(self, rc, timer=None):
        """
        Build the configuration, solve the ground state and relax if requested

        :return: Tuple of ``GroundState`` and a dictionary describing the system
        """
        timer = timer or self.timer
        config, removed = rc.configuration()
        grid = rc.grid(config)
        kernel = rc.kernel()
        options = rc.scf_options()
        self.log("System: %s model, %i atoms, %i electrons, grid %s\n" % (
            rc.model, config.n_atoms, config.n_electrons, list(grid.points_per_dim)))
        if removed:
            self.log("Removed atoms: %s\n" % removed)

        warm = None
        checkpoint = self.output_path(CHECKPOINT_FILE)
        if rc.output["checkpoint"] and rc.system["relax-steps"] == 0 and os.path.exists(checkpoint):
            warm = load_checkpoint(checkpoint, config, grid)
            if warm is None:
                self.warn("Checkpoint %s does not match this system - ignoring" % checkpoint)
            else:
                self.log("Warm start from checkpoint %s\n" % checkpoint)

        with timer.stage("scf"):
            if warm is not None:
                # Start at the tolerance the saved state converged with
                eig_tol = max(options.eig_tol_floor, min(options.eig_tol, 0.1 * options.scf_tol))
                gs = scf(grid, kernel, config, options, initial_density=warm["input_density"],
                         initial_orbitals=warm["orbitals"], initial_eig_tol=eig_tol)
                if gs.iterations == 1:
                    self.log("Checkpoint state confirmed in one SCF iteration\n")
                    gs = restore_ground_state(warm, grid, kernel, config)
            else:
                gs = scf(grid, kernel, config, options)
        self.log("SCF converged in %i iterations, gap %.10f\n" % (gs.iterations, gs.gap))

        info = {
            "model" : rc.model,
            "n_atoms" : config.n_atoms,
            "n_electrons" : config.n_electrons,
            "points_per_dim" : list(grid.points_per_dim),
            "removed_atoms" : removed,
        }
        steps = rc.system["relax-steps"]
        if steps > 0:
            with timer.stage("relax"):
                result = relax(grid, kernel, config, steps, rc.system["relax-step-size"], options, ground_state=gs)
            gs = result.ground_state
            info["relax_energies"] = result.energies
            self.log("Relaxed for %i steps, energy %.10f -> %.10f\n" % (steps, result.energies[0],
                                                                       result.energies[-1]))
        if rc.output["checkpoint"]:
            save_checkpoint(checkpoint, gs)
        return gs, info

class GroundStateProcess(Process):
    """
    Self-consistent ground state of a configured system
    """
    PROCESS_NAME = "GroundState"

    def run(self, options):
        rc = options.pop("config")
        gs, info = self.prepare_system(rc)
        info.update({
            "eigenvalues" : gs.eigenvalues,
            "unoccupied_eigenvalues" : gs.unoccupied_eigenvalues,
            "homo" : gs.homo,
            "lumo" : gs.lumo,
            "gap" : gs.gap,
            "energy" : total_energy(gs),
            "scf_residual_history" : gs.residual_history,
            "scf_iterations" : gs.iterations,
            "positions" : gs.config.positions,
            "density_range" : [float(np.min(gs.density)), float(np.max(gs.density))],
            "seed" : rc.numerics["seed"],
        })
        if "json" in rc.output["formats"]:
            write_json(self.output_path("ground_state.json"), info)
        if "csv" in rc.output["formats"]:
            write_frame(self.output_path("density.csv"), density_frame(gs.grid, gs.density))
        return gs

def run_method(gs, rc, method, timer, reference_response=None):
    """
    Dynamical matrix by one method

    :param reference_response: Optional DFPT chi G used to record the ACP
                               error after every outer iteration
    :return: Tuple of D, response batch (None for FD) and report dictionary
    """
    kernel = rc.kernel()
    history = []
    callback = None
    if method == "acp" and reference_response is not None:
        callback = lambda k, U: history.append(spectrum_error(reference_response, U, "rel_l2_batch"))

    with timer.stage(method):
        if method == "fd":
            D, report = dynamical_matrix_fd(gs.grid, kernel, gs.config, rc.phonon["fd-delta"], rc.scf_options(),
                                            ground_state=gs)
            response = None
        else:
            D, response, report = dynamical_matrix_response(gs, kernel, method, rc.acp_options(),
                                                            rc.response_options(), callback=callback)
    details = report.as_dict()
    details["timings"] = dict(report.timer.timings)
    if history:
        details["response"]["rel_l2_history"] = history
    return D, response, details

class PhononProcess(Process):
    """
    Phonon spectrum by finite differences, DFPT or ACP
    """
    PROCESS_NAME = "Phonon"

    def run(self, options):
        rc = options.pop("config")
        method = options.pop("method", None)
        methods = [method] if method else list(rc.phonon["methods"])
        for name in methods:
            if name not in METHODS:
                raise ConfigError("Unknown phonon method '%s'" % name)
        methods = [name for name in METHODS if name in methods]

        gs, info = self.prepare_system(rc)
        formats = rc.output["formats"]
        results, responses = collections.OrderedDict(), {}
        for name in methods:
            timer = StageTimer()
            D, response, details = run_method(gs, rc, name, timer, responses.get("dfpt"))
            result = phonon_modes(D, name)
            results[name] = result
            if response is not None:
                responses[name] = response

            sigma = rc.phonon["dos-sigma"]
            if rc.phonon["omega-grid"] is None:
                omega = default_omega_grid(result.frequencies, sigma)
            else:
                lo, hi, npts = rc.phonon["omega-grid"]
                omega = np.linspace(lo, hi, npts)
            dos = phonon_dos(result.frequencies, sigma, omega)

            self.log("%s: frequencies %.6f .. %.6f, %i clamped\n" % (
                name, result.frequencies[0], result.frequencies[-1], result.clamped_count))
            if "csv" in formats:
                write_frame(self.output_path("dmatrix_%s.csv" % name), dmatrix_frame(D, gs.config.n_atoms, gs.grid.dim))
                write_frame(self.output_path("frequencies_%s.csv" % name), frequencies_frame(result.frequencies))
                write_frame(self.output_path("dos_%s.csv" % name), dos_frame(omega, dos))
            if "json" in formats:
                details.update({
                    "clamped_count" : result.clamped_count,
                    "seed" : rc.numerics["seed"],
                    "system" : info,
                    "scf_seconds" : self.timer.timings.get("scf", 0.0),
                })
                details["timings"].update(timer.timings)
                write_json(self.output_path("report_%s.json" % name), details)

        if len(results) > 1 and "json" in formats:
            write_json(self.output_path("comparison.json"), compare_methods(results, responses))
        return results

def loglog_slope(sizes, seconds):
    """
    Slope of log(seconds) against log(size) over the largest half of the sizes

    :return: Slope, or None with fewer than two usable points
    """
    points = sorted((size, sec) for size, sec in zip(sizes, seconds) if sec is not None and np.isfinite(sec) and sec > 0)
    if len(points) < 2:
        return None
    points = points[-max(2, int(math.ceil(len(points) / 2.0))):]
    logs = np.log(np.array(points, dtype=np.float64))
    return float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])

class BenchmarkProcess(Process):
    """
    Wall time of each method over a range of system sizes
    """
    PROCESS_NAME = "Benchmark"

    def run(self, options):
        rc = options.pop("config")
        sizes = options.pop("sizes")
        methods = options.pop("methods", None) or list(rc.phonon["methods"])
        configs = [(size, rc.with_size(size)) for size in sizes]

        rows = []
        for size, sub in configs:
            for method in methods:
                timer = StageTimer()
                row = {"size" : size, "method" : method, "seconds" : float("nan"),
                       "scf_seconds" : float("nan"), "n_mu" : None, "error" : ""}
                try:
                    gs, _ = self.prepare_system(sub.copy(output={"checkpoint" : False}), timer)
                    _, _, details = run_method(gs, sub, method, timer)
                    row["seconds"] = timer.timings[method]
                    row["scf_seconds"] = timer.timings["scf"]
                    ranks = details.get("response", {}).get("n_mu")
                    if ranks:
                        row["n_mu"] = ranks[-1]
                except AcpException as exc:
                    self.warn("Benchmark cell size=%i method=%s failed: %s" % (size, method, exc))
                    row["error"] = str(exc)
                self.log("size %i %s: %.3f s %s\n" % (size, method, row["seconds"], row["error"]))
                rows.append(row)

        table = pd.DataFrame(rows, columns=["size", "method", "seconds", "scf_seconds", "n_mu", "error"])
        slopes = {}
        for method in methods:
            sel = table[table["method"] == method]
            slopes[method] = loglog_slope(sel["size"].tolist(), sel["seconds"].tolist())
        table.insert(3, "slope", [slopes[method] for method in table["method"]])
        write_frame(self.output_path("scaling.csv"), table)
        return table
