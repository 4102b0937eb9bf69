"""
ACP-PHONON - Output files

CSV tables are written with pandas using round-trip float formatting so
that identical runs produce identical files. JSON documents are written
with sorted keys.

Copyright (c) 2019 The acp-phonon developers
"""
import io
import os
import json

import numpy as np
import pandas as pd

from .ground_state import GroundState
from .utils import ConfigError

FLOAT_FORMAT = "%.17g"
CHECKPOINT_ARRAYS = ("orbitals", "eigenvalues", "unoccupied_eigenvalues", "density", "input_density", "potential",
                     "residual_history", "positions", "cell_lengths", "points_per_dim")
AXES = "xy"

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(key) : _jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj

def write_json(path, obj):
    with io.open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(_jsonable(obj), indent=2, sort_keys=True))
        f.write(u"\n")

def write_frame(path, frame):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)

def column_labels(n_atoms, dim):
    """ :return: Header labels (I,a) in matrix index order I * d + a """
    return ["(%i,%s)" % (atom, AXES[axis]) for atom in range(n_atoms) for axis in range(dim)]

def dmatrix_frame(D, n_atoms, dim):
    return pd.DataFrame(np.asarray(D), columns=column_labels(n_atoms, dim))

def frequencies_frame(frequencies):
    return pd.DataFrame({"index" : np.arange(len(frequencies)), "omega" : np.asarray(frequencies)},
                        columns=["index", "omega"])

def dos_frame(omega, rho):
    return pd.DataFrame({"omega" : np.asarray(omega), "rho" : np.asarray(rho)}, columns=["omega", "rho"])

def density_frame(grid, rho):
    columns = {AXES[axis] : grid.coordinates[:, axis] for axis in range(grid.dim)}
    columns["rho"] = np.asarray(rho)
    return pd.DataFrame(columns, columns=[AXES[axis] for axis in range(grid.dim)] + ["rho"])

def save_checkpoint(path, gs):
    """ Write the arrays needed to warm start an SCF """
    np.savez(path, orbitals=gs.orbitals, eigenvalues=gs.eigenvalues,
             unoccupied_eigenvalues=gs.unoccupied_eigenvalues, density=gs.density,
             input_density=gs.input_density, potential=gs.potential,
             residual_history=np.array(gs.residual_history), positions=gs.config.positions,
             cell_lengths=gs.config.cell_lengths, points_per_dim=np.array(gs.grid.points_per_dim))

def load_checkpoint(path, config, grid):
    """
    :return: Dictionary of checkpoint arrays, or None if the checkpoint does
             not match the configuration and grid
    """
    try:
        with np.load(path) as data:
            arrays = {key : data[key] for key in data.files}
    except (IOError, OSError, ValueError, KeyError) as exc:
        raise ConfigError("Could not read checkpoint %s: %s" % (path, exc))
    missing = [key for key in CHECKPOINT_ARRAYS if key not in arrays]
    if missing:
        raise ConfigError("Checkpoint %s is missing %s" % (path, ", ".join(missing)))
    if (tuple(arrays["points_per_dim"]) != tuple(grid.points_per_dim)
            or arrays["positions"].shape != config.positions.shape
            or not np.allclose(arrays["positions"], config.positions, rtol=0, atol=1e-12)
            or not np.allclose(arrays["cell_lengths"], config.cell_lengths)):
        return None
    return arrays

def ensure_dir(path):
    if not os.path.isdir(path):
        os.makedirs(path)

def restore_ground_state(arrays, grid, kernel, config):
    """
    ``GroundState`` made of the checkpointed arrays, so that a restarted run
    reports exactly the state that was saved
    """
    return GroundState(grid, kernel, config, np.array(arrays["orbitals"]), np.array(arrays["eigenvalues"]),
                       np.array(arrays["unoccupied_eigenvalues"]), np.array(arrays["density"]),
                       np.array(arrays["input_density"]), np.array(arrays["potential"]),
                       [float(value) for value in arrays["residual_history"]])
