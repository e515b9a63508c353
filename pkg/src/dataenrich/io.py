"""On-disk formats: dataset directories, parameter matrices, trace CSVs.

A dataset directory holds manifest.json ({G, p, n_g, optional sigma, seed,
constraints}), header-free X_<g>.csv / y_<g>.csv per group, and optionally
params.csv holding the true (G+1) x p parameter matrix (row 0 shared).
All floats are written with 17 significant digits so round-trips are exact.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .model import Constraint, ConstraintSpec, GroupedDataset, ParameterStack

__all__ = [
    "save_dataset",
    "load_dataset",
    "save_params",
    "load_params",
    "write_trace_csv",
    "read_trace_csv",
    "write_json",
    "read_json",
]

_FMT = "%.17g"


def _write_matrix(path, a):
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    np.savetxt(path, a, fmt=_FMT, delimiter=",")


def _read_matrix(path):
    a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return a


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _constraint_to_json(c: Constraint):
    if not c.is_constrained:
        return {"kind": "none"}
    return {"kind": c.kind, "radius": c.radius}


def _constraint_from_json(d):
    kind = d.get("kind", "none")
    if kind == "none":
        return Constraint.unconstrained()
    return Constraint(kind, d.get("radius"))


def save_dataset(directory, dataset: GroupedDataset, truth: ParameterStack | None = None,
                 constraints: ConstraintSpec | None = None, sigma=None, seed=None):
    """Write a dataset directory; returns the manifest dict."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "G": dataset.n_groups,
        "p": dataset.dim,
        "n_g": list(dataset.counts),
    }
    if sigma is not None:
        manifest["sigma"] = sigma
    if seed is not None:
        manifest["seed"] = seed
    if constraints is not None:
        if len(constraints) != dataset.n_groups + 1:
            raise DimensionMismatch(
                f"constraint spec has {len(constraints)} entries, dataset needs "
                f"{dataset.n_groups + 1}"
            )
        manifest["constraints"] = [_constraint_to_json(c) for c in constraints.entries]
    for g, (X, y) in enumerate(dataset.groups, start=1):
        _write_matrix(os.path.join(directory, f"X_{g}.csv"), X)
        _write_matrix(os.path.join(directory, f"y_{g}.csv"), y.reshape(-1, 1))
    if truth is not None:
        save_params(os.path.join(directory, "params.csv"), truth)
    write_json(os.path.join(directory, "manifest.json"), manifest)
    return manifest


def load_dataset(directory):
    """Read a dataset directory.

    Returns (dataset, truth or None, constraints or None, manifest).
    """
    manifest_path = os.path.join(directory, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise ConfigError(f"no manifest.json in {directory}")
    manifest = read_json(manifest_path)
    for key in ("G", "p", "n_g"):
        if key not in manifest:
            raise ConfigError(f"manifest missing key {key!r}")
    G = int(manifest["G"])
    p = int(manifest["p"])
    counts = [int(v) for v in manifest["n_g"]]
    if len(counts) != G:
        raise ConfigError(f"manifest lists {len(counts)} group sizes for G={G}")
    groups = []
    for g in range(1, G + 1):
        X = _read_matrix(os.path.join(directory, f"X_{g}.csv"))
        y = _read_matrix(os.path.join(directory, f"y_{g}.csv")).ravel()
        if X.shape != (counts[g - 1], p):
            raise ConfigError(
                f"X_{g}.csv has shape {X.shape}, manifest says ({counts[g-1]}, {p})"
            )
        if y.shape[0] != counts[g - 1]:
            raise ConfigError(
                f"y_{g}.csv has {y.shape[0]} rows, manifest says {counts[g-1]}"
            )
        groups.append((X, y))
    dataset = GroupedDataset(tuple(groups))
    truth = None
    params_path = os.path.join(directory, "params.csv")
    if os.path.isfile(params_path):
        truth = load_params(params_path, n_groups=G, dim=p)
    constraints = None
    if "constraints" in manifest:
        entries = tuple(_constraint_from_json(d) for d in manifest["constraints"])
        if len(entries) != G + 1:
            raise ConfigError(
                f"manifest lists {len(entries)} constraints, expected {G + 1}"
            )
        constraints = ConstraintSpec(entries)
    return dataset, truth, constraints, manifest


def save_params(path, params: ParameterStack):
    _write_matrix(path, params.as_matrix())


def load_params(path, n_groups=None, dim=None):
    m = _read_matrix(path)
    if n_groups is not None and m.shape[0] != n_groups + 1:
        raise ConfigError(
            f"{path} has {m.shape[0]} rows, expected {n_groups + 1}"
        )
    if dim is not None and m.shape[1] != dim:
        raise ConfigError(f"{path} has {m.shape[1]} columns, expected {dim}")
    return ParameterStack.from_matrix(m)


def trace_header(n_groups):
    cols = ["iter", "objective"]
    cols += [f"err_rel_{g}" for g in range(n_groups + 1)]
    cols.append("weighted_err")
    return cols


def write_trace_csv(path, iterations, objective, rel_errors=None, weighted=None):
    """Write a trace CSV with header iter,objective[,err_rel_0..,weighted_err].

    rel_errors is (T, G+1) or None; weighted is (T,) or None. Error columns
    are only present when both are given.
    """
    iterations = np.asarray(iterations, dtype=np.int64)
    objective = np.asarray(objective, dtype=np.float64)
    if iterations.shape != objective.shape:
        raise DimensionMismatch("iteration and objective columns differ in length")
    with_errors = rel_errors is not None and weighted is not None
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if with_errors:
            rel_errors = np.asarray(rel_errors, dtype=np.float64)
            weighted = np.asarray(weighted, dtype=np.float64)
            if rel_errors.shape[0] != iterations.shape[0]:
                raise DimensionMismatch("error trace length mismatch")
            if weighted.shape[0] != iterations.shape[0]:
                raise DimensionMismatch("weighted trace length mismatch")
            fh.write(",".join(trace_header(rel_errors.shape[1] - 1)) + "\n")
            for i in range(iterations.shape[0]):
                row = [str(int(iterations[i])), _FMT % objective[i]]
                row += [_FMT % v for v in rel_errors[i]]
                row.append(_FMT % weighted[i])
                fh.write(",".join(row) + "\n")
        else:
            fh.write("iter,objective\n")
            for i in range(iterations.shape[0]):
                fh.write(f"{int(iterations[i])},{_FMT % objective[i]}\n")


def read_trace_csv(path):
    """Read a trace CSV; returns a dict of column name -> array."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("iter"):
            raise ConfigError(f"{path} is not a trace CSV (bad header)")
        names = header.split(",")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ConfigError(
                    f"{path} row {lineno} has {len(parts)} fields, expected {len(names)}"
                )
            rows.append([float(v) for v in parts])
    data = np.asarray(rows, dtype=np.float64)
    if data.size == 0:
        data = data.reshape(0, len(names))
    out = {}
    for j, name in enumerate(names):
        col = data[:, j]
        out[name] = col.astype(np.int64) if name == "iter" else col
    return out
