"""K-fold cross-validation for choosing the constraint radii.

The search space is either a two-scale grid (one multiplier for the shared
block's radius, one for all individual radii, applied to base radii from a
pilot least-squares fit) or an explicit list of per-block radius vectors.
Folds are stratified within each group so every training fold keeps all
groups populated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .model import Constraint, ConstraintSpec, GroupedDataset
from .solver import FitConfig, FitResult, fit

__all__ = ["CvPlan", "CvPoint", "CvResult", "kfold_cv", "pilot_radii"]


@dataclass(frozen=True)
class CvPlan:
    """Search plan: either the two-scale grids or explicit per-group points.

    scale0_grid multiplies the shared block's base radius, scale_ind_grid
    the individual base radii. per_group_points, when given, overrides
    both with explicit (G+1)-vectors of radii. base_radii default to a
    pilot least-squares fit on the full data.
    """

    k: int = 10
    scale0_grid: tuple = (0.5, 1.0, 2.0)
    scale_ind_grid: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    per_group_points: tuple | None = None
    base_radii: tuple | None = None
    folds_seed: int = 0

    def __post_init__(self):
        if int(self.k) < 2:
            raise ConfigError("k must be at least 2")
        object.__setattr__(self, "k", int(self.k))
        if self.per_group_points is not None:
            pts = tuple(tuple(float(r) for r in p) for p in self.per_group_points)
            if len(pts) < 1:
                raise ConfigError("per_group_points must be nonempty")
            object.__setattr__(self, "per_group_points", pts)
        else:
            if len(self.scale0_grid) < 1 or len(self.scale_ind_grid) < 1:
                raise ConfigError("scale grids must be nonempty")
            for s in tuple(self.scale0_grid) + tuple(self.scale_ind_grid):
                if not (math.isfinite(s) and s > 0):
                    raise ConfigError("scale multipliers must be positive")


@dataclass(frozen=True)
class CvPoint:
    """One evaluated grid point: the scales (None for explicit points) and
    the full per-block radii (None entries for unconstrained blocks)."""

    scale0: float | None
    scale_ind: float | None
    radii: tuple

    @property
    def total_radius(self):
        return sum(r for r in self.radii if r is not None)


@dataclass(frozen=True)
class CvResult:
    points: tuple
    mean_mse: np.ndarray
    std_mse: np.ndarray
    best_index: int
    best_constraints: ConstraintSpec
    refit: FitResult

    @property
    def best_point(self):
        return self.points[self.best_index]

    def rows(self):
        """Table rows for CSV output."""
        out = []
        for i, pt in enumerate(self.points):
            row = {
                "scale0": "" if pt.scale0 is None else pt.scale0,
                "scale_ind": "" if pt.scale_ind is None else pt.scale_ind,
                "radii": ";".join(
                    "" if r is None else repr(r) for r in pt.radii
                ),
                "mean_mse": float(self.mean_mse[i]),
                "std_mse": float(self.std_mse[i]),
                "best": int(i == self.best_index),
            }
            out.append(row)
        return out


def pilot_radii(dataset: GroupedDataset, template: ConstraintSpec):
    """Base radii from a pilot fit: pooled least squares for the shared
    block, then per-group least squares on the residual. Returns a
    (G+1)-tuple with None for unconstrained blocks."""
    X, y, offsets = dataset.packed
    beta0 = np.linalg.lstsq(X, y, rcond=None)[0]
    out = []
    for g in range(dataset.n_groups + 1):
        c = template[g]
        if not c.is_constrained:
            out.append(None)
            continue
        if g == 0:
            v = beta0
        else:
            Xg, yg = dataset.groups[g - 1]
            v = np.linalg.lstsq(Xg, yg - Xg @ beta0, rcond=None)[0]
        r = c.__class__(c.kind, 1.0).value(v)
        if r <= 0:
            raise ConfigError(
                f"pilot fit gives zero norm for block {g}; supply base_radii"
            )
        out.append(float(r))
    return tuple(out)


def _grid_points(template, plan):
    G1 = len(template)
    if plan.per_group_points is not None:
        pts = []
        for raw in plan.per_group_points:
            if len(raw) != G1:
                raise DimensionMismatch(
                    f"per-group point lists {len(raw)} radii, need {G1}"
                )
            radii = tuple(
                float(raw[g]) if template[g].is_constrained else None
                for g in range(G1)
            )
            pts.append(CvPoint(None, None, radii))
        return tuple(pts)
    base = plan.base_radii
    scale0_grid = plan.scale0_grid if template[0].is_constrained else (1.0,)
    pts = []
    for s0 in scale0_grid:
        for si in plan.scale_ind_grid:
            radii = []
            for g in range(G1):
                if not template[g].is_constrained:
                    radii.append(None)
                elif g == 0:
                    radii.append(s0 * base[0])
                else:
                    radii.append(si * base[g])
            pts.append(CvPoint(float(s0), float(si), tuple(radii)))
    return tuple(pts)


def _constraints_at(template, point):
    entries = []
    for g in range(len(template)):
        c = template[g]
        if not c.is_constrained:
            entries.append(Constraint.unconstrained())
        else:
            entries.append(Constraint(c.kind, point.radii[g]))
    return ConstraintSpec(tuple(entries))


def _fold_indices(dataset, k, seed):
    """Per-fold held-out index arrays, stratified within each group."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    per_group_parts = []
    for g, ng in enumerate(dataset.counts, start=1):
        if ng < k:
            raise ConfigError(
                f"group {g} has {ng} samples, fewer than k={k} folds"
            )
        per_group_parts.append(np.array_split(rng.permutation(ng), k))
    folds = []
    for f in range(k):
        folds.append([parts[f] for parts in per_group_parts])
    return folds


def _holdout_mse(train, heldout_rows, dataset, constraints, config):
    result = fit(train, constraints, config)
    est = result.estimate
    total = 0.0
    count = 0
    for g, (X, y) in enumerate(dataset.groups, start=1):
        idx = heldout_rows[g - 1]
        r = y[idx] - X[idx] @ (est.beta0 + est.betas[g - 1])
        total += float(r @ r)
        count += idx.size
    return total / count


def kfold_cv(dataset: GroupedDataset, constraints_template: ConstraintSpec,
             plan: CvPlan, fit_config: FitConfig, threads=None) -> CvResult:
    """Grid-search constraint radii by K-fold cross-validation.

    Held-out MSE per fold pools all groups' held-out samples. The winner
    minimizes mean MSE, breaking ties toward the smaller total radius and
    then earlier grid order; the returned refit is on the full data at
    the winning radii.
    """
    if len(constraints_template) != dataset.n_groups + 1:
        raise DimensionMismatch(
            f"template has {len(constraints_template)} entries, dataset needs "
            f"{dataset.n_groups + 1}"
        )
    plan_eff = plan
    if plan.per_group_points is None and plan.base_radii is None:
        plan_eff = replace(plan, base_radii=pilot_radii(dataset, constraints_template))
    points = _grid_points(constraints_template, plan_eff)
    folds = _fold_indices(dataset, plan_eff.k, plan_eff.folds_seed)
    cv_config = replace(fit_config, record_truth=None, record_initial=False)

    tasks = []
    for pi, pt in enumerate(points):
        constraints = _constraints_at(constraints_template, pt)
        for heldout in folds:
            keep = [
                np.setdiff1d(np.arange(ng), idx, assume_unique=False)
                for ng, idx in zip(dataset.counts, heldout)
            ]
            tasks.append((pi, dataset.subset(keep), heldout, constraints))

    def run(task):
        pi, train, heldout, constraints = task
        return pi, _holdout_mse(train, heldout, dataset, constraints, cv_config)

    if threads is not None and int(threads) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = [run(t) for t in tasks]

    per_point = [[] for _ in points]
    for pi, mse in outcomes:
        per_point[pi].append(mse)
    mean = np.array([float(np.mean(v)) for v in per_point])
    std = np.array([float(np.std(v, ddof=1)) for v in per_point])

    floor = mean.min()
    tol = 1e-12 * max(1.0, abs(floor))
    best = None
    for i, pt in enumerate(points):
        if mean[i] > floor + tol:
            continue
        if best is None or pt.total_radius < points[best].total_radius:
            best = i
    best_constraints = _constraints_at(constraints_template, points[best])
    refit = fit(dataset, best_constraints, replace(fit_config, record_initial=False))
    return CvResult(
        points=points,
        mean_mse=mean,
        std_mse=std,
        best_index=best,
        best_constraints=best_constraints,
        refit=refit,
    )
