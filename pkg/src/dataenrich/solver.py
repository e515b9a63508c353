"""Projected block gradient descent over the shared and individual blocks.

Each sweep updates the G individual blocks from the current iterate, then
the shared block; both step-size schedules from the model's analysis are
available, plus fully manual steps. Iteration starts from the zero stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, DimensionMismatch, NumericalDivergence
from .model import (
    ConstraintSpec,
    GroupedDataset,
    ParameterStack,
    WeightScheme,
)

__all__ = [
    "StepSizes",
    "FitConfig",
    "ConvergenceTrace",
    "FitResult",
    "default_step_sizes",
    "theoretical_step_sizes",
    "resolve_steps",
    "fit",
    "convergence_rate",
]


@dataclass(frozen=True)
class StepSizes:
    """Gradient step sizes: mu0 for the shared block, mus[g-1] for block g."""

    mu0: float
    mus: tuple

    def __post_init__(self):
        mu0 = float(self.mu0)
        mus = tuple(float(m) for m in self.mus)
        if not (math.isfinite(mu0) and mu0 > 0):
            raise ConfigError("mu0 must be positive and finite")
        for g, m in enumerate(mus, start=1):
            if not (math.isfinite(m) and m > 0):
                raise ConfigError(f"step size for block {g} must be positive")
        if len(mus) < 1:
            raise ConfigError("need at least one individual step size")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mus", mus)


_STEP_MODES = ("simplified", "theoretical", "manual")
_ORDERS = ("jacobi", "gauss_seidel")


@dataclass(frozen=True)
class FitConfig:
    """Solver controls.

    max_iters bounds the trace length. With record_initial=False (default)
    it equals the number of update sweeps; with record_initial=True the
    starting point takes the first trace slot and max_iters - 1 sweeps run.
    stop_tol = 0 disables early stopping; a positive value stops after the
    relative parameter change stays below it for 3 consecutive sweeps.
    """

    max_iters: int = 1000
    stop_tol: float = 0.0
    step_mode: str = "simplified"
    manual_steps: StepSizes | None = None
    widths: tuple | None = None
    width_constants: tuple | None = None
    tau: float = 1.0
    update_order: str = "jacobi"
    record_truth: ParameterStack | None = None
    record_initial: bool = False

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ConfigError("max_iters must be at least 1")
        object.__setattr__(self, "max_iters", int(self.max_iters))
        if not (math.isfinite(self.stop_tol) and self.stop_tol >= 0):
            raise ConfigError("stop_tol must be nonnegative")
        if self.step_mode not in _STEP_MODES:
            raise ConfigError(
                f"step_mode must be one of {_STEP_MODES}, got {self.step_mode!r}"
            )
        if self.update_order not in _ORDERS:
            raise ConfigError(
                f"update_order must be one of {_ORDERS}, got {self.update_order!r}"
            )
        if self.step_mode == "manual" and self.manual_steps is None:
            raise ConfigError("manual step mode needs manual_steps")
        if self.step_mode == "theoretical":
            if self.widths is None or self.width_constants is None:
                raise ConfigError(
                    "theoretical step mode needs widths and width_constants"
                )


@dataclass(frozen=True)
class ConvergenceTrace:
    """Per-iteration records; indices strictly increase from 1.

    rel_errors holds normalized squared errors ||b_g - truth_g||^2 /
    ||truth_g||^2 per block (column 0 the shared block); blocks with
    zero-norm truth fall back to the plain squared error. weighted holds
    the weighted error sum_g sqrt(n_g/n) ||b_g - truth_g||_2. Both are
    None when the solver was not given ground truth.
    """

    iterations: np.ndarray
    objective: np.ndarray
    rel_errors: np.ndarray | None = None
    weighted: np.ndarray | None = None

    def __len__(self):
        return int(self.iterations.shape[0])


@dataclass(frozen=True)
class FitResult:
    estimate: ParameterStack
    trace: ConvergenceTrace
    iterations_run: int
    converged: bool
    steps: StepSizes = field(repr=False, default=None)
    max_violation: float = 0.0


def default_step_sizes(dataset: GroupedDataset) -> StepSizes:
    """Simplified schedule: mu0 = 1/n, mu_g = 1/sqrt(n * n_g)."""
    n = dataset.n
    mus = tuple(1.0 / math.sqrt(n * ng) for ng in dataset.counts)
    return StepSizes(1.0 / n, mus)


def theoretical_step_sizes(dataset: GroupedDataset, widths, c0g, tau) -> StepSizes:
    """Width-corrected schedule.

    With f_g = 1 + c0g[g] * (widths[0] + widths[g] + tau) / sqrt(n_g):
    mu0 = (1/4n) * min_g f_g^{-2} and mu_g = (1/(2 sqrt(n n_g))) * f_g^{-1}.
    """
    G = dataset.n_groups
    widths = [float(w) for w in widths]
    c0g = [float(c) for c in c0g]
    tau = float(tau)
    if len(widths) != G + 1:
        raise ConfigError(f"need {G + 1} widths, got {len(widths)}")
    if len(c0g) != G:
        raise ConfigError(f"need {G} width constants, got {len(c0g)}")
    if tau <= 0:
        raise ConfigError("tau must be positive")
    if any(w < 0 for w in widths) or any(c < 0 for c in c0g):
        raise ConfigError("widths and width constants must be nonnegative")
    n = dataset.n
    factors = []
    for g, ng in enumerate(dataset.counts, start=1):
        factors.append(1.0 + c0g[g - 1] * (widths[0] + widths[g] + tau) / math.sqrt(ng))
    mu0 = min(f ** -2.0 for f in factors) / (4.0 * n)
    mus = tuple(
        1.0 / (2.0 * math.sqrt(n * ng) * f)
        for ng, f in zip(dataset.counts, factors)
    )
    return StepSizes(mu0, mus)


def resolve_steps(dataset: GroupedDataset, config: FitConfig) -> StepSizes:
    if config.step_mode == "simplified":
        return default_step_sizes(dataset)
    if config.step_mode == "theoretical":
        return theoretical_step_sizes(
            dataset, config.widths, config.width_constants, config.tau
        )
    steps = config.manual_steps
    if len(steps.mus) != dataset.n_groups:
        raise DimensionMismatch(
            f"manual steps list {len(steps.mus)} blocks, dataset has "
            f"{dataset.n_groups}"
        )
    return steps


def _block_violation(m, kinds, radii):
    """Worst relative constraint excess f_g(row g)/d_g - 1 over constrained
    blocks; 0.0 when every block is unconstrained."""
    worst = 0.0
    for g in range(m.shape[0]):
        if kinds[g] == _kernels.KIND_L1:
            v = float(np.abs(m[g]).sum()) / radii[g] - 1.0
        elif kinds[g] == _kernels.KIND_L2:
            v = float(np.linalg.norm(m[g])) / radii[g] - 1.0
        else:
            continue
        if v > worst:
            worst = v
    return worst


def fit(
    dataset: GroupedDataset,
    constraints: ConstraintSpec,
    config: FitConfig,
    initial: "ParameterStack | None" = None,
) -> FitResult:
    """Run projected block gradient descent.

    Starts from the zero stack unless an explicit initial stack is given
    (warm start)."""
    G = dataset.n_groups
    p = dataset.dim
    if len(constraints) != G + 1:
        raise DimensionMismatch(
            f"constraint spec has {len(constraints)} entries, dataset needs {G + 1}"
        )
    truth = config.record_truth
    if truth is not None and (truth.n_groups != G or truth.dim != p):
        raise DimensionMismatch("record_truth shape does not match the dataset")
    if initial is not None and (initial.n_groups != G or initial.dim != p):
        raise DimensionMismatch("initial stack shape does not match the dataset")

    steps = resolve_steps(dataset, config)
    kinds, radii = constraints.as_arrays()
    mus = np.asarray(steps.mus, dtype=np.float64)
    X, y, offsets = dataset.packed
    n = dataset.n
    counts = dataset.counts
    gauss_seidel = config.update_order == "gauss_seidel"

    if truth is not None:
        truth_m = truth.as_matrix()
        truth_sq = np.einsum("ij,ij->i", truth_m, truth_m)
        denom = np.where(truth_sq > 0.0, truth_sq, 1.0)
        w = WeightScheme.SQRT_FRACTION.weights(counts)

    cur = np.zeros((G + 1, p)) if initial is None else initial.as_matrix().astype(np.float64)
    nxt = np.empty_like(cur)

    sweeps = config.max_iters - 1 if config.record_initial else config.max_iters
    capacity = config.max_iters
    iters = np.zeros(capacity, dtype=np.int64)
    objective = np.full(capacity, np.nan)
    rel = np.zeros((capacity, G + 1)) if truth is not None else None
    wgt = np.zeros(capacity) if truth is not None else None

    rows = 0
    pending = -1
    max_violation = 0.0

    def record(m, index):
        nonlocal rows, max_violation
        iters[rows] = index
        if truth is not None:
            diff = m - truth_m
            sq = np.einsum("ij,ij->i", diff, diff)
            rel[rows] = sq / denom
            wgt[rows] = float(w @ np.sqrt(sq))
        v = _block_violation(m, kinds, radii)
        if v > max_violation:
            max_violation = v
        rows += 1

    next_index = 1
    if config.record_initial:
        record(cur, next_index)
        pending = rows - 1
        next_index += 1

    converged = False
    streak = 0
    performed = 0
    for _ in range(sweeps):
        ssr = _kernels.pbgd_sweep(
            X, y, offsets, cur, nxt, steps.mu0, mus, kinds, radii, gauss_seidel
        )
        performed += 1
        if pending >= 0:
            objective[pending] = ssr / n
        if not np.all(np.isfinite(nxt)):
            bad = int(np.where(~np.isfinite(nxt).all(axis=1))[0][0])
            raise NumericalDivergence(
                f"non-finite iterate in block {bad} at iteration {next_index} "
                "(step size too large?)",
                iteration=next_index,
                block=bad,
            )
        record(nxt, next_index)
        pending = rows - 1
        next_index += 1
        if config.stop_tol > 0.0:
            delta = float(np.linalg.norm(nxt - cur))
            base = float(np.linalg.norm(cur))
            change = delta / base if base > 0.0 else (0.0 if delta == 0.0 else np.inf)
            streak = streak + 1 if change < config.stop_tol else 0
            if streak >= 3:
                converged = True
        cur, nxt = nxt, cur
        if converged:
            break

    if pending >= 0:
        objective[pending] = _kernels.stacked_objective(X, y, offsets, cur)

    trace = ConvergenceTrace(
        iterations=iters[:rows].copy(),
        objective=objective[:rows].copy(),
        rel_errors=rel[:rows].copy() if rel is not None else None,
        weighted=wgt[:rows].copy() if wgt is not None else None,
    )
    estimate = ParameterStack.from_matrix(cur)
    return FitResult(
        estimate=estimate,
        trace=trace,
        iterations_run=performed,
        converged=converged,
        steps=steps,
        max_violation=max_violation,
    )


def convergence_rate(trace: ConvergenceTrace, metric="weighted_error", burn_in=0):
    """Empirical per-iteration contraction of a trace column.

    Least-squares slope of log(value) against iteration over the records
    with iteration > burn_in and positive values, exponentiated. Values
    below 1 mean the column decays geometrically. metric is a block index
    (column of rel_errors), "objective", or "weighted_error".
    """
    if isinstance(metric, str):
        if metric == "objective":
            values = trace.objective
        elif metric == "weighted_error":
            if trace.weighted is None:
                raise ConfigError("trace has no weighted error column")
            values = trace.weighted
        else:
            raise ConfigError(f"unknown metric {metric!r}")
    else:
        if trace.rel_errors is None:
            raise ConfigError("trace has no per-block error columns")
        g = int(metric)
        if not 0 <= g < trace.rel_errors.shape[1]:
            raise ConfigError(f"block index {g} out of range")
        values = trace.rel_errors[:, g]

    keep = (trace.iterations > burn_in) & (values > 0.0) & np.isfinite(values)
    t = trace.iterations[keep].astype(np.float64)
    e = values[keep]
    if t.shape[0] < 2:
        raise ValueError(
            "contraction rate undefined: fewer than 2 positive records after burn-in"
        )
    slope = np.polyfit(t, np.log(e), 1)[0]
    return float(np.exp(slope))
