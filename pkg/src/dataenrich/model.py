"""Data types and exact-algebra operations for data-enriched linear models.

The model couples G linear regressions through a shared parameter:
y_g = X_g (beta_0 + beta_g) + noise. The stacked design matrix is never
materialized; everything runs group by group.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DimensionMismatch

__all__ = [
    "GroupedDataset",
    "ParameterStack",
    "Constraint",
    "ConstraintSpec",
    "WeightScheme",
    "residuals",
    "objective",
    "predict",
    "weighted_error",
]


def _as_readonly(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GroupedDataset:
    """Per-group design matrices and responses.

    groups: sequence of (X_g, y_g) pairs; X_g is n_g x p, y_g length n_g.
    All groups must share the column count p.
    """

    groups: tuple

    def __post_init__(self):
        if len(self.groups) < 1:
            raise DimensionMismatch("dataset needs at least one group")
        norm = []
        p = None
        for g, (X, y) in enumerate(self.groups, start=1):
            X = _as_readonly(X)
            y = _as_readonly(y)
            if X.ndim != 2:
                raise DimensionMismatch(f"X_{g} must be a matrix", block=g)
            if y.ndim != 1:
                raise DimensionMismatch(f"y_{g} must be a vector", block=g)
            if X.shape[0] < 1:
                raise DimensionMismatch(f"group {g} has no samples", block=g)
            if p is None:
                p = X.shape[1]
            elif X.shape[1] != p:
                raise DimensionMismatch(
                    f"X_{g} has {X.shape[1]} columns, expected {p}", block=g
                )
            if y.shape[0] != X.shape[0]:
                raise DimensionMismatch(
                    f"y_{g} length {y.shape[0]} != X_{g} rows {X.shape[0]}", block=g
                )
            norm.append((X, y))
        if p < 1:
            raise DimensionMismatch("ambient dimension must be positive")
        object.__setattr__(self, "groups", tuple(norm))

    @property
    def n_groups(self):
        """G, the number of groups."""
        return len(self.groups)

    @property
    def dim(self):
        """p, the ambient dimension."""
        return self.groups[0][0].shape[1]

    @property
    def counts(self):
        """Per-group sample counts (n_1, ..., n_G)."""
        return tuple(X.shape[0] for X, _ in self.groups)

    @property
    def n(self):
        """Total sample count."""
        return sum(self.counts)

    @cached_property
    def packed(self):
        """Row-stacked (X, y, offsets) view used by the solver kernels.

        offsets has length G+1; group g occupies rows offsets[g-1]:offsets[g].
        """
        X = np.ascontiguousarray(np.vstack([Xg for Xg, _ in self.groups]))
        y = np.ascontiguousarray(np.concatenate([yg for _, yg in self.groups]))
        offsets = np.zeros(self.n_groups + 1, dtype=np.int64)
        np.cumsum(self.counts, out=offsets[1:])
        return X, y, offsets

    def subset(self, row_indices):
        """New dataset keeping only the given rows per group.

        row_indices: sequence of G index arrays (may not be empty).
        """
        if len(row_indices) != self.n_groups:
            raise DimensionMismatch("need one index array per group")
        groups = []
        for g, ((X, y), idx) in enumerate(zip(self.groups, row_indices), start=1):
            idx = np.asarray(idx, dtype=np.intp)
            if idx.size < 1:
                raise DimensionMismatch(f"group {g} would become empty", block=g)
            groups.append((X[idx], y[idx]))
        return GroupedDataset(tuple(groups))


@dataclass(frozen=True)
class ParameterStack:
    """Shared parameter beta_0 plus the G individual parameters."""

    beta0: np.ndarray
    betas: tuple

    def __post_init__(self):
        beta0 = _as_readonly(self.beta0)
        if beta0.ndim != 1:
            raise DimensionMismatch("beta0 must be a vector", block=0)
        betas = []
        for g, b in enumerate(self.betas, start=1):
            b = _as_readonly(b)
            if b.shape != beta0.shape:
                raise DimensionMismatch(
                    f"beta_{g} has shape {b.shape}, expected {beta0.shape}", block=g
                )
            betas.append(b)
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "betas", tuple(betas))

    @property
    def n_groups(self):
        return len(self.betas)

    @property
    def dim(self):
        return self.beta0.shape[0]

    def block(self, g):
        """Block g of the stack; 0 is the shared parameter."""
        return self.beta0 if g == 0 else self.betas[g - 1]

    def as_matrix(self):
        """(G+1) x p matrix, row 0 the shared block."""
        return np.vstack([self.beta0] + [b for b in self.betas])

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 2:
            raise DimensionMismatch("parameter matrix must be (G+1) x p with G >= 1")
        return cls(m[0], tuple(m[1:]))

    @classmethod
    def zeros(cls, n_groups, dim):
        return cls(np.zeros(dim), tuple(np.zeros(dim) for _ in range(n_groups)))


_KIND_CODES = {
    "none": _kernels.KIND_UNCONSTRAINED,
    "l1": _kernels.KIND_L1,
    "l2": _kernels.KIND_L2,
}


@dataclass(frozen=True)
class Constraint:
    """A norm-ball constraint f(beta) <= radius on one block, or none.

    kind is "none", "l1", or "l2"; radius must be positive for the
    constrained kinds and None otherwise.
    """

    kind: str
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "none":
            if self.radius is not None:
                raise ValueError("unconstrained blocks take no radius")
        else:
            if self.radius is None or not np.isfinite(self.radius) or self.radius <= 0:
                raise ValueError(f"{self.kind} ball needs a positive finite radius")
            object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def unconstrained(cls):
        return cls("none")

    @classmethod
    def l1(cls, radius):
        return cls("l1", radius)

    @classmethod
    def l2(cls, radius):
        return cls("l2", radius)

    @property
    def is_constrained(self):
        return self.kind != "none"

    @property
    def code(self):
        return _KIND_CODES[self.kind]

    def value(self, v):
        """The constraint function f evaluated at v (the relevant norm)."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "l1":
            return float(np.abs(v).sum())
        if self.kind == "l2":
            return float(np.linalg.norm(v))
        raise ValueError("unconstrained blocks have no constraint function")


@dataclass(frozen=True)
class ConstraintSpec:
    """One Constraint per block, index 0 the shared parameter."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        if len(entries) < 2:
            raise DimensionMismatch("constraint spec needs G+1 >= 2 entries")
        for e in entries:
            if not isinstance(e, Constraint):
                raise TypeError("entries must be Constraint instances")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, g):
        return self.entries[g]

    @classmethod
    def all_unconstrained(cls, n_groups):
        return cls(tuple(Constraint.unconstrained() for _ in range(n_groups + 1)))

    def as_arrays(self):
        """(kinds, radii) int64/float64 arrays for the solver kernels;
        unconstrained entries carry radius 0 (never read)."""
        kinds = np.array([e.code for e in self.entries], dtype=np.int64)
        radii = np.array(
            [e.radius if e.is_constrained else 0.0 for e in self.entries],
            dtype=np.float64,
        )
        return kinds, radii


class WeightScheme(Enum):
    """Block weights for aggregate error metrics.

    SQRT_FRACTION uses sqrt(n_g/n), FRACTION uses n_g/n; the shared block
    uses n_0 := n so its weight is 1 under both.
    """

    SQRT_FRACTION = "sqrt_fraction"
    FRACTION = "fraction"

    def weights(self, counts):
        counts = np.asarray(counts, dtype=np.float64)
        n = counts.sum()
        frac = np.concatenate(([1.0], counts / n))
        if self is WeightScheme.SQRT_FRACTION:
            return np.sqrt(frac)
        return frac


def _check_compatible(dataset, params):
    if params.n_groups != dataset.n_groups:
        raise DimensionMismatch(
            f"parameter stack has {params.n_groups} groups, dataset has "
            f"{dataset.n_groups}"
        )
    if params.dim != dataset.dim:
        raise DimensionMismatch(
            f"parameter dimension {params.dim} != dataset dimension {dataset.dim}"
        )


def residuals(dataset, params):
    """Per-group residuals r_g = y_g - X_g (beta_0 + beta_g)."""
    _check_compatible(dataset, params)
    out = []
    for (X, y), b in zip(dataset.groups, params.betas):
        out.append(y - X @ (params.beta0 + b))
    return out


def objective(dataset, params):
    """(1/n) sum_g ||y_g - X_g (beta_0 + beta_g)||^2."""
    total = 0.0
    for r in residuals(dataset, params):
        total += float(r @ r)
    return total / dataset.n


def predict(X_new, params, group_index):
    """Predictions X_new (beta_0 + beta_g); group_index 0 uses the shared
    block alone (out-of-group prediction)."""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim != 2 or X_new.shape[1] != params.dim:
        raise DimensionMismatch(
            f"prediction input needs {params.dim} columns, got shape {X_new.shape}"
        )
    if not 0 <= group_index <= params.n_groups:
        raise DimensionMismatch(
            f"group index {group_index} outside 0..{params.n_groups}",
            block=group_index,
        )
    if group_index == 0:
        return X_new @ params.beta0
    return X_new @ (params.beta0 + params.betas[group_index - 1])


def weighted_error(estimate, truth, counts, scheme=WeightScheme.SQRT_FRACTION):
    """Weighted block-wise estimation error sum_g w_g ||est_g - true_g||_2.

    counts are the G group sample sizes; the shared block weight is 1.
    """
    if estimate.n_groups != truth.n_groups or estimate.dim != truth.dim:
        raise DimensionMismatch("estimate and truth shapes differ")
    if len(counts) != estimate.n_groups:
        raise DimensionMismatch(
            f"need {estimate.n_groups} counts, got {len(counts)}"
        )
    w = scheme.weights(counts)
    total = 0.0
    for g in range(estimate.n_groups + 1):
        total += w[g] * float(np.linalg.norm(estimate.block(g) - truth.block(g)))
    return total
