"""Euclidean projections onto the constraint sets used by the solver."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .model import Constraint

__all__ = ["project_l1", "project_l2", "project"]


def _checked_vector(v):
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("projection input must be a vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("projection input must be finite")
    return v


def _checked_radius(d):
    d = float(d)
    if not np.isfinite(d) or d <= 0:
        raise ValueError("ball radius must be positive and finite")
    return d


def project_l1(v, d):
    """Euclidean projection of v onto the l1 ball of radius d.

    Exact sort-based thresholding: if v is outside the ball, soft-threshold
    at the unique theta > 0 with sum(max(|v_i| - theta, 0)) = d.
    """
    v = _checked_vector(v)
    d = _checked_radius(d)
    return _kernels.l1_project(v, d)


def project_l2(v, d):
    """Euclidean projection of v onto the l2 ball of radius d (radial pull-in)."""
    v = _checked_vector(v)
    d = _checked_radius(d)
    return _kernels.l2_project(v, d)


def project(constraint: Constraint, v):
    """Projection onto the set described by a block constraint.

    Unconstrained blocks pass through (a fresh copy is returned).
    """
    v = _checked_vector(v)
    if not constraint.is_constrained:
        return v.copy()
    if constraint.kind == "l1":
        return _kernels.l1_project(v, constraint.radius)
    return _kernels.l2_project(v, constraint.radius)
