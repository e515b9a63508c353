"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time from the ``DATAENRICH_BACKEND``
environment variable: ``auto`` (default) uses numba when importable,
``numba`` requires it, ``numpy`` forces the plain-Python path. Both paths
run the same function bodies, so results are identical.
"""

import os

import numpy as np

BACKEND_ENV = "DATAENRICH_BACKEND"

# Block constraint codes shared with model.Constraint.
KIND_UNCONSTRAINED = 0
KIND_L1 = 1
KIND_L2 = 2


def _select_backend():
    choice = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise RuntimeError(
            f"{BACKEND_ENV} must be one of auto/numba/numpy, got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise RuntimeError(f"{BACKEND_ENV}=numba but numba is not importable")
        return "numpy"
    return "numba"


BACKEND = _select_backend()

if BACKEND == "numba":
    from numba import njit

    def _jit(fn):
        return njit(cache=True, nogil=True)(fn)

else:

    def _jit(fn):
        return fn


@_jit
def l1_project(v, d):
    """Euclidean projection of v onto the l1 ball of radius d.

    Sort-based exact threshold: out_i = sign(v_i) * max(|v_i| - theta, 0)
    with theta the smallest nonnegative value making the output feasible.
    Entries with |v_i| == theta map to 0.
    """
    a = np.abs(v)
    if a.sum() <= d:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    theta = 0.0
    for j in range(u.shape[0]):
        t = (css[j] - d) / (j + 1.0)
        if u[j] > t:
            theta = t
        else:
            break
    out = np.empty_like(v)
    for i in range(v.shape[0]):
        m = a[i] - theta
        if m > 0.0:
            out[i] = np.sign(v[i]) * m
        else:
            out[i] = 0.0
    return out


@_jit
def l2_project(v, d):
    """Euclidean projection of v onto the l2 ball of radius d (radial rescale)."""
    nrm = np.sqrt(np.dot(v, v))
    if nrm <= d:
        return v.copy()
    return v * (d / nrm)


@_jit
def apply_projection(kind, radius, v):
    if kind == KIND_L1:
        return l1_project(v, radius)
    if kind == KIND_L2:
        return l2_project(v, radius)
    return v.copy()


@_jit
def pbgd_sweep(X, y, offsets, beta, out, mu0, mus, kinds, radii, gauss_seidel):
    """One projected block gradient sweep.

    X is the row-stacked design (n x p), offsets[g-1]:offsets[g] the rows of
    group g. beta and out are (G+1, p) with row 0 the shared block. In the
    default (Jacobi) order the shared update uses the pre-sweep individual
    blocks; gauss_seidel uses the just-updated ones. The shared gradient is
    accumulated in ascending group order for determinism.

    Returns the squared residual norm of the input iterate (free byproduct,
    lets callers trace the objective without an extra pass).
    """
    G = beta.shape[0] - 1
    p = beta.shape[1]
    grad0 = np.zeros(p)
    ssr = 0.0
    for g in range(1, G + 1):
        lo = offsets[g - 1]
        hi = offsets[g]
        Xg = X[lo:hi]
        r = y[lo:hi] - np.dot(Xg, beta[0] + beta[g])
        ssr += np.dot(r, r)
        t = np.dot(r, Xg)
        out[g, :] = apply_projection(kinds[g], radii[g], beta[g] + mus[g - 1] * t)
        if gauss_seidel:
            r2 = y[lo:hi] - np.dot(Xg, beta[0] + out[g])
            grad0 += np.dot(r2, Xg)
        else:
            grad0 += t
    out[0, :] = apply_projection(kinds[0], radii[0], beta[0] + mu0 * grad0)
    return ssr


@_jit
def stacked_objective(X, y, offsets, beta):
    """Mean squared residual (1/n) * sum_g ||y_g - X_g (beta_0 + beta_g)||^2,
    accumulated in ascending group order."""
    G = beta.shape[0] - 1
    total = 0.0
    for g in range(1, G + 1):
        lo = offsets[g - 1]
        hi = offsets[g]
        r = y[lo:hi] - np.dot(X[lo:hi], beta[0] + beta[g])
        total += np.dot(r, r)
    return total / y.shape[0]
