"""Monte-Carlo probes for the geometric quantities behind the estimator:
Gaussian widths of error cones, restricted-eigenvalue behavior of stacked
directions, cone incoherence, and per-block contraction constants.

Every sup/inf here is estimated from sampled directions, so width and
contraction numbers are biased low and the re/deic minima are biased high;
callers get one-sided probes, not certificates. All probes are
deterministic functions of their inputs and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConeSamplingError, DimensionMismatch
from .model import GroupedDataset, WeightScheme
from .solver import StepSizes

__all__ = [
    "FullSpace",
    "ExplicitRays",
    "L1DescentCone",
    "L2DescentCone",
    "samplers_for",
    "sample_cone_direction",
    "WidthEstimate",
    "gaussian_width_mc",
    "re_probe",
    "DeicEstimate",
    "deic_probe",
    "ContractionEstimate",
    "contraction_probe",
    "DiagnosticsReport",
]

_MEMBERSHIP_STEP = 1e-6
_MAX_ATTEMPTS = 10000


class FullSpace:
    """The whole sphere: every direction is an error direction
    (unconstrained block)."""

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)

    def propose(self, rng):
        return rng.standard_normal(self.dim)

    def contains(self, u):
        return True

    def exact_support(self, g):
        """sup over the sphere of <g, u> is ||g||."""
        return float(np.linalg.norm(g))


class ExplicitRays:
    """A finite union of rays, given as vectors (normalized on entry)."""

    def __init__(self, rays):
        rays = np.atleast_2d(np.asarray(rays, dtype=np.float64))
        if rays.shape[0] < 1:
            raise ValueError("need at least one ray")
        norms = np.linalg.norm(rays, axis=1)
        if np.any(norms == 0):
            raise ValueError("rays must be nonzero")
        self.rays = rays / norms[:, None]
        self.dim = rays.shape[1]

    def propose(self, rng):
        return self.rays[rng.integers(self.rays.shape[0])]

    def contains(self, u):
        return bool(np.any(np.all(np.abs(self.rays - u) <= 1e-9, axis=1)))

    def exact_support(self, g):
        return float(np.max(self.rays @ g))


class _DescentCone:
    """Directions u along which the block norm does not increase at the
    reference point: f(ref + t u) <= f(ref) for a small step t."""

    def __init__(self, ref):
        ref = np.asarray(ref, dtype=np.float64)
        if ref.ndim != 1 or not np.any(ref != 0):
            raise ValueError("descent cones need a nonzero reference vector")
        self.ref = ref.copy()
        self.dim = ref.shape[0]
        self.radius = self._norm(ref)
        self._step = _MEMBERSHIP_STEP * self.radius

    def contains(self, u):
        return self._norm(self.ref + self._step * u) <= self.radius

    def exact_support(self, g):
        return None


class L1DescentCone(_DescentCone):
    """Error cone of an l1 ball tight at the reference point.

    Proposals are built directly: draw a Gaussian, orient its on-support
    part to shrink the l1 norm, then give the off-support part an l1
    budget below the on-support decrease. The membership test stays the
    ground truth; the constructor only makes acceptance cheap.
    """

    @staticmethod
    def _norm(v):
        return float(np.abs(v).sum())

    def propose(self, rng):
        z = rng.standard_normal(self.dim)
        support = self.ref != 0
        signs = np.sign(self.ref[support])
        gain = -float(signs @ z[support])
        if gain < 0:
            z[support] = -z[support]
            gain = -gain
        out = np.zeros(self.dim)
        out[support] = z[support]
        off = ~support
        if gain > 0 and np.any(off):
            w = z[off]
            mass = float(np.abs(w).sum())
            if mass > 0:
                budget = rng.uniform(0.0, 1.0) * gain
                out[off] = w * (budget / mass)
        return out


class L2DescentCone(_DescentCone):
    """Error cone of an l2 ball tight at the reference point: the
    halfspace of directions with nonpositive radial component.

    Proposals reflect away any positive radial component, which keeps the
    draw Gaussian within the halfspace.
    """

    @staticmethod
    def _norm(v):
        return float(np.linalg.norm(v))

    def propose(self, rng):
        z = rng.standard_normal(self.dim)
        unit = self.ref / self.radius
        radial = float(unit @ z)
        if radial > 0:
            z = z - 2.0 * radial * unit
        return z


def samplers_for(truth, constraints):
    """One cone sampler per block from a parameter stack and its
    constraints: descent cones for constrained blocks, the full sphere
    for unconstrained ones."""
    if len(constraints) != truth.n_groups + 1:
        raise DimensionMismatch("constraints and parameter stack disagree on G")
    out = []
    for g in range(truth.n_groups + 1):
        c = constraints[g]
        if c.kind == "l1":
            out.append(L1DescentCone(truth.block(g)))
        elif c.kind == "l2":
            out.append(L2DescentCone(truth.block(g)))
        else:
            out.append(FullSpace(truth.dim))
    return out


def sample_cone_direction(sampler, rng, max_attempts=_MAX_ATTEMPTS):
    """One unit vector from the cone, via propose-check-normalize."""
    for _ in range(max_attempts):
        c = sampler.propose(rng)
        nrm = float(np.linalg.norm(c))
        if nrm == 0.0 or not np.all(np.isfinite(c)):
            continue
        u = c / nrm
        if sampler.contains(u):
            return u
    raise ConeSamplingError(
        f"no accepted direction in {max_attempts} attempts; "
        "supply the cone as ExplicitRays instead"
    )


def _direction_matrix(sampler, rng, count):
    return np.stack([sample_cone_direction(sampler, rng) for _ in range(count)])


@dataclass(frozen=True)
class WidthEstimate:
    """Monte-Carlo Gaussian width with its standard error."""

    value: float
    std_error: float
    n_gaussians: int
    n_directions: int

    def __str__(self):
        return f"{self.value:.4f} +- {self.std_error:.4f}"


def gaussian_width_mc(sampler, n_gaussians=200, n_directions=128, seed=0):
    """Estimate E_g sup_{u in cone, |u|=1} <g, u>.

    Per Gaussian draw the sup is the max of <g, u> over freshly sampled
    directions; cones with a computable maximizer (full sphere, explicit
    rays) use it directly, making the estimate exact up to MC error. For
    the others the estimate is biased low.
    """
    if n_gaussians < 1 or n_directions < 1:
        raise ValueError("trial counts must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sups = np.empty(n_gaussians)
    for i in range(n_gaussians):
        g = rng.standard_normal(sampler.dim)
        exact = sampler.exact_support(g)
        if exact is not None:
            sups[i] = exact
            continue
        best = -math.inf
        for _ in range(n_directions):
            u = sample_cone_direction(sampler, rng)
            v = float(g @ u)
            if v > best:
                best = v
        sups[i] = best
    value = float(sups.mean())
    se = float(sups.std(ddof=1) / math.sqrt(n_gaussians)) if n_gaussians > 1 else 0.0
    return WidthEstimate(value, se, n_gaussians, n_directions)


def _stacked_quadratic(dataset, delta):
    """(1/n) sum_g ||X_g (delta_0 + delta_g)||^2 for a (G+1, p) stack."""
    total = 0.0
    for g, (X, _) in enumerate(dataset.groups, start=1):
        v = X @ (delta[0] + delta[g])
        total += float(v @ v)
    return total / dataset.n


def _onto_weighted_section(delta, w):
    """Scale a stack so sum_g w_g ||delta_g|| = 1."""
    norms = np.linalg.norm(delta, axis=1)
    s = float(w @ norms)
    if s <= 0:
        raise ValueError("zero stacked direction cannot be normalized")
    return delta / s


def re_probe(dataset: GroupedDataset, samplers, trials=1000, seed=0,
             weights=WeightScheme.FRACTION, extra=None):
    """Smallest sampled value of (1/n)||X delta||^2 over stacked error
    directions delta with sum_g w_g ||delta_g|| = 1 (squared form).

    Each trial samples one direction per block and evaluates both a
    random magnitude split and, for every group, the balanced two-block
    split between the shared block and that group (the classic
    cancellation geometry). Directions in `extra` ((G+1) x p stacks) are
    normalized onto the section and included. The result is an upper
    bound on the true inf that never increases with more trials.
    """
    G = dataset.n_groups
    p = dataset.dim
    if len(samplers) != G + 1:
        raise DimensionMismatch(f"need {G + 1} samplers, got {len(samplers)}")
    for s in samplers:
        if s.dim != p:
            raise DimensionMismatch("sampler dimension does not match dataset")
    w = weights.weights(dataset.counts)
    root = np.random.SeedSequence(seed)
    rng = np.random.default_rng(root)

    best = math.inf
    for _ in range(max(1, int(trials))):
        units = np.stack([sample_cone_direction(s, rng) for s in samplers])
        frac = rng.dirichlet(np.ones(G + 1))
        mags = frac / w
        best = min(best, _stacked_quadratic(dataset, units * mags[:, None]))
        for g in range(1, G + 1):
            pair = np.zeros((G + 1, p))
            a = 1.0 / (w[0] + w[g])
            pair[0] = a * units[0]
            pair[g] = a * units[g]
            best = min(best, _stacked_quadratic(dataset, pair))
    if extra is not None:
        for delta in extra:
            delta = np.asarray(delta, dtype=np.float64)
            if delta.shape != (G + 1, p):
                raise DimensionMismatch(
                    f"extra direction has shape {delta.shape}, expected {(G + 1, p)}"
                )
            best = min(
                best, _stacked_quadratic(dataset, _onto_weighted_section(delta, w))
            )
    return float(best)


@dataclass(frozen=True)
class DeicEstimate:
    """Per-group incoherence minima and the resulting sample fraction."""

    lambda_hat: np.ndarray
    rho_fraction: float
    threshold: float


def _pair_floor(c):
    """min over magnitudes of ||a u + b v|| / (a + b) given <u, v> = c:
    attained at a = b, value sqrt((1 + c) / 2)."""
    return math.sqrt(max(0.0, (1.0 + c) / 2.0))


def deic_probe(sampler0, samplers, counts, trials=1000, lambda_threshold=0.05,
               seed=0):
    """Estimate how far each group's error cone stays from cancelling the
    shared block's: lambda_hat[g] = min over sampled direction pairs of
    ||delta_0 + delta_g|| / (||delta_0|| + ||delta_g||), minimized in
    closed form over magnitudes. rho_fraction sums n_g/n over groups
    whose minimum clears the threshold.

    When both cones are explicit ray sets the pair minimum is evaluated
    exhaustively instead of sampled.
    """
    G = len(samplers)
    if len(counts) != G:
        raise DimensionMismatch(f"need {G} group counts, got {len(counts)}")
    if not 0.0 < lambda_threshold < 1.0:
        raise ValueError("lambda_threshold must lie in (0, 1)")
    if trials < 1:
        raise ValueError("trials must be positive")
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    root = np.random.SeedSequence(seed)
    lam = np.empty(G)
    for g, (sg, ss) in enumerate(zip(samplers, root.spawn(G))):
        if isinstance(sampler0, ExplicitRays) and isinstance(sg, ExplicitRays):
            c_min = float(np.min(sampler0.rays @ sg.rays.T))
            lam[g] = _pair_floor(c_min)
            continue
        rng = np.random.default_rng(ss)
        best = math.inf
        for _ in range(int(trials)):
            u = sample_cone_direction(sampler0, rng)
            v = sample_cone_direction(sg, rng)
            best = min(best, _pair_floor(float(u @ v)))
        lam[g] = best
    keep = lam >= lambda_threshold
    rho = float(counts[keep].sum() / n)
    return DeicEstimate(lambda_hat=lam, rho_fraction=rho, threshold=lambda_threshold)


@dataclass(frozen=True)
class ContractionEstimate:
    """Sampled contraction constants per block and the combined factor.

    rho[g] bounds the within-block contraction of block g (index 0 the
    shared block, using the stacked design); phi[g-1] the cross term
    between block g and the shared block; eta[g] the noise alignment
    (zero without noise). derived_rho combines them into the overall
    per-iteration factor: max(rho_0 + sum_g sqrt(n_g/n) phi_g,
    max_g [rho_g + sqrt(n/n_g) (mu_0/mu_g) phi_g]). All entries are
    sampled lower bounds of the true sups.
    """

    rho: np.ndarray
    phi: np.ndarray
    eta: np.ndarray
    derived_rho: float


def contraction_probe(dataset: GroupedDataset, samplers, steps: StepSizes,
                      noise=None, trials=200, seed=0):
    """Monte-Carlo estimates of the per-block contraction constants.

    For each block the sup over the cone-intersected unit ball is taken
    over sampled direction pairs (the ball allows 0, so estimates are
    clamped at 0). noise is an optional list of per-group noise vectors;
    omitted or zero noise gives eta = 0.
    """
    G = dataset.n_groups
    p = dataset.dim
    if len(samplers) != G + 1:
        raise DimensionMismatch(f"need {G + 1} samplers, got {len(samplers)}")
    if len(steps.mus) != G:
        raise DimensionMismatch("step sizes do not match the dataset")
    if noise is not None:
        if len(noise) != G:
            raise DimensionMismatch(f"need {G} noise vectors, got {len(noise)}")
        noise = [
            None if v is None else np.asarray(v, dtype=np.float64) for v in noise
        ]
        for g, v in enumerate(noise, start=1):
            if v is not None and v.shape != (dataset.counts[g - 1],):
                raise DimensionMismatch(
                    f"noise vector for group {g} has length {v.shape[0]}, "
                    f"expected {dataset.counts[g - 1]}",
                    block=g,
                )
    if trials < 1:
        raise ValueError("trials must be positive")

    root = np.random.SeedSequence(seed)
    streams = root.spawn(G + 1)
    U0 = _direction_matrix(samplers[0], np.random.default_rng(streams[0]), trials)

    rho = np.zeros(G + 1)
    phi = np.zeros(G)
    eta = np.zeros(G + 1)
    n = dataset.n
    counts = np.asarray(dataset.counts, dtype=np.float64)

    X_all, _, _ = dataset.packed
    S0 = X_all @ U0.T
    M0 = U0 @ U0.T - steps.mu0 * (S0.T @ S0)
    rho[0] = max(0.0, float(M0.max()))

    stacked_noise = None
    if noise is not None and any(v is not None for v in noise):
        stacked_noise = np.concatenate(
            [
                v if v is not None else np.zeros(dataset.counts[g])
                for g, v in enumerate(noise)
            ]
        )
        nn = float(np.linalg.norm(stacked_noise))
        if nn > 0:
            eta[0] = max(0.0, steps.mu0 * float(np.max(U0 @ (X_all.T @ (stacked_noise / nn)))))

    for g in range(1, G + 1):
        rng = np.random.default_rng(streams[g])
        Ug = _direction_matrix(samplers[g], rng, trials)
        Xg = dataset.groups[g - 1][0]
        mu = steps.mus[g - 1]
        Sg = Xg @ Ug.T
        Mg = Ug @ Ug.T - mu * (Sg.T @ Sg)
        rho[g] = max(0.0, float(Mg.max()))
        T0 = Xg @ U0.T
        phi[g - 1] = max(0.0, mu * float((-(Sg.T @ T0)).max()))
        if noise is not None and noise[g - 1] is not None:
            v = noise[g - 1]
            nn = float(np.linalg.norm(v))
            if nn > 0:
                eta[g] = max(0.0, mu * float(np.max(Ug @ (Xg.T @ (v / nn)))))

    shared_branch = rho[0] + float(np.sqrt(counts / n) @ phi)
    block_branch = max(
        rho[g] + math.sqrt(n / counts[g - 1]) * (steps.mu0 / steps.mus[g - 1]) * phi[g - 1]
        for g in range(1, G + 1)
    )
    derived = max(shared_branch, block_branch)
    return ContractionEstimate(rho=rho, phi=phi, eta=eta, derived_rho=derived)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Bundle of probe outputs for one instance."""

    widths: tuple
    re_kappa_sq: float | None
    deic: DeicEstimate | None
    contraction: ContractionEstimate | None
    gamma: float | None
    trials: int
    seed: int

    @property
    def re_kappa_min(self):
        """Unsquared form: min sampled (1/sqrt(n)) ||X delta||_2."""
        if self.re_kappa_sq is None:
            return None
        return math.sqrt(self.re_kappa_sq)

    def to_dict(self):
        out = {"trials": self.trials, "seed": self.seed}
        for g, w in enumerate(self.widths):
            out[f"width_{g}"] = w.value
            out[f"width_{g}_se"] = w.std_error
        if self.re_kappa_sq is not None:
            out["re_kappa_sq"] = self.re_kappa_sq
            out["re_kappa_min"] = self.re_kappa_min
        if self.deic is not None:
            for g, lam in enumerate(self.deic.lambda_hat, start=1):
                out[f"deic_lambda_{g}"] = float(lam)
            out["deic_rho_fraction"] = self.deic.rho_fraction
            out["deic_threshold"] = self.deic.threshold
        if self.contraction is not None:
            for g in range(self.contraction.rho.shape[0]):
                out[f"contraction_rho_{g}"] = float(self.contraction.rho[g])
                out[f"contraction_eta_{g}"] = float(self.contraction.eta[g])
            for g, v in enumerate(self.contraction.phi, start=1):
                out[f"contraction_phi_{g}"] = float(v)
            out["contraction_derived_rho"] = self.contraction.derived_rho
        if self.gamma is not None:
            out["gamma"] = self.gamma
        return out

    def table(self):
        """Human-readable two-column rendering of to_dict()."""
        d = self.to_dict()
        width = max(len(k) for k in d)
        lines = []
        for k, v in d.items():
            if isinstance(v, float):
                lines.append(f"{k:<{width}}  {v:.6g}")
            else:
                lines.append(f"{k:<{width}}  {v}")
        return "\n".join(lines)
