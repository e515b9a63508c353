import numpy as np
import pytest

from dataenrich import (
    Constraint,
    ConstraintSpec,
    ExplicitRays,
    FullSpace,
    L1DescentCone,
    L2DescentCone,
    ParameterStack,
    GroupedDataset,
    contraction_probe,
    deic_probe,
    default_step_sizes,
    gaussian_width_mc,
    re_probe,
    sample_cone_direction,
    samplers_for,
)

from oracles import chi_mean


def test_full_space_width_matches_chi_mean():
    for p in (1, 3, 10):
        est = gaussian_width_mc(FullSpace(p), n_gaussians=3000, seed=0)
        assert abs(est.value - chi_mean(p)) < 3 * est.std_error
        assert est.std_error > 0


def test_chi_mean_oracle_values():
    assert chi_mean(1) == pytest.approx(np.sqrt(2 / np.pi))
    assert chi_mean(2) == pytest.approx(np.sqrt(np.pi / 2))
    # large p: mean approaches sqrt(p)
    assert chi_mean(100) == pytest.approx(9.9749, abs=1e-3)


def test_single_ray_width_zero_mean():
    # sup over a single unit ray is <g, u>, whose mean is 0
    ray = np.zeros((1, 4))
    ray[0, 0] = 1.0
    est = gaussian_width_mc(ExplicitRays(ray), n_gaussians=2000, seed=1)
    assert abs(est.value) < 3 * est.std_error


def test_opposite_rays_width_half_normal():
    rays = np.array([[1.0, 0.0], [-1.0, 0.0]])
    est = gaussian_width_mc(ExplicitRays(rays), n_gaussians=4000, seed=2)
    assert abs(est.value - np.sqrt(2 / np.pi)) < 3 * est.std_error


def test_width_estimate_deterministic():
    a = gaussian_width_mc(FullSpace(5), n_gaussians=500, seed=3)
    b = gaussian_width_mc(FullSpace(5), n_gaussians=500, seed=3)
    assert a.value == b.value and a.std_error == b.std_error


def test_l1_descent_cone_membership():
    rng = np.random.default_rng(4)
    ref = np.array([2.0, -1.0, 0.0, 0.0])
    cone = L1DescentCone(ref)
    for _ in range(200):
        u = sample_cone_direction(cone, rng)
        assert cone.contains(u)
        assert np.linalg.norm(u) == pytest.approx(1.0)
    # shrinking the positive support coordinate stays in the cone
    u = np.array([-1.0, 0.0, 0.0, 0.0])
    assert cone.contains(u)
    # growing the l1 norm leaves it
    assert not cone.contains(np.array([1.0, 0.0, 0.0, 0.0]))


def test_l2_descent_cone_membership():
    rng = np.random.default_rng(5)
    ref = np.array([1.0, 1.0, 0.0])
    cone = L2DescentCone(ref)
    for _ in range(200):
        u = sample_cone_direction(cone, rng)
        assert cone.contains(u)
        # descent directions never have positive radial component
        assert u @ ref <= 1e-9
    assert cone.contains(-ref / np.linalg.norm(ref))
    assert not cone.contains(ref / np.linalg.norm(ref))


def test_samplers_for_dispatch():
    truth = ParameterStack(np.array([1.0, 0.0]),
                           (np.array([0.0, 2.0]), np.array([1.0, 1.0])))
    cons = ConstraintSpec((
        Constraint.unconstrained(),
        Constraint.l1(2.0),
        Constraint.l2(np.sqrt(2.0)),
    ))
    s = samplers_for(truth, cons)
    assert isinstance(s[0], FullSpace)
    assert isinstance(s[1], L1DescentCone)
    assert isinstance(s[2], L2DescentCone)
    assert len(s) == 3


def test_deic_probe_ray_cases():
    e1 = np.array([[1.0, 0.0, 0.0]])
    # parallel single rays: ||u+v||/2 with u=v gives lambda_min 1
    est = deic_probe(ExplicitRays(e1), [ExplicitRays(e1)], counts=(10,), trials=50)
    assert est.lambda_hat[0] == pytest.approx(1.0, abs=1e-12)
    # opposing rays cancel exactly
    est = deic_probe(ExplicitRays(e1), [ExplicitRays(-e1)], counts=(10,), trials=50)
    assert est.lambda_hat[0] == pytest.approx(0.0, abs=1e-12)
    # orthogonal disjoint-support rays: sqrt(1/2)
    e2 = np.array([[0.0, 1.0, 0.0]])
    est = deic_probe(ExplicitRays(e1), [ExplicitRays(e2)], counts=(10,), trials=50)
    assert est.lambda_hat[0] == pytest.approx(np.sqrt(0.5), abs=1e-3)


def test_deic_probe_fraction_and_range():
    e1 = np.array([[1.0, 0.0]])
    e2 = np.array([[0.0, 1.0]])
    est = deic_probe(ExplicitRays(e1),
                     [ExplicitRays(-e1), ExplicitRays(e2)],
                     counts=(30, 10), trials=50, lambda_threshold=0.05)
    assert 0.0 <= min(est.lambda_hat) <= max(est.lambda_hat) <= 1.0
    # only the orthogonal group clears the threshold: 10/40 of samples
    assert est.rho_fraction == pytest.approx(0.25)


def test_re_probe_positive_on_identity_designs():
    rng = np.random.default_rng(6)
    X = np.eye(4)
    ds = GroupedDataset(((X, np.zeros(4)), (X, np.zeros(4))))
    samplers = [FullSpace(4), FullSpace(4), FullSpace(4)]
    kappa = re_probe(ds, samplers, trials=300, seed=0)
    assert kappa > 0


def test_re_probe_detects_cancellation():
    # one group, opposing shared/individual rays: delta_0 = -delta_1 makes
    # X(delta_0 + delta_1) vanish on the section
    rng = np.random.default_rng(7)
    X = rng.standard_normal((6, 3))
    ds = GroupedDataset(((X, np.zeros(6)),))
    u = np.zeros((1, 3))
    u[0, 0] = 1.0
    samplers = [ExplicitRays(u), ExplicitRays(-u)]
    kappa = re_probe(ds, samplers, trials=200, seed=1)
    assert kappa < 1e-9


def test_re_probe_minimum_shrinks_with_more_trials():
    rng = np.random.default_rng(8)
    groups = tuple((rng.standard_normal((8, 4)), np.zeros(8)) for _ in range(2))
    ds = GroupedDataset(groups)
    samplers = [FullSpace(4)] * 3
    k_small = re_probe(ds, samplers, trials=50, seed=2)
    k_large = re_probe(ds, samplers, trials=500, seed=2)
    assert k_large <= k_small + 1e-15


def test_contraction_probe_outputs():
    rng = np.random.default_rng(9)
    p, G, ng = 6, 2, 40
    beta0 = rng.standard_normal(p)
    betas = [np.zeros(p), np.zeros(p)]
    betas[0][0] = 1.0
    betas[1][1] = -1.5
    groups = tuple((X := rng.standard_normal((ng, p)), X @ (beta0 + b)) for b in betas)
    ds = GroupedDataset(groups)
    truth = ParameterStack(beta0, tuple(betas))
    cons = ConstraintSpec((
        Constraint.unconstrained(),
        Constraint.l1(1.0),
        Constraint.l1(1.5),
    ))
    samplers = samplers_for(truth, cons)
    steps = default_step_sizes(ds)
    est = contraction_probe(ds, samplers, steps, trials=100, seed=0)
    assert est.rho.shape == (G + 1,)
    assert est.phi.shape == (G,)
    assert np.all(est.rho >= 0) and np.all(est.phi >= 0)
    assert np.isfinite(est.derived_rho)
    # noise-free probe reports zero noise terms
    assert np.all(est.eta == 0)
    # deterministic given the seed
    est2 = contraction_probe(ds, samplers, steps, trials=100, seed=0)
    assert est.derived_rho == est2.derived_rho
    # ample samples per group: smaller steps shrink the coupling phi
    from dataenrich import StepSizes
    small = StepSizes(steps.mu0 / 10, tuple(m / 10 for m in steps.mus))
    est3 = contraction_probe(ds, samplers, small, trials=100, seed=0)
    assert np.all(est3.phi <= est.phi + 1e-15)


def test_cone_sampling_error():
    from dataenrich import ConeSamplingError

    class Impossible:
        dim = 3

        def propose(self, rng):
            return np.zeros(3)

        def contains(self, u):
            return False

        def exact_support(self, g):
            return None

    rng = np.random.default_rng(10)
    with pytest.raises(ConeSamplingError):
        sample_cone_direction(Impossible(), rng, max_attempts=50)
