"""Monte Carlo estimator against solver values and closed forms."""

import math

import numpy as np
import pytest

from organstop import (
    Action,
    ContinuousModelSpec,
    DiscreteModelSpec,
    FixedInstants,
    NonhomogeneousPoissonArrivals,
    Policy,
    PoissonArrivals,
    SolveOptions,
    UniformOffers,
    Variant,
    brute_force_optimal,
    continuous_time_simulate,
    estimate_policy_value,
    exponential_lifetime,
    finite_horizon_thresholds,
    recompute_reward,
    simulate_trajectory,
    solve_value_iteration,
    validate_model,
)
from organstop.simulate import trajectory_rng

from helpers import random_base_spec, random_dialysis_spec


def deterministic_chain():
    """h0 -> h1 -> death with certainty; wait everywhere."""
    return validate_model(DiscreteModelSpec(
        variant=Variant.BASE,
        n_patient=3, death_index=2,
        n_organ=2, no_offer_index=1,
        transition=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]),
        offer_prob=np.tile([0.5, 0.5], (3, 1)),
        wait_reward=np.array([1.0, 0.5, 0.0]),
        transplant_reward=np.array([[2.0, 0.0], [1.0, 0.0], [0.0, 0.0]]),
        discount=0.9,
    ))


def wait_policy(spec):
    actions = np.full((spec.n_patient, spec.n_organ), int(Action.WAIT))
    actions[spec.death_index] = Action.NONE
    return Policy(spec.variant, actions)


def test_zero_reward_spec_gives_zero():
    spec = deterministic_chain()
    zeroed = validate_model(DiscreteModelSpec(
        **{**{f: getattr(spec, f) for f in (
            "variant", "n_patient", "death_index", "n_organ", "no_offer_index",
            "transition", "offer_prob", "discount")},
           "wait_reward": np.zeros(3), "transplant_reward": np.zeros((3, 2))}))
    est = estimate_policy_value(zeroed, wait_policy(zeroed), 50, seed=1)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_deterministic_path_reward_is_exact():
    spec = deterministic_chain()
    est = estimate_policy_value(spec, wait_policy(spec), 100, seed=2)
    assert est.std_error <= 1e-12  # identical paths, up to summation noise
    assert est.mean == pytest.approx(1.0 + 0.9 * 0.5, abs=1e-12)


def test_recompute_reward_matches_stored_exactly():
    rng_seed = 3
    specs = [random_base_spec(np.random.default_rng(10)),
             random_dialysis_spec(np.random.default_rng(11))]
    for spec in specs:
        _, policy = solve_value_iteration(spec)
        for i in range(50):
            rec = simulate_trajectory(spec, policy,
                                      trajectory_rng(rng_seed, i),
                                      record_path=True)
            assert recompute_reward(spec, rec) == rec.reward


def test_trajectory_streams_are_stable():
    spec = random_base_spec(np.random.default_rng(12))
    _, policy = solve_value_iteration(spec)
    a = estimate_policy_value(spec, policy, 200, seed=7)
    b = estimate_policy_value(spec, policy, 200, seed=7)
    assert a.mean == b.mean
    # trajectory i does not depend on how many others run
    r_small = [simulate_trajectory(spec, policy, trajectory_rng(7, i)).reward
               for i in range(5)]
    r_large = [simulate_trajectory(spec, policy, trajectory_rng(7, i)).reward
               for i in range(5)]
    assert r_small == r_large


def test_estimate_covers_solver_value():
    spec = random_base_spec(np.random.default_rng(13), n_live=3, n_offered=2)
    vf, policy = solve_value_iteration(spec, SolveOptions(tolerance=1e-10))
    est = estimate_policy_value(spec, policy, 20_000, seed=5)
    start_value = vf.marginal[0]
    assert abs(est.mean - start_value) <= 3 * est.std_error


def test_brute_force_certifies_optimality():
    rng = np.random.default_rng(14)
    spec = random_base_spec(rng, n_live=3, n_offered=2)
    opt_vals, _ = brute_force_optimal(spec)
    opt_start = float((spec.offer_prob[0] * opt_vals[0]).sum())
    # no alternative policy's estimate may beat the certified optimum
    for limits in ([-1, -1, -1], [0, 0, 0], [1, 1, 1], [-1, 0, 1]):
        from organstop import policy_from_organ_limits
        pol = policy_from_organ_limits(spec, limits)
        est = estimate_policy_value(spec, pol, 4000, seed=6)
        assert est.mean <= opt_start + 3 * est.std_error


def test_brute_force_bounds():
    spec = random_base_spec(np.random.default_rng(15), n_live=5, n_offered=3)
    with pytest.raises(ValueError):
        brute_force_optimal(spec)


def test_seed_batches_have_consistent_variance():
    spec = random_base_spec(np.random.default_rng(16))
    _, policy = solve_value_iteration(spec)
    ests = [estimate_policy_value(spec, policy, 500, seed=s).mean
            for s in range(20)]
    within = estimate_policy_value(spec, policy, 500, seed=0).std_error
    ratio = np.std(ests, ddof=1) / within
    assert 0.5 < ratio < 2.0


# --- continuous time ----------------------------------------------------------

def test_zero_arrival_rate_means_zero_reward():
    spec = ContinuousModelSpec(
        offers=UniformOffers(0.0, 1.0),
        arrivals=PoissonArrivals(rate=0.0),
        lifetime=exponential_lifetime(1.0),
    )
    est = continuous_time_simulate(spec, lambda t: 0.0, 500, seed=1)
    assert est.mean == 0.0


def test_single_instant_accept_all_mean():
    alpha = 0.6
    spec = ContinuousModelSpec(
        offers=UniformOffers(0.0, 1.0),
        arrivals=FixedInstants(np.array([1.0])),
        survival_alphas=np.array([alpha]),
    )
    est = continuous_time_simulate(spec, np.array([0.0]), 40_000, seed=2)
    assert abs(est.mean - alpha * 0.5) <= 3 * est.std_error


def test_fixed_instants_rule_value_matches_recursion():
    spec = ContinuousModelSpec(
        offers=UniformOffers(0.0, 1.0),
        arrivals=FixedInstants(np.arange(1.0, 9.0)),
        survival_alphas=np.full(8, 0.9),
    )
    lam = finite_horizon_thresholds(spec)
    est = continuous_time_simulate(spec, lam, 40_000, seed=3)
    # value of the rule = alpha_0 E[max(X, lam_0)] with uniform offers
    expected = 0.9 * (1 + lam[0] ** 2) / 2
    assert abs(est.mean - expected) <= 3 * est.std_error


def test_thinning_requires_rate_bound():
    spec = ContinuousModelSpec(
        offers=UniformOffers(0.0, 1.0),
        arrivals=NonhomogeneousPoissonArrivals(rate_fn=lambda t: 1.0),
        lifetime=exponential_lifetime(1.0),
    )
    with pytest.raises(ValueError):
        continuous_time_simulate(spec, lambda t: 0.0, 10, seed=4)


def test_thinning_matches_homogeneous():
    offers = UniformOffers(0.0, 1.0)
    life = exponential_lifetime(0.5)
    rule = lambda t: 0.3
    homo = continuous_time_simulate(
        ContinuousModelSpec(offers=offers, arrivals=PoissonArrivals(1.0),
                            lifetime=life),
        rule, 40_000, seed=5)
    thin = continuous_time_simulate(
        ContinuousModelSpec(
            offers=offers,
            arrivals=NonhomogeneousPoissonArrivals(rate_fn=lambda t: 1.0,
                                                   rate_bound=4.0),
            lifetime=life),
        rule, 40_000, seed=6)
    gap = abs(homo.mean - thin.mean)
    assert gap <= 3 * math.hypot(homo.std_error, thin.std_error)


def test_continuous_simulation_reproducible():
    spec = ContinuousModelSpec(
        offers=UniformOffers(0.0, 1.0),
        arrivals=PoissonArrivals(1.0),
        lifetime=exponential_lifetime(0.5),
    )
    a = continuous_time_simulate(spec, lambda t: 0.4, 1000, seed=9)
    b = continuous_time_simulate(spec, lambda t: 0.4, 1000, seed=9)
    assert a.mean == b.mean
