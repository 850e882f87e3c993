"""Risk-sensitive certainty-equivalent value iteration.

Risk-averse patients maximize expected exponential utility of lifetime;
rewards are measured in epochs alive (one unit per epoch waited), so the
recursion is undiscounted and convergence relies on death being reached.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    Action,
    DiscreteModelSpec,
    ModelValidationError,
    Policy,
    ROW_SUM_TOL,
    ValueFunction,
    validate_model,
)
from .solver import SolveOptions, TieBreak, marginal_values

#: iterations without residual improvement before declaring divergence
DIVERGENCE_WINDOW = 1000


@dataclass(frozen=True)
class RiskSpec:
    """Exponential-utility risk model.

    ``lifetime_pmf[h, k, j]`` is the probability of surviving j epochs after
    transplanting organ k in patient state h, j = 0..J.
    """

    risk_coefficient: float
    lifetime_pmf: np.ndarray

    def __post_init__(self):
        if self.risk_coefficient <= 0:
            raise ModelValidationError(["risk_coefficient must be positive"])
        pmf = np.asarray(self.lifetime_pmf, dtype=float)
        sums = pmf.sum(axis=-1)
        if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
            raise ModelValidationError(
                ["lifetime_pmf rows must sum to 1 "
                 f"(worst deviation {np.abs(sums - 1.0).max():.3g})"])
        pmf.setflags(write=False)
        object.__setattr__(self, "lifetime_pmf", pmf)

    @property
    def max_lifetime(self) -> int:
        return self.lifetime_pmf.shape[-1] - 1


def exp_utility(x, gamma):
    """u(x) = 1 - exp(-gamma x), computed without cancellation."""
    return -np.expm1(-gamma * np.asarray(x, dtype=float))


def exp_utility_inverse(y, gamma):
    return -np.log1p(-np.asarray(y, dtype=float)) / gamma


def certainty_equivalent(values, probs, gamma: float) -> float:
    """Deterministic outcome whose utility equals the expected utility.

    Always lies in [min(values), max(values)] and below the mean (u is
    concave).  If the expected utility numerically reaches 1, the result
    saturates at the maximum outcome and a warning is issued.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    eu = float(probs @ exp_utility(values, gamma))
    if eu >= 1.0 - 1e-300:
        warnings.warn("expected utility reached 1; certainty equivalent "
                      "saturated at the maximum outcome")
        return float(values.max())
    return float(exp_utility_inverse(eu, gamma))


def _transplant_ce(spec, risk):
    """Certainty-equivalent post-transplant lifetime per (h, k)."""
    gamma = risk.risk_coefficient
    j = np.arange(risk.lifetime_pmf.shape[-1])
    eu = risk.lifetime_pmf @ exp_utility(j, gamma)
    eu = np.clip(eu, 0.0, 1.0 - 1e-16)
    return exp_utility_inverse(eu, gamma)


def _risk_backup(spec, risk, values, vt):
    gamma = risk.risk_coefficient
    u_next = exp_utility(1.0 + values, gamma)          # (H, K)
    m = (spec.offer_prob * u_next).sum(axis=1)          # expected utility given h'
    ew = spec.transition @ m
    live = spec.live_patients()
    saturated = bool((ew[live] >= 1.0 - 1e-16).any())
    ew = np.clip(ew, 0.0, 1.0 - 1e-16)
    w = exp_utility_inverse(ew, gamma)                  # wait CE per h
    out = np.maximum(vt, w[:, None])
    out[:, spec.no_offer_index] = w
    out[spec.death_index, :] = 0.0
    return out, w, saturated


def risk_sensitive_value_iteration(spec: DiscreteModelSpec, risk: RiskSpec,
                                   opts: SolveOptions = SolveOptions()
                                   ) -> tuple[ValueFunction, Policy]:
    """Fixed point of the certainty-equivalent recursion.

    The recursion is undiscounted; divergence (residual failing to decrease
    over a long window) is flagged via ``converged=False`` together with a
    warning rather than an exception.
    """
    validate_model(spec)
    _check_2d(spec)
    vt = _transplant_ce(spec, risk)
    vt[spec.death_index, :] = 0.0

    V = np.zeros((spec.n_patient, spec.n_organ))
    best_residual = np.inf
    since_improvement = 0
    converged = False
    iterations = 0
    saturated = False
    for iterations in range(1, opts.max_iterations + 1):
        Vn, _, sat = _risk_backup(spec, risk, V, vt)
        saturated = saturated or sat
        delta = float(np.max(np.abs(Vn - V)))
        V = Vn
        if delta <= opts.tolerance:
            converged = True
            break
        if delta < best_residual - 1e-15:
            best_residual = delta
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= DIVERGENCE_WINDOW:
                warnings.warn("risk-sensitive recursion is not contracting; "
                              "returning the best iterate flagged non-converged")
                break
    if saturated:
        warnings.warn("wait-value expected utility saturated at 1; the "
                      "recursion likely diverges (is death reachable?)")
        converged = False
    img, w, _ = _risk_backup(spec, risk, V, vt)
    residual = float(np.max(np.abs(img - V)))
    vf = ValueFunction(values=V, marginal=marginal_values(spec, V),
                       residual=residual, iterations=iterations,
                       converged=converged)

    if opts.tie_break is TieBreak.PREFER_TRANSPLANT:
        take = vt >= w[:, None]
    else:
        take = vt > w[:, None]
    acts = np.where(take, int(Action.TRANSPLANT), int(Action.WAIT))
    acts[:, spec.no_offer_index] = Action.WAIT
    acts[spec.death_index, :] = Action.NONE
    return vf, Policy(spec.variant, acts)


def lifetime_value_iteration(spec: DiscreteModelSpec, risk: RiskSpec,
                             opts: SolveOptions = SolveOptions()
                             ) -> tuple[ValueFunction, Policy]:
    """Risk-neutral counterpart: maximize expected lifetime in epochs.

    Serves as the gamma -> 0 reference for the risk-sensitive solver.
    """
    validate_model(spec)
    _check_2d(spec)
    j = np.arange(risk.lifetime_pmf.shape[-1])
    vt = risk.lifetime_pmf @ j
    vt[spec.death_index, :] = 0.0

    V = np.zeros((spec.n_patient, spec.n_organ))
    converged = False
    iterations = 0
    w = np.zeros(spec.n_patient)
    for iterations in range(1, opts.max_iterations + 1):
        m = (spec.offer_prob * V).sum(axis=1)
        w = 1.0 + spec.transition @ m
        Vn = np.maximum(vt, w[:, None])
        Vn[:, spec.no_offer_index] = w
        Vn[spec.death_index, :] = 0.0
        delta = float(np.max(np.abs(Vn - V)))
        V = Vn
        if delta <= opts.tolerance:
            converged = True
            break
    vf = ValueFunction(values=V, marginal=marginal_values(spec, V),
                       residual=delta, iterations=iterations, converged=converged)
    if opts.tie_break is TieBreak.PREFER_TRANSPLANT:
        take = vt >= w[:, None]
    else:
        take = vt > w[:, None]
    acts = np.where(take, int(Action.TRANSPLANT), int(Action.WAIT))
    acts[:, spec.no_offer_index] = Action.WAIT
    acts[spec.death_index, :] = Action.NONE
    return vf, Policy(spec.variant, acts)


def _check_2d(spec):
    from .model import Variant
    if spec.variant not in (Variant.BASE,):
        raise ModelValidationError(
            ["risk-sensitive solving expects the base variant with unit wait "
             f"rewards, got {spec.variant.value}"])
    live = spec.live_patients()
    if np.abs(spec.wait_reward[live] - 1.0).max() > 0:
        raise ModelValidationError(
            ["risk-sensitive rewards are fixed at one unit per epoch alive; "
             "set wait_reward to 1 on live states"])
