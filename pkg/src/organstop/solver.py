"""Value iteration and greedy policy extraction for every discrete variant."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    Action,
    DIALYSIS_REGIME,
    DiscreteModelSpec,
    MEDICATION_REGIME,
    ModelValidationError,
    Orientation,
    Policy,
    ValueFunction,
    Variant,
    validate_model,
)


class TieBreak(str, Enum):
    PREFER_WAIT = "prefer_wait"
    PREFER_TRANSPLANT = "prefer_transplant"


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-8
    max_iterations: int = 100_000
    tie_break: TieBreak = TieBreak.PREFER_WAIT

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def zero_values(spec: DiscreteModelSpec) -> np.ndarray:
    if spec.variant is Variant.LIVING_DONOR:
        return np.zeros(spec.n_patient)
    if spec.variant is Variant.DIALYSIS:
        return np.zeros((2, spec.n_patient, spec.n_organ))
    return np.zeros((spec.n_patient, spec.n_organ))


def marginal_values(spec: DiscreteModelSpec, values: np.ndarray) -> np.ndarray:
    """Expectation of V(h, k) over the offer distribution: sum_k V(h,k) K(k|h)."""
    if spec.variant is Variant.LIVING_DONOR:
        return np.asarray(values, dtype=float).copy()
    return (spec.offer_prob * values).sum(axis=-1)


def _continuation(spec, values):
    """Per-variant wait values; shapes match the patient axis."""
    beta = spec.discount
    if spec.variant is Variant.LIVING_DONOR:
        return spec.wait_reward + beta * spec.transition @ values
    if spec.variant is Variant.DIALYSIS:
        vbar = marginal_values(spec, values)  # (2, H)
        cont_m = spec.wait_reward[0] + beta * spec.transition[0] @ vbar[0]
        cont_d = spec.wait_reward[1] + beta * spec.transition[1] @ vbar[1]
        return cont_m, cont_d
    vbar = marginal_values(spec, values)  # (H,)
    if spec.variant is Variant.CONTINUOUS_ANALOG:
        # reward accrues regardless of the action; discounting sits inside
        return spec.transition @ vbar
    return spec.wait_reward + beta * spec.transition @ vbar


def bellman_backup(spec: DiscreteModelSpec, values: np.ndarray) -> np.ndarray:
    """One application of the variant's Bellman operator.

    ``values`` must be zero at death states; the image keeps death at zero
    and is a discount-factor contraction in sup-norm.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != zero_values(spec).shape:
        raise ModelValidationError(
            [f"value shape {values.shape} does not match variant {spec.variant.value}"])
    death, nooff = spec.death_index, spec.no_offer_index
    R = spec.transplant_reward

    if spec.variant is Variant.LIVING_DONOR:
        out = np.maximum(spec.living_donor_reward(), _continuation(spec, values))
        out[death] = 0.0
        return out

    if spec.variant is Variant.DIALYSIS:
        cont_m, cont_d = _continuation(spec, values)
        out = np.empty_like(values)
        out[MEDICATION_REGIME] = np.maximum(
            R, np.maximum(cont_m, cont_d)[:, None])
        out[MEDICATION_REGIME, :, nooff] = np.maximum(cont_m, cont_d)
        out[DIALYSIS_REGIME] = np.maximum(R, cont_d[:, None])
        out[DIALYSIS_REGIME, :, nooff] = cont_d
        out[:, death, :] = 0.0
        return out

    cont = _continuation(spec, values)
    if spec.variant is Variant.CONTINUOUS_ANALOG:
        out = spec.wait_reward[:, None] + spec.discount * np.maximum(R, cont[:, None])
        out[:, nooff] = spec.wait_reward + spec.discount * cont
    elif spec.variant is Variant.COMBINED:
        best = np.maximum(R, spec.living_donor_reward()[:, None])
        out = np.maximum(best, cont[:, None])
        out[:, nooff] = np.maximum(spec.living_donor_reward(), cont)
    else:
        out = np.maximum(R, cont[:, None])
        out[:, nooff] = cont
    out[death, :] = 0.0
    return out


def _pick(candidates, actions, tie_break, transplant_first_order):
    """Greedy choice from stacked candidate values with deterministic ties.

    ``candidates`` is a list of arrays (same shape); ``actions`` the matching
    action codes.  On exact ties the earliest entry wins, so the caller
    orders by preference.
    """
    order = transplant_first_order if tie_break is TieBreak.PREFER_TRANSPLANT \
        else list(range(len(candidates)))
    stacked = np.stack([candidates[i] for i in order])
    choice = np.argmax(stacked, axis=0)
    codes = np.array([int(actions[i]) for i in order])
    return codes[choice]


def greedy_policy(spec: DiscreteModelSpec, values: np.ndarray,
                  tie_break: TieBreak = TieBreak.PREFER_WAIT) -> Policy:
    """Policy greedy with respect to ``values`` under the given tie-break.

    PREFER_WAIT resolves exact ties toward the non-transplant action (and
    TRANSPLANT over TRANSPLANT_LIVING among transplants); PREFER_TRANSPLANT
    is the reverse.
    """
    death, nooff = spec.death_index, spec.no_offer_index
    R = spec.transplant_reward

    if spec.variant is Variant.LIVING_DONOR:
        cont = _continuation(spec, values)
        acts = _pick([cont, spec.living_donor_reward()],
                     [Action.WAIT, Action.TRANSPLANT_LIVING], tie_break, [1, 0])
        acts[death] = Action.NONE
        return Policy(spec.variant, acts)

    if spec.variant is Variant.DIALYSIS:
        cont_m, cont_d = _continuation(spec, values)
        H, K = spec.n_patient, spec.n_organ
        med = _pick(
            [np.broadcast_to(cont_m[:, None], (H, K)),
             np.broadcast_to(cont_d[:, None], (H, K)), R],
            [Action.MEDICATION, Action.DIALYSIS, Action.TRANSPLANT],
            tie_break, [2, 0, 1])
        dia = _pick(
            [np.broadcast_to(cont_d[:, None], (H, K)), R],
            [Action.DIALYSIS, Action.TRANSPLANT], tie_break, [1, 0])
        med[:, nooff] = np.where(cont_d > cont_m, Action.DIALYSIS, Action.MEDICATION)
        dia[:, nooff] = Action.DIALYSIS
        acts = np.stack([med, dia])
        acts[:, death, :] = Action.NONE
        return Policy(spec.variant, acts)

    cont = _continuation(spec, values)
    if spec.variant is Variant.CONTINUOUS_ANALOG:
        cont_grid = np.broadcast_to(cont[:, None], R.shape)
        acts = _pick([cont_grid, R], [Action.WAIT, Action.TRANSPLANT],
                     tie_break, [1, 0])
    elif spec.variant is Variant.COMBINED:
        cont_grid = np.broadcast_to(cont[:, None], R.shape)
        rld = np.broadcast_to(spec.living_donor_reward()[:, None], R.shape)
        acts = _pick([cont_grid, R, rld],
                     [Action.WAIT, Action.TRANSPLANT, Action.TRANSPLANT_LIVING],
                     tie_break, [1, 2, 0])
    else:
        cont_grid = np.broadcast_to(cont[:, None], R.shape)
        acts = _pick([cont_grid, R], [Action.WAIT, Action.TRANSPLANT],
                     tie_break, [1, 0])
    # no transplant without an offer
    col = acts[:, nooff]
    if spec.variant is Variant.COMBINED:
        rld = spec.living_donor_reward()
        tie_t = tie_break is TieBreak.PREFER_TRANSPLANT
        take_ld = (rld > cont) if not tie_t else (rld >= cont)
        acts[:, nooff] = np.where(take_ld, Action.TRANSPLANT_LIVING, Action.WAIT)
    else:
        acts[:, nooff] = Action.WAIT
    acts[death, :] = Action.NONE
    return Policy(spec.variant, acts)


def solve_value_iteration(spec: DiscreteModelSpec,
                          opts: SolveOptions = SolveOptions()
                          ) -> tuple[ValueFunction, Policy]:
    """Iterate the Bellman operator to its fixed point.

    Returns the value function (with achieved sup-norm Bellman residual and
    iteration count) and the greedy policy.  If ``max_iterations`` is hit
    before the residual target, the best iterate is returned flagged
    non-converged.
    """
    validate_model(spec)
    V = zero_values(spec)
    iterations = 0
    converged = False
    for iterations in range(1, opts.max_iterations + 1):
        Vn = bellman_backup(spec, V)
        delta = float(np.max(np.abs(Vn - V)))
        V = Vn
        if delta <= opts.tolerance:
            converged = True
            break
    residual = float(np.max(np.abs(bellman_backup(spec, V) - V)))
    vf = ValueFunction(values=V, marginal=marginal_values(spec, V),
                       residual=residual, iterations=iterations,
                       converged=converged)
    return vf, greedy_policy(spec, V, opts.tie_break)


def solve_living_donor(spec: DiscreteModelSpec,
                       opts: SolveOptions = SolveOptions()
                       ) -> tuple[ValueFunction, Policy]:
    """Solve the one-dimensional living-donor chain over {wait, transplant}."""
    if spec.variant is not Variant.LIVING_DONOR:
        raise ModelValidationError(
            [f"solve_living_donor requires the living_donor variant, got "
             f"{spec.variant.value}"])
    return solve_value_iteration(spec, opts)


def build_continuous_analog_spec(
    transition_density,
    offer_density,
    success_prob,
    success_reward: float,
    alive_reward: float,
    discount: float,
    patient_grid: np.ndarray,
    organ_grid: np.ndarray,
) -> DiscreteModelSpec:
    """Discretize the continuous-state model onto a rectangular grid.

    ``patient_grid`` / ``organ_grid`` are cell midpoints in ascending state
    value (larger = better, matching that model's convention).  The
    transition density is interpolated piecewise-constant: row masses are
    density values at midpoints, renormalized, which keeps the backup a
    contraction.  A death state with no inflow is appended so the result is
    a valid spec.
    """
    hs = np.asarray(patient_grid, dtype=float)
    ks = np.asarray(organ_grid, dtype=float)
    nh, nk = len(hs), len(ks)

    trans = np.zeros((nh + 1, nh + 1))
    for i, h in enumerate(hs):
        row = np.array([max(transition_density(hp, h), 0.0) for hp in hs])
        total = row.sum()
        if total <= 0:
            raise ValueError(f"transition density vanishes on the grid at h={h}")
        trans[i, :nh] = row / total
    trans[nh, nh] = 1.0

    offer_row = np.array([max(offer_density(k), 0.0) for k in ks])
    if offer_row.sum() <= 0:
        raise ValueError("offer density vanishes on the grid")
    offer = np.zeros((nh + 1, nk + 1))
    offer[:, :nk] = offer_row / offer_row.sum()

    p = np.zeros((nh + 1, nk + 1))
    for i, h in enumerate(hs):
        for j, k in enumerate(ks):
            p[i, j] = min(max(success_prob(h, k), 0.0), 1.0)

    wait = np.full(nh + 1, float(alive_reward))
    wait[nh] = 0.0

    spec = DiscreteModelSpec(
        variant=Variant.CONTINUOUS_ANALOG,
        n_patient=nh + 1, death_index=nh,
        n_organ=nk + 1, no_offer_index=nk,
        patient_orientation=Orientation.LARGER_IS_BETTER,
        organ_orientation=Orientation.LARGER_IS_BETTER,
        transition=trans, offer_prob=offer, wait_reward=wait,
        transplant_reward=p * success_reward,
        discount=discount,
        success_prob=p, success_reward=float(success_reward),
    )
    return validate_model(spec)
