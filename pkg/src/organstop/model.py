"""Domain types for the discrete-time organ-acceptance models.

A model is a finite optimal-stopping MDP over (patient state, offer state)
with one reserved absorbing death index on the patient axis and one reserved
"no offer" index on the organ axis.  All probability data is plain numpy;
validation seals the arrays read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum

import numpy as np

ROW_SUM_TOL = 1e-9
ORDER_TOL = 1e-12

MEDICATION_REGIME = 0
DIALYSIS_REGIME = 1


class Variant(str, Enum):
    BASE = "base"
    LIVING_DONOR = "living_donor"
    COMBINED = "combined"
    DIALYSIS = "dialysis"
    CONTINUOUS_ANALOG = "continuous_analog"


class Orientation(str, Enum):
    LARGER_IS_WORSE = "larger_is_worse"
    LARGER_IS_BETTER = "larger_is_better"


class Action(IntEnum):
    WAIT = 0
    TRANSPLANT = 1          # accept the offered (deceased-donor) organ
    TRANSPLANT_LIVING = 2   # accept the living-donor organ
    MEDICATION = 3          # dialysis variant: stay on medication
    DIALYSIS = 4            # dialysis variant: be (or go) on dialysis
    NONE = 5                # no-op assigned to death cells


#: actions that terminate the decision process
TERMINAL_ACTIONS = frozenset({Action.TRANSPLANT, Action.TRANSPLANT_LIVING})


class ModelValidationError(ValueError):
    """Raised when a model spec violates an invariant.

    ``errors`` holds one message per violation, each naming the offending
    field and index.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class DiscreteModelSpec:
    """Full parametrization of one discrete-time model variant.

    ``transition`` is (H, H) row-stochastic, or (2, H, H) for the dialysis
    variant (index 0 = medication regime, 1 = dialysis regime).
    ``wait_reward`` is (H,), or (2, H) for dialysis.  ``offer_prob`` rows are
    conditional offer distributions given the (next) patient state.
    ``transplant_reward[h, k]`` is the terminal reward of accepting organ k
    in patient state h; the ``living_donor_state`` column doubles as the
    living-donor reward column.
    """

    variant: Variant
    n_patient: int
    death_index: int
    n_organ: int
    no_offer_index: int
    transition: np.ndarray
    offer_prob: np.ndarray
    wait_reward: np.ndarray
    transplant_reward: np.ndarray
    discount: float
    patient_orientation: Orientation = Orientation.LARGER_IS_WORSE
    organ_orientation: Orientation = Orientation.LARGER_IS_WORSE
    living_donor_state: int | None = None
    # continuous-analog extras: transplant_reward == success_prob * success_reward
    success_prob: np.ndarray | None = None
    success_reward: float | None = None

    def live_patients(self) -> np.ndarray:
        return np.array([h for h in range(self.n_patient) if h != self.death_index])

    def offered_organs(self) -> np.ndarray:
        return np.array([k for k in range(self.n_organ) if k != self.no_offer_index])

    def transition_for(self, regime: int | None = None) -> np.ndarray:
        if self.variant is Variant.DIALYSIS:
            return self.transition[regime]
        return self.transition

    def wait_reward_for(self, regime: int | None = None) -> np.ndarray:
        if self.variant is Variant.DIALYSIS:
            return self.wait_reward[regime]
        return self.wait_reward

    def living_donor_reward(self) -> np.ndarray:
        return self.transplant_reward[:, self.living_donor_state]

    def is_canonical(self) -> bool:
        return (
            self.patient_orientation is Orientation.LARGER_IS_WORSE
            and self.organ_orientation is Orientation.LARGER_IS_WORSE
            and self.death_index == self.n_patient - 1
            and self.no_offer_index == self.n_organ - 1
        )


@dataclass(frozen=True)
class Policy:
    """Stationary decision rule.

    ``actions`` holds :class:`Action` codes: shape (H, K) for the
    two-dimensional variants, (H,) for the living-donor chain and
    (2, H, K) for the dialysis variant (leading regime axis).
    """

    variant: Variant
    actions: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.actions, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "actions", arr)


@dataclass(frozen=True)
class ValueFunction:
    """Value per state with its Bellman-residual certificate."""

    values: np.ndarray
    marginal: np.ndarray | None
    residual: float
    iterations: int
    converged: bool


def _check_stochastic_rows(matrix, name, errors, axis_name="patient state"):
    matrix = np.asarray(matrix, dtype=float)
    for i, row in enumerate(matrix):
        s = row.sum()
        if abs(s - 1.0) > ROW_SUM_TOL:
            errors.append(f"{name}: row sum {s:.12g} at {axis_name} {i}")
        if (row < -ROW_SUM_TOL).any() or (row > 1.0 + ROW_SUM_TOL).any():
            j = int(np.argmax((row < -ROW_SUM_TOL) | (row > 1.0 + ROW_SUM_TOL)))
            errors.append(f"{name}: entry {row[j]:.12g} outside [0,1] at ({i},{j})")


def validation_errors(spec: DiscreteModelSpec) -> list[str]:
    """Check every spec invariant, returning one message per violation."""
    errors: list[str] = []
    H, K = spec.n_patient, spec.n_organ
    death, nooff = spec.death_index, spec.no_offer_index

    if not (0 <= death < H):
        errors.append(f"death_index {death} outside [0,{H})")
        return errors
    if not (0 <= nooff < K):
        errors.append(f"no_offer_index {nooff} outside [0,{K})")
        return errors

    trans = np.asarray(spec.transition, dtype=float)
    expected_tshape = (2, H, H) if spec.variant is Variant.DIALYSIS else (H, H)
    if trans.shape != expected_tshape:
        errors.append(f"transition: shape {trans.shape}, expected {expected_tshape}")
        return errors
    matrices = trans if spec.variant is Variant.DIALYSIS else trans[None]
    for a, mat in enumerate(matrices):
        name = "transition" if len(matrices) == 1 else f"transition[{a}]"
        _check_stochastic_rows(mat, name, errors)
        if abs(mat[death, death] - 1.0) > ROW_SUM_TOL:
            errors.append(f"{name}: death row not absorbing "
                          f"(transition(death->death) = {mat[death, death]:.12g})")

    offer = np.asarray(spec.offer_prob, dtype=float)
    if offer.shape != (H, K):
        errors.append(f"offer_prob: shape {offer.shape}, expected {(H, K)}")
        return errors
    _check_stochastic_rows(offer, "offer_prob", errors)

    wait = np.asarray(spec.wait_reward, dtype=float)
    expected_wshape = (2, H) if spec.variant is Variant.DIALYSIS else (H,)
    if wait.shape != expected_wshape:
        errors.append(f"wait_reward: shape {wait.shape}, expected {expected_wshape}")
        return errors
    if (wait < 0).any():
        errors.append("wait_reward: negative entry")
    if np.abs(wait[..., death]).max() > 0:
        errors.append(f"wait_reward: nonzero reward {np.max(np.abs(wait[..., death])):.12g} "
                      "at death state")

    R = np.asarray(spec.transplant_reward, dtype=float)
    if R.shape != (H, K):
        errors.append(f"transplant_reward: shape {R.shape}, expected {(H, K)}")
        return errors
    if (R < 0).any():
        errors.append("transplant_reward: negative entry")
    if np.abs(R[death]).max() > 0:
        errors.append(f"transplant_reward: nonzero reward at death state "
                      f"(max {np.abs(R[death]).max():.12g})")

    if not (0.0 < spec.discount < 1.0):
        errors.append(f"discount {spec.discount} outside (0,1)")

    if spec.variant in (Variant.LIVING_DONOR, Variant.COMBINED):
        if spec.living_donor_state is None:
            errors.append(f"living donor state required for {spec.variant.value}")
        elif not (0 <= spec.living_donor_state < K):
            errors.append(f"living_donor_state {spec.living_donor_state} outside [0,{K})")
        elif spec.living_donor_state == nooff:
            errors.append("living_donor_state collides with no_offer_index")
    elif spec.variant is Variant.BASE and spec.living_donor_state is not None:
        errors.append("living donor forbidden for Base")

    if spec.variant is Variant.CONTINUOUS_ANALOG:
        if (spec.success_prob is None) != (spec.success_reward is None):
            errors.append("success_prob and success_reward must be given together")
        elif spec.success_prob is not None:
            p = np.asarray(spec.success_prob, dtype=float)
            if p.shape != (H, K):
                errors.append(f"success_prob: shape {p.shape}, expected {(H, K)}")
            elif (p < -ROW_SUM_TOL).any() or (p > 1 + ROW_SUM_TOL).any():
                errors.append("success_prob: entry outside [0,1]")
            elif spec.success_reward < 0:
                errors.append(f"success_reward {spec.success_reward} negative")
            elif np.abs(p * spec.success_reward - R).max() > 1e-9 * max(1.0, abs(spec.success_reward)):
                errors.append("transplant_reward inconsistent with success_prob * success_reward")
    elif spec.success_prob is not None or spec.success_reward is not None:
        errors.append(f"success fields forbidden for {spec.variant.value}")

    return errors


def validate_model(spec: DiscreteModelSpec) -> DiscreteModelSpec:
    """Return the spec with arrays sealed read-only, or raise.

    Raises :class:`ModelValidationError` listing every violated invariant.
    """
    errors = validation_errors(spec)
    if errors:
        raise ModelValidationError(errors)
    for name in ("transition", "offer_prob", "wait_reward", "transplant_reward",
                 "success_prob"):
        arr = getattr(spec, name)
        if arr is None:
            continue
        arr = np.ascontiguousarray(np.asarray(arr, dtype=float))
        arr.setflags(write=False)
        object.__setattr__(spec, name, arr)
    return spec


@dataclass(frozen=True)
class IfrReport:
    holds: bool
    # smallest violating (row i, row i+1, tail start l), in input coordinates
    witness: tuple[int, int, int] | None = None


def check_ifr(matrix: np.ndarray,
              ordering: Orientation = Orientation.LARGER_IS_WORSE) -> IfrReport:
    """Check the discrete IFR property of a row-stochastic matrix.

    Rows must be nondecreasing in the usual stochastic order: under the
    worse-is-larger orientation, tail sums sum_{j>=l} P(j|i) nondecreasing
    in i for every l.  The opposite orientation is checked by flipping both
    axes first.
    """
    m = np.asarray(matrix, dtype=float)
    flipped = ordering is Orientation.LARGER_IS_BETTER
    if flipped:
        m = m[::-1, ::-1]
    n = m.shape[0]
    tails = np.cumsum(m[:, ::-1], axis=1)[:, ::-1]  # tails[i, l] = sum_{j >= l}
    for i in range(n - 1):
        bad = tails[i, :] > tails[i + 1, :] + ORDER_TOL
        if bad.any():
            l = int(np.argmax(bad))
            if flipped:
                return IfrReport(False, (n - 2 - i, n - 1 - i, m.shape[1] - 1 - l))
            return IfrReport(False, (i, i + 1, l))
    return IfrReport(True, None)


@dataclass(frozen=True)
class MonotonicityReport:
    wait_monotone: bool
    transplant_monotone: bool
    # first violation per function, as (description, index pair) or None
    wait_violation: tuple | None = None
    transplant_violation: tuple | None = None

    @property
    def monotone(self) -> bool:
        return self.wait_monotone and self.transplant_monotone


def check_monotone_rewards(spec: DiscreteModelSpec) -> MonotonicityReport:
    """Report whether rewards are nonincreasing as health/quality worsens.

    The spec is canonicalized internally; violation indices refer to the
    canonical ordering (larger index = worse, death/no-offer last).
    """
    c = canonicalize_orientation(spec)
    live_h = c.n_patient - 1
    live_k = c.n_organ - 1

    wait = np.atleast_2d(c.wait_reward)
    wait_viol = None
    for a, r in enumerate(wait):
        diffs = np.diff(r[:live_h])
        if (diffs > ORDER_TOL).any():
            i = int(np.argmax(diffs > ORDER_TOL))
            wait_viol = ("wait_reward", i, i + 1)
            break

    R = c.transplant_reward[:live_h, :live_k]
    trans_viol = None
    d_h = np.diff(R, axis=0)
    d_k = np.diff(R, axis=1)
    if (d_h > ORDER_TOL).any():
        i, k = np.argwhere(d_h > ORDER_TOL)[0]
        trans_viol = ("transplant_reward patient axis", int(i), int(k))
    elif (d_k > ORDER_TOL).any():
        i, k = np.argwhere(d_k > ORDER_TOL)[0]
        trans_viol = ("transplant_reward organ axis", int(i), int(k))

    return MonotonicityReport(
        wait_monotone=wait_viol is None,
        transplant_monotone=trans_viol is None,
        wait_violation=wait_viol,
        transplant_violation=trans_viol,
    )


def _axis_permutation(n, special_index, reversed_live):
    """old indices in canonical order: live states first, special index last."""
    live = [i for i in range(n) if i != special_index]
    if reversed_live:
        live = live[::-1]
    return np.array(live + [special_index])


def canonicalize_orientation(spec: DiscreteModelSpec) -> DiscreteModelSpec:
    """Return an equivalent spec in canonical index order.

    Canonical form: larger index = worse on both axes, death is the last
    patient index, no-offer the last organ index.  Idempotent; the returned
    spec's value function is the input's under the same index permutation.
    """
    if spec.is_canonical():
        return spec
    perm_h = _axis_permutation(
        spec.n_patient, spec.death_index,
        spec.patient_orientation is Orientation.LARGER_IS_BETTER)
    perm_k = _axis_permutation(
        spec.n_organ, spec.no_offer_index,
        spec.organ_orientation is Orientation.LARGER_IS_BETTER)

    if spec.variant is Variant.DIALYSIS:
        transition = spec.transition[:, perm_h[:, None], perm_h[None, :]]
        wait = spec.wait_reward[:, perm_h]
    else:
        transition = spec.transition[perm_h[:, None], perm_h[None, :]]
        wait = spec.wait_reward[perm_h]

    inv_k = np.argsort(perm_k)
    new = replace(
        spec,
        death_index=spec.n_patient - 1,
        no_offer_index=spec.n_organ - 1,
        patient_orientation=Orientation.LARGER_IS_WORSE,
        organ_orientation=Orientation.LARGER_IS_WORSE,
        transition=transition,
        offer_prob=spec.offer_prob[perm_h[:, None], perm_k[None, :]],
        wait_reward=wait,
        transplant_reward=spec.transplant_reward[perm_h[:, None], perm_k[None, :]],
        living_donor_state=(None if spec.living_donor_state is None
                            else int(inv_k[spec.living_donor_state])),
        success_prob=(None if spec.success_prob is None
                      else spec.success_prob[perm_h[:, None], perm_k[None, :]]),
    )
    return validate_model(new)


def canonical_permutations(spec: DiscreteModelSpec):
    """(perm_h, perm_k) with perm[new_index] = old_index, as canonicalize uses."""
    perm_h = _axis_permutation(
        spec.n_patient, spec.death_index,
        spec.patient_orientation is Orientation.LARGER_IS_BETTER)
    perm_k = _axis_permutation(
        spec.n_organ, spec.no_offer_index,
        spec.organ_orientation is Orientation.LARGER_IS_BETTER)
    return perm_h, perm_k


def legal_actions(spec: DiscreteModelSpec, cell) -> tuple[Action, ...]:
    """Legal actions at a live cell.

    Cells are (h, k) for the 2-D variants, (h,) for the living-donor chain
    and (h, regime, k) for dialysis.  Death cells get the no-op only.
    """
    if spec.variant is Variant.LIVING_DONOR:
        (h,) = cell
        if h == spec.death_index:
            return (Action.NONE,)
        return (Action.WAIT, Action.TRANSPLANT_LIVING)
    if spec.variant is Variant.DIALYSIS:
        h, regime, k = cell
        if h == spec.death_index:
            return (Action.NONE,)
        acts = [Action.MEDICATION, Action.DIALYSIS] if regime == MEDICATION_REGIME \
            else [Action.DIALYSIS]
        if k != spec.no_offer_index:
            acts.append(Action.TRANSPLANT)
        return tuple(acts)
    h, k = cell
    if h == spec.death_index:
        return (Action.NONE,)
    acts = [Action.WAIT]
    if k != spec.no_offer_index:
        acts.append(Action.TRANSPLANT)
    if spec.variant is Variant.COMBINED:
        acts.append(Action.TRANSPLANT_LIVING)
    return tuple(acts)


def policy_cells(spec: DiscreteModelSpec):
    """All cells of a policy array for the given variant, as index tuples."""
    if spec.variant is Variant.LIVING_DONOR:
        return [(h,) for h in range(spec.n_patient)]
    if spec.variant is Variant.DIALYSIS:
        return [(h, g, k) for g in (MEDICATION_REGIME, DIALYSIS_REGIME)
                for h in range(spec.n_patient) for k in range(spec.n_organ)]
    return [(h, k) for h in range(spec.n_patient) for k in range(spec.n_organ)]


def _policy_index(cell, variant):
    if variant is Variant.DIALYSIS:
        h, g, k = cell
        return (g, h, k)
    return cell


def validate_policy(spec: DiscreteModelSpec, policy: Policy) -> Policy:
    """Check every assigned action is legal for its cell; raise otherwise."""
    if policy.variant is not spec.variant:
        raise ModelValidationError([f"policy variant {policy.variant.value} != "
                                    f"spec variant {spec.variant.value}"])
    for cell in policy_cells(spec):
        a = Action(policy.actions[_policy_index(cell, spec.variant)])
        if a not in legal_actions(spec, cell):
            raise ModelValidationError(
                [f"illegal action {a.name} at cell {cell}"])
    return policy
