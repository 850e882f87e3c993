"""Reading and writing model and results documents.

A model document is a JSON object with a required ``model`` section whose
fields mirror :class:`DiscreteModelSpec`, plus optional ``ambiguity``,
``risk`` and ``continuous`` sections.  Schema problems raise
:class:`DocumentError` carrying the offending document path; unknown
sections or keys only warn, so newer documents still load.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import ctime
from .model import (
    DiscreteModelSpec,
    ModelValidationError,
    Orientation,
    Policy,
    Variant,
    validate_model,
)
from .risk import RiskSpec
from .robust import AmbiguitySpec

SIGNIFICANT_DIGITS = 12


class DocumentError(ValueError):
    """Schema violation, annotated with the path inside the document."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class ModelDocument:
    spec: DiscreteModelSpec
    ambiguity: AmbiguitySpec | None = None
    risk: RiskSpec | None = None
    continuous: ctime.ContinuousModelSpec | None = None


_MODEL_KEYS = {
    "variant", "n_patient", "death_index", "n_organ", "no_offer_index",
    "transition", "offer_prob", "wait_reward", "transplant_reward",
    "discount", "patient_orientation", "organ_orientation",
    "living_donor_state", "success_prob", "success_reward",
}
_KNOWN_SECTIONS = {"model", "ambiguity", "risk", "continuous"}


def _require(obj, key, path, kind=None):
    if key not in obj:
        raise DocumentError(f"{path}.{key}", "missing required field")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise DocumentError(f"{path}.{key}",
                            f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _array(obj, key, path, dims, optional=False):
    if optional and obj.get(key) is None:
        return None
    raw = _require(obj, key, path)
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"{path}.{key}", f"not numeric: {exc}") from None
    if arr.ndim != dims:
        raise DocumentError(f"{path}.{key}",
                            f"expected a {dims}-dimensional array, got "
                            f"{arr.ndim} dimensions")
    return arr


def _enum(cls, raw, path):
    try:
        return cls(raw)
    except ValueError:
        options = ", ".join(e.value for e in cls)
        raise DocumentError(path, f"expected one of {options}, got {raw!r}") \
            from None


def parse_model_section(section: dict, path: str = "model") -> DiscreteModelSpec:
    if not isinstance(section, dict):
        raise DocumentError(path, "model section must be an object")
    for key in section:
        if key not in _MODEL_KEYS:
            warnings.warn(f"ignoring unknown model field {path}.{key}")
    variant = _enum(Variant, _require(section, "variant", path), f"{path}.variant")
    dims_t = 3 if variant is Variant.DIALYSIS else 2
    dims_w = 2 if variant is Variant.DIALYSIS else 1
    spec = DiscreteModelSpec(
        variant=variant,
        n_patient=int(_require(section, "n_patient", path, int)),
        death_index=int(_require(section, "death_index", path, int)),
        n_organ=int(_require(section, "n_organ", path, int)),
        no_offer_index=int(_require(section, "no_offer_index", path, int)),
        transition=_array(section, "transition", path, dims_t),
        offer_prob=_array(section, "offer_prob", path, 2),
        wait_reward=_array(section, "wait_reward", path, dims_w),
        transplant_reward=_array(section, "transplant_reward", path, 2),
        discount=float(_require(section, "discount", path, (int, float))),
        patient_orientation=_enum(
            Orientation, section.get("patient_orientation", "larger_is_worse"),
            f"{path}.patient_orientation"),
        organ_orientation=_enum(
            Orientation, section.get("organ_orientation", "larger_is_worse"),
            f"{path}.organ_orientation"),
        living_donor_state=section.get("living_donor_state"),
        success_prob=_array(section, "success_prob", path, 2, optional=True),
        success_reward=section.get("success_reward"),
    )
    try:
        return validate_model(spec)
    except ModelValidationError as exc:
        raise DocumentError(path, "; ".join(exc.errors)) from None


# --- named distribution families for the continuous section ----------------

def parse_offers(section: dict, path: str) -> ctime.OfferDistribution:
    family = _require(section, "family", path, str)
    if family == "uniform":
        return ctime.UniformOffers(float(_require(section, "low", path)),
                                   float(_require(section, "high", path)))
    if family == "finite":
        return ctime.FiniteOffers(
            np.asarray(_require(section, "values", path), dtype=float),
            np.asarray(_require(section, "probs", path), dtype=float))
    raise DocumentError(f"{path}.family",
                        f"unknown offer family {family!r} (uniform, finite)")


def parse_lifetime(section: dict, path: str) -> ctime.Lifetime:
    family = _require(section, "family", path, str)
    if family == "exponential":
        return ctime.exponential_lifetime(float(_require(section, "rate", path)))
    if family == "erlang":
        return ctime.erlang_lifetime(int(_require(section, "shape", path)),
                                     float(_require(section, "rate", path)))
    raise DocumentError(f"{path}.family",
                        f"unknown lifetime family {family!r} "
                        "(exponential, erlang)")


def parse_interarrival(section: dict, path: str):
    family = _require(section, "family", path, str)
    if family == "deterministic":
        return ctime.DeterministicInterarrival(float(_require(section, "gap", path)))
    if family == "exponential":
        return ctime.exponential_interarrival(float(_require(section, "rate", path)))
    raise DocumentError(f"{path}.family",
                        f"unknown interarrival family {family!r} "
                        "(deterministic, exponential)")


def parse_arrivals(section: dict, path: str):
    kind = _require(section, "kind", path, str)
    if kind == "fixed":
        return ctime.FixedInstants(
            np.asarray(_require(section, "times", path), dtype=float))
    if kind == "poisson":
        return ctime.PoissonArrivals(float(_require(section, "rate", path)))
    if kind == "renewal":
        return ctime.RenewalArrivals(
            parse_interarrival(_require(section, "interarrival", path, dict),
                               f"{path}.interarrival"))
    raise DocumentError(f"{path}.kind",
                        f"unknown arrival kind {kind!r} "
                        "(fixed, poisson, renewal)")


def parse_discount_fn(section: dict | None, path: str):
    if section is None:
        return lambda t: 1.0
    kind = _require(section, "kind", path, str)
    if kind == "constant":
        value = float(_require(section, "value", path))
        return lambda t: value
    if kind == "exponential":
        rate = float(_require(section, "rate", path))
        return lambda t: math.exp(-rate * t)
    raise DocumentError(f"{path}.kind",
                        f"unknown discount kind {kind!r} "
                        "(constant, exponential)")


def parse_continuous_section(section: dict,
                             path: str = "continuous") -> ctime.ContinuousModelSpec:
    if not isinstance(section, dict):
        raise DocumentError(path, "continuous section must be an object")
    arrivals = parse_arrivals(_require(section, "arrivals", path, dict),
                              f"{path}.arrivals")
    lifetime = None
    if section.get("lifetime") is not None:
        lifetime = parse_lifetime(section["lifetime"], f"{path}.lifetime")
    alphas = None
    if section.get("survival_alphas") is not None:
        alphas = np.asarray(section["survival_alphas"], dtype=float)
    try:
        return ctime.ContinuousModelSpec(
            offers=parse_offers(_require(section, "offers", path, dict),
                                f"{path}.offers"),
            arrivals=arrivals,
            lifetime=lifetime,
            discount_fn=parse_discount_fn(section.get("discount"),
                                          f"{path}.discount"),
            survival_alphas=alphas,
        )
    except ValueError as exc:
        raise DocumentError(path, str(exc)) from None


def parse_document(doc: dict, path: str = "$") -> ModelDocument:
    if not isinstance(doc, dict):
        raise DocumentError(path, "document root must be an object")
    for key in doc:
        if key not in _KNOWN_SECTIONS:
            warnings.warn(f"ignoring unknown document section {key!r}")
    if "model" not in doc and "continuous" not in doc:
        raise DocumentError(path, "document needs a model or continuous section")
    out = ModelDocument(spec=None)
    if "model" in doc:
        out.spec = parse_model_section(doc["model"])
    if "ambiguity" in doc:
        try:
            out.ambiguity = AmbiguitySpec(
                np.asarray(_require(doc["ambiguity"], "levels", "ambiguity"),
                           dtype=float))
        except ValueError as exc:
            raise DocumentError("ambiguity", str(exc)) from None
    if "risk" in doc:
        section = doc["risk"]
        try:
            out.risk = RiskSpec(
                risk_coefficient=float(_require(section, "risk_coefficient",
                                                "risk")),
                lifetime_pmf=np.asarray(_require(section, "lifetime_pmf",
                                                 "risk"), dtype=float))
        except ValueError as exc:
            raise DocumentError("risk", str(exc)) from None
    if "continuous" in doc:
        out.continuous = parse_continuous_section(doc["continuous"])
    return out


def load_document(path: str) -> ModelDocument:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DocumentError("$", f"not valid JSON: {exc}") from None
    return parse_document(raw)


# ---------------------------------------------------------------------------
# writing

def _round_sig(x: float) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{SIGNIFICANT_DIGITS}g}")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, float)):
        return _round_sig(float(obj))
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def model_section(spec: DiscreteModelSpec) -> dict:
    out = {
        "variant": spec.variant.value,
        "n_patient": spec.n_patient,
        "death_index": spec.death_index,
        "n_organ": spec.n_organ,
        "no_offer_index": spec.no_offer_index,
        "transition": spec.transition,
        "offer_prob": spec.offer_prob,
        "wait_reward": spec.wait_reward,
        "transplant_reward": spec.transplant_reward,
        "discount": spec.discount,
        "patient_orientation": spec.patient_orientation.value,
        "organ_orientation": spec.organ_orientation.value,
    }
    if spec.living_donor_state is not None:
        out["living_donor_state"] = spec.living_donor_state
    if spec.success_prob is not None:
        out["success_prob"] = spec.success_prob
        out["success_reward"] = spec.success_reward
    return _jsonable(out)


def solve_results_document(spec, value_function, policy) -> dict:
    return _jsonable({
        "kind": "solve_results",
        "model": model_section(spec),
        "values": value_function.values,
        "marginal_values": value_function.marginal,
        "policy": policy.actions,
        "residual": value_function.residual,
        "iterations": value_function.iterations,
        "converged": bool(value_function.converged),
    })


def _limit_report(report):
    return {
        "axis": report.axis,
        "is_control_limit": bool(report.is_control_limit),
        "thresholds": report.thresholds,
        "witness": report.witness,
    }


def structure_results_document(spec, policy, report) -> dict:
    doc = {
        "kind": "structure_results",
        "policy": policy.actions,
        "patient_based": _limit_report(report.patient_based),
        "organ_based": _limit_report(report.organ_based),
        "regions": [{"action": r.action, "cells": list(r.cells)}
                    for r in report.regions],
        "region_count": len(report.regions),
    }
    if report.am2ro is not None:
        doc["am2ro"] = {"holds": report.am2ro.holds,
                        "limits": report.am2ro.limits,
                        "witness_row": report.am2ro.witness_row}
    if report.am3r is not None:
        doc["am3r"] = {"holds": report.am3r.holds,
                       "limits": report.am3r.limits,
                       "region_count": report.am3r.region_count,
                       "disconnected": report.am3r.disconnected}
    return _jsonable(doc)


def simulate_results_document(estimate, trajectories=None) -> dict:
    doc = {
        "kind": "simulate_results",
        "mean": estimate.mean,
        "std_error": estimate.std_error,
        "n": estimate.n,
        "ci_low": estimate.ci_low,
        "ci_high": estimate.ci_high,
        "truncated": getattr(estimate, "truncated", 0),
    }
    if trajectories is not None:
        doc["trajectories"] = [
            {"reward": t.reward, "epochs": t.epochs, "terminal": t.terminal,
             "states": t.states, "offers": t.offers, "actions": t.actions}
            for t in trajectories]
    return _jsonable(doc)


def curve_results_document(curve, critical=None, offer_values=None) -> dict:
    doc = {
        "kind": "curve_results",
        "times": curve.times,
        "values": curve.values,
        "truncated": bool(curve.truncated),
        "nonincreasing": curve.is_nonincreasing(),
    }
    if critical is not None:
        doc["offer_values"] = offer_values
        doc["critical_times"] = ["inf" if math.isinf(t) else _round_sig(t)
                                 for t in critical]
    return _jsonable(doc)


def dump_document(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# CSV exports

def write_region_csv(path: str, regions) -> None:
    """Region grid as rows (h, k, action, region_id)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "k", "action", "region_id"])
        for rid, region in enumerate(regions):
            for h, k in region.cells:
                writer.writerow([h, k, region.action, rid])


def write_curve_csv(path: str, curve) -> None:
    """Threshold curve as rows (t, lambda)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "lambda"])
        for t, v in zip(curve.times, curve.values):
            writer.writerow([f"{t:.12g}", f"{v:.12g}"])
