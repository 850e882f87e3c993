"""Command-line surface: solve, analyze, simulate, continuous, plot.

Exit codes:
  0  success
  2  document or model validation error
  3  solver did not reach the residual target
  4  continuous-time computation truncated or hit a stiffness guard
  5  usage error: missing file, unknown document kind, bad options
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import ctime, docio, simulate, structure
from .ctime import FixedInstants, StiffnessError
from .model import ModelValidationError, Policy, Variant
from .solver import SolveOptions, solve_value_iteration
from .svgplot import render_curve_svg, render_region_svg

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_TRUNCATED = 4
EXIT_USAGE = 5


def _parser():
    p = argparse.ArgumentParser(
        prog="organstop",
        description="Solve and analyze organ-acceptance stopping models.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("solve", "value-iterate a model document"),
        ("analyze", "extract policy structure from a model or solve output"),
        ("simulate", "Monte Carlo evaluation of the solved policy"),
        ("continuous", "continuous-time threshold curve and critical times"),
        ("plot", "render a results document as SVG or CSV"),
    ]:
        q = sub.add_parser(name, help=helptext)
        q.add_argument("--input", required=True, help="input document path")
        q.add_argument("--output", required=True, help="output path")
        q.add_argument("--tol", type=float, default=1e-8,
                       help="solver residual target")
        q.add_argument("--max-iters", type=int, default=100_000,
                       help="value-iteration cap")
        q.add_argument("--trajectories", type=int, default=10_000,
                       help="simulation sample size")
        q.add_argument("--seed", type=int, default=0, help="master seed")
        q.add_argument("--format", choices=["csv", "svg", "json"],
                       default=None, help="output format where applicable")
        q.add_argument("--grid-step", type=float, default=0.01,
                       help="time-grid step for continuous curves")
        q.add_argument("--t-max", type=float, default=10.0,
                       help="time horizon for continuous curves")
    return p


def _load(path):
    try:
        return docio.load_document(path)
    except FileNotFoundError:
        print(f"error: input file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        print(f"error: input file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None
    except json.JSONDecodeError as exc:
        print(f"error: $: not valid JSON: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION) from None


def _solve_from_args(doc, args):
    if doc.spec is None:
        print("error: document has no model section", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)
    opts = SolveOptions(tolerance=args.tol, max_iterations=args.max_iters)
    return solve_value_iteration(doc.spec, opts)


def cmd_solve(args) -> int:
    doc = _load(args.input)
    vf, policy = _solve_from_args(doc, args)
    docio.dump_document(
        docio.solve_results_document(doc.spec, vf, policy), args.output)
    return EXIT_OK if vf.converged else EXIT_NO_CONVERGENCE


def cmd_analyze(args) -> int:
    raw = _load_json(args.input)
    if raw.get("kind") == "solve_results":
        spec = docio.parse_model_section(raw["model"])
        policy = Policy(spec.variant, np.asarray(raw["policy"], dtype=np.int64))
    else:
        doc = docio.parse_document(raw)
        _, policy = _solve_from_args(doc, args)
        spec = doc.spec
    if spec.variant in (Variant.LIVING_DONOR, Variant.DIALYSIS):
        print(f"error: structure analysis needs a 2-D policy, got "
              f"{spec.variant.value}", file=sys.stderr)
        return EXIT_VALIDATION
    report = structure.analyze_policy(spec, policy)
    docio.dump_document(
        docio.structure_results_document(spec, policy, report), args.output)
    docio.write_region_csv(_sibling(args.output, ".csv"), report.regions)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = _load(args.input)
    vf, policy = _solve_from_args(doc, args)
    est = simulate.estimate_policy_value(doc.spec, policy, args.trajectories,
                                         args.seed)
    out = docio.simulate_results_document(est)
    out["solver_value"] = docio._round_sig(float(_initial_value(doc.spec, vf)))
    docio.dump_document(out, args.output)
    return EXIT_OK


def _initial_value(spec, vf):
    start = 0 if spec.death_index != 0 else 1
    if spec.variant is Variant.LIVING_DONOR:
        return vf.values[start]
    if spec.variant is Variant.DIALYSIS:
        return vf.marginal[0, start]
    return vf.marginal[start]


def cmd_continuous(args) -> int:
    doc = _load(args.input)
    cspec = doc.continuous
    if cspec is None:
        print("error: document has no continuous section", file=sys.stderr)
        return EXIT_VALIDATION
    truncated = False
    if isinstance(cspec.arrivals, FixedInstants):
        lam = ctime.finite_horizon_thresholds(cspec)
        curve = ctime.ThresholdCurve(cspec.arrivals.times, lam)
    elif isinstance(cspec.arrivals, ctime.RenewalArrivals):
        curve = ctime.renewal_lambda(cspec, args.t_max, args.grid_step)
        truncated = curve.truncated
    else:
        try:
            curve = ctime.poisson_lambda_ode(cspec, args.t_max, args.grid_step)
        except StiffnessError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_TRUNCATED
        truncated = curve.truncated

    critical = offer_values = None
    if isinstance(cspec.offers, ctime.FiniteOffers) and curve.is_nonincreasing():
        offer_values = cspec.offers.values
        critical = ctime.critical_times(curve, offer_values)
    docio.dump_document(
        docio.curve_results_document(curve, critical, offer_values),
        args.output)
    if args.format == "csv":
        docio.write_curve_csv(_sibling(args.output, ".csv"), curve)
    return EXIT_TRUNCATED if truncated else EXIT_OK


def cmd_plot(args) -> int:
    raw = _load_json(args.input)
    kind = raw.get("kind")
    if kind in ("solve_results", "structure_results"):
        svg = render_region_svg(np.asarray(raw["policy"]))
    elif kind == "curve_results":
        critical = [float(t) for t in raw.get("critical_times", [])
                    if t != "inf"]
        svg = render_curve_svg(raw["times"], raw["values"], critical)
    else:
        print(f"error: unknown document kind {kind!r}", file=sys.stderr)
        return EXIT_USAGE
    with open(args.output, "w") as fh:
        fh.write(svg)
    return EXIT_OK


def _sibling(path: str, suffix: str) -> str:
    base = path[:-5] if path.endswith(".json") else path
    return base + suffix


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {
        "solve": cmd_solve,
        "analyze": cmd_analyze,
        "simulate": cmd_simulate,
        "continuous": cmd_continuous,
        "plot": cmd_plot,
    }[args.command]
    try:
        return handler(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except docio.DocumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ModelValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entry() -> None:
    sys.exit(main())
