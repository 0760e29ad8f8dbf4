"""Command-line entry point: ``hfcert <command> [input] [options]``.

Exit codes: 0 success, 2 certificate gates failed, 3 invalid input,
4 solver failure or non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Dict, Optional, Tuple

from . import __version__
from . import grassmann as gm
from .conditions import contraction_bound_check, measure
from .errors import HFCertError, HypothesisError, InvalidInputError, SolverError
from .hf import commutator_residual, energy
from .integrals import IntegralSet, SyntheticParams, generate_synthetic, validate
from .kantorovich import certify, displacement_check, newton_solve
from .matnorm import WeightSet, validate_weights, weights_from_points
from .ortho import orthogonalize_pipeline, propagation_check
from . import serialize as ser

log = logging.getLogger("hfcert")

EXIT_OK, EXIT_GATES, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3, 4
DEFAULT_EXPONENT = 2.0


def _load_instance(args) -> Tuple[IntegralSet, Optional[WeightSet], Dict]:
    """Integrals and weights from the input file, or a synthetic instance."""
    if args.input:
        integrals, weights = ser.integralset_from_doc(ser.load_json(args.input))
        source = {"input": args.input}
    elif args.seed is not None:
        params = SyntheticParams(gap=args.gap, coupling=args.coupling)
        integrals, weights = generate_synthetic(args.seed, args.nu, args.n_elec, params)
        source = {"synthetic": {"seed": args.seed, "nu": args.nu, "n_elec": args.n_elec,
                                "gap": args.gap, "coupling": args.coupling}}
    else:
        raise InvalidInputError("give an input file or --seed for a synthetic instance")
    if args.weights:
        doc = ser.load_json(args.weights)
        if "weights" in doc:
            weights = WeightSet(doc["weights"], doc.get("points"))
        elif "points" in doc:
            weights = weights_from_points(doc["points"],
                                          float(doc.get("exponent", DEFAULT_EXPONENT)))
        else:
            raise InvalidInputError("weights file needs 'weights' or 'points'")
        source["weights"] = args.weights
    if weights is not None and weights.nu != integrals.nu:
        raise InvalidInputError("weights dimension differs from nu")
    return integrals, weights, source


def _need_weights(weights):
    if weights is None:
        raise InvalidInputError("no weight matrix: add 'weights' to the input or pass --weights")
    return weights


def _emit(args, doc) -> None:
    text = ser.dumps(doc)
    if args.output:
        ser.write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    integrals, weights, source = _load_instance(args)
    issues = validate(integrals)
    violations = validate_weights(weights) if weights is not None else None
    doc = {"schema": "validation.v1", "source": source,
           **ser.validation_doc(issues, violations)}
    _emit(args, doc)
    return EXIT_INPUT if issues or violations else EXIT_OK


def _conditions(integrals, weights, trials):
    report = measure(integrals, weights)
    check = contraction_bound_check(integrals, weights, report, trials=trials) if trials else None
    return report, check


def cmd_conditions(args) -> int:
    integrals, weights, source = _load_instance(args)
    report, check = _conditions(integrals, _need_weights(weights), args.trials)
    _emit(args, {**ser.conditions_to_doc(report, check), "source": source})
    return EXIT_OK


def cmd_certify(args) -> int:
    integrals, weights, source = _load_instance(args)
    cert = certify(measure(integrals, _need_weights(weights)))
    _emit(args, {**ser.certificate_to_doc(cert), "source": source})
    return EXIT_OK if cert.valid else EXIT_GATES


def _solve(integrals, args):
    try:
        trace, final = newton_solve(integrals, tol=args.tol, max_iter=args.max_iter,
                                    recenter=args.recenter)
    except SolverError as exc:
        return exc.trace, None, str(exc)
    return trace, final, None


def _trace_doc(integrals, trace, error):
    residual = commutator_residual(trace.final_point, integrals) if trace else None
    doc = ser.trace_to_doc(trace, residual) if trace else {"schema": ser.TRACE}
    doc["energy"] = energy(trace.final_point, integrals).total if trace else None
    doc["error"] = error
    return doc


def cmd_solve(args) -> int:
    integrals, _, source = _load_instance(args)
    trace, final, error = _solve(integrals, args)
    _emit(args, {**_trace_doc(integrals, trace, error), "source": source})
    if error or not trace.converged:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_orthogonalize(args) -> int:
    integrals, weights, source = _load_instance(args)
    weights = _need_weights(weights)
    if not args.gram:
        raise InvalidInputError("orthogonalize needs --gram")
    gram = ser.gram_from_doc(ser.load_json(args.gram))
    out, result = orthogonalize_pipeline(integrals, gram, weights)
    doc = ser.integralset_to_doc(out, weights)
    doc["orthogonalization"] = ser.ortho_to_doc(result)
    doc["source"] = {**source, "gram": args.gram}
    _emit(args, doc)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.seed is None:
        raise InvalidInputError("generate needs --seed")
    params = SyntheticParams(gap=args.gap, coupling=args.coupling)
    integrals, weights = generate_synthetic(args.seed, args.nu, args.n_elec, params)
    _emit(args, ser.integralset_to_doc(integrals, weights))
    return EXIT_OK


def cmd_report(args) -> int:
    integrals, weights, source = _load_instance(args)
    weights = _need_weights(weights)
    issues = validate(integrals)
    violations = validate_weights(weights)
    report, check = _conditions(integrals, weights, args.trials)
    cert = certify(report)
    trace, final, error = _solve(integrals, args)
    p0 = gm.canonical_point(integrals.n_elec, integrals.nu)
    doc: Dict = {
        "schema": ser.REPORT,
        "version": __version__,
        "source": source,
        "validation": ser.validation_doc(issues, violations),
        "conditions": ser.conditions_to_doc(report, check, include_factors=False),
        "certificate": ser.certificate_to_doc(cert),
        "trace": _trace_doc(integrals, trace, error),
        "displacement": None,
    }
    if final is not None and cert.valid:
        doc["displacement"] = ser.displacement_to_doc(displacement_check(final, p0, cert))
    if args.gram:
        gram = ser.gram_from_doc(ser.load_json(args.gram))
        try:
            prop = propagation_check(integrals, gram, weights)
            _, result = orthogonalize_pipeline(integrals, gram, weights)
            doc["orthogonalization"] = ser.ortho_to_doc(result, prop)
        except HypothesisError as exc:
            doc["orthogonalization"] = {"error": str(exc)}
    if args.figures and trace is not None:
        from .plotting import write_figures

        doc["figures"] = write_figures(args.figures, trace, p0.p, cert)
    _emit(args, doc)
    if error or trace is None or not trace.converged:
        return EXIT_SOLVER
    return EXIT_OK if cert.valid else EXIT_GATES


COMMANDS = {
    "validate": (cmd_validate, "check integral symmetries and the weight matrix"),
    "conditions": (cmd_conditions, "measure the localization and gap constants"),
    "certify": (cmd_certify, "compute the Newton convergence certificate"),
    "solve": (cmd_solve, "run Newton's method from the initial density"),
    "orthogonalize": (cmd_orthogonalize, "orthonormalize a basis given its Gram matrix"),
    "report": (cmd_report, "all of the above in one document"),
    "generate": (cmd_generate, "write a synthetic integral set"),
}


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", nargs="?", help="integralset.v1 JSON file")
    common.add_argument("-o", "--output", help="write JSON here instead of stdout")
    common.add_argument("--weights", help="JSON with 'weights' or 'points' (+ 'exponent')")
    common.add_argument("--gram", help="gram.v1 JSON file")
    common.add_argument("--tol", type=_positive(float), default=1e-10)
    common.add_argument("--max-iter", type=_positive(int), default=50)
    common.add_argument("--recenter", action="store_true",
                        help="re-anchor the chart each Newton step (not certified)")
    common.add_argument("--trials", type=int, default=100,
                        help="random matrices for the contraction check (0 skips it)")
    common.add_argument("--seed", type=int, help="synthetic instance seed")
    common.add_argument("--nu", type=_positive(int), default=6)
    common.add_argument("--n-elec", type=_positive(int), default=2)
    common.add_argument("--gap", type=_positive(float), default=SyntheticParams.gap)
    common.add_argument("--coupling", type=float, default=SyntheticParams.coupling)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="hfcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "report":
            p.add_argument("--figures", metavar="DIR",
                           help="also write PNG figures into DIR")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except (InvalidInputError, HypothesisError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except SolverError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    except HFCertError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
