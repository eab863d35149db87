"""Command-line front end: validate models, run queries, emit plot data.

Exit codes: 0 success, 1 usage, 2 model parse or validation failure,
3 inference failure.  Every failure prints a single JSON line on stderr
with ``error`` (exception class) and ``reason`` fields.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence

import numpy as np

from .errors import EngineError, InferenceError, ModelError, ParseError
from .expcalc import PiecewiseFn, definite_integral, moment, support_interval
from .kernels import eval_batch
from .jointree import (
    PropagatedState,
    build_join_tree,
    check_evidence,
    marginal_parts,
    normalize_marginal,
    propagate,
    query_marginal,
)
from .model import Network, parse_model, validate_model
from .potential import MixedPotential


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through the usage family instead
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(
        prog="hybrid-mte",
        description="Exact inference in hybrid Bayesian networks with "
        "mixtures of truncated exponentials.",
        epilog="The HYBRID_MTE_MAX_PIECES environment variable overrides "
        "the cap on density piece counts (default 10000).",
    )
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model file, exit 0 iff clean")
    v.add_argument("model", help="path to a model JSON file")

    i = sub.add_parser("infer", help="report posterior marginals")
    i.add_argument("model", help="path to a model JSON file")
    i.add_argument(
        "--evidence",
        action="append",
        default=[],
        metavar="VAR=VALUE",
        help="observed value; discrete values match state labels verbatim, "
        "continuous values parse as decimal literals (repeatable)",
    )
    i.add_argument(
        "--target",
        action="append",
        default=[],
        metavar="VAR",
        help="variable to query (repeatable; default: all variables)",
    )
    i.add_argument("--format", choices=("text", "json"), default="text")

    g = sub.add_parser("plot", help="write a CSV sampling of one marginal")
    g.add_argument("model", help="path to a model JSON file")
    g.add_argument("--target", required=True, metavar="VAR")
    g.add_argument(
        "--evidence", action="append", default=[], metavar="VAR=VALUE"
    )
    g.add_argument(
        "--points",
        type=int,
        default=400,
        help="number of evenly spaced density samples (default 400)",
    )
    g.add_argument("--out", required=True, help="output path, or - for stdout")
    return p


def _load_network(path: str) -> Network:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path!r}: {exc.strerror}") from exc
    n = parse_model(text)
    issues = validate_model(n)
    if issues:
        raise ParseError(issues[0])
    return n


def _parse_evidence(n: Network, items: Sequence[str]) -> dict[str, object]:
    """Turn Var=value strings into an evidence map under the model's kinds."""
    raw: dict[str, object] = {}
    for item in items:
        name, sep, text = item.partition("=")
        if not sep or not name:
            raise ParseError(f"evidence {item!r} is not of the form Var=value")
        var = n.by_name.get(name)
        if var is not None and var.kind != "discrete":
            try:
                raw[name] = float(text)
            except ValueError:
                raise ParseError(
                    f"evidence value {text!r} for {name!r} is not a decimal "
                    "literal"
                ) from None
        else:
            # unknown names fall through so check_evidence can report them
            raw[name] = text
    return check_evidence(n, raw)


def _prepare(
    model_path: str, evidence_items: Sequence[str]
) -> tuple[Network, PropagatedState]:
    n = _load_network(model_path)
    evidence = _parse_evidence(n, evidence_items)
    tree = build_join_tree(n)
    return n, propagate(tree, evidence)


def _target_report(
    state: PropagatedState, v: str
) -> tuple[dict, float, PiecewiseFn | None]:
    """(report fields, evidence weight, density) for one queried variable."""
    normalized, weight = normalize_marginal(query_marginal(state, v))
    masses, density = marginal_parts(normalized)
    pieces = len(density.pieces) if density is not None else 0
    mean: float | None = 0.0
    variance: float | None = None
    second = 0.0
    try:
        points = [(float(x), w) for x, w in masses.items()]
    except ValueError:
        points = None
    if points is None:
        mean = None
    else:
        for x, w in points:
            mean += x * w
            second += x * x * w
        if density is not None:
            total = definite_integral(density)
            if total > 0.0:
                mean += moment(density, v, 1) * total
                second += moment(density, v, 2) * total
        variance = second - mean * mean
    report = {
        "masses": {str(x): w for x, w in masses.items()},
        "mean": mean,
        "variance": variance,
        "pieces": pieces,
    }
    return report, weight, density


def _run_infer(args: argparse.Namespace, out) -> int:
    n, state = _prepare(args.model, args.evidence)
    targets = list(args.target) or [v.name for v in n.variables]
    for t in targets:
        if t not in n.by_name:
            raise ParseError(f"unknown target variable {t!r}")
    reports: dict[str, dict] = {}
    likelihood = None
    for t in targets:
        reports[t], weight, _ = _target_report(state, t)
        if likelihood is None:
            likelihood = weight
    doc = {"evidence_likelihood": likelihood, "targets": reports}
    if args.format == "json":
        out.write(json.dumps(doc, sort_keys=True) + "\n")
        return 0
    out.write(f"evidence_likelihood {likelihood!r}\n")
    for t in targets:
        r = reports[t]
        out.write(f"target {t}\n")
        for key in sorted(r["masses"]):
            out.write(f"  mass {key} {r['masses'][key]!r}\n")
        if r["mean"] is not None:
            out.write(f"  mean {r['mean']!r}\n")
            out.write(f"  variance {r['variance']!r}\n")
        out.write(f"  pieces {r['pieces']}\n")
    return 0


def emit_plot_data(marginal: MixedPotential, points: int) -> str:
    """CSV sampling of a normalized univariate marginal.

    Header ``x,density`` followed by exact density evaluations at `points`
    evenly spaced locations over the support; any point masses follow as a
    second ``x,mass`` table.
    """
    if points < 2:
        raise _UsageError("--points must be at least 2")
    masses, density = marginal_parts(marginal)
    lines = ["x,density"]
    if density is not None:
        var = density.vars[0]
        lo, hi = support_interval(density, var)
        xs = np.linspace(lo, hi, points)
        ys = eval_batch(density, {var: xs})
        lines.extend(
            f"{float(x)!r},{float(y)!r}" for x, y in zip(xs, ys)
        )
    if masses:
        lines.append("")
        lines.append("x,mass")
        for x in sorted(masses):
            lines.append(f"{x},{masses[x]!r}")
    return "\n".join(lines) + "\n"


def _run_plot(args: argparse.Namespace) -> int:
    n, state = _prepare(args.model, args.evidence)
    if args.target not in n.by_name:
        raise ParseError(f"unknown target variable {args.target!r}")
    normalized, _ = normalize_marginal(query_marginal(state, args.target))
    text = emit_plot_data(normalized, args.points)
    if args.out == "-":
        sys.stdout.write(text)
        return 0
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise _UsageError(f"cannot write {args.out!r}: {exc.strerror}") from exc
    return 0


def _run_validate(args: argparse.Namespace, out) -> int:
    try:
        with open(args.model, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {args.model!r}: {exc.strerror}") from exc
    n = parse_model(text)
    issues = validate_model(n)
    if not issues:
        # a model that parses but cannot seed a join tree is still unusable
        try:
            build_join_tree(n)
        except EngineError as exc:
            issues = [str(exc)]
    if issues:
        for line in issues:
            out.write(line + "\n")
        raise ParseError(issues[0])
    out.write(f"ok: {len(n.variables)} variables\n")
    return 0


def _fail(exc: BaseException, code: int, name: str | None = None) -> int:
    line = json.dumps(
        {"error": name or type(exc).__name__, "reason": str(exc)},
        sort_keys=True,
    )
    print(line, file=sys.stderr)
    return code


def execute(argv: Sequence[str] | None = None, out=None) -> int:
    """Run one CLI invocation; returns the process exit code."""
    out = sys.stdout if out is None else out
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        if args.command == "validate":
            return _run_validate(args, out)
        if args.command == "infer":
            return _run_infer(args, out)
        return _run_plot(args)
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except _UsageError as exc:
        return _fail(exc, 1, name="usage")
    except ModelError as exc:
        return _fail(exc, 2)
    except InferenceError as exc:
        return _fail(exc, 3)
    except EngineError as exc:
        return _fail(exc, 3)


def main() -> None:
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()
