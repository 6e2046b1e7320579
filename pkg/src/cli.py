"""
Command-line interface.

Subcommands:
    monoid check        decide the monoid properties behind semijoin existence
    schema check        acyclicity, running-intersection ordering, full reducer
    reduce              run a full reducer (or a given program) over relation files
    verify              randomized full-reducer verification
    relation marginal   project a relation file
    relation consistent decide consistency of two relation files
"""

import argparse
import logging
import os
import sys

from krelation import (
    RelationError,
    Strategy,
    consistent,
    krel_to_dict,
    marginal,
    read_krel_csv,
    write_krel_csv,
)
from monoid import Monoid, MonoidError, load_monoid
from monoid_analysis import PropertyReport, Verdict, analyze
from reducer import (
    ReducerError,
    compile_full_reducer,
    execute,
    format_program,
    parse_program,
    verify_full_reducer,
)
from schema import (
    CyclicSchemaError,
    Hypergraph,
    SchemaError,
    gyo_order,
    load_schema,
    ordering_from_permutation,
)
from semijoin import SemijoinError, semijoin_for
from settings import configure_logging, settings
from utils import FileFormatError, dump_json, load_text

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

MARKERS = {Verdict.HOLDS: "✅", Verdict.FAILS: "❌", Verdict.UNKNOWN: "⚠️"}


def _emit(args, document: dict, text: str):
    if args.format == "json":
        print(dump_json(document))
    else:
        print(text)


def _format_report(m: Monoid, report: PropertyReport) -> str:
    line = f"  {MARKERS[report.verdict]} {report.property}: {report.verdict.value}"
    line += f" [{report.provenance.value}]"
    if report.counterexample is not None:
        shown = ", ".join(m.format(e) for e in report.counterexample)
        line += f"  counterexample ({shown})"
    if report.note:
        line += f"  ({report.note})"
    return line


def cmd_monoid_check(args) -> int:
    m = load_monoid(args.monoid)
    reports = analyze(m)
    existence = reports[-1]
    text = "\n".join(
        [f"Monoid: {m.name}"] + [_format_report(m, r) for r in reports]
    )
    _emit(
        args,
        {"monoid": m.name, "reports": [r.to_dict(m) for r in reports]},
        text,
    )
    return {Verdict.HOLDS: EXIT_OK, Verdict.FAILS: EXIT_FAIL}.get(
        existence.verdict, EXIT_ERROR
    )


def _ordering_arg(H: Hypergraph, text: str | None):
    if not text:
        return None
    ordering = ordering_from_permutation(H, [n.strip() for n in text.split(",")])
    if ordering is None:
        raise SchemaError(f"{text} is not a running-intersection ordering")
    return ordering


def cmd_schema_check(args) -> int:
    H = load_schema(args.schema)
    gyo = gyo_order(H)
    if not gyo.acyclic:
        _emit(
            args,
            gyo.to_dict(H),
            "❌ cyclic; residual: "
            + ", ".join(f"{e.name}({','.join(e.attrs)})" for e in gyo.residual.edges),
        )
        return EXIT_FAIL
    ordering = _ordering_arg(H, args.ordering)
    program = compile_full_reducer(H, ordering)
    shown = ordering or gyo.ordering
    order = shown.to_dict(H)
    doc = gyo.to_dict(H) | {"ordering": order, "program": format_program(program)}
    text = "\n".join(
        [
            "✅ acyclic",
            "Ordering: " + ", ".join(order["order"]),
            "Parents:  "
            + ", ".join("-" if p is None else str(p) for p in order["parents"]),
            f"Full reducer ({len(program)} statements):",
            format_program(program).rstrip(),
        ]
    )
    _emit(args, doc, text)
    return EXIT_OK


def _load_relations(H: Hypergraph, m: Monoid, paths) -> list:
    if len(paths) != len(H):
        raise RelationError(f"{len(paths)} relation files for {len(H)} hyperedges")
    return [
        read_krel_csv(path, m, edge.attrs)
        for path, edge in zip(paths, H.edges, strict=True)
    ]


def _load_program(path, H: Hypergraph):
    return parse_program(load_text(path), H)


def cmd_reduce(args) -> int:
    H = load_schema(args.schema)
    m = load_monoid(args.monoid)
    s = semijoin_for(m)
    rels = _load_relations(H, m, args.relations)
    if args.program:
        program = _load_program(args.program, H)
    else:
        try:
            program = compile_full_reducer(H)
        except CyclicSchemaError as e:
            print(f"❌ {e}", file=sys.stderr)
            return EXIT_FAIL
    trace = execute(program, rels, s)

    os.makedirs(args.output_dir, exist_ok=True)
    written = {}
    for edge, R in zip(H.edges, trace.final, strict=True):
        path = os.path.join(args.output_dir, f"{edge.name}.csv")
        write_krel_csv(R, path)
        written[edge.name] = path
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(dump_json(trace.to_dict()) + "\n")

    changed = [e.name for e, a, b in zip(H.edges, rels, trace.final) if a != b]
    text = "\n".join(
        [f"✅ ran {len(program)} statements with {s.name}"]
        + [f"  {name} -> {path}" for name, path in written.items()]
        + [f"  changed: {', '.join(changed) if changed else 'none'}"]
    )
    _emit(args, {"semijoin": s.name, "outputs": written, "changed": changed}, text)
    return EXIT_OK


def cmd_verify(args) -> int:
    H = load_schema(args.schema)
    m = load_monoid(args.monoid)
    s = semijoin_for(m)
    program = _load_program(args.program, H) if args.program else None
    report = verify_full_reducer(
        H,
        s,
        trials=args.trials,
        seed=args.seed,
        max_support=args.max_support,
        domain_size=args.domain_size,
        workers=args.workers,
        max_failures=args.max_failures,
        program=program,
    )
    doc = report.to_dict()
    if not report.passed and args.bundle:
        bundle = {
            "schema": H.to_dict(),
            "monoid": m.describe(),
            "program": format_program(
                program if program is not None else compile_full_reducer(H)
            ),
            "report": doc,
        }
        with open(args.bundle, "w", encoding="utf-8") as f:
            f.write(dump_json(bundle) + "\n")
        doc = doc | {"bundle": args.bundle}

    if report.passed:
        text = (
            f"✅ {doc['passed']}/{doc['run']} trials passed"
            f" ({doc['skipped']} skipped) with {s.name}"
        )
    else:
        text = f"❌ {doc['failed']} failing trials out of {doc['run']}"
        for trial in report.failures[:5]:
            text += f"\n  trial {trial.trial}: {'; '.join(trial.failures)}"
        if args.bundle:
            text += f"\n  replay bundle: {args.bundle}"
    _emit(args, doc, text)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_relation_marginal(args) -> int:
    m = load_monoid(args.monoid)
    R = read_krel_csv(args.relation, m)
    attrs = [a.strip() for a in args.attrs.split(",") if a.strip()]
    M = marginal(R, attrs)
    if args.format == "json":
        print(dump_json(krel_to_dict(M)))
    else:
        print(write_krel_csv(M), end="")
    return EXIT_OK


def cmd_relation_consistent(args) -> int:
    m = load_monoid(args.monoid)
    R = read_krel_csv(args.left, m)
    T = read_krel_csv(args.right, m)
    result = consistent(R, T, Strategy(args.strategy))
    if result.consistent:
        text = f"✅ consistent ({result.strategy})\n" + write_krel_csv(result.witness)
    else:
        text = f"❌ inconsistent ({result.strategy})"
    _emit(args, result.to_dict(), text.rstrip())
    return EXIT_OK if result.consistent else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "json"], default="text")
    common.add_argument("--seed", type=int, default=0, help="Random seed")
    common.add_argument(
        "--budget", type=int, default=None, help="Brute-force search bound"
    )
    common.add_argument("-v", "--verbose", action="count", default=None)

    parser = argparse.ArgumentParser(
        prog="kreduce", description="Semijoins and full reducers over K-relations"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    monoid = commands.add_parser("monoid").add_subparsers(dest="action", required=True)
    check = monoid.add_parser(
        "check", parents=[common], help="Decide monoid properties"
    )
    check.add_argument("monoid", help="Monoid file (JSON)")
    check.set_defaults(handler=cmd_monoid_check)

    schema = commands.add_parser("schema").add_subparsers(dest="action", required=True)
    check = schema.add_parser("check", parents=[common], help="Acyclicity and reducer")
    check.add_argument("schema", help="Schema file (JSON)")
    check.add_argument("--ordering", help="Comma-separated edge names to compile along")
    check.set_defaults(handler=cmd_schema_check)

    reduce = commands.add_parser("reduce", parents=[common], help="Run a full reducer")
    reduce.add_argument("--schema", required=True)
    reduce.add_argument("--monoid", required=True)
    reduce.add_argument("--program", help="Program file; default is the full reducer")
    reduce.add_argument("--output-dir", default="reduced")
    reduce.add_argument("--trace", help="Write the execution trace (JSON) here")
    reduce.add_argument("relations", nargs="+", help="Relation CSVs in schema order")
    reduce.set_defaults(handler=cmd_reduce)

    verify = commands.add_parser("verify", parents=[common], help="Randomized verifier")
    verify.add_argument("--schema", required=True)
    verify.add_argument("--monoid", required=True)
    verify.add_argument(
        "--program", help="Audit this program instead of the compiled one"
    )
    verify.add_argument("--trials", type=int, default=None)
    verify.add_argument("--max-support", type=int, default=None)
    verify.add_argument("--domain-size", type=int, default=None)
    verify.add_argument("--workers", type=int, default=None)
    verify.add_argument("--max-failures", type=int, default=None)
    verify.add_argument("--bundle", help="Write a replay bundle (JSON) on failure")
    verify.set_defaults(handler=cmd_verify)

    relation = commands.add_parser("relation").add_subparsers(
        dest="action", required=True
    )
    project = relation.add_parser(
        "marginal", parents=[common], help="Project a relation"
    )
    project.add_argument("--monoid", required=True)
    project.add_argument("--attrs", required=True, help="Comma-separated attributes")
    project.add_argument("relation")
    project.set_defaults(handler=cmd_relation_marginal)

    pair = relation.add_parser(
        "consistent", parents=[common], help="Consistency oracle"
    )
    pair.add_argument("--monoid", required=True)
    pair.add_argument(
        "--strategy", choices=[s.value for s in Strategy], default=Strategy.AUTO.value
    )
    pair.add_argument("left")
    pair.add_argument("right")
    pair.set_defaults(handler=cmd_relation_consistent)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    if args.budget is not None:
        settings.brute_force_bound = args.budget
    try:
        return args.handler(args)
    except CyclicSchemaError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_FAIL
    except (
        FileFormatError,
        MonoidError,
        RelationError,
        SchemaError,
        SemijoinError,
        ReducerError,
    ) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_ERROR
