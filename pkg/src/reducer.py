"""
Semijoin programs and full reducers.

This module provides:
- Program representation and the `Rk := Rk <| Rj` text format
- The full-reducer compiler for acyclic schemas (downward pass, then upward pass)
- Traced execution under a semijoin function
- Folding reduced relations into a global witness along a running-intersection ordering
- A seeded randomized verifier with replayable failing trials
"""

import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from krelation import (
    BudgetExceeded,
    ConsistencyResult,
    KRel,
    RelationError,
    UnsupportedStrategy,
    brute_force_witness,
    consistent,
    gen_random_krel,
    globally_consistent,
    inner_consistent,
    is_witness,
    krel_to_dict,
    marginal,
    witness_join,
)
from monoid import MonoidError, Tristate, WitnessFamily
from schema import (
    CyclicSchemaError,
    Hypergraph,
    OrderingError,
    RIOrdering,
    gyo_order,
    ordering_from_permutation,
    validate_ordering,
)
from semijoin import SemijoinError, SemijoinImpl
from settings import settings

logger = logging.getLogger(__name__)


class ReducerError(Exception):
    """Base error for semijoin programs."""


class ProgramSyntaxError(ReducerError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class StatementError(ReducerError):
    def __init__(self, message: str, index: int):
        super().__init__(f"statement {index + 1}: {message}")
        self.index = index


class GlobalWitnessError(ReducerError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"fold step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class Statement:
    """target := target ⋉ other, with edge indices into the hypergraph."""

    target: int
    other: int
    label: str = ""

    def __post_init__(self):
        if self.target == self.other:
            raise ReducerError(f"self-semijoin on edge {self.target}")


@dataclass
class SemijoinProgram:
    hypergraph: Hypergraph
    statements: list[Statement] = field(default_factory=list)

    def __post_init__(self):
        m = len(self.hypergraph)
        for st in self.statements:
            if not (0 <= st.target < m and 0 <= st.other < m):
                raise ReducerError(f"statement {st} refers to a missing edge")

    def __len__(self) -> int:
        return len(self.statements)

    def pairs(self) -> list[tuple[str, str]]:
        names = self.hypergraph.names
        return [(names[st.target], names[st.other]) for st in self.statements]


def default_ordering(H: Hypergraph) -> RIOrdering:
    """The listed edge order when it is already running-intersection, else GYO."""
    listed = ordering_from_permutation(H, range(len(H)))
    if listed is not None:
        return listed
    gyo = gyo_order(H)
    if not gyo.acyclic:
        raise CyclicSchemaError(
            f"schema {H.names} is cyclic; irreducible residual {gyo.residual.names}",
            gyo.residual,
        )
    return gyo.ordering


def compile_full_reducer(
    H: Hypergraph, ordering: RIOrdering | None = None
) -> SemijoinProgram:
    """
    The 2(m-1)-statement full reducer for an acyclic schema.

    Downward pass Y_{j_k} := Y_{j_k} ⋉ Y_k for k = m..2, labelled (-m)..(-2);
    then upward pass Y_k := Y_k ⋉ Y_{j_k} for k = 2..m, labelled (2)..(m).
    """
    if ordering is None:
        ordering = default_ordering(H)
    else:
        check = validate_ordering(H, ordering)
        if not check.valid:
            raise OrderingError(
                f"ordering violates running intersection at {check.first_violation}"
            )
    order, parents = ordering.order, ordering.parents
    m = len(order)
    statements = [
        Statement(order[parents[k]], order[k], f"(-{k + 1})")
        for k in range(m - 1, 0, -1)
    ]
    statements += [
        Statement(order[k], order[parents[k]], f"({k + 1})") for k in range(1, m)
    ]
    logger.debug("compiled %d statements for %s", len(statements), H.names)
    return SemijoinProgram(H, statements)


@dataclass
class TraceStep:
    index: int
    label: str
    target: int
    other: int
    relation: KRel


@dataclass
class ExecutionTrace:
    """Snapshot of the assigned relation after every statement."""

    program: SemijoinProgram
    initial: list[KRel]
    steps: list[TraceStep]
    final: list[KRel]

    def relations_after(self, p: int) -> list[KRel]:
        """R^(p): every relation after the first p statements."""
        rels = list(self.initial)
        for step in self.steps[:p]:
            rels[step.target] = step.relation
        return rels

    def to_dict(self) -> dict:
        names = self.program.hypergraph.names
        return {
            "steps": [
                {
                    "label": step.label,
                    "statement": f"{names[step.target]} := {names[step.target]}"
                    f" <| {names[step.other]}",
                    "relation": krel_to_dict(step.relation),
                }
                for step in self.steps
            ],
            "final": {names[i]: krel_to_dict(R) for i, R in enumerate(self.final)},
        }


def _check_relations(H: Hypergraph, rels: list[KRel]):
    if len(rels) != len(H):
        raise ReducerError(f"{len(rels)} relations for {len(H)} hyperedges")


def execute(prog: SemijoinProgram, rels, s: SemijoinImpl) -> ExecutionTrace:
    """Run the statements in order, replacing each target with its semijoin."""
    H = prog.hypergraph
    initial = list(rels)
    _check_relations(H, initial)
    current = list(initial)
    steps = []
    for index, st in enumerate(prog.statements):
        for k in (st.target, st.other):
            if sorted(current[k].attrs) != sorted(H.edges[k].attrs):
                raise StatementError(
                    f"relation for {H.edges[k].name} has attributes {current[k].attrs}",
                    index,
                )
        try:
            result = s(current[st.target], current[st.other])
        except (RelationError, MonoidError, SemijoinError) as e:
            raise StatementError(str(e), index) from e
        current[st.target] = result
        steps.append(TraceStep(index, st.label, st.target, st.other, result))
    return ExecutionTrace(prog, initial, steps, current)


def replay_trace(trace: ExecutionTrace, s: SemijoinImpl) -> bool:
    """Re-run the program on the recorded inputs and compare every snapshot."""
    again = execute(trace.program, trace.initial, s)
    return all(
        a.relation == b.relation for a, b in zip(trace.steps, again.steps, strict=True)
    ) and all(a == b for a, b in zip(trace.final, again.final, strict=True))


def build_global_witness(ordering: RIOrdering, rels) -> KRel:
    """
    Fold W1 := R_{Y1}, W_{k+1} := witness_join(W_k, R_{Y_{k+1}}).

    Each step is checked; the final witness must reproduce every relation.
    """
    rels = list(rels)
    order = ordering.order
    W = rels[order[0]]
    for step, k in enumerate(order[1:], start=2):
        R = rels[k]
        if not inner_consistent(W, R):
            raise GlobalWitnessError("prefix witness and relation disagree", step)
        joined = witness_join(W, R)
        if marginal(joined, W.attrs) != W or marginal(joined, R.attrs) != R:
            raise GlobalWitnessError("witness join misses a marginal", step)
        W = joined
    if not is_witness(W, rels):
        raise GlobalWitnessError("folded witness misses a marginal")
    return W


class TrialStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"


@dataclass
class TrialResult:
    trial: int
    status: TrialStatus
    failures: list[str] = field(default_factory=list)
    note: str = ""
    inputs: list[KRel] | None = None
    outputs: list[KRel] | None = None

    def to_dict(self, H: Hypergraph) -> dict:
        doc = {
            "trial": self.trial,
            "status": self.status.value,
            "failures": list(self.failures),
            "note": self.note,
        }
        if self.inputs is not None:
            doc["inputs"] = {n: krel_to_dict(R) for n, R in zip(H.names, self.inputs)}
        if self.outputs is not None:
            doc["outputs"] = {n: krel_to_dict(R) for n, R in zip(H.names, self.outputs)}
        return doc


@dataclass
class ReductionReport:
    """Outcome of a verifier run; failing trials keep their inputs for replay."""

    hypergraph: Hypergraph
    semijoin: str
    seed: int
    trials: int
    results: list[TrialResult] = field(default_factory=list)

    def count(self, status: TrialStatus) -> int:
        return sum(1 for r in self.results if r.status is status)

    @property
    def passed(self) -> bool:
        return self.count(TrialStatus.FAIL) == 0

    @property
    def failures(self) -> list[TrialResult]:
        return [r for r in self.results if r.status is TrialStatus.FAIL]

    def to_dict(self) -> dict:
        return {
            "schema": self.hypergraph.names,
            "semijoin": self.semijoin,
            "seed": self.seed,
            "trials": self.trials,
            "run": len(self.results),
            "passed": self.count(TrialStatus.PASS),
            "failed": self.count(TrialStatus.FAIL),
            "skipped": self.count(TrialStatus.SKIPPED),
            "failing_trials": [r.to_dict(self.hypergraph) for r in self.failures],
        }


def _constructive(s: SemijoinImpl) -> bool:
    caps = s.monoid.capabilities
    return caps.icp is Tristate.YES and caps.witness_family in (
        WitnessFamily.LATTICE_MEET,
        WitnessFamily.TRANSPORTATION,
    )


def trial_relations(
    H: Hypergraph,
    s: SemijoinImpl,
    seed: int,
    trial: int,
    max_support: int,
    domain_size: int,
) -> list[KRel]:
    """Random inputs of one trial; depends only on (seed, trial)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))
    domains = H.domains or None
    return [
        gen_random_krel(
            s.monoid,
            edge.attrs,
            max_support,
            seed=rng,
            domain_size=domain_size,
            domains=domains,
        )
        for edge in H.edges
    ]


def _check_trial(
    program: SemijoinProgram,
    ordering: RIOrdering | None,
    s: SemijoinImpl,
    rels: list[KRel],
) -> tuple[TrialStatus, list[str], list[KRel], str]:
    H = program.hypergraph
    outputs = execute(program, rels, s).final
    failures, notes = [], []
    skipped = False

    try:
        if ordering is not None and _constructive(s):
            build_global_witness(ordering, outputs)
        elif not s.monoid.finite:
            skipped = True
            notes.append("global check skipped: cyclic schema, infinite carrier")
        elif brute_force_witness(outputs) is None:
            failures.append("outputs are not globally consistent")
    except GlobalWitnessError as e:
        failures.append(f"outputs are not globally consistent ({e})")
    except BudgetExceeded as e:
        skipped = True
        notes.append(f"global check skipped: {e}")

    parent_pairs = [] if ordering is None else range(1, len(ordering.order))
    for k in parent_pairs:
        i, j = ordering.order[k], ordering.order[ordering.parents[k]]
        child, parent = outputs[i], outputs[j]
        name = f"{H.edges[i].name}/{H.edges[j].name}"
        if not inner_consistent(child, parent):
            failures.append(f"marginals of {name} differ on the overlap")
            continue
        try:
            if not consistent(child, parent).consistent:
                failures.append(f"{name} are not consistent")
        except BudgetExceeded as e:
            skipped = True
            notes.append(f"pair {name} skipped: {e}")

    again = execute(program, outputs, s).final
    if any(a != b for a, b in zip(outputs, again, strict=True)):
        failures.append("reduction is not idempotent")

    if failures:
        status = TrialStatus.FAIL
    elif skipped:
        status = TrialStatus.SKIPPED
    else:
        status = TrialStatus.PASS
    return status, failures, outputs, "; ".join(notes)


def _run_trial(job: tuple) -> TrialResult:
    program, ordering, s, seed, trial, max_support, domain_size = job
    rels = trial_relations(program.hypergraph, s, seed, trial, max_support, domain_size)
    status, failures, outputs, note = _check_trial(program, ordering, s, rels)
    if status is TrialStatus.FAIL:
        return TrialResult(trial, status, failures, note, rels, outputs)
    return TrialResult(trial, status, failures, note)


def verify_full_reducer(
    H: Hypergraph,
    s: SemijoinImpl,
    trials: int | None = None,
    seed: int = 0,
    max_support: int | None = None,
    domain_size: int | None = None,
    workers: int | None = None,
    max_failures: int | None = None,
    program: SemijoinProgram | None = None,
) -> ReductionReport:
    """
    Run the compiled (or given) program over random relations and check that
    the outputs are globally consistent, that every edge is consistent with
    its parent, and that a second run changes nothing.

    A given program may target a cyclic schema; its trials then skip the
    parent checks and settle global consistency by brute force.
    """
    config = settings.get_verify_config()
    trials = trials or config["trials"]
    max_support = max_support or config["max_support"]
    domain_size = domain_size or config["domain_size"]
    workers = workers or config["workers"]
    if not _constructive(s) and not s.monoid.finite:
        raise UnsupportedStrategy(
            f"{s.monoid.name}: no global consistency oracle for verification"
        )

    try:
        ordering = default_ordering(H)
    except CyclicSchemaError:
        if program is None:
            raise
        logger.info("%s is cyclic; checking outputs without parent pairs", H.names)
        ordering = None
    if program is None:
        program = compile_full_reducer(H, ordering)
    report = ReductionReport(H, s.name, seed, trials)
    jobs = [
        (program, ordering, s, seed, t, max_support, domain_size)
        for t in range(trials)
    ]

    def collect(results):
        for result in results:
            report.results.append(result)
            logger.debug("trial %d: %s", result.trial, result.status.value)
            if max_failures and len(report.failures) >= max_failures:
                logger.info("stopping after %d failing trials", max_failures)
                return

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunksize = max(1, trials // (4 * workers))
            collect(pool.map(_run_trial, jobs, chunksize=chunksize))
    else:
        collect(_run_trial(job) for job in jobs)

    logger.info(
        "verified %s: %d passed, %d failed, %d skipped",
        H.names,
        report.count(TrialStatus.PASS),
        report.count(TrialStatus.FAIL),
        report.count(TrialStatus.SKIPPED),
    )
    return report


def replay_trial(
    H: Hypergraph,
    s: SemijoinImpl,
    seed: int,
    trial: int,
    max_support: int | None = None,
    domain_size: int | None = None,
) -> TrialResult:
    """Regenerate and re-check one trial of a verifier run."""
    config = settings.get_verify_config()
    ordering = default_ordering(H)
    return _run_trial(
        (
            compile_full_reducer(H, ordering),
            ordering,
            s,
            seed,
            trial,
            max_support or config["max_support"],
            domain_size or config["domain_size"],
        )
    )


def check_reduction(H: Hypergraph, s: SemijoinImpl, rels) -> TrialResult:
    """Run the verifier checks on explicit relations, e.g. a stored counterexample."""
    ordering = default_ordering(H)
    program = compile_full_reducer(H, ordering)
    status, failures, outputs, note = _check_trial(program, ordering, s, list(rels))
    return TrialResult(-1, status, failures, note, list(rels), outputs)


@dataclass
class ProgramAudit:
    trace: ExecutionTrace
    fixed_point: bool
    global_consistency: ConsistencyResult | None
    note: str = ""


def audit_program_on(
    H: Hypergraph, program: SemijoinProgram, rels, s: SemijoinImpl
) -> ProgramAudit:
    """Run any program and report whether its outputs are globally consistent."""
    trace = execute(program, rels, s)
    fixed = all(a == b for a, b in zip(trace.initial, trace.final, strict=True))
    try:
        verdict = globally_consistent(trace.final)
    except (BudgetExceeded, UnsupportedStrategy) as e:
        return ProgramAudit(trace, fixed, None, str(e))
    return ProgramAudit(trace, fixed, verdict)


_STATEMENT = re.compile(r"^(\w+)\s*:=\s*(\w+)\s*<\|\s*(\w+)$")


def parse_program(text: str, H: Hypergraph) -> SemijoinProgram:
    """Parse `Rk := Rk <| Rj` lines; `# label` comments are kept as labels."""
    statements = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body, _, comment = raw.partition("#")
        body = body.strip()
        if not body:
            continue
        match = _STATEMENT.match(body)
        if match is None:
            raise ProgramSyntaxError(f"cannot parse {raw.strip()!r}", line_no)
        target, first, other = match.groups()
        if target != first:
            raise ProgramSyntaxError(
                f"assignment target {target} must be the left operand", line_no
            )
        for name in (target, other):
            if name not in H.names:
                raise ProgramSyntaxError(f"unknown relation {name!r}", line_no)
        if target == other:
            raise ProgramSyntaxError(f"{target} is semijoined with itself", line_no)
        statements.append(
            Statement(H.index_of(target), H.index_of(other), comment.strip())
        )
    return SemijoinProgram(H, statements)


def format_program(prog: SemijoinProgram) -> str:
    lines = []
    for st, (target, other) in zip(prog.statements, prog.pairs(), strict=True):
        line = f"{target} := {target} <| {other}"
        lines.append(f"{line}  # {st.label}" if st.label else line)
    return "\n".join(lines) + ("\n" if lines else "")
