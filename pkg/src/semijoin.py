"""
Semijoin functions on annotated relations and an audit of their axioms.

A semijoin S(R, T) is a relation over R's attributes such that:
  P1  S(R, T) = R whenever R and T are consistent
  P2  S(R, T) ⊑ R
  P3  S(R, T)[X∩Y] ⊑ T[X∩Y]
  P4  S(R, T)[X∩Y] = T[X∩Y] whenever T[X∩Y] ⊑ R[X∩Y]
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

from krelation import (
    BudgetExceeded,
    ConsistencyResult,
    KRel,
    UnsupportedStrategy,
    consistent,
    group_by,
    inner_consistent,
    join_tuple,
    krel_to_dict,
    lattice_join,
    marginal,
    rel_leq,
    same_monoid,
    shared_attrs,
    union_attrs,
)
from monoid import (
    BagMonoid,
    BooleanMonoid,
    Monoid,
    UnsupportedCapability,
    WitnessFamily,
)
from utils import tuple_key

logger = logging.getLogger(__name__)


class SemijoinError(Exception):
    """Base error for semijoin functions."""


class SemijoinContractError(SemijoinError):
    """A solver failed on an instance it is guaranteed to solve."""


class SemijoinKind(str, Enum):
    LATTICE = "lattice"
    PRODUCTION = "production"
    BOOLEAN_STANDARD = "boolean-standard"
    BAG_JOIN = "bag-join"


def semijoin_lattice(R: KRel, T: KRel) -> KRel:
    """S(R, T)(x) = R(x) ∧ T[X∩Y](x[X∩Y])."""
    m = same_monoid(R, T)
    shared = shared_attrs(R, T)
    pos = R.positions(shared)
    totals = marginal(T, shared)
    return KRel(
        m,
        R.attrs,
        {
            x: m.meet(v, totals.get(tuple(x[p] for p in pos)))
            for x, v in R.entries.items()
        },
    )


def semijoin_production(R: KRel, T: KRel) -> KRel:
    """
    Semijoin for any monoid with a production solver.

    Returns R when the marginals on X∩Y agree. Otherwise, when T[X∩Y] ⊑
    R[X∩Y], splits each shared-key total of T over the R tuples carrying that
    key. In every other case the result is empty.
    """
    m = same_monoid(R, T)
    shared = shared_attrs(R, T)
    left, right = marginal(R, shared), marginal(T, shared)
    if left == right:
        logger.debug("semijoin: marginals agree, returning R")
        return R
    if not rel_leq(right, left):
        logger.debug("semijoin: T[X∩Y] is not below R[X∩Y], returning empty")
        return KRel.empty(m, R.attrs)

    groups = group_by(R, shared)
    entries = {}
    for key, b in right.items():
        rows = groups[key]
        d = m.solve_production(b, [R.entries[r] for r in rows])
        if d is None:
            raise SemijoinContractError(
                f"{m.name}: no production split for key {key} although b ⊑ sum"
            )
        entries.update(zip(rows, d, strict=True))
    return KRel(m, R.attrs, entries)


def witness_production(R: KRel, T: KRel) -> KRel:
    """
    Coherent consistency witness built on the production semijoin.

    Consistent inputs get a genuine witness. Otherwise each tuple of the
    semijoin output is extended by the smallest T tuple sharing its key, so
    the projection onto X is the semijoin itself.
    """
    if inner_consistent(R, T):
        result = consistent(R, T)
        if result.consistent:
            return result.witness
    m = same_monoid(R, T)
    shared = shared_attrs(R, T)
    extra = [T.attrs.index(a) for a in T.attrs if a not in R.attrs]
    extensions = {key: rows[0] for key, rows in group_by(T, shared).items()}
    pos = R.positions(shared)
    S = semijoin_production(R, T)
    return KRel(
        m,
        union_attrs(R, T),
        {
            join_tuple(r, extensions[tuple(r[p] for p in pos)], extra): v
            for r, v in S.entries.items()
        },
    )


def lattice_witness(R: KRel, T: KRel) -> KRel:
    """The lattice join whose projection onto X is semijoin_lattice(R, T)."""
    m = same_monoid(R, T)
    if m.capabilities.witness_family is not WitnessFamily.LATTICE_MEET:
        raise UnsupportedCapability(f"{m.name} has no lattice meet")
    return lattice_join(R, T)


def classical_semijoin(R: KRel, T: KRel) -> KRel:
    """Tuples of R whose shared key occurs in T (set semantics)."""
    m = same_monoid(R, T)
    if not isinstance(m, BooleanMonoid):
        raise UnsupportedCapability("the classical semijoin is defined on sets")
    shared = shared_attrs(R, T)
    pos = R.positions(shared)
    keys = set(marginal(T, shared).entries)
    return KRel(
        m,
        R.attrs,
        {x: v for x, v in R.entries.items() if tuple(x[p] for p in pos) in keys},
    )


def bag_join_semijoin(R: KRel, T: KRel) -> KRel:
    """Projection of the bag join onto X: R(x) · T[X∩Y](x[X∩Y]). Violates P1."""
    m = same_monoid(R, T)
    if not isinstance(m, BagMonoid):
        raise UnsupportedCapability("the bag-join projection needs multiplicities")
    shared = shared_attrs(R, T)
    pos = R.positions(shared)
    totals = marginal(T, shared)
    return KRel(
        m,
        R.attrs,
        {x: v * totals.get(tuple(x[p] for p in pos)) for x, v in R.entries.items()},
    )


_CONSTRUCTIONS = {
    SemijoinKind.LATTICE: semijoin_lattice,
    SemijoinKind.PRODUCTION: semijoin_production,
    SemijoinKind.BOOLEAN_STANDARD: classical_semijoin,
    SemijoinKind.BAG_JOIN: bag_join_semijoin,
}


@dataclass(frozen=True)
class SemijoinImpl:
    """A semijoin construction bound to a monoid."""

    name: str
    monoid: Monoid
    kind: SemijoinKind

    def __post_init__(self):
        caps = self.monoid.capabilities
        if (
            self.kind is SemijoinKind.LATTICE
            and caps.witness_family is not WitnessFamily.LATTICE_MEET
        ):
            raise UnsupportedCapability(f"{self.monoid.name} has no lattice meet")
        if self.kind is SemijoinKind.PRODUCTION and not caps.production_solver:
            raise UnsupportedCapability(
                f"{self.monoid.name} has no production solver",
                counterexample=self.monoid.production_counterexample(),
            )
        if self.kind is SemijoinKind.BOOLEAN_STANDARD and not isinstance(
            self.monoid, BooleanMonoid
        ):
            raise UnsupportedCapability("boolean-standard needs the Boolean monoid")
        if self.kind is SemijoinKind.BAG_JOIN and not isinstance(
            self.monoid, BagMonoid
        ):
            raise UnsupportedCapability("bag-join needs the bag monoid")

    def __call__(self, R: KRel, T: KRel) -> KRel:
        if R.monoid != self.monoid:
            raise UnsupportedCapability(
                f"{self.name} is bound to {self.monoid.name}, not {R.monoid.name}"
            )
        return _CONSTRUCTIONS[self.kind](R, T)


def semijoin_for(m: Monoid, kind: SemijoinKind | str | None = None) -> SemijoinImpl:
    """The lattice semijoin for lattice families, the production semijoin otherwise."""
    if kind is None:
        caps = m.capabilities
        if caps.witness_family is WitnessFamily.LATTICE_MEET:
            kind = SemijoinKind.LATTICE
        elif caps.production_solver:
            kind = SemijoinKind.PRODUCTION
        else:
            raise UnsupportedCapability(
                f"{m.name} has no semijoin function",
                counterexample=m.production_counterexample(),
            )
    kind = SemijoinKind(kind)
    return SemijoinImpl(f"{kind.value}:{m.name}", m, kind)


class AxiomVerdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    NOT_APPLICABLE = "not-applicable"
    SKIPPED = "skipped"


@dataclass
class AxiomCheck:
    axiom: str
    verdict: AxiomVerdict
    offending: tuple | None = None
    note: str = ""


@dataclass
class AxiomReport:
    """P1-P4 evaluated on one input pair; the inputs are kept for replay."""

    semijoin: str
    R: KRel
    T: KRel
    output: KRel
    checks: dict[str, AxiomCheck] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.verdict is not AxiomVerdict.FAILS for c in self.checks.values())

    def verdict(self, axiom: str) -> AxiomVerdict:
        return self.checks[axiom].verdict

    def to_dict(self) -> dict:
        return {
            "semijoin": self.semijoin,
            "passed": self.passed,
            "checks": {
                name: {
                    "verdict": c.verdict.value,
                    "offending": list(c.offending) if c.offending is not None else None,
                    "note": c.note,
                }
                for name, c in self.checks.items()
            },
            "R": krel_to_dict(self.R),
            "T": krel_to_dict(self.T),
            "output": krel_to_dict(self.output),
        }


def _first_difference(A: KRel, B: KRel) -> tuple | None:
    B = B.reorder(A.attrs)
    for t in sorted(set(A.entries) | set(B.entries), key=tuple_key):
        if A.get(t) != B.get(t):
            return t
    return None


def _first_not_below(A: KRel, B: KRel) -> tuple | None:
    m = A.monoid
    B = B.reorder(A.attrs)
    for t in A.support:
        if not m.leq(A.get(t), B.get(t)).holds:
            return t
    return None


def audit_axioms(
    s: Callable[[KRel, KRel], KRel],
    R: KRel,
    T: KRel,
    oracle: Callable[[KRel, KRel], ConsistencyResult] = consistent,
) -> AxiomReport:
    """Evaluate P1-P4 for semijoin s on (R, T)."""
    S = s(R, T)
    name = getattr(s, "name", getattr(s, "__name__", "semijoin"))
    report = AxiomReport(name, R, T, S)
    if sorted(S.attrs) != sorted(R.attrs):
        for axiom in ("P1", "P2", "P3", "P4"):
            report.checks[axiom] = AxiomCheck(
                axiom, AxiomVerdict.FAILS, note=f"output attributes {S.attrs}"
            )
        return report

    try:
        verdict = oracle(R, T)
    except (BudgetExceeded, UnsupportedStrategy) as e:
        report.checks["P1"] = AxiomCheck("P1", AxiomVerdict.SKIPPED, note=str(e))
    else:
        if not verdict.consistent:
            report.checks["P1"] = AxiomCheck("P1", AxiomVerdict.NOT_APPLICABLE)
        else:
            diff = _first_difference(R, S)
            report.checks["P1"] = AxiomCheck(
                "P1", AxiomVerdict.HOLDS if diff is None else AxiomVerdict.FAILS, diff
            )

    bad = _first_not_below(S, R)
    report.checks["P2"] = AxiomCheck(
        "P2", AxiomVerdict.HOLDS if bad is None else AxiomVerdict.FAILS, bad
    )

    shared = shared_attrs(R, T)
    out, right = marginal(S, shared), marginal(T, shared)
    bad = _first_not_below(out, right)
    report.checks["P3"] = AxiomCheck(
        "P3", AxiomVerdict.HOLDS if bad is None else AxiomVerdict.FAILS, bad
    )

    if rel_leq(right, marginal(R, shared)):
        diff = _first_difference(out, right)
        report.checks["P4"] = AxiomCheck(
            "P4", AxiomVerdict.HOLDS if diff is None else AxiomVerdict.FAILS, diff
        )
    else:
        report.checks["P4"] = AxiomCheck("P4", AxiomVerdict.NOT_APPLICABLE)
    return report
