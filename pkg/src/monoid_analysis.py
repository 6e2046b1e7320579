"""
Decision procedures over monoids.

Finite carriers are decided exhaustively on numpy index tables: positivity,
cancellativity, the production property for n=2 and the 2×2 transportation
property. Infinite builtins get known-result verdicts; numerical semigroups
additionally get a counterexample from a bounded search of the carrier.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from monoid import (
    BagMonoid,
    FiniteTableMonoid,
    FuzzyMaxMonoid,
    MinTropicalMonoid,
    Monoid,
    MonoidError,
    NonnegRealMonoid,
    NumericalSemigroup,
    Tristate,
    UnsupportedCapability,
    finite_table,
    saturating,
)
from settings import settings

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


class Provenance(str, Enum):
    COMPUTED = "computed"
    KNOWN_RESULT = "known-result"


@dataclass
class PropertyReport:
    """Verdict on one monoid property, with a replayable counterexample on failure."""

    property: str
    verdict: Verdict
    counterexample: tuple | None = None
    provenance: Provenance = Provenance.COMPUTED
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    def to_dict(self, m: Monoid) -> dict:
        return {
            "property": self.property,
            "verdict": self.verdict.value,
            "counterexample": [m.format(e) for e in self.counterexample]
            if self.counterexample is not None
            else None,
            "provenance": self.provenance.value,
            "note": self.note,
        }


@dataclass
class Transport2x2:
    """A 2×2 matrix with row sums (b1, b2) and column sums (c1, c2)."""

    b1: object
    b2: object
    c1: object
    c2: object
    d11: object
    d12: object
    d21: object
    d22: object

    def satisfied(self, m: Monoid) -> bool:
        return (
            m.add(self.d11, self.d12) == self.b1
            and m.add(self.d21, self.d22) == self.b2
            and m.add(self.d11, self.d21) == self.c1
            and m.add(self.d12, self.d22) == self.c2
        )

    def rows(self) -> list[list]:
        return [[self.d11, self.d12], [self.d21, self.d22]]

    def to_dict(self, m: Monoid) -> dict:
        return {
            "b": [m.format(self.b1), m.format(self.b2)],
            "c": [m.format(self.c1), m.format(self.c2)],
            "matrix": [[m.format(x) for x in row] for row in self.rows()],
        }


_KNOWN_CANCELLATIVE = {
    BagMonoid: None,
    NonnegRealMonoid: None,
    NumericalSemigroup: None,
    FuzzyMaxMonoid: (1.0, 0.0, 1.0),
    MinTropicalMonoid: (0.0, 1.0, 2.0),
}


def _first(mask: np.ndarray) -> tuple | None:
    hits = np.argwhere(mask)
    return tuple(int(k) for k in hits[0]) if len(hits) else None


def _named(m: Monoid, indices: tuple) -> tuple:
    els = m.elements()
    return tuple(els[k] for k in indices)


def _report(name: str, m: Monoid, hit: tuple | None, note: str = "") -> PropertyReport:
    if hit is None:
        return PropertyReport(name, Verdict.HOLDS, note=note)
    return PropertyReport(name, Verdict.FAILS, _named(m, hit), note=note)


def check_positivity(m: Monoid) -> PropertyReport:
    """p + q = 0 only for p = q = 0."""
    if not m.finite:
        return PropertyReport(
            "positivity",
            Verdict.HOLDS,
            provenance=Provenance.KNOWN_RESULT,
            note=f"{m.family} is positive by construction",
        )
    table = m.add_table
    z = m.index_of(m.zero)
    zero_sums = table == z
    zero_sums[z, z] = False
    return _report("positivity", m, _first(zero_sums))


def check_cancellative(m: Monoid) -> PropertyReport:
    """a + b = a + c implies b = c; counterexample (a, b, c) with b != c."""
    if not m.finite:
        for family, counterexample in _KNOWN_CANCELLATIVE.items():
            if isinstance(m, family):
                verdict = Verdict.HOLDS if counterexample is None else Verdict.FAILS
                return PropertyReport(
                    "cancellative",
                    verdict,
                    counterexample,
                    Provenance.KNOWN_RESULT,
                )
        return PropertyReport(
            "cancellative", Verdict.UNKNOWN, provenance=Provenance.KNOWN_RESULT
        )
    table = m.add_table
    n = table.shape[0]
    same = table[:, :, None] == table[:, None, :]
    same[:, np.arange(n), np.arange(n)] = False
    return _report("cancellative", m, _first(same))


def production_failures(m: Monoid) -> np.ndarray:
    """
    fail[b, c1, c2] is True when b ⊑ c1 + c2 but no d1 ⊑ c1, d2 ⊑ c2 sum to b.

    Cubic in |K| once the preorder table is cached.
    """
    table, leq = m.add_table, m.leq_table
    n = table.shape[0]
    fail = np.zeros((n, n, n), dtype=bool)
    for c1 in range(n):
        down1 = leq[:, c1]
        for c2 in range(c1, n):
            need = leq[:, table[c1, c2]]
            reach = np.zeros(n, dtype=bool)
            reach[table[np.ix_(down1, leq[:, c2])]] = True
            missing = need & ~reach
            fail[:, c1, c2] = missing
            fail[:, c2, c1] = missing
    return fail


def check_production_n2(m: Monoid) -> PropertyReport:
    """Production property for two capacities; counterexample (b, c1, c2)."""
    if m.finite:
        return _report("production-n2", m, _first(production_failures(m)))
    if isinstance(m, NumericalSemigroup):
        return PropertyReport(
            "production-n2",
            Verdict.FAILS,
            m.production_counterexample(),
            Provenance.COMPUTED,
            note=f"bounded search up to {m.search_limit()}",
        )
    if m.capabilities.production_solver:
        return PropertyReport(
            "production-n2", Verdict.HOLDS, provenance=Provenance.KNOWN_RESULT
        )
    return PropertyReport(
        "production-n2", Verdict.UNKNOWN, provenance=Provenance.KNOWN_RESULT
    )


def transport_failures(m: Monoid) -> np.ndarray:
    """fail[b1, b2, c1, c2]: equal totals but no 2×2 matrix realises them."""
    table = m.add_table
    n = table.shape[0]
    d11, d12, d21, d22 = np.indices((n, n, n, n)).reshape(4, -1)
    achieved = np.zeros((n, n, n, n), dtype=bool)
    achieved[
        table[d11, d12], table[d21, d22], table[d11, d21], table[d12, d22]
    ] = True
    required = table[:, :, None, None] == table[None, None, :, :]
    return required & ~achieved


def check_transport_2x2(m: Monoid) -> PropertyReport:
    """2×2 transportation property; counterexample (b1, b2, c1, c2)."""
    if m.finite:
        n = len(m.elements())
        if n > settings.transport_table_limit:
            return PropertyReport(
                "transport-2x2",
                Verdict.UNKNOWN,
                note=f"|K|={n} exceeds TRANSPORT_TABLE_LIMIT",
            )
        return _report("transport-2x2", m, _first(transport_failures(m)))
    if isinstance(m, NumericalSemigroup):
        return PropertyReport(
            "transport-2x2",
            Verdict.FAILS,
            m.transport_counterexample(),
            Provenance.COMPUTED,
            note=f"bounded search up to {m.search_limit()}",
        )
    if m.capabilities.icp is Tristate.YES:
        return PropertyReport(
            "transport-2x2", Verdict.HOLDS, provenance=Provenance.KNOWN_RESULT
        )
    return PropertyReport(
        "transport-2x2", Verdict.UNKNOWN, provenance=Provenance.KNOWN_RESULT
    )


def icp_verdict(m: Monoid) -> PropertyReport:
    """Inner consistency property, decided through the transportation property."""
    if m.finite:
        report = check_transport_2x2(m)
        return PropertyReport(
            "icp",
            report.verdict,
            report.counterexample,
            Provenance.KNOWN_RESULT,
            note="transportation property is equivalent to ICP and reduces to 2x2",
        )
    if isinstance(m, NumericalSemigroup):
        return PropertyReport(
            "icp",
            Verdict.FAILS,
            m.transport_counterexample(),
            Provenance.KNOWN_RESULT,
            note="counterexample is a 2x2 transportation instance",
        )
    verdict = {
        Tristate.YES: Verdict.HOLDS,
        Tristate.NO: Verdict.FAILS,
        Tristate.UNKNOWN: Verdict.UNKNOWN,
    }[m.capabilities.icp]
    return PropertyReport("icp", verdict, provenance=Provenance.KNOWN_RESULT)


def semijoin_existence_verdict(m: Monoid) -> PropertyReport:
    """A semijoin function exists exactly when the production property holds for n=2."""
    report = check_production_n2(m)
    report.property = "semijoin-existence"
    return report


def analyze(m: Monoid) -> list[PropertyReport]:
    """All reports printed by `monoid check`, in a fixed order."""
    return [
        check_positivity(m),
        check_cancellative(m),
        check_production_n2(m),
        check_transport_2x2(m),
        icp_verdict(m),
        semijoin_existence_verdict(m),
    ]


def solve_transport_2x2(m: Monoid, b, c) -> Transport2x2 | None:
    """Find a 2×2 matrix with row sums b and column sums c, or None."""
    (b1, b2), (c1, c2) = b, c
    matrix = m.solve_transport([b1, b2], [c1, c2])
    if matrix is None:
        return None
    (d11, d12), (d21, d22) = matrix
    return Transport2x2(b1, b2, c1, c2, d11, d12, d21, d22)


def transport_via_production(m: Monoid, b, c) -> Transport2x2 | None:
    """
    Build a 2×2 matrix from a production solution in a cancellative monoid.

    Split b1 over (c1, c2) as (d1, d2), complete each capacity with
    di + ei = ci and cancel b1 to get e1 + e2 = b2.
    """
    (b1, b2), (c1, c2) = b, c
    if m.capabilities.cancellative is not Tristate.YES:
        raise UnsupportedCapability(f"{m.name} is not known to be cancellative")
    if m.add(b1, b2) != m.add(c1, c2):
        return None
    d = m.solve_production(b1, [c1, c2])
    if d is None:
        return None
    e1 = m.leq(d[0], c1).witness
    e2 = m.leq(d[1], c2).witness
    result = Transport2x2(b1, b2, c1, c2, d[0], d[1], e1, e2)
    if not result.satisfied(m):
        raise MonoidError(f"{m.name}: cancellation produced an invalid matrix")
    return result


def production_via_transport(m: Monoid, b, capacities) -> list | None:
    """
    Solve a production instance with a transportation solver.

    Extend b to (b, b') with b + b' = c1 + ... + cn; the first row of a
    matrix with those row sums and column sums c is the production plan.
    """
    capacities = list(capacities)
    complement = m.leq(b, m.sum(capacities))
    if not complement.holds:
        return None
    matrix = m.solve_transport([b, complement.witness], capacities)
    if matrix is None:
        return None
    return list(matrix[0])


def _has_split(m: Monoid, b, c1, c2) -> bool:
    candidates = m.elements() if m.finite else m.members_upto(b)
    return any(
        m.leq(d1, c1).holds
        and m.leq(d2, c2).holds
        and m.add(d1, d2) == b
        for d1 in candidates
        for d2 in candidates
    )


def replay_counterexample(m: Monoid, report: PropertyReport) -> bool:
    """Re-evaluate the defining equations; True when the violation is confirmed."""
    if report.verdict is not Verdict.FAILS or report.counterexample is None:
        return False
    x = report.counterexample
    if report.property == "positivity":
        p, q = x
        return m.add(p, q) == m.zero and not (m.is_zero(p) and m.is_zero(q))
    if report.property == "cancellative":
        a, b, c = x
        return m.add(a, b) == m.add(a, c) and b != c
    if report.property in ("production-n2", "semijoin-existence"):
        b, c1, c2 = x
        return m.leq(b, m.add(c1, c2)).holds and not _has_split(m, b, c1, c2)
    if report.property in ("transport-2x2", "icp"):
        b1, b2, c1, c2 = x
        if m.add(b1, b2) != m.add(c1, c2):
            return False
        return solve_transport_2x2(m, (b1, b2), (c1, c2)) is None
    raise ValueError(f"unknown property {report.property!r}")


def union_closed_monoid(sets, label: str = "") -> FiniteTableMonoid:
    """Close a family of sets under union (adding ∅) and return it as a table."""
    family = {frozenset()}
    frontier = {frozenset(s) for s in sets}
    while frontier:
        family |= frontier
        frontier = {a | b for a in family for b in family} - family
    ordered = sorted(family, key=lambda s: (len(s), sorted(s)))

    def name(s):
        return "{" + ",".join(str(v) for v in sorted(s)) + "}"

    names = [name(s) for s in ordered]
    table = [[name(a | b) for b in ordered] for a in ordered]
    return finite_table(names, table, "{}", label=label)


def capped_semigroup(generators, cap: int) -> FiniteTableMonoid:
    """Members of ⟨generators⟩ up to cap, with every larger sum sent to "top"."""
    gens = sorted(set(generators))
    members = [0]
    for x in range(1, cap + 1):
        if any(x >= g and (x - g) in members for g in gens):
            members.append(x)
    names = [str(v) for v in members] + ["top"]

    def add(a, b):
        if "top" in (a, b) or int(a) + int(b) > cap:
            return "top"
        return str(int(a) + int(b))

    table = [[add(a, b) for b in names] for a in names]
    return finite_table(names, table, "0", label=f"<{','.join(map(str, gens))}>/{cap}")


def product_monoid(m1: Monoid, m2: Monoid) -> FiniteTableMonoid:
    """Direct product of two finite monoids, element names "(a|b)"."""
    pairs = [(a, b) for a in m1.elements() for b in m2.elements()]

    def name(p):
        return f"({m1.format(p[0])}|{m2.format(p[1])})"

    names = [name(p) for p in pairs]
    table = [
        [name((m1.add(p[0], q[0]), m2.add(p[1], q[1]))) for q in pairs] for p in pairs
    ]
    return finite_table(
        names, table, name((m1.zero, m2.zero)), label=f"{m1.name}x{m2.name}"
    )


def random_finite_monoid(rng: np.random.Generator, max_size: int = 8) -> Monoid:
    """Draw a positive commutative monoid with at most max_size elements."""
    while True:
        kind = rng.integers(4)
        if kind == 0:
            ground = range(1, 5)
            subsets = [c for k in range(1, 5) for c in combinations(ground, k)]
            size = int(rng.integers(1, 4))
            picks = rng.choice(len(subsets), size=size, replace=False)
            m = union_closed_monoid([subsets[i] for i in picks])
        elif kind == 1:
            m = saturating(int(rng.integers(1, max_size)))
        elif kind == 2:
            gens = sorted({int(g) for g in rng.integers(2, 6, size=2)})
            m = capped_semigroup(gens, int(rng.integers(gens[0], 3 * gens[-1])))
        else:
            left = saturating(int(rng.integers(1, 3)))
            right = saturating(int(rng.integers(1, 3)))
            m = product_monoid(left, right)
        if len(m.elements()) <= max_size:
            logger.debug("random finite monoid %s", m.name)
            return m
