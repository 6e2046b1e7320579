"""
Annotated relations (K-relations).

A KRel maps tuples over an ordered attribute list to nonzero monoid
elements. Zero annotations are dropped on construction, so the key set is
the support. Relations are read and written as CSV through pandas, with
one column per attribute and a trailing `#annotation` column.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Any

import numpy as np
import pandas as pd

from monoid import Monoid, MonoidError, Tristate, WitnessFamily
from settings import settings
from utils import FileFormatError, tuple_key

logger = logging.getLogger(__name__)

ANNOTATION = "#annotation"


class RelationError(Exception):
    """Base error for annotated relations."""


class AttributeMismatch(RelationError):
    """Attributes do not line up with what the operation requires."""


class MonoidMismatch(RelationError):
    """Two relations are annotated with different monoids."""


class UnsupportedStrategy(RelationError):
    """No consistency strategy applies to the monoid."""


class BudgetExceeded(RelationError):
    """A brute-force oracle would exceed the configured bound."""


class WitnessValidationError(RelationError):
    """A constructed witness does not reproduce the required marginals."""


class RelationFormatError(RelationError, FileFormatError):
    """A relation file could not be decoded."""


@dataclass(frozen=True, eq=False)
class KRel:
    """A finitely supported map from tuples over `attrs` to nonzero elements."""

    monoid: Monoid
    attrs: tuple
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        attrs = tuple(self.attrs)
        if len(set(attrs)) != len(attrs):
            raise AttributeMismatch(f"repeated attribute in {attrs}")
        clean = {}
        for t, value in dict(self.entries).items():
            t = tuple(t)
            if len(t) != len(attrs):
                raise AttributeMismatch(f"tuple {t} does not match attributes {attrs}")
            self.monoid.check(value)
            if not self.monoid.is_zero(value):
                clean[t] = value
        object.__setattr__(self, "attrs", attrs)
        object.__setattr__(self, "entries", clean)

    @classmethod
    def empty(cls, monoid: Monoid, attrs) -> "KRel":
        return cls(monoid, tuple(attrs), {})

    @property
    def support(self) -> list[tuple]:
        return sorted(self.entries, key=tuple_key)

    def items(self) -> list[tuple[tuple, Any]]:
        return [(t, self.entries[t]) for t in self.support]

    def get(self, t) -> Any:
        return self.entries.get(tuple(t), self.monoid.zero)

    def positions(self, attrs) -> list[int]:
        try:
            return [self.attrs.index(a) for a in attrs]
        except ValueError:
            raise AttributeMismatch(
                f"{list(attrs)} is not a subset of {list(self.attrs)}"
            ) from None

    def reorder(self, attrs) -> "KRel":
        attrs = tuple(attrs)
        if sorted(attrs) != sorted(self.attrs):
            raise AttributeMismatch(f"{attrs} is not a permutation of {self.attrs}")
        pos = self.positions(attrs)
        return KRel(
            self.monoid,
            attrs,
            {tuple(t[p] for p in pos): v for t, v in self.entries.items()},
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KRel) or self.monoid != other.monoid:
            return False
        if set(self.attrs) != set(other.attrs):
            return False
        return self.entries == other.reorder(self.attrs).entries

    __hash__ = None

    def __repr__(self) -> str:
        body = ", ".join(
            f"{t}: {self.monoid.format(v)}" for t, v in self.items()[:8]
        )
        more = ", ..." if len(self) > 8 else ""
        return f"KRel[{self.monoid.name}]({','.join(self.attrs)}){{{body}{more}}}"


@dataclass
class ConsistencyResult:
    """Verdict of a consistency oracle and the witness when one was built."""

    consistent: bool
    witness: KRel | None = None
    strategy: str = ""
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "consistent": self.consistent,
            "strategy": self.strategy,
            "note": self.note,
            "witness": krel_to_dict(self.witness) if self.witness is not None else None,
        }


class Strategy(str, Enum):
    AUTO = "auto"
    INNER = "inner"
    BRUTE_FORCE = "brute-force"


def same_monoid(*rels: KRel) -> Monoid:
    m = rels[0].monoid
    for R in rels[1:]:
        if R.monoid != m:
            raise MonoidMismatch(f"{R.monoid.name} differs from {m.name}")
    return m


def shared_attrs(R: KRel, T: KRel) -> tuple:
    return tuple(a for a in R.attrs if a in T.attrs)


def union_attrs(*rels: KRel) -> tuple:
    attrs = []
    for R in rels:
        attrs.extend(a for a in R.attrs if a not in attrs)
    return tuple(attrs)


def marginal(R: KRel, attrs) -> KRel:
    """R[Y](t) = sum of R(r) over support tuples r with r[Y] = t."""
    attrs = tuple(dict.fromkeys(attrs))
    pos = R.positions(attrs)
    m = R.monoid
    sums = {}
    for t, value in R.entries.items():
        key = tuple(t[p] for p in pos)
        sums[key] = m._add(sums[key], value) if key in sums else value
    return KRel(m, attrs, sums)


def rel_leq(R: KRel, S: KRel) -> bool:
    """Pointwise canonical preorder R ⊑ S."""
    m = same_monoid(R, S)
    if set(R.attrs) != set(S.attrs):
        raise AttributeMismatch(f"{R.attrs} and {S.attrs} differ")
    S = S.reorder(R.attrs)
    return all(m.leq(v, S.get(t)).holds for t, v in R.entries.items())


def inner_consistent(R: KRel, T: KRel) -> bool:
    """R[X∩Y] = T[X∩Y]; disjoint relations compare total mass."""
    same_monoid(R, T)
    shared = shared_attrs(R, T)
    return marginal(R, shared) == marginal(T, shared)


def is_witness(W: KRel, rels) -> bool:
    return all(marginal(W, R.attrs) == R for R in rels)


def join_tuple(r: tuple, t: tuple, extra: list[int]) -> tuple:
    return r + tuple(t[p] for p in extra)


def group_by(R: KRel, attrs) -> dict[tuple, list[tuple]]:
    """Support tuples of R grouped by their projection on attrs, each group sorted."""
    pos = R.positions(attrs)
    groups = defaultdict(list)
    for t in R.support:
        groups[tuple(t[p] for p in pos)].append(t)
    return dict(groups)


def natural_join_support(rels) -> tuple[tuple, list[tuple]]:
    """Attribute union and the tuples whose projections all lie in the supports."""
    attrs: tuple = ()
    tuples = [()]
    for R in rels:
        shared = tuple(a for a in R.attrs if a in attrs)
        extra = [R.attrs.index(a) for a in R.attrs if a not in attrs]
        groups = group_by(R, shared)
        left_pos = [attrs.index(a) for a in shared]
        tuples = [
            join_tuple(t, r, extra)
            for t in tuples
            for r in groups.get(tuple(t[p] for p in left_pos), [])
        ]
        attrs = attrs + tuple(R.attrs[p] for p in extra)
    return attrs, sorted(tuples, key=tuple_key)


def _components(n: int, constraints: list[list[int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for members in constraints:
        for other in members[1:]:
            parent[find(other)] = find(members[0])
    groups = defaultdict(list)
    for x in range(n):
        groups[find(x)].append(x)
    return sorted(groups.values())


def brute_force_witness(rels, bound: int | None = None) -> KRel | None:
    """
    Search every assignment of monoid values to the natural-join candidates.

    Positivity confines any witness to the join of the supports. Candidates
    are split into components linked by marginal constraints; each component
    must stay within the brute-force bound (|K|^size).
    """
    m = same_monoid(*rels)
    if not m.finite:
        raise UnsupportedStrategy(f"{m.name} has an infinite carrier")
    bound = bound or settings.brute_force_bound
    attrs, candidates = natural_join_support(rels)
    index = {t: i for i, t in enumerate(candidates)}

    constraints, targets = [], []
    for R in rels:
        pos = [attrs.index(a) for a in R.attrs]
        members = defaultdict(list)
        for t in candidates:
            members[tuple(t[p] for p in pos)].append(index[t])
        for key, value in R.entries.items():
            if key not in members:
                return None
            constraints.append(members[key])
            targets.append(m.index_of(value))

    els = m.elements()
    table = m.add_table
    zero = m.index_of(m.zero)
    n = len(els)
    values = [zero] * len(candidates)

    for component in _components(len(candidates), constraints):
        if n ** len(component) > bound:
            raise BudgetExceeded(
                f"{n}^{len(component)} assignments exceed the bound {bound}"
            )
        local = set(component)
        checks = defaultdict(list)
        for k, members in enumerate(constraints):
            if members[0] in local:
                checks[max(members)].append(k)
        order = sorted(component)

        def assign(step: int) -> bool:
            if step == len(order):
                return True
            cell = order[step]
            for v in range(n):
                values[cell] = v
                closed = checks[cell]
                if all(
                    _constraint_sum(table, zero, values, constraints[k]) == targets[k]
                    for k in closed
                ) and assign(step + 1):
                    return True
            values[cell] = zero
            return False

        if not assign(0):
            return None
    return KRel(m, attrs, {t: els[values[i]] for i, t in enumerate(candidates)})


def _constraint_sum(table: np.ndarray, zero: int, values: list[int], members) -> int:
    total = zero
    for i in members:
        total = table[total, values[i]]
    return total


def witness_join(R: KRel, T: KRel) -> KRel:
    """
    Join R and T into a relation over X∪Y using the monoid's witness family.

    Whenever R and T are consistent the result is a consistency witness.
    """
    m = same_monoid(R, T)
    family = m.capabilities.witness_family
    attrs = union_attrs(R, T)
    if family is WitnessFamily.LATTICE_MEET:
        return lattice_join(R, T)
    if family is WitnessFamily.TRANSPORTATION:
        shared = shared_attrs(R, T)
        extra = [T.attrs.index(a) for a in T.attrs if a not in R.attrs]
        right = group_by(T, shared)
        entries = {}
        for key, rows in group_by(R, shared).items():
            cols = right.get(key)
            if cols is None:
                continue
            matrix = m.solve_transport(
                [R.entries[r] for r in rows], [T.entries[c] for c in cols]
            )
            if matrix is None:
                continue
            for r, row in zip(rows, matrix, strict=True):
                for c, value in zip(cols, row, strict=True):
                    entries[join_tuple(r, c, extra)] = value
        return KRel(m, attrs, entries)
    if family is WitnessFamily.PRODUCTION_GENERIC:
        from semijoin import witness_production

        return witness_production(R, T)
    if family is WitnessFamily.BRUTE_FORCE:
        W = brute_force_witness([R, T])
        return W if W is not None else KRel.empty(m, attrs)
    raise UnsupportedStrategy(f"{m.name} has no witness family")


def lattice_join(R: KRel, T: KRel) -> KRel:
    """W(t) = R(t[X]) ∧ T(t[Y])."""
    m = same_monoid(R, T)
    shared = shared_attrs(R, T)
    extra = [T.attrs.index(a) for a in T.attrs if a not in R.attrs]
    right = group_by(T, shared)
    entries = {}
    for key, rows in group_by(R, shared).items():
        for r in rows:
            for c in right.get(key, []):
                entries[join_tuple(r, c, extra)] = m.meet(R.entries[r], T.entries[c])
    return KRel(m, union_attrs(R, T), entries)


def _validated(W: KRel, rels, strategy: str) -> ConsistencyResult:
    if not is_witness(W, rels):
        raise WitnessValidationError(f"{strategy} witness misses a marginal")
    return ConsistencyResult(True, W, strategy)


def consistent(
    R: KRel, T: KRel, strategy: Strategy = Strategy.AUTO, bound: int | None = None
) -> ConsistencyResult:
    """Decide whether some W over X∪Y has W[X] = R and W[Y] = T."""
    m = same_monoid(R, T)
    caps = m.capabilities
    constructive = caps.icp is Tristate.YES and caps.witness_family in (
        WitnessFamily.LATTICE_MEET,
        WitnessFamily.TRANSPORTATION,
    )
    if strategy is Strategy.AUTO:
        if constructive:
            strategy = Strategy.INNER
        elif m.finite:
            strategy = Strategy.BRUTE_FORCE
        else:
            raise UnsupportedStrategy(
                f"{m.name}: icp={caps.icp.value} and the carrier is infinite"
            )

    if not inner_consistent(R, T):
        return ConsistencyResult(False, None, strategy.value, "marginals differ")

    if strategy is Strategy.INNER:
        if not constructive:
            raise UnsupportedStrategy(f"{m.name} lacks a constructive ICP witness")
        return _validated(witness_join(R, T), [R, T], strategy.value)

    W = brute_force_witness([R, T], bound)
    if W is None:
        logger.debug("brute force found no witness for %s and %s", R.attrs, T.attrs)
        return ConsistencyResult(False, None, strategy.value)
    return _validated(W, [R, T], strategy.value)


def globally_consistent(rels, bound: int | None = None) -> ConsistencyResult:
    """Decide whether one relation over the attribute union has every Ri as marginal."""
    from reducer import build_global_witness
    from schema import Hyperedge, Hypergraph, gyo_order

    rels = list(rels)
    if not rels:
        raise RelationError("global consistency needs at least one relation")
    m = same_monoid(*rels)
    if len(rels) == 1:
        return ConsistencyResult(True, rels[0], "trivial")

    caps = m.capabilities
    if caps.icp is Tristate.YES and caps.witness_family in (
        WitnessFamily.LATTICE_MEET,
        WitnessFamily.TRANSPORTATION,
    ):
        H = Hypergraph([Hyperedge(f"R{i + 1}", R.attrs) for i, R in enumerate(rels)])
        gyo = gyo_order(H)
        if gyo.acyclic:
            for i in range(len(rels)):
                for j in range(i + 1, len(rels)):
                    if not inner_consistent(rels[i], rels[j]):
                        return ConsistencyResult(
                            False, None, "fold", f"R{i + 1} and R{j + 1} disagree"
                        )
            W = build_global_witness(gyo.ordering, rels)
            return ConsistencyResult(True, W, "fold")

    if not m.finite:
        raise UnsupportedStrategy(
            f"{m.name}: no global consistency oracle for this schema and monoid"
        )
    W = brute_force_witness(rels, bound)
    if W is None:
        return ConsistencyResult(False, None, Strategy.BRUTE_FORCE.value)
    return _validated(W, rels, Strategy.BRUTE_FORCE.value)


def default_domains(attrs, domain_size: int) -> dict[str, list[str]]:
    return {a: [str(v) for v in range(domain_size)] for a in attrs}


def gen_random_krel(
    m: Monoid,
    attrs,
    max_support: int,
    value_pool=None,
    seed: int | np.random.Generator = 0,
    domain_size: int = 2,
    domains: dict | None = None,
) -> KRel:
    """Draw a random relation; deterministic for a given seed."""
    attrs = tuple(attrs)
    rng = np.random.default_rng(seed)
    domains = domains or default_domains(attrs, domain_size)
    if any(not domains.get(a) for a in attrs):
        raise RelationError(f"empty domain among {attrs}")
    pool = list(value_pool) if value_pool is not None else m.sample_pool()
    if not pool or any(m.is_zero(v) for v in pool):
        raise RelationError("value pool must be nonempty and free of zero")
    candidates = list(product(*(domains[a] for a in attrs)))
    size = int(rng.integers(0, min(max_support, len(candidates)) + 1))
    picks = rng.choice(len(candidates), size=size, replace=False)
    return KRel(
        m,
        attrs,
        {candidates[int(i)]: pool[int(rng.integers(len(pool)))] for i in picks},
    )


def gen_consistent_family(
    m: Monoid,
    hypergraph,
    seed: int | np.random.Generator = 0,
    max_support: int = 8,
    domain_size: int = 2,
) -> list[KRel]:
    """Marginals of one random witness onto every hyperedge."""
    attrs = hypergraph.attributes()
    domains = hypergraph.domains or default_domains(attrs, domain_size)
    W = gen_random_krel(m, attrs, max_support, seed=seed, domains=domains)
    return [marginal(W, edge.attrs) for edge in hypergraph.edges]


def krel_to_dict(R: KRel) -> dict:
    return {
        "attrs": list(R.attrs),
        "rows": [[*t, R.monoid.format(v)] for t, v in R.items()],
    }


def krel_from_dict(m: Monoid, doc: dict) -> KRel:
    try:
        attrs = tuple(doc["attrs"])
        rows = doc["rows"]
    except (KeyError, TypeError) as e:
        raise RelationFormatError(f"relation document lacks {e}") from e
    entries = {}
    for row in rows:
        if len(row) != len(attrs) + 1:
            raise RelationFormatError(f"row {row} does not match {attrs}")
        entries[tuple(row[:-1])] = m.parse(row[-1])
    return KRel(m, attrs, entries)


def read_krel_csv(path, m: Monoid, attrs=None) -> KRel:
    """Read a relation CSV whose last column is `#annotation`."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise RelationFormatError(f"{path}: {e}") from e
    columns = list(frame.columns)
    if not columns or columns[-1] != ANNOTATION:
        raise RelationFormatError(f"{path}: last column must be {ANNOTATION}")
    file_attrs = tuple(c.strip() for c in columns[:-1])
    if attrs is not None and sorted(file_attrs) != sorted(attrs):
        raise AttributeMismatch(f"{path}: columns {file_attrs} differ from {attrs}")

    entries = {}
    for line, row in enumerate(frame.itertuples(index=False, name=None), start=2):
        t = tuple(v.strip() for v in row[:-1])
        if t in entries:
            raise RelationFormatError(f"{path}:{line}: duplicate tuple {t}")
        try:
            entries[t] = m.parse(row[-1])
        except MonoidError as e:
            raise RelationFormatError(f"{path}:{line}: {e}") from e
    R = KRel(m, file_attrs, entries)
    return R.reorder(attrs) if attrs is not None else R


def write_krel_csv(R: KRel, path=None) -> str:
    """Render R as CSV (tuples in sorted order); also write it when a path is given."""
    frame = pd.DataFrame(
        [[*t, R.monoid.format(v)] for t, v in R.items()],
        columns=[*R.attrs, ANNOTATION],
    )
    text = frame.to_csv(index=False, lineterminator="\n")
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    return text
