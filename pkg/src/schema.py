"""
Schemas as hypergraphs, GYO ear removal and running-intersection orderings.
"""

import logging
from dataclasses import dataclass, field
from itertools import permutations
from typing import NamedTuple

from utils import FileFormatError, load_json

logger = logging.getLogger(__name__)


class SchemaError(Exception):
    """Base error for schemas."""


class CyclicSchemaError(SchemaError):
    """The schema has no running-intersection ordering."""

    def __init__(self, message: str, residual: "Hypergraph | None" = None):
        super().__init__(message)
        self.residual = residual


class OrderingError(SchemaError):
    """An ordering is not a permutation of the edges or has bad parent indices."""


@dataclass(frozen=True)
class Hyperedge:
    name: str
    attrs: tuple

    def __post_init__(self):
        attrs = tuple(self.attrs)
        if not attrs:
            raise SchemaError(f"hyperedge {self.name} is empty")
        if len(set(attrs)) != len(attrs):
            raise SchemaError(f"hyperedge {self.name} repeats an attribute")
        object.__setattr__(self, "attrs", attrs)


@dataclass
class Hypergraph:
    """Named hyperedges; the node set is the union of their attributes."""

    edges: list[Hyperedge]
    domains: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        self.edges = list(self.edges)
        if not self.edges:
            raise SchemaError("a schema needs at least one hyperedge")
        names = [e.name for e in self.edges]
        if len(set(names)) != len(names):
            raise SchemaError(f"hyperedge names repeat: {names}")
        for attr, values in self.domains.items():
            if not values:
                raise SchemaError(f"domain of {attr} is empty")

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.edges]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown hyperedge {name!r}") from None

    def attributes(self) -> tuple:
        attrs = []
        for e in self.edges:
            attrs.extend(a for a in e.attrs if a not in attrs)
        return tuple(attrs)

    def to_dict(self) -> dict:
        doc = {
            "hyperedges": [{"name": e.name, "attrs": list(e.attrs)} for e in self.edges]
        }
        if self.domains:
            doc["domains"] = {a: list(v) for a, v in self.domains.items()}
        return doc


@dataclass
class RIOrdering:
    """
    Edges Y1..Ym in running-intersection order.

    `order[i]` is an index into the hypergraph's edges; `parents[i]` is the
    position (in this ordering, 0-based) of the edge absorbing Yi's overlap
    with everything before it. `parents[0]` is None.
    """

    order: list[int]
    parents: list[int | None]

    def edges(self, H: Hypergraph) -> list[Hyperedge]:
        return [H.edges[i] for i in self.order]

    def to_dict(self, H: Hypergraph) -> dict:
        return {
            "order": [H.edges[i].name for i in self.order],
            "parents": [None if p is None else p + 1 for p in self.parents],
        }


class OrderingCheck(NamedTuple):
    valid: bool
    first_violation: int | None = None


@dataclass
class GyoResult:
    """Outcome of ear removal: an ordering when acyclic, the residual otherwise."""

    acyclic: bool
    ordering: RIOrdering | None = None
    residual: Hypergraph | None = None
    removed: list[tuple[str, str | None]] = field(default_factory=list)

    def to_dict(self, H: Hypergraph) -> dict:
        return {
            "acyclic": self.acyclic,
            "ordering": self.ordering.to_dict(H) if self.ordering else None,
            "residual": self.residual.to_dict() if self.residual else None,
            "removed": [list(step) for step in self.removed],
        }


def _shared(H: Hypergraph, edge: int, remaining: list[int]) -> set:
    others = set()
    for k in remaining:
        if k != edge:
            others.update(H.edges[k].attrs)
    return set(H.edges[edge].attrs) & others


def gyo_order(H: Hypergraph) -> GyoResult:
    """
    GYO ear removal; ears and their absorbing edges are chosen by name.

    An ear is an edge whose attributes shared with the other remaining edges
    all lie in a single other edge. The ordering is the removal order reversed.
    """
    remaining = list(range(len(H)))
    removed: list[tuple[int, int | None]] = []
    by_name = sorted(remaining, key=lambda k: H.edges[k].name)
    while len(remaining) > 1:
        ear = None
        for k in by_name:
            if k not in remaining:
                continue
            shared = _shared(H, k, remaining)
            if not shared:
                ear = (k, None)
                break
            witness = next(
                (
                    w
                    for w in by_name
                    if w != k and w in remaining and shared <= set(H.edges[w].attrs)
                ),
                None,
            )
            if witness is not None:
                ear = (k, witness)
                break
        if ear is None:
            break
        logger.debug(
            "removing ear %s (absorbed by %s)",
            H.edges[ear[0]].name,
            H.edges[ear[1]].name if ear[1] is not None else "-",
        )
        removed.append(ear)
        remaining.remove(ear[0])

    named = [
        (H.edges[k].name, H.edges[w].name if w is not None else None)
        for k, w in removed
    ]
    if len(remaining) > 1:
        residual = Hypergraph(
            [
                Hyperedge(
                    H.edges[k].name,
                    tuple(a for a in H.edges[k].attrs if a in _shared(H, k, remaining)),
                )
                for k in remaining
            ]
        )
        return GyoResult(False, residual=residual, removed=named)

    order = remaining + [k for k, _ in reversed(removed)]
    position = {k: i for i, k in enumerate(order)}
    absorbed_by = dict(removed)
    parents: list[int | None] = [None]
    for k in order[1:]:
        w = absorbed_by[k]
        parents.append(position[w] if w is not None else 0)
    ordering = RIOrdering(order, parents)
    check = validate_ordering(H, ordering)
    if not check.valid:
        raise OrderingError(f"ear removal produced an invalid ordering at {check}")
    return GyoResult(True, ordering=ordering, removed=named)


def is_acyclic(H: Hypergraph) -> bool:
    return gyo_order(H).acyclic


def validate_ordering(H: Hypergraph, ordering: RIOrdering) -> OrderingCheck:
    """
    Check (Y1 ∪ ... ∪ Y_{i-1}) ∩ Yi ⊆ Y_{j_i} for every i >= 2.

    Returns the first violated position, 1-based like the Yi.
    """
    m = len(H)
    if sorted(ordering.order) != list(range(m)):
        raise OrderingError(f"{ordering.order} is not a permutation of {m} edges")
    if len(ordering.parents) != m or ordering.parents[0] is not None:
        raise OrderingError("parents must have one entry per edge, starting with None")
    seen = set()
    for i, k in enumerate(ordering.order):
        attrs = set(H.edges[k].attrs)
        if i > 0:
            j = ordering.parents[i]
            if j is None or not 0 <= j < i:
                raise OrderingError(f"parent of position {i + 1} must precede it")
            if not (seen & attrs) <= set(H.edges[ordering.order[j]].attrs):
                return OrderingCheck(False, i + 1)
        seen |= attrs
    return OrderingCheck(True)


def _resolve(H: Hypergraph, permutation) -> list[int]:
    return [H.index_of(p) if isinstance(p, str) else int(p) for p in permutation]


def ordering_from_permutation(H: Hypergraph, permutation) -> RIOrdering | None:
    """Attach the smallest valid parent to each position, or None if one has none."""
    order = _resolve(H, permutation)
    if sorted(order) != list(range(len(H))):
        raise OrderingError(f"{permutation} is not a permutation of the edges")
    parents: list[int | None] = [None]
    seen = set(H.edges[order[0]].attrs)
    for i in range(1, len(order)):
        attrs = set(H.edges[order[i]].attrs)
        overlap = seen & attrs
        parent = next(
            (j for j in range(i) if overlap <= set(H.edges[order[j]].attrs)), None
        )
        if parent is None:
            return None
        parents.append(parent)
        seen |= attrs
    return RIOrdering(order, parents)


def exhaustive_ordering(H: Hypergraph) -> RIOrdering | None:
    """Try every permutation; the reference oracle for small schemas."""
    for permutation in permutations(range(len(H))):
        ordering = ordering_from_permutation(H, permutation)
        if ordering is not None:
            return ordering
    return None


def path_schema(n: int) -> Hypergraph:
    """R1(A1,A2), R2(A2,A3), ..., Rn(An,A_{n+1})."""
    if n < 1:
        raise SchemaError("a path needs at least one edge")
    return Hypergraph(
        [Hyperedge(f"R{i}", (f"A{i}", f"A{i + 1}")) for i in range(1, n + 1)]
    )


def triangle_schema() -> Hypergraph:
    return Hypergraph(
        [
            Hyperedge("R1", ("A", "B")),
            Hyperedge("R2", ("B", "C")),
            Hyperedge("R3", ("C", "A")),
        ]
    )


def four_edge_schema() -> Hypergraph:
    return Hypergraph(
        [
            Hyperedge("R1", ("A", "B", "C")),
            Hyperedge("R2", ("C", "D", "E")),
            Hyperedge("R3", ("E", "F", "A")),
            Hyperedge("R4", ("A", "C", "E")),
        ]
    )


def schema_from_dict(doc: dict) -> Hypergraph:
    try:
        edges = [Hyperedge(e["name"], tuple(e["attrs"])) for e in doc["hyperedges"]]
    except (KeyError, TypeError) as e:
        raise FileFormatError(f"schema document is malformed ({e})") from e
    domains = {
        a: [str(v) for v in values] for a, values in doc.get("domains", {}).items()
    }
    return Hypergraph(edges, domains)


def load_schema(path) -> Hypergraph:
    """Load a schema file (JSON)."""
    try:
        return schema_from_dict(load_json(path))
    except SchemaError as e:
        raise FileFormatError(f"{path}: {e}") from e
