"""
Positive commutative monoids for annotated relations.

This module provides:
- The `Monoid` abstraction (add, zero, element codec, capability flags)
- The builtin families: Boolean, bag, fuzzy-max, nonneg-real, min-tropical,
  powerset and numerical semigroups
- Finite-table monoids, validated axiom by axiom
- The canonical preorder with witnesses, the production solvers and the
  transportation solvers
- Loading and describing monoid files
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Any

import numpy as np

from settings import settings
from utils import FileFormatError, load_json

logger = logging.getLogger(__name__)


class MonoidError(Exception):
    """Base error for monoid operations."""


class InvariantViolation(MonoidError):
    """An element was used with a monoid whose carrier does not contain it."""


class UnsupportedCapability(MonoidError):
    """The monoid lacks the capability an operation needs."""

    def __init__(self, message: str, counterexample: tuple | None = None):
        super().__init__(message)
        self.counterexample = counterexample


class SearchBudgetExceeded(MonoidError):
    """An exhaustive search would exceed the configured brute-force bound."""


class ElementParseError(MonoidError, ValueError):
    """Text could not be decoded as an element of the monoid."""


class ProductionContractError(MonoidError):
    """A solver returned a production plan that violates its contract."""


class MonoidValidationError(MonoidError):
    """A finite table failed validation; the report is attached."""

    def __init__(self, validation: "TableValidation"):
        super().__init__(validation.message)
        self.validation = validation


class WitnessFamily(str, Enum):
    LATTICE_MEET = "lattice-meet"
    TRANSPORTATION = "transportation"
    PRODUCTION_GENERIC = "production-generic"
    BRUTE_FORCE = "brute-force"


class Tristate(str, Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Capabilities:
    """What a monoid can do, either known from its family or computed."""

    preorder_decidable: bool = True
    production_solver: bool = False
    witness_family: WitnessFamily | None = None
    icp: Tristate = Tristate.UNKNOWN
    cancellative: Tristate = Tristate.UNKNOWN

    def to_dict(self) -> dict:
        return {
            "preorder_decidable": self.preorder_decidable,
            "production_solver": self.production_solver,
            "witness_family": self.witness_family.value
            if self.witness_family
            else None,
            "icp": self.icp.value,
            "cancellative": self.cancellative.value,
        }


@dataclass(frozen=True)
class LeqResult:
    """Outcome of a canonical-preorder query: a + witness = b when it holds."""

    holds: bool
    witness: Any = None

    def __bool__(self) -> bool:
        return self.holds


class Monoid(ABC):
    """
    A positive commutative monoid (K, +, 0).

    Elements are plain Python values whose representation depends on the
    family. Every public operation checks carrier membership first, so an
    element of one monoid cannot leak into another.
    """

    family: str = ""
    finite: bool = False

    @property
    @abstractmethod
    def zero(self) -> Any: ...

    @property
    @abstractmethod
    def capabilities(self) -> Capabilities: ...

    @abstractmethod
    def contains(self, a: Any) -> bool: ...

    @abstractmethod
    def _add(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def _leq(self, a: Any, b: Any) -> LeqResult: ...

    @abstractmethod
    def parse(self, text: str) -> Any: ...

    @abstractmethod
    def format(self, a: Any) -> str: ...

    @abstractmethod
    def key(self) -> tuple: ...

    @abstractmethod
    def describe(self) -> dict: ...

    @abstractmethod
    def sample_pool(self) -> list:
        """Nonzero elements used to draw random annotations."""

    @property
    def name(self) -> str:
        return self.family

    def __eq__(self, other) -> bool:
        return isinstance(other, Monoid) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"

    def check(self, *values: Any):
        for a in values:
            if not self.contains(a):
                raise InvariantViolation(f"{a!r} is not an element of {self.name}")

    def add(self, a: Any, b: Any) -> Any:
        self.check(a, b)
        return self._add(a, b)

    def sum(self, values) -> Any:
        total = self.zero
        for v in values:
            self.check(v)
            total = self._add(total, v)
        return total

    def is_zero(self, a: Any) -> bool:
        return a == self.zero

    def leq(self, a: Any, b: Any) -> LeqResult:
        """Decide a ⊑ b, i.e. whether a + c = b for some c in the carrier."""
        self.check(a, b)
        if not self.capabilities.preorder_decidable:
            raise UnsupportedCapability(f"{self.name}: canonical preorder undecidable")
        return self._leq(a, b)

    def meet(self, a: Any, b: Any) -> Any:
        raise UnsupportedCapability(f"{self.name} has no lattice meet")

    def elements(self) -> list:
        raise UnsupportedCapability(f"{self.name} has an infinite carrier")

    def production_counterexample(self) -> tuple | None:
        return None

    # Production and transportation

    def solve_production(self, b: Any, capacities) -> list | None:
        """
        Split demand b over capacities c1..cn.

        Returns d1..dn with di ⊑ ci and d1 + ... + dn = b, or None when
        b is not below c1 + ... + cn.
        """
        capacities = list(capacities)
        if not capacities:
            raise ValueError("a production instance needs at least one capacity")
        self.check(b, *capacities)
        if not self.capabilities.production_solver:
            raise UnsupportedCapability(
                f"{self.name} has no production solver",
                counterexample=self.production_counterexample(),
            )
        d = self._solve_production(b, capacities)
        if d is not None:
            self._check_production(b, capacities, d)
        return d

    def _solve_production(self, b: Any, capacities: list) -> list | None:
        raise UnsupportedCapability(f"{self.name} has no production solver")

    def _check_production(self, b: Any, capacities: list, d: list):
        if len(d) != len(capacities) or self.sum(d) != b:
            raise ProductionContractError(
                f"{self.name}: production plan {d!r} does not sum to {b!r}"
            )
        for di, ci in zip(d, capacities, strict=True):
            if not self._leq(di, ci).holds:
                raise ProductionContractError(
                    f"{self.name}: production share {di!r} exceeds capacity {ci!r}"
                )

    def solve_transport(self, supplies, demands) -> list[list] | None:
        """
        Find a matrix whose rows sum to supplies and whose columns sum to
        demands, or None when no such matrix exists.
        """
        supplies, demands = list(supplies), list(demands)
        if not supplies or not demands:
            raise ValueError("transportation needs nonempty supplies and demands")
        self.check(*supplies, *demands)
        if self.sum(supplies) != self.sum(demands):
            return None
        matrix = self._solve_transport(supplies, demands)
        if matrix is not None:
            self._check_transport(supplies, demands, matrix)
        return matrix

    def _solve_transport(self, supplies: list, demands: list) -> list[list] | None:
        if self.finite:
            return self._search_transport(supplies, demands)
        raise UnsupportedCapability(f"{self.name} has no transportation solver")

    def _check_transport(self, supplies: list, demands: list, matrix: list[list]):
        for i, row in enumerate(matrix):
            if self.sum(row) != supplies[i]:
                raise ProductionContractError(f"{self.name}: row {i} misses its sum")
        for j in range(len(demands)):
            if self.sum(row[j] for row in matrix) != demands[j]:
                raise ProductionContractError(f"{self.name}: column {j} misses its sum")

    # Finite carriers: index-level tables shared by the decision procedures

    @cached_property
    def _element_index(self) -> dict:
        return {e: i for i, e in enumerate(self.elements())}

    def index_of(self, a: Any) -> int:
        self.check(a)
        return self._element_index[a]

    @cached_property
    def add_table(self) -> np.ndarray:
        """add_table[i, j] is the index of elements()[i] + elements()[j]."""
        els = self.elements()
        n = len(els)
        table = np.empty((n, n), dtype=np.int64)
        for i, a in enumerate(els):
            for j, b in enumerate(els):
                table[i, j] = self._element_index[self._add(a, b)]
        return table

    @cached_property
    def leq_table(self) -> np.ndarray:
        """leq_table[a, b] is True iff elements()[a] ⊑ elements()[b]."""
        table = self.add_table
        n = table.shape[0]
        leq = np.zeros((n, n), dtype=bool)
        leq[np.arange(n)[:, None], table] = True
        return leq

    def _search_transport(self, supplies: list, demands: list) -> list[list] | None:
        els = self.elements()
        n = len(els)
        rows, cols = len(supplies), len(demands)
        cells = rows * cols
        if n**cells > settings.brute_force_bound:
            raise SearchBudgetExceeded(
                f"{self.name}: {n}^{cells} transportation candidates exceed the bound"
            )
        table = self.add_table
        zero = self._element_index[self.zero]
        b = [self._element_index[x] for x in supplies]
        c = [self._element_index[x] for x in demands]
        grid = [[zero] * cols for _ in range(rows)]
        row_acc = [zero] * rows
        col_acc = [zero] * cols

        def fill(k: int) -> bool:
            if k == cells:
                return True
            i, j = divmod(k, cols)
            for v in range(n):
                new_row = table[row_acc[i], v]
                new_col = table[col_acc[j], v]
                if j == cols - 1 and new_row != b[i]:
                    continue
                if i == rows - 1 and new_col != c[j]:
                    continue
                saved = row_acc[i], col_acc[j]
                grid[i][j], row_acc[i], col_acc[j] = v, new_row, new_col
                if fill(k + 1):
                    return True
                row_acc[i], col_acc[j] = saved
            return False

        if not fill(0):
            return None
        return [[els[v] for v in row] for row in grid]


class _LatticeMonoid(Monoid):
    """Families that expand to a bounded distributive lattice."""

    def _solve_production(self, b, capacities):
        if not self._leq(b, self.sum(capacities)).holds:
            return None
        return [self.meet(b, c) for c in capacities]

    def _solve_transport(self, supplies, demands):
        return [[self.meet(s, d) for d in demands] for s in supplies]

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            production_solver=True,
            witness_family=WitnessFamily.LATTICE_MEET,
            icp=Tristate.YES,
            cancellative=Tristate.NO,
        )


class BooleanMonoid(_LatticeMonoid):
    """({0, 1}, ∨, 0): annotated relations are standard relations."""

    family = "boolean"
    finite = True

    @property
    def zero(self):
        return 0

    def contains(self, a):
        return isinstance(a, int) and a in (0, 1)

    def _add(self, a, b):
        return max(a, b)

    def _leq(self, a, b):
        return LeqResult(True, b) if a <= b else LeqResult(False)

    def meet(self, a, b):
        self.check(a, b)
        return min(a, b)

    def elements(self):
        return [0, 1]

    def parse(self, text):
        token = str(text).strip().lower()
        if token in ("0", "false"):
            return 0
        if token in ("1", "true"):
            return 1
        raise ElementParseError(f"boolean: cannot parse {text!r}")

    def format(self, a):
        self.check(a)
        return str(int(a))

    def key(self):
        return ("boolean",)

    def describe(self):
        return {"kind": "builtin", "name": "boolean"}

    def sample_pool(self):
        return [1]


class _AdditiveMonoid(Monoid):
    """Totally ordered cancellative addition: greedy production, northwest transport."""

    def _add(self, a, b):
        return a + b

    def _leq(self, a, b):
        return LeqResult(True, b - a) if a <= b else LeqResult(False)

    def _solve_production(self, b, capacities):
        if b > sum(capacities):
            return None
        remaining = b
        shares = []
        for c in capacities:
            share = min(remaining, c)
            shares.append(share)
            remaining -= share
        return shares

    def _solve_transport(self, supplies, demands):
        return northwest_corner(supplies, demands, self.zero)

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            production_solver=True,
            witness_family=WitnessFamily.TRANSPORTATION,
            icp=Tristate.YES,
            cancellative=Tristate.YES,
        )


class BagMonoid(_AdditiveMonoid):
    """(ℕ, +, 0): annotations are multiplicities."""

    family = "bag"

    @property
    def zero(self):
        return 0

    def contains(self, a):
        return isinstance(a, int | np.integer) and not isinstance(a, bool) and a >= 0

    def parse(self, text):
        try:
            value = int(str(text).strip())
        except ValueError:
            raise ElementParseError(f"bag: cannot parse {text!r}") from None
        if value < 0:
            raise ElementParseError(f"bag: {text!r} is negative")
        return value

    def format(self, a):
        self.check(a)
        return str(int(a))

    def key(self):
        return ("bag",)

    def describe(self):
        return {"kind": "builtin", "name": "bag"}

    def sample_pool(self):
        return [1, 2, 3]


def _is_real(a) -> bool:
    return isinstance(a, int | float | np.integer | np.floating) and not isinstance(
        a, bool
    )


def _format_real(a) -> str:
    if a == math.inf:
        return "inf"
    return repr(float(a))


class NonnegRealMonoid(_AdditiveMonoid):
    """([0, ∞), +, 0). Values are compared exactly as stored."""

    family = "nonneg-real"

    @property
    def zero(self):
        return 0.0

    def contains(self, a):
        return _is_real(a) and math.isfinite(a) and a >= 0

    def parse(self, text):
        try:
            value = float(str(text).strip())
        except ValueError:
            raise ElementParseError(f"nonneg-real: cannot parse {text!r}") from None
        if not self.contains(value):
            raise ElementParseError(f"nonneg-real: {text!r} is out of range")
        return value

    def format(self, a):
        self.check(a)
        return _format_real(a)

    def key(self):
        return ("nonneg-real",)

    def describe(self):
        return {"kind": "builtin", "name": "nonneg-real"}

    def sample_pool(self):
        return [0.5, 1.0, 1.5, 2.0]


class FuzzyMaxMonoid(_LatticeMonoid):
    """([0, 1], max, 0) with meet = min."""

    family = "fuzzy-max"

    @property
    def zero(self):
        return 0.0

    def contains(self, a):
        return _is_real(a) and 0 <= a <= 1

    def _add(self, a, b):
        return max(a, b)

    def _leq(self, a, b):
        return LeqResult(True, b) if a <= b else LeqResult(False)

    def meet(self, a, b):
        self.check(a, b)
        return min(a, b)

    def parse(self, text):
        try:
            value = float(str(text).strip())
        except ValueError:
            raise ElementParseError(f"fuzzy-max: cannot parse {text!r}") from None
        if not self.contains(value):
            raise ElementParseError(f"fuzzy-max: {text!r} is outside [0, 1]")
        return value

    def format(self, a):
        self.check(a)
        return _format_real(a)

    def key(self):
        return ("fuzzy-max",)

    def describe(self):
        return {"kind": "builtin", "name": "fuzzy-max"}

    def sample_pool(self):
        return [0.25, 0.5, 0.75, 1.0]


class MinTropicalMonoid(_LatticeMonoid):
    """((-∞, ∞], min, ∞) with meet = max; ∞ is the bottom of the preorder."""

    family = "min-tropical"

    @property
    def zero(self):
        return math.inf

    def contains(self, a):
        return _is_real(a) and not math.isnan(a) and a != -math.inf

    def _add(self, a, b):
        return min(a, b)

    def _leq(self, a, b):
        return LeqResult(True, b) if b <= a else LeqResult(False)

    def meet(self, a, b):
        self.check(a, b)
        return max(a, b)

    def parse(self, text):
        token = str(text).strip().lower()
        try:
            value = float(token)
        except ValueError:
            raise ElementParseError(f"min-tropical: cannot parse {text!r}") from None
        if not self.contains(value):
            raise ElementParseError(f"min-tropical: {text!r} is out of range")
        return value

    def format(self, a):
        self.check(a)
        return _format_real(a)

    def key(self):
        return ("min-tropical",)

    def describe(self):
        return {"kind": "builtin", "name": "min-tropical"}

    def sample_pool(self):
        return [-1.0, 0.0, 0.5, 2.0]


class PowersetMonoid(_LatticeMonoid):
    """(P(A), ∪, ∅) over a finite ground set A, with meet = ∩."""

    family = "powerset"
    finite = True

    def __init__(self, ground):
        ground = tuple(ground)
        if len(set(ground)) != len(ground):
            raise MonoidError("powerset: ground set has repeated elements")
        self.ground = ground
        self._by_text = {str(g): g for g in ground}

    @property
    def name(self):
        return f"powerset({','.join(map(str, self.ground))})"

    @property
    def zero(self):
        return frozenset()

    def contains(self, a):
        return isinstance(a, frozenset) and a <= set(self.ground)

    def _add(self, a, b):
        return a | b

    def _leq(self, a, b):
        return LeqResult(True, b) if a <= b else LeqResult(False)

    def meet(self, a, b):
        self.check(a, b)
        return a & b

    @cached_property
    def _elements(self) -> list:
        return [
            frozenset(subset)
            for size in range(len(self.ground) + 1)
            for subset in combinations(self.ground, size)
        ]

    def elements(self):
        return list(self._elements)

    def parse(self, text):
        token = str(text).strip()
        if not (token.startswith("{") and token.endswith("}")):
            raise ElementParseError(f"powerset: {text!r} is not a set literal")
        body = token[1:-1].strip()
        members = set()
        for part in body.split(",") if body else []:
            part = part.strip()
            if part not in self._by_text:
                raise ElementParseError(
                    f"powerset: {part!r} is not in the ground set {self.name}"
                )
            members.add(self._by_text[part])
        return frozenset(members)

    def format(self, a):
        self.check(a)
        return "{" + ",".join(str(g) for g in self.ground if g in a) + "}"

    def key(self):
        return ("powerset", self.ground)

    def describe(self):
        return {"kind": "builtin", "name": "powerset", "ground": list(self.ground)}

    def sample_pool(self):
        return self._elements[1:]


class NumericalSemigroup(Monoid):
    """
    A cofinite submonoid of (ℕ, +, 0) given by generators, e.g. ⟨3, 5⟩.

    Membership below the Frobenius number comes from a reachability table;
    everything above it is in the carrier.
    """

    family = "numerical-semigroup"

    def __init__(self, generators):
        gens = sorted({int(g) for g in generators})
        if not gens or gens[0] <= 0:
            raise MonoidError("numerical semigroup: generators must be positive")
        if math.gcd(*gens) != 1:
            raise MonoidError(
                f"numerical semigroup: generators {gens} have gcd > 1 (not cofinite)"
            )
        if gens[0] == 1:
            raise MonoidError("numerical semigroup: ⟨1⟩ is the bag monoid")
        self.generators = tuple(gens)
        bound = gens[0] * gens[-1]
        reach = [False] * (bound + 1)
        reach[0] = True
        for x in range(1, bound + 1):
            reach[x] = any(x >= g and reach[x - g] for g in gens)
        self.gaps = frozenset(x for x in range(bound + 1) if not reach[x])
        self.frobenius = max(self.gaps)

    @property
    def name(self):
        return f"numerical-semigroup<{','.join(map(str, self.generators))}>"

    @property
    def zero(self):
        return 0

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            production_solver=False,
            witness_family=None,
            icp=Tristate.NO,
            cancellative=Tristate.YES,
        )

    def contains(self, a):
        return (
            isinstance(a, int | np.integer)
            and not isinstance(a, bool)
            and a >= 0
            and a not in self.gaps
        )

    def _add(self, a, b):
        return a + b

    def _leq(self, a, b):
        diff = b - a
        if diff >= 0 and self.contains(diff):
            return LeqResult(True, diff)
        return LeqResult(False)

    def parse(self, text):
        try:
            value = int(str(text).strip())
        except ValueError:
            raise ElementParseError(f"{self.name}: cannot parse {text!r}") from None
        if not self.contains(value):
            raise ElementParseError(f"{self.name}: {text!r} is not in the carrier")
        return value

    def format(self, a):
        self.check(a)
        return str(int(a))

    def key(self):
        return ("numerical-semigroup", self.generators)

    def describe(self):
        return {"kind": "numerical-semigroup", "generators": list(self.generators)}

    def sample_pool(self):
        return self.members_upto(self.frobenius + self.generators[-1])[1:5]

    def search_limit(self) -> int:
        return 2 * (self.frobenius + self.generators[-1])

    def members_upto(self, limit: int) -> list[int]:
        return [x for x in range(limit + 1) if self.contains(x)]

    def production_counterexample(self) -> tuple | None:
        """First (b, c1, c2) with b ⊑ c1 + c2 but no split, searching the carrier."""
        members = self.members_upto(self.search_limit())
        for b in members:
            for c1 in members:
                for c2 in members:
                    if not self._leq(b, c1 + c2).holds:
                        continue
                    if not any(
                        self._leq(d1, c1).holds
                        and self.contains(b - d1)
                        and self._leq(b - d1, c2).holds
                        for d1 in members
                        if d1 <= b
                    ):
                        return (b, c1, c2)
        return None

    def _solve_transport(self, supplies, demands):
        if len(supplies) != 2 or len(demands) != 2:
            raise UnsupportedCapability(f"{self.name}: only 2x2 transportation search")
        (b1, b2), (c1, c2) = supplies, demands
        for d11 in self.members_upto(min(b1, c1)):
            d12, d21 = b1 - d11, c1 - d11
            d22 = b2 - d21
            if self.contains(d12) and self.contains(d21) and d22 >= 0:
                if self.contains(d22):
                    return [[d11, d12], [d21, d22]]
        return None

    def transport_counterexample(self) -> tuple | None:
        """First (b1, b2, c1, c2) with equal sums and no 2×2 matrix."""
        members = self.members_upto(self.search_limit())
        for b1 in members:
            for b2 in members:
                for c1 in members:
                    c2 = b1 + b2 - c1
                    if c2 < 0 or not self.contains(c2):
                        continue
                    if not any(
                        self.contains(b1 - d11)
                        and self.contains(c1 - d11)
                        and b2 - (c1 - d11) >= 0
                        and self.contains(b2 - (c1 - d11))
                        for d11 in members
                        if d11 <= min(b1, c1)
                    ):
                        return (b1, b2, c1, c2)
        return None


@dataclass
class TableValidation:
    """Result of validating a finite addition table."""

    valid: bool
    monoid: "FiniteTableMonoid | None" = None
    violation: str | None = None
    witness: tuple | None = None
    message: str = ""


class FiniteTableMonoid(Monoid):
    """
    A monoid given by an explicit addition table over named elements.

    Build these through `validate_finite_table` / `finite_table`, which check
    the axioms; all capability flags are computed from the table.
    """

    family = "finite-table"
    finite = True

    def __init__(self, names, table: np.ndarray, zero_name: str, label: str = ""):
        self.names = tuple(names)
        self._table = np.asarray(table, dtype=np.int64)
        self._zero = zero_name
        self.label = label

    @property
    def name(self):
        return self.label or f"finite-table[{len(self.names)}]"

    @property
    def zero(self):
        return self._zero

    def contains(self, a):
        return isinstance(a, str) and a in self._element_index

    def elements(self):
        return list(self.names)

    @cached_property
    def add_table(self) -> np.ndarray:
        return self._table

    @cached_property
    def _witness_table(self) -> np.ndarray:
        """First c (in element order) with a + c = b, or -1."""
        n = len(self.names)
        witness = np.full((n, n), -1, dtype=np.int64)
        for a in range(n):
            for c in range(n - 1, -1, -1):
                witness[a, self._table[a, c]] = c
        return witness

    def _add(self, a, b):
        index = self._element_index
        return self.names[self._table[index[a], index[b]]]

    def _leq(self, a, b):
        index = self._element_index
        c = self._witness_table[index[a], index[b]]
        return LeqResult(True, self.names[c]) if c >= 0 else LeqResult(False)

    @cached_property
    def capabilities(self) -> Capabilities:
        from monoid_analysis import (
            Verdict,
            check_cancellative,
            check_production_n2,
            icp_verdict,
        )

        def tristate(report) -> Tristate:
            if report.verdict is Verdict.HOLDS:
                return Tristate.YES
            if report.verdict is Verdict.FAILS:
                return Tristate.NO
            return Tristate.UNKNOWN

        production = check_production_n2(self).verdict is Verdict.HOLDS
        return Capabilities(
            production_solver=production,
            witness_family=WitnessFamily.PRODUCTION_GENERIC
            if production
            else WitnessFamily.BRUTE_FORCE,
            icp=tristate(icp_verdict(self)),
            cancellative=tristate(check_cancellative(self)),
        )

    def production_counterexample(self):
        from monoid_analysis import check_production_n2

        return check_production_n2(self).counterexample

    def _solve_production(self, b, capacities):
        if len(capacities) == 1:
            return [b] if self._leq(b, capacities[0]).holds else None
        # Fold: split b over (c1 + ... + c_{n-1}, c_n), then recurse on the head.
        head = self.sum(capacities[:-1])
        pair = self._solve_pair(b, head, capacities[-1])
        if pair is None:
            return None
        rest = self._solve_production(pair[0], capacities[:-1])
        if rest is None:
            raise ProductionContractError(
                f"{self.name}: production property failed while folding {capacities!r}"
            )
        return rest + [pair[1]]

    def _solve_pair(self, b, c1, c2) -> list | None:
        index = self._element_index
        ib, i1, i2 = index[b], index[c1], index[c2]
        leq, table = self.leq_table, self._table
        if not leq[ib, table[i1, i2]]:
            return None
        for d1 in np.flatnonzero(leq[:, i1]):
            for d2 in np.flatnonzero(leq[:, i2]):
                if table[d1, d2] == ib:
                    return [self.names[d1], self.names[d2]]
        return None

    def parse(self, text):
        token = str(text).strip()
        if token not in self._element_index:
            raise ElementParseError(f"{self.name}: unknown element {text!r}")
        return token

    def format(self, a):
        self.check(a)
        return a

    def key(self):
        return ("finite-table", self.names, self._zero, self._table.tobytes())

    def describe(self):
        return {
            "kind": "finite",
            "elements": list(self.names),
            "zero": self._zero,
            "add": [[self.names[v] for v in row] for row in self._table],
        }

    def sample_pool(self):
        return [e for e in self.names if e != self._zero]


def northwest_corner(supplies: list, demands: list, zero=0) -> list[list] | None:
    """
    Fill a transportation matrix starting from the top-left cell.

    Valid for totally ordered cancellative addition; returns None when the
    totals differ.
    """
    rows, cols = list(supplies), list(demands)
    matrix = [[zero] * len(cols) for _ in rows]
    i = j = 0
    while i < len(rows) and j < len(cols):
        amount = min(rows[i], cols[j])
        matrix[i][j] = amount
        rows[i] -= amount
        cols[j] -= amount
        if rows[i] == 0:
            i += 1
        else:
            j += 1
    if any(r != 0 for r in rows) or any(c != 0 for c in cols):
        return None
    return matrix


def validate_finite_table(elements, add_table, zero_name) -> TableValidation:
    """
    Check a named addition table against the positive commutative monoid axioms.

    Args:
        elements: Element names (at least two, distinct)
        add_table: Row-major table of element names, add_table[i][j] = ei + ej
        zero_name: Name of the neutral element

    Returns:
        TableValidation with the monoid on success, or the first violated
        axiom and a witness
    """
    names = [str(e) for e in elements]
    zero_name = str(zero_name)

    def reject(violation, message, witness=None) -> TableValidation:
        return TableValidation(
            valid=False, violation=violation, witness=witness, message=message
        )

    if len(names) < 2:
        return reject("size", "a monoid needs at least two elements")
    if len(set(names)) != len(names):
        return reject("distinct", "element names must be distinct")
    if zero_name not in names:
        return reject("zero", f"zero {zero_name!r} is not an element")
    n = len(names)
    if len(add_table) != n or any(len(row) != n for row in add_table):
        return reject("shape", f"add table must be {n}x{n}")

    index = {name: i for i, name in enumerate(names)}
    table = np.empty((n, n), dtype=np.int64)
    for i, row in enumerate(add_table):
        for j, cell in enumerate(row):
            cell = str(cell)
            if cell not in index:
                return reject(
                    "closure",
                    f"{names[i]} + {names[j]} = {cell!r} is not an element",
                    (names[i], names[j], cell),
                )
            table[i, j] = index[cell]

    lhs = table[table]
    rhs = table[np.arange(n)[:, None, None], table[None, :, :]]
    bad = np.argwhere(lhs != rhs)
    if len(bad):
        a, b, c = (names[k] for k in bad[0])
        return reject(
            "associativity", f"({a}+{b})+{c} differs from {a}+({b}+{c})", (a, b, c)
        )

    bad = np.argwhere(table != table.T)
    if len(bad):
        a, b = (names[k] for k in bad[0])
        return reject("commutativity", f"{a}+{b} differs from {b}+{a}", (a, b))

    z = index[zero_name]
    bad = np.flatnonzero((table[z] != np.arange(n)) | (table[:, z] != np.arange(n)))
    if len(bad):
        a = names[bad[0]]
        return reject("neutrality", f"{a}+{zero_name} differs from {a}", (a,))

    zero_sums = table == z
    zero_sums[z, z] = False
    bad = np.argwhere(zero_sums)
    if len(bad):
        p, q = (names[k] for k in bad[0])
        return reject("positivity", f"{p}+{q} = {zero_name} with {p} nonzero", (p, q))

    return TableValidation(
        valid=True, monoid=FiniteTableMonoid(names, table, zero_name), message="ok"
    )


def finite_table(elements, add_table, zero_name, label: str = "") -> FiniteTableMonoid:
    """Validate a table and return its monoid, raising MonoidValidationError."""
    validation = validate_finite_table(elements, add_table, zero_name)
    if not validation.valid:
        raise MonoidValidationError(validation)
    validation.monoid.label = label
    return validation.monoid


def saturating(cap: int) -> FiniteTableMonoid:
    """({0..cap}, min(a + b, cap), 0); saturating(2) is N₂."""
    if cap < 1:
        raise MonoidError("saturating monoid needs cap >= 1")
    names = [str(v) for v in range(cap + 1)]
    table = [[str(min(a + b, cap)) for b in range(cap + 1)] for a in range(cap + 1)]
    return finite_table(names, table, "0", label=f"N{cap}")


def truncated_powerset(k: int) -> FiniteTableMonoid:
    """∅, {1..k} and every (k-1)-subset of {1..k}, under union."""
    if k < 3:
        raise MonoidError("truncated powerset needs k >= 3")
    full = frozenset(range(1, k + 1))
    sets = (
        [frozenset()]
        + [frozenset(s) for s in combinations(range(1, k + 1), k - 1)]
        + [full]
    )

    def label(s):
        return "{" + ",".join(str(x) for x in sorted(s)) + "}"

    names = [label(s) for s in sets]
    table = [[label(a | b) for b in sets] for a in sets]
    return finite_table(names, table, "{}", label=f"P{k}")


BUILTINS = {
    "boolean": BooleanMonoid,
    "bag": BagMonoid,
    "fuzzy-max": FuzzyMaxMonoid,
    "nonneg-real": NonnegRealMonoid,
    "min-tropical": MinTropicalMonoid,
}


def builtin(name: str, ground=None) -> Monoid:
    """Instantiate a builtin family by name."""
    if name == "powerset":
        if ground is None:
            raise MonoidError("powerset needs a ground set")
        return PowersetMonoid(ground)
    if name not in BUILTINS:
        raise MonoidError(f"unknown builtin monoid {name!r}")
    return BUILTINS[name]()


def numerical_semigroup(generators) -> Monoid:
    """⟨g1, ..., gk⟩; a generator list containing 1 is the bag monoid."""
    if 1 in {int(g) for g in generators}:
        return BagMonoid()
    return NumericalSemigroup(generators)


def monoid_from_dict(doc: dict) -> Monoid:
    """Build a monoid from its monoid-file document."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise FileFormatError("monoid document needs a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "builtin":
            return builtin(doc["name"], doc.get("ground"))
        if kind == "numerical-semigroup":
            return numerical_semigroup(doc["generators"])
        if kind == "finite":
            return finite_table(
                doc["elements"], doc["add"], doc["zero"], label=doc.get("label", "")
            )
        if kind == "saturating":
            return saturating(int(doc["cap"]))
        if kind == "truncated-powerset":
            return truncated_powerset(int(doc["k"]))
    except KeyError as e:
        raise FileFormatError(f"monoid document of kind {kind!r} lacks {e}") from e
    raise FileFormatError(f"unknown monoid kind {kind!r}")


def load_monoid(path) -> Monoid:
    """Load a monoid file (JSON)."""
    monoid = monoid_from_dict(load_json(path))
    logger.debug("loaded %s from %s", monoid.name, path)
    return monoid
