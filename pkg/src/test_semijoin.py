"""
Tests for the semijoin constructions and the P1-P4 axiom audit.
"""

import unittest
from itertools import chain, combinations, product

import numpy as np

from krelation import (
    KRel,
    Strategy,
    consistent,
    gen_consistent_family,
    gen_random_krel,
    is_witness,
    marginal,
    union_attrs,
)
from monoid import (
    BagMonoid,
    BooleanMonoid,
    FuzzyMaxMonoid,
    MinTropicalMonoid,
    NonnegRealMonoid,
    NumericalSemigroup,
    PowersetMonoid,
    Tristate,
    UnsupportedCapability,
    saturating,
    truncated_powerset,
)
from schema import path_schema
from semijoin import (
    AxiomVerdict,
    SemijoinImpl,
    SemijoinKind,
    audit_axioms,
    bag_join_semijoin,
    classical_semijoin,
    lattice_witness,
    semijoin_for,
    semijoin_lattice,
    semijoin_production,
    witness_production,
)

bag = BagMonoid()
boolean = BooleanMonoid()
AXIOM_FAMILIES = (
    boolean,
    bag,
    FuzzyMaxMonoid(),
    NonnegRealMonoid(),
    MinTropicalMonoid(),
    PowersetMonoid([1, 2, 3, 4]),
    saturating(2),
)


def bag_pair():
    R = KRel(bag, ("A", "B"), {("1", "2"): 1, ("2", "2"): 1})
    T = KRel(bag, ("B", "C"), {("2", "1"): 1, ("2", "2"): 1})
    return R, T


def all_boolean_relations(attrs):
    cells = list(product("01", repeat=len(attrs)))
    subsets = chain.from_iterable(combinations(cells, k) for k in range(len(cells) + 1))
    return [KRel(boolean, attrs, dict.fromkeys(s, 1)) for s in subsets]


class TestProductionSemijoin(unittest.TestCase):
    def test_consistent_bag_pair_is_returned(self):
        """Agreeing marginals return R; the bag-join projection doubles it."""
        R, T = bag_pair()
        self.assertEqual(semijoin_production(R, T), R)
        self.assertEqual(
            bag_join_semijoin(R, T),
            KRel(bag, ("A", "B"), {("1", "2"): 2, ("2", "2"): 2}),
        )

    def test_split_of_shared_total(self):
        """T[V] = {v:5} below R[V] = {v:6} splits as (3, 2)."""
        R = KRel(bag, ("U", "V"), {("u1", "v"): 3, ("u2", "v"): 3})
        T = KRel(bag, ("V", "C"), {("v", "c1"): 5})
        S = semijoin_production(R, T)
        self.assertEqual(S, KRel(bag, ("U", "V"), {("u1", "v"): 3, ("u2", "v"): 2}))
        self.assertEqual(marginal(S, ["V"]), marginal(T, ["V"]))

    def test_not_below_gives_empty(self):
        """T[V] = {v:7} exceeds R[V] = {v:6}: the output is empty."""
        R = KRel(bag, ("U", "V"), {("u1", "v"): 3, ("u2", "v"): 3})
        T = KRel(bag, ("V",), {("v",): 7})
        self.assertEqual(semijoin_production(R, T), KRel.empty(bag, ("U", "V")))
        R = KRel(bag, ("A",), {("a",): 1})
        T = KRel(bag, ("A",), {("a",): 2})
        self.assertEqual(semijoin_production(R, T), KRel.empty(bag, ("A",)))

    def test_keys_missing_from_t_are_dropped(self):
        """Test that R tuples without a T key are dropped in the split."""
        R = KRel(bag, ("U", "V"), {("u1", "v"): 2, ("u2", "w"): 4})
        T = KRel(bag, ("V",), {("v",): 1})
        expected = KRel(bag, ("U", "V"), {("u1", "v"): 1})
        self.assertEqual(semijoin_production(R, T), expected)

    def test_disjoint_attributes_compare_totals(self):
        """Test splitting when R and T share no attributes."""
        R = KRel(bag, ("A",), {("a1",): 2, ("a2",): 2})
        T = KRel(bag, ("B",), {("b",): 3})
        S = semijoin_production(R, T)
        self.assertEqual(S, KRel(bag, ("A",), {("a1",): 2, ("a2",): 1}))

    def test_n2_split(self):
        """N2: T[V] = {v:1} below R[V] = {v:2} from (1, 1)."""
        n2 = saturating(2)
        R = KRel(n2, ("U", "V"), {("u1", "v"): "1", ("u2", "v"): "1"})
        T = KRel(n2, ("V",), {("v",): "1"})
        S = semijoin_production(R, T)
        self.assertEqual(marginal(S, ["V"]), T)
        self.assertTrue(all(n2.leq(S.get(t), R.get(t)) for t in R.support))


class TestLatticeSemijoin(unittest.TestCase):
    def test_powerset(self):
        """Test the lattice semijoin as set intersection."""
        m = PowersetMonoid([1, 2, 3])
        R = KRel(
            m, ("U", "V"), {("u1", "v"): frozenset({1, 2}), ("u2", "v"): frozenset({3})}
        )
        T = KRel(m, ("V",), {("v",): frozenset({2, 3})})
        self.assertEqual(
            semijoin_lattice(R, T),
            KRel(
                m,
                ("U", "V"),
                {("u1", "v"): frozenset({2}), ("u2", "v"): frozenset({3})},
            ),
        )

    def test_fuzzy(self):
        """Test the lattice semijoin as a fuzzy minimum."""
        m = FuzzyMaxMonoid()
        R = KRel(
            m, ("U", "V"), {("u1", "v"): 0.75, ("u2", "v"): 0.25, ("u3", "w"): 1.0}
        )
        T = KRel(m, ("V", "C"), {("v", "c1"): 0.5, ("v", "c2"): 0.125})
        self.assertEqual(
            semijoin_lattice(R, T),
            KRel(m, ("U", "V"), {("u1", "v"): 0.5, ("u2", "v"): 0.25}),
        )

    def test_lattice_witness_is_coherent(self):
        """The projection of the lattice witness onto X is the lattice semijoin."""
        rng = np.random.default_rng(3)
        monoids = (
            FuzzyMaxMonoid(),
            MinTropicalMonoid(),
            PowersetMonoid([1, 2]),
            boolean,
        )
        for m in monoids:
            for _ in range(50):
                R = gen_random_krel(m, ("A", "B"), 4, seed=rng)
                T = gen_random_krel(m, ("B", "C"), 4, seed=rng)
                W = lattice_witness(R, T)
                self.assertEqual(marginal(W, R.attrs), semijoin_lattice(R, T))
                if consistent(R, T).consistent:
                    self.assertTrue(is_witness(W, [R, T]))

    def test_lattice_witness_needs_meet(self):
        """Test the lattice witness on a monoid without a meet."""
        R, T = bag_pair()
        with self.assertRaises(UnsupportedCapability):
            lattice_witness(R, T)


class TestProductionWitness(unittest.TestCase):
    def test_consistent_pair(self):
        """Test the production witness on a consistent pair."""
        R, T = bag_pair()
        W = witness_production(R, T)
        self.assertTrue(is_witness(W, [R, T]))

    def test_not_below_is_empty_over_the_union(self):
        """Test the production witness when the semijoin is empty."""
        R = KRel(bag, ("U", "V"), {("u1", "v"): 3})
        T = KRel(bag, ("V", "C"), {("v", "c1"): 5})
        W = witness_production(R, T)
        self.assertEqual(W, KRel.empty(bag, ("U", "V", "C")))

    def test_split_extends_by_smallest_t_tuple(self):
        """The split (3, 2) is extended by (v, c1)."""
        R = KRel(bag, ("U", "V"), {("u1", "v"): 3, ("u2", "v"): 3})
        T = KRel(bag, ("V", "C"), {("v", "c1"): 5})
        W = witness_production(R, T)
        self.assertEqual(
            W,
            KRel(bag, ("U", "V", "C"), {("u1", "v", "c1"): 3, ("u2", "v", "c1"): 2}),
        )

    def test_coherence_on_random_pairs(self):
        """marginal(witness, X) equals the semijoin for bag, N2 and nonneg-real."""
        rng = np.random.default_rng(4)
        for m in (bag, saturating(2), NonnegRealMonoid()):
            for _ in range(60):
                R = gen_random_krel(m, ("A", "B"), 4, seed=rng)
                T = gen_random_krel(m, ("B", "C"), 4, seed=rng)
                W = witness_production(R, T)
                self.assertEqual(W.attrs, union_attrs(R, T))
                self.assertEqual(marginal(W, R.attrs), semijoin_production(R, T))


class TestDispatch(unittest.TestCase):
    def test_semijoin_for(self):
        """Test which construction each monoid gets."""
        self.assertEqual(semijoin_for(FuzzyMaxMonoid()).kind, SemijoinKind.LATTICE)
        self.assertEqual(semijoin_for(bag).kind, SemijoinKind.PRODUCTION)
        self.assertEqual(semijoin_for(saturating(2)).kind, SemijoinKind.PRODUCTION)
        self.assertEqual(semijoin_for(bag).name, "production:bag")

    def test_no_semijoin_without_production(self):
        """Test that <3,5> gets no semijoin function."""
        with self.assertRaises(UnsupportedCapability) as ctx:
            semijoin_for(NumericalSemigroup([3, 5]))
        self.assertEqual(ctx.exception.counterexample, (3, 5, 10))
        with self.assertRaises(UnsupportedCapability):
            semijoin_for(truncated_powerset(3))

    def test_kind_must_fit_the_monoid(self):
        """Test binding a construction to a monoid that cannot carry it."""
        with self.assertRaises(UnsupportedCapability):
            SemijoinImpl("lattice:bag", bag, SemijoinKind.LATTICE)
        with self.assertRaises(UnsupportedCapability):
            semijoin_for(bag, "boolean-standard")
        with self.assertRaises(UnsupportedCapability):
            semijoin_for(boolean, SemijoinKind.BAG_JOIN)

    def test_bound_monoid_is_enforced(self):
        """Test calling a semijoin on relations over another monoid."""
        s = semijoin_for(boolean)
        R, T = bag_pair()
        with self.assertRaises(UnsupportedCapability):
            s(R, T)

    def test_boolean_constructions_agree(self):
        """
        The lattice semijoin is the classical one on sets. The production
        semijoin agrees whenever T's keys are among R's and is empty otherwise.
        """
        for R in all_boolean_relations(("A", "B")):
            for T in all_boolean_relations(("B", "C")):
                expected = classical_semijoin(R, T)
                self.assertEqual(semijoin_lattice(R, T), expected)
                if set(marginal(T, ["B"]).entries) <= set(marginal(R, ["B"]).entries):
                    self.assertEqual(semijoin_production(R, T), expected)
                else:
                    self.assertEqual(len(semijoin_production(R, T)), 0)

    def test_boolean_keys_outside_r(self):
        """Test that T keys missing from R empty the production semijoin."""
        R = KRel(boolean, ("A", "B"), {("0", "0"): 1})
        T = KRel(boolean, ("B", "C"), {("0", "0"): 1, ("1", "1"): 1})
        self.assertEqual(classical_semijoin(R, T), R)
        self.assertEqual(semijoin_production(R, T), KRel.empty(boolean, ("A", "B")))


class TestAxiomAudit(unittest.TestCase):
    def test_classical_semijoin_on_consistent_pair(self):
        """Test that the classical semijoin passes every axiom."""
        R = KRel(boolean, ("A", "B"), {("0", "0"): 1, ("1", "1"): 1})
        T = KRel(boolean, ("B", "C"), {("0", "1"): 1, ("1", "0"): 1})
        report = audit_axioms(classical_semijoin, R, T)
        self.assertTrue(report.passed)
        self.assertEqual(report.verdict("P1"), AxiomVerdict.HOLDS)

    def test_bag_join_projection_fails_p1(self):
        """Test that projecting the bag join breaks P1."""
        R, T = bag_pair()
        report = audit_axioms(semijoin_for(bag, SemijoinKind.BAG_JOIN), R, T)
        self.assertFalse(report.passed)
        self.assertEqual(report.verdict("P1"), AxiomVerdict.FAILS)
        self.assertEqual(report.checks["P1"].offending, ("1", "2"))
        self.assertEqual(report.to_dict()["semijoin"], "bag-join:bag")

    def test_inconsistent_pairs_skip_p1(self):
        """Test that P1 and P4 do not apply to inconsistent pairs."""
        R = KRel(bag, ("U", "V"), {("u1", "v"): 3})
        T = KRel(bag, ("V",), {("v",): 5})
        report = audit_axioms(semijoin_for(bag), R, T)
        self.assertEqual(report.verdict("P1"), AxiomVerdict.NOT_APPLICABLE)
        self.assertEqual(report.verdict("P4"), AxiomVerdict.NOT_APPLICABLE)
        self.assertTrue(report.passed)

    def test_budget_marks_p1_skipped(self):
        """Test that a budget-limited oracle marks P1 skipped."""
        R = KRel(boolean, ("A", "B"), {("0", "0"): 1, ("1", "0"): 1})
        T = KRel(boolean, ("B", "C"), {("0", "0"): 1, ("0", "1"): 1})
        report = audit_axioms(
            semijoin_for(boolean),
            R,
            T,
            oracle=lambda a, b: consistent(a, b, Strategy.BRUTE_FORCE, bound=2),
        )
        self.assertEqual(report.verdict("P1"), AxiomVerdict.SKIPPED)

    def test_random_audits(self):
        """Every default semijoin passes P1-P4 on 1000 random pairs per monoid."""
        rng = np.random.default_rng(9)
        for m in AXIOM_FAMILIES:
            s = semijoin_for(m)
            for _ in range(1000):
                R = gen_random_krel(m, ("A", "B"), 4, seed=rng)
                T = gen_random_krel(m, ("B", "C"), 4, seed=rng)
                report = audit_axioms(s, R, T)
                self.assertTrue(report.passed, report.to_dict())

    def test_production_semijoin_on_icp_monoids(self):
        """The production semijoin also satisfies P1-P4 on every builtin ICP monoid."""
        rng = np.random.default_rng(10)
        for m in AXIOM_FAMILIES:
            if m.capabilities.icp is not Tristate.YES:
                continue
            s = semijoin_for(m, SemijoinKind.PRODUCTION)
            for _ in range(1000):
                R = gen_random_krel(m, ("A", "B"), 4, seed=rng)
                T = gen_random_krel(m, ("B", "C"), 4, seed=rng)
                report = audit_axioms(s, R, T)
                self.assertTrue(report.passed, report.to_dict())

    def test_p1_on_generated_consistent_pairs(self):
        """Consistent pairs come back unchanged and the audit confirms P1."""
        H = path_schema(2)
        for m in AXIOM_FAMILIES:
            s = semijoin_for(m)
            for seed in range(200):
                R, T = gen_consistent_family(m, H, seed=seed, max_support=5)
                self.assertEqual(s(R, T), R)
                verdict = audit_axioms(s, R, T).verdict("P1")
                self.assertEqual(verdict, AxiomVerdict.HOLDS, (m.name, seed))


if __name__ == "__main__":
    unittest.main()
