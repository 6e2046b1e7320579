"""
Tests for the monoid property deciders and their counterexamples.
"""

import time
import unittest

import numpy as np

from monoid import (
    BagMonoid,
    BooleanMonoid,
    FuzzyMaxMonoid,
    MinTropicalMonoid,
    NumericalSemigroup,
    PowersetMonoid,
    saturating,
    truncated_powerset,
)
from monoid_analysis import (
    Provenance,
    Verdict,
    analyze,
    capped_semigroup,
    check_cancellative,
    check_positivity,
    check_production_n2,
    check_transport_2x2,
    icp_verdict,
    product_monoid,
    production_via_transport,
    random_finite_monoid,
    replay_counterexample,
    semijoin_existence_verdict,
    solve_transport_2x2,
    transport_via_production,
    union_closed_monoid,
)


class TestKnownMonoids(unittest.TestCase):
    """Verdicts on the monoids used throughout the examples."""

    def test_n2(self):
        """N2 has the production property but not the transportation property."""
        n2 = saturating(2)
        self.assertTrue(check_production_n2(n2).holds)
        self.assertTrue(semijoin_existence_verdict(n2).holds)

        cancellative = check_cancellative(n2)
        self.assertEqual(cancellative.verdict, Verdict.FAILS)
        self.assertEqual(cancellative.counterexample, ("1", "1", "2"))

        transport = check_transport_2x2(n2)
        self.assertEqual(transport.verdict, Verdict.FAILS)
        self.assertEqual(transport.counterexample, ("1", "1", "1", "2"))
        self.assertTrue(replay_counterexample(n2, transport))

        icp = icp_verdict(n2)
        self.assertEqual(icp.verdict, Verdict.FAILS)
        self.assertEqual(icp.provenance, Provenance.KNOWN_RESULT)

    def test_n2_rows_one_one_columns_two_two(self):
        """The 2x2 instance b=(1,1), c=(2,2) has equal totals and no matrix."""
        n2 = saturating(2)
        self.assertEqual(n2.add("1", "1"), n2.add("2", "2"))
        self.assertIsNone(solve_transport_2x2(n2, ("1", "1"), ("2", "2")))

    def test_boolean(self):
        """Boolean: 1 ∨ 0 = 1 ∨ 1 breaks cancellation, everything else holds."""
        m = BooleanMonoid()
        cancellative = check_cancellative(m)
        self.assertEqual(cancellative.counterexample, (1, 0, 1))
        self.assertTrue(check_production_n2(m).holds)
        self.assertTrue(check_transport_2x2(m).holds)
        self.assertTrue(icp_verdict(m).holds)

    def test_truncated_powersets_lack_production(self):
        """P3 fails at ({1,2}, {1,3}, {2,3}); P4 fails too."""
        p3 = truncated_powerset(3)
        report = semijoin_existence_verdict(p3)
        self.assertEqual(report.verdict, Verdict.FAILS)
        self.assertEqual(report.counterexample, ("{1,2}", "{1,3}", "{2,3}"))
        self.assertTrue(replay_counterexample(p3, report))

        p4 = truncated_powerset(4)
        report = semijoin_existence_verdict(p4)
        self.assertEqual(report.verdict, Verdict.FAILS)
        self.assertTrue(replay_counterexample(p4, report))

    def test_numerical_semigroup(self):
        """<3,5> is cancellative but has neither production nor transportation."""
        k35 = NumericalSemigroup([3, 5])
        existence = semijoin_existence_verdict(k35)
        self.assertEqual(existence.verdict, Verdict.FAILS)
        self.assertEqual(existence.counterexample, (3, 5, 10))
        self.assertTrue(replay_counterexample(k35, existence))

        icp = icp_verdict(k35)
        self.assertEqual(icp.verdict, Verdict.FAILS)
        self.assertTrue(replay_counterexample(k35, icp))

        self.assertTrue(check_cancellative(k35).holds)
        self.assertEqual(check_cancellative(k35).provenance, Provenance.KNOWN_RESULT)

    def test_infinite_builtins(self):
        """Bag holds everything; the lattices fail only cancellation."""
        for report in analyze(BagMonoid()):
            self.assertEqual(report.verdict, Verdict.HOLDS, report.property)
        for m in (FuzzyMaxMonoid(), MinTropicalMonoid()):
            reports = {r.property: r for r in analyze(m)}
            self.assertEqual(reports["cancellative"].verdict, Verdict.FAILS)
            self.assertTrue(replay_counterexample(m, reports["cancellative"]))
            self.assertTrue(reports["semijoin-existence"].holds)
            self.assertTrue(reports["icp"].holds)

    def test_analyze_order_and_serialization(self):
        """analyze lists six reports ending with semijoin existence."""
        n2 = saturating(2)
        reports = analyze(n2)
        self.assertEqual(
            [r.property for r in reports],
            [
                "positivity",
                "cancellative",
                "production-n2",
                "transport-2x2",
                "icp",
                "semijoin-existence",
            ],
        )
        doc = reports[3].to_dict(n2)
        self.assertEqual(doc["verdict"], "fails")
        self.assertEqual(doc["counterexample"], ["1", "1", "1", "2"])

    def test_positivity_on_finite_families(self):
        """Test positivity on the saturating and truncated-powerset tables."""
        for m in (saturating(3), truncated_powerset(3), PowersetMonoid([1, 2, 3])):
            self.assertTrue(check_positivity(m).holds)

    def test_transport_limit_reports_unknown(self):
        """Tables larger than the transport limit are not scanned."""
        m = PowersetMonoid(range(6))
        self.assertEqual(check_transport_2x2(m).verdict, Verdict.UNKNOWN)

    def test_replay_rejects_holding_reports(self):
        """Test that only failing reports can be replayed."""
        self.assertFalse(replay_counterexample(BagMonoid(), analyze(BagMonoid())[0]))


class TestTransfers(unittest.TestCase):
    def test_transport_via_production_on_bags(self):
        """Cancellation turns a production split into a 2x2 matrix."""
        bag = BagMonoid()
        for b, c in [((3, 4), (5, 2)), ((0, 6), (6, 0)), ((2, 2), (1, 3))]:
            result = transport_via_production(bag, b, c)
            self.assertTrue(result.satisfied(bag))
        self.assertIsNone(transport_via_production(bag, (1, 1), (3, 0)))

    def test_production_via_transport(self):
        """The first row of a transport matrix is a production plan."""
        n2 = saturating(2)
        d = production_via_transport(n2, "1", ["1", "1"])
        self.assertEqual(n2.sum(d), "1")
        self.assertTrue(all(n2.leq(x, "1") for x in d))
        self.assertEqual(production_via_transport(BagMonoid(), 5, [3, 3]), [3, 2])
        self.assertIsNone(production_via_transport(BagMonoid(), 7, [3, 3]))


class TestRandomCorpus(unittest.TestCase):
    """Implications between the properties over generated finite monoids."""

    def setUp(self):
        rng = np.random.default_rng(2024)
        self.corpus = [random_finite_monoid(rng) for _ in range(40)]
        self.corpus += [
            union_closed_monoid([(1, 2), (2, 3), (1, 3)], label="P3-like"),
            capped_semigroup([3, 5], 12),
            product_monoid(BooleanMonoid(), saturating(2)),
        ]

    def test_transportation_implies_production(self):
        """Test the production solver built from 2x2 transportation."""
        for m in self.corpus:
            if check_transport_2x2(m).holds:
                self.assertTrue(check_production_n2(m).holds, m.name)

    def test_cancellative_production_implies_transportation(self):
        """Test 2x2 transportation built from production on a cancellative monoid."""
        for m in self.corpus:
            if check_cancellative(m).holds and check_production_n2(m).holds:
                self.assertTrue(check_transport_2x2(m).holds, m.name)

    def test_every_counterexample_replays(self):
        """Test that every counterexample in the corpus replays."""
        for m in self.corpus:
            for report in analyze(m):
                if report.verdict is Verdict.FAILS:
                    self.assertTrue(replay_counterexample(m, report), m.name)

    def test_corpus_is_deterministic(self):
        """Test that a seed fixes the random monoid corpus."""
        rng = np.random.default_rng(2024)
        again = [random_finite_monoid(rng) for _ in range(40)]
        self.assertEqual(again, self.corpus[:40])


class TestPerformance(unittest.TestCase):
    def test_production_on_64_elements(self):
        """The production check on a 64-element union-closed family stays fast."""
        m = union_closed_monoid([(k,) for k in range(6)], label="P(6)")
        self.assertEqual(len(m.elements()), 64)
        started = time.perf_counter()
        report = check_production_n2(m)
        self.assertLess(time.perf_counter() - started, 10.0)
        self.assertTrue(report.holds)


if __name__ == "__main__":
    unittest.main()
