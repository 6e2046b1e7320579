"""
Tests for the command-line interface: exit codes, outputs and replay bundles.
"""

import io
import json
import os
import shutil
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

from cli import EXIT_ERROR, EXIT_FAIL, EXIT_OK, main

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(__file__)), "fixtures")


def fixture(*parts):
    return os.path.join(FIXTURES, *parts)


def read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()


class TestMonoidCheck(CliTestCase):
    def test_n2_admits_a_semijoin(self):
        """Test the N2 table report: a semijoin exists but inner consistency fails."""
        code, out, _ = self.run_cli(
            "monoid", "check", fixture("monoids", "n2.json"), "--format", "json"
        )
        self.assertEqual(code, EXIT_OK)
        doc = json.loads(out)
        reports = {r["property"]: r for r in doc["reports"]}
        self.assertEqual(reports["semijoin-existence"]["verdict"], "holds")
        self.assertEqual(reports["icp"]["verdict"], "fails")
        self.assertEqual(doc["monoid"], "N2")

    def test_numerical_semigroup_has_none(self):
        """Test that <3,5> is reported without a semijoin, with a counterexample."""
        code, out, _ = self.run_cli("monoid", "check", fixture("monoids", "k35.json"))
        self.assertEqual(code, EXIT_FAIL)
        self.assertIn("semijoin-existence: fails", out)
        self.assertIn("counterexample (3, 5, 10)", out)

    def test_exit_codes(self):
        """Test monoid check exit codes across holding, failing and invalid files."""
        expected = {
            "bag.json": EXIT_OK,
            "boolean.json": EXIT_OK,
            "powerset3.json": EXIT_OK,
            "p3.json": EXIT_FAIL,
            "p4.json": EXIT_FAIL,
            "z3_invalid.json": EXIT_ERROR,
            "missing.json": EXIT_ERROR,
        }
        for name, code in expected.items():
            self.assertEqual(
                self.run_cli("monoid", "check", fixture("monoids", name))[0], code, name
            )

    def test_invalid_table_names_the_violation(self):
        """Test that a non-positive table names the offending sum."""
        path = fixture("monoids", "z3_invalid.json")
        _, _, err = self.run_cli("monoid", "check", path)
        self.assertIn("1+-1 = 0", err)


class TestSchemaCheck(CliTestCase):
    def test_triangle_is_cyclic(self):
        """Test schema check on the triangle prints the residual edges."""
        path = fixture("schemas", "triangle.json")
        code, out, _ = self.run_cli("schema", "check", path)
        self.assertEqual(code, EXIT_FAIL)
        self.assertIn("cyclic", out)
        self.assertIn("R3(C,A)", out)

    def test_path_of_five(self):
        """Test the compiled reducer listing for a path of five edges."""
        code, out, _ = self.run_cli("schema", "check", fixture("schemas", "p5.json"))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Full reducer (8 statements):", out)
        self.assertIn("R4 := R4 <| R5  # (-5)", out)

    def test_published_ordering(self):
        """Test compiling along a user-supplied edge order."""
        code, out, _ = self.run_cli(
            "schema",
            "check",
            fixture("schemas", "four_edge.json"),
            "--ordering",
            "R1,R4,R2,R3",
            "--format",
            "json",
        )
        self.assertEqual(code, EXIT_OK)
        doc = json.loads(out)
        self.assertEqual(doc["ordering"]["order"], ["R1", "R4", "R2", "R3"])
        self.assertEqual(doc["ordering"]["parents"], [None, 1, 2, 2])
        self.assertEqual(len(doc["program"].splitlines()), 6)

    def test_invalid_ordering(self):
        """Test that a non running-intersection order is rejected."""
        code, _, err = self.run_cli(
            "schema",
            "check",
            fixture("schemas", "four_edge.json"),
            "--ordering",
            "R1,R2,R3,R4",
        )
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("running-intersection", err)


class TestReduce(CliTestCase):
    def reduce(self, schema, monoid, relations, names, *extra):
        out_dir = os.path.join(self.test_dir, "out")
        paths = [fixture("relations", relations, f"{n}.csv") for n in names]
        result = self.run_cli(
            "reduce",
            "--schema",
            fixture("schemas", schema),
            "--monoid",
            fixture("monoids", monoid),
            "--output-dir",
            out_dir,
            *extra,
            *paths,
        )
        return result, out_dir, paths

    def test_consistent_inputs_are_written_back_unchanged(self):
        """Test that already consistent inputs are written back byte for byte."""
        for schema, monoid, relations, names in [
            ("p3.json", "boolean.json", "p3_boolean", ["R1", "R2", "R3"]),
            ("pair.json", "bag.json", "pair_bag", ["R", "T"]),
        ]:
            result, out_dir, paths = self.reduce(schema, monoid, relations, names)
            code, out, _ = result
            self.assertEqual(code, EXIT_OK)
            self.assertIn("changed: none", out)
            for name, path in zip(names, paths, strict=True):
                self.assertEqual(read(os.path.join(out_dir, f"{name}.csv")), read(path))

    def test_bag_path_golden(self):
        """Test the bag path instance that reduces to empty relations."""
        trace = os.path.join(self.test_dir, "trace.json")
        (code, _, _), out_dir, _ = self.reduce(
            "p3.json", "bag.json", "p3_bag", ["R1", "R2", "R3"], "--trace", trace
        )
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(read(os.path.join(out_dir, "R1.csv")), "A1,A2,#annotation\n")
        self.assertEqual(read(os.path.join(out_dir, "R3.csv")), "A3,A4,#annotation\n")
        steps = json.loads(read(trace))["steps"]
        self.assertEqual([s["label"] for s in steps], ["(-3)", "(-2)", "(2)", "(3)"])

    def test_triangle_needs_a_program(self):
        """Test reduce on the triangle with and without a hand-written program."""
        (code, _, err), _, _ = self.reduce(
            "triangle.json", "boolean.json", "triangle_boolean", ["R1", "R2", "R3"]
        )
        self.assertEqual(code, EXIT_FAIL)
        self.assertIn("cyclic", err)
        (code, out, _), _, _ = self.reduce(
            "triangle.json",
            "boolean.json",
            "triangle_boolean",
            ["R1", "R2", "R3"],
            "--program",
            fixture("programs", "triangle_round.txt"),
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("changed: none", out)

    def test_missing_program_is_an_error(self):
        """A program path that does not exist is refused, not run as empty."""
        missing = os.path.join(self.test_dir, "nowhere.txt")
        (code, out, err), out_dir, _ = self.reduce(
            "p3.json", "bag.json", "p3_bag", ["R1", "R2", "R3"], "--program", missing
        )
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("no such file", err)
        self.assertEqual(out, "")
        self.assertFalse(os.path.exists(out_dir))

    def test_relation_count_must_match(self):
        """Test that the number of relation files must match the schema."""
        (code, _, _), _, _ = self.reduce("p3.json", "bag.json", "p3_bag", ["R1", "R2"])
        self.assertEqual(code, EXIT_ERROR)


class TestVerify(CliTestCase):
    def verify(self, schema, monoid, *extra):
        return self.run_cli(
            "verify",
            "--schema",
            fixture("schemas", schema),
            "--monoid",
            fixture("monoids", monoid),
            *extra,
        )

    def test_bag_passes(self):
        """Test verify on a bag path schema."""
        code, out, _ = self.verify("p3.json", "bag.json", "--trials", "40")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("40/40 trials passed", out)

    def test_json_is_reproducible(self):
        """Test that a seeded verify run prints identical JSON twice."""
        args = ("four_edge.json", "fuzzy-max.json", "--trials", "25", "--seed", "3")
        first = self.verify(*args, "--format", "json")
        second = self.verify(*args, "--format", "json")
        self.assertEqual(first[:2], second[:2])
        self.assertEqual(json.loads(first[1])["seed"], 3)

    def test_n2_failure_writes_a_bundle(self):
        """Test that an N2 verifier failure writes a replay bundle."""
        bundle = os.path.join(self.test_dir, "bundle.json")
        code, out, _ = self.verify(
            "p3.json",
            "n2.json",
            "--trials",
            "2000",
            "--max-support",
            "4",
            "--domain-size",
            "2",
            "--max-failures",
            "1",
            "--bundle",
            bundle,
        )
        self.assertEqual(code, EXIT_FAIL)
        self.assertIn("replay bundle", out)
        doc = json.loads(read(bundle))
        self.assertEqual(doc["monoid"]["kind"], "finite")
        self.assertEqual(len(doc["report"]["failing_trials"]), 1)
        self.assertIn("inputs", doc["report"]["failing_trials"][0])

    def test_missing_program_is_an_error(self):
        """verify --program refuses a path that does not exist."""
        missing = os.path.join(self.test_dir, "nowhere.txt")
        code, _, err = self.verify(
            "p3.json", "bag.json", "--trials", "5", "--program", missing
        )
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("no such file", err)

    def test_hand_written_program_on_a_cyclic_schema(self):
        """A program for the triangle is audited instead of failing to compile."""
        code, out, _ = self.verify(
            "triangle.json",
            "boolean.json",
            "--trials",
            "30",
            "--max-support",
            "3",
            "--domain-size",
            "2",
            "--program",
            fixture("programs", "triangle_round.txt"),
            "--format",
            "json",
        )
        self.assertIn(code, (EXIT_OK, EXIT_FAIL))
        doc = json.loads(out)
        self.assertEqual(doc["run"], 30)
        self.assertEqual(doc["passed"] + doc["failed"] + doc["skipped"], 30)

    def test_no_semijoin_is_an_error(self):
        """Test verify with a monoid that has no semijoin function."""
        code, _, err = self.verify("p3.json", "k35.json", "--trials", "5")
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("no semijoin function", err)


class TestRelationCommands(CliTestCase):
    def test_marginal(self):
        """Test relation marginal output as CSV."""
        code, out, _ = self.run_cli(
            "relation",
            "marginal",
            "--monoid",
            fixture("monoids", "bag.json"),
            "--attrs",
            "B",
            fixture("relations", "pair_bag", "R.csv"),
        )
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out, "B,#annotation\n2,2\n")

    def test_consistent_pair(self):
        """Test relation consistent on a consistent bag pair."""
        code, out, _ = self.run_cli(
            "relation",
            "consistent",
            "--monoid",
            fixture("monoids", "bag.json"),
            fixture("relations", "pair_bag", "R.csv"),
            fixture("relations", "pair_bag", "T.csv"),
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("consistent (inner)", out)

    def test_n2_pair_is_inconsistent(self):
        """Test relation consistent on an N2 pair with equal totals only."""
        left = os.path.join(self.test_dir, "R.csv")
        right = os.path.join(self.test_dir, "T.csv")
        with open(left, "w", encoding="utf-8") as f:
            f.write("A,#annotation\na1,1\na2,1\n")
        with open(right, "w", encoding="utf-8") as f:
            f.write("B,#annotation\nb1,2\nb2,2\n")
        code, out, _ = self.run_cli(
            "relation",
            "consistent",
            "--monoid",
            fixture("monoids", "n2.json"),
            left,
            right,
            "--format",
            "json",
        )
        self.assertEqual(code, EXIT_FAIL)
        doc = json.loads(out)
        self.assertFalse(doc["consistent"])
        self.assertEqual(doc["strategy"], "brute-force")


if __name__ == "__main__":
    unittest.main()
