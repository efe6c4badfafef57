#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

import io
import json
import tempfile
from pathlib import Path
from unittest import TestCase, mock

import numpy as np

import cli
from cli import RunSpec, attach_negative_values, build_parser, main
from core import MethodKind
from exceptions import InvalidConfigError, SingularDecompositionError


class TestCli(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out_dir = Path(self.tmp.name)
        stdout = mock.patch("sys.stdout", new_callable=io.StringIO)
        stderr = mock.patch("sys.stderr", new_callable=io.StringIO)
        self.stdout = stdout.start()
        self.stderr = stderr.start()
        self.addCleanup(stdout.stop)
        self.addCleanup(stderr.stop)

    def payload(self):
        return json.loads(self.stdout.getvalue())

    def test_solve(self):
        code = main(["solve", "--problem", "simple1d", "--method", "nr", "--x0", "0.5"])
        self.assertEqual(code, 0)
        payload = self.payload()
        self.assertEqual(list(payload), ["status", "iterations", "final_x", "final_residual"])
        self.assertEqual(payload["status"], "Converged")
        self.assertEqual(payload["iterations"], 2)
        self.assertLess(payload["final_residual"], 1e-6)

    def test_solve_writes_trace(self):
        trace = self.out_dir / "traces" / "w4.csv"
        code = main(["solve", "--problem", "simple2d", "--x0", "1,1", "--trace", str(trace)])
        self.assertIn(code, (0, 2, 3))
        lines = trace.read_text().splitlines()
        self.assertEqual(lines[0], "iter,x_1,x_2,p_1,p_2,res_inf")
        self.assertEqual(lines[1], "0,1.0,1.0,0.0,0.0,2.0")
        self.assertEqual(len(lines) - 2, self.payload()["iterations"])

    def test_singular_start(self):
        code = main(["solve", "--problem", "simple2d", "--method", "nr", "--x0", "0,1"])
        self.assertEqual(code, 3)
        self.assertEqual(self.payload()["status"], "SingularDecomposition")

    def test_not_converged(self):
        argv = ["solve", "--method", "nr", "--x0", "-2.0", "--max-iter", "50"]
        self.assertEqual(main(argv), 2)
        self.assertEqual(self.payload()["iterations"], 50)

    def test_usage_errors(self):
        self.assertEqual(main(["solve"]), 1)
        self.assertEqual(main(["solve", "--problem", "simple3d", "--x0", "1"]), 1)
        self.assertEqual(main(["solve", "--method", "nr", "--dtau", "0.5", "--x0", "1"]), 1)
        self.assertEqual(main(["solve", "--method", "dn", "--dtau", "1", "--x0", "1"]), 1)
        self.assertEqual(main(["solve", "--problem", "simple2d", "--x0", "1"]), 1)
        self.assertEqual(main(["solve", "--method", "halley", "--x0", "1"]), 1)
        with self.assertLogs("cli", level="ERROR") as logs:
            self.assertEqual(main(["table", "--problem", "simple2d"]), 1)
        self.assertIn("simple2d", logs.output[0])
        self.assertEqual(main(["frobnicate"]), 1)
        self.assertIn("frobnicate", self.stderr.getvalue())

    def test_errors_are_reported_once(self):
        with self.assertLogs("cli", level="ERROR") as logs:
            self.assertEqual(main(["solve", "--problem", "nope", "--x0", "1"]), 1)
        self.assertEqual(len(logs.output), 1)
        self.assertNotIn("valid names are", self.stderr.getvalue())

    def test_negative_vector_after_space(self):
        argv = ["solve", "--problem", "simple2d", "--method", "nr", "--x0", "-2,0.3"]
        self.assertEqual(main(argv), 0)
        payload = self.payload()
        self.assertEqual(payload["status"], "Converged")
        self.assertLess(payload["final_x"][0], 0.0)

    def test_help(self):
        self.assertEqual(main(["--help"]), 0)
        self.assertIn("solve", self.stdout.getvalue())

    def test_table(self):
        out = self.out_dir / "table.csv"
        report = self.out_dir / "table.md"
        argv = ["table", "--methods", "nr", "--x0s", "0.5,1.0", "--out", str(out)]
        self.assertEqual(main(argv + ["--report", str(report)]), 0)
        self.assertEqual(out.read_text(), "method,0.5,1.0\nnr,2,4\n")
        self.assertIn("| nr | 2 | 4 |", report.read_text())

    def test_table_to_stdout(self):
        self.assertEqual(main(["table", "--methods", "nr,dn", "--x0-range", "0.5,1.0,0.5"]), 0)
        lines = self.stdout.getvalue().splitlines()
        self.assertEqual(lines[0], "method,0.5,1.0")
        self.assertEqual([line.split(",")[0] for line in lines[1:]], ["nr", "dn"])

    def test_basin(self):
        out = self.out_dir / "basin"
        argv = ["basin", "--problem", "simple2d", "--method", "nr", "--nx", "4", "--ny", "3"]
        self.assertEqual(main(argv + ["--out", str(out)]), 0)
        stats = json.loads((out / "stats.json").read_text())
        self.assertEqual(stats, self.payload())
        self.assertEqual(stats["cells"], 12)
        self.assertEqual(stats["method"], "nr")
        self.assertEqual(stats["domain"], [[-5.0, 5.0], [-5.0, 5.0]])
        self.assertTrue((out / "basin.pgm").read_bytes().startswith(b"P5\n4 3\n255\n"))
        self.assertEqual(len((out / "basin.csv").read_text().splitlines()), 13)

    def test_basin_partial_domain(self):
        out = self.out_dir / "basin"
        argv = ["basin", "--nx", "2", "--ny", "2", "--xmin", "0", "--out", str(out)]
        self.assertEqual(main(argv), 0)
        self.assertEqual(self.payload()["domain"], [[0.0, 5.0], [-5.0, 5.0]])

    def test_analyze_series(self):
        self.assertEqual(main(["analyze", "series"]), 0)
        payload = self.payload()
        self.assertTrue(payload["passed"])
        self.assertEqual(payload["y"], -1.0)
        self.assertEqual(payload["xs"], [0.001, 0.005, 0.01])

    def test_analyze_recurrence(self):
        self.assertEqual(main(["analyze", "recurrence", "--dtau", "0.25", "--steps", "20"]), 0)
        payload = self.payload()
        self.assertEqual(payload["steps"], 20)
        self.assertTrue(payload["passed"])

    def test_analyze_w_spectrum(self):
        self.assertEqual(main(["analyze", "w-spectrum", "--x", "1,4"]), 0)
        payload = self.payload()
        self.assertEqual(payload["x"], [1.0, 4.0])
        self.assertEqual(len(payload["eigenvalues"]), 4)
        argv = ["analyze", "w-spectrum", "--x", "1,4", "--preconditioner", "eigen"]
        self.assertEqual(main(argv), 1)

    @mock.patch.object(cli, "w_spectrum_check")
    def test_w_spectrum_singular(self, _check):
        _check.side_effect = SingularDecompositionError(2, 0.0)
        with self.assertLogs("cli", level="ERROR") as logs:
            self.assertEqual(main(["analyze", "w-spectrum", "--x", "0,1"]), 3)
        self.assertIn("UDL pivot 2", logs.output[0])

    def test_analyze_eigen_trace(self):
        out = self.out_dir / "eigen.csv"
        argv = ["analyze", "eigen-trace", "--method", "w4-eigen", "--x0", "2,1"]
        self.assertEqual(main(argv + ["--out", str(out)]), 0)
        payload = self.payload()
        self.assertTrue(payload["passed"])
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0], "iter,lambda_plus,lambda_minus,ratio,c_plus,c_minus")
        self.assertEqual(len(lines) - 2, payload["iterations"])


class TestRunSpec(TestCase):
    def parse(self, *argv):
        return RunSpec.from_args(build_parser().parse_args(list(argv)))

    def test_defaults(self):
        spec = self.parse("solve", "--x0", "0.5")
        self.assertEqual(spec.max_iter, 10000)
        self.assertEqual(spec.tol, 1e-6)
        config = spec.config()
        self.assertIs(config.method, MethodKind.W4_UDL)
        self.assertEqual(config.dtau, 0.5)
        np.testing.assert_array_equal(spec.x0, [0.5])

    def test_basin_defaults(self):
        spec = self.parse("basin", "--out", tempfile.gettempdir())
        self.assertEqual(spec.max_iter, 1000)
        self.assertEqual((spec.nx, spec.ny), (200, 200))
        self.assertIsNone(spec.domain)

    def test_negative_vector(self):
        spec = self.parse("solve", "--problem", "simple2d", "--x0=-0.5,-1")
        np.testing.assert_array_equal(spec.x0, [-0.5, -1.0])

    def test_attach_negative_values(self):
        self.assertEqual(
            attach_negative_values(["solve", "--x0", "-2,4", "--tol", "1e-8"]),
            ["solve", "--x0=-2,4", "--tol", "1e-8"],
        )
        self.assertEqual(
            attach_negative_values(["basin", "--xmin", "-3", "--out", "-"]),
            ["basin", "--xmin=-3", "--out", "-"],
        )
        # not a number, left for argparse to reject
        self.assertEqual(attach_negative_values(["solve", "--x0", "-h"]), ["solve", "--x0", "-h"])
        spec = self.parse(*attach_negative_values(["table", "--x0s", "-1,-0.5"]))
        self.assertEqual(spec.x0s, (-1.0, -0.5))

    def test_table_dtau_skips_newton(self):
        spec = self.parse("table", "--dtau", "0.25")
        self.assertEqual(spec.config("nr").dtau, 1.0)
        self.assertEqual(spec.config("dn").dtau, 0.25)
        self.assertEqual(len(spec.x0s), 13)
        self.assertEqual(spec.x0s[0], -3.0)
        self.assertEqual(spec.x0s[-1], 3.0)

    def test_invalid(self):
        with self.assertRaises(InvalidConfigError):
            RunSpec("plot")
        with self.assertRaises(InvalidConfigError):
            RunSpec("solve", dtau=1.5)
        with self.assertRaises(InvalidConfigError):
            self.parse("table", "--x0-range", "1,0,0.5")
