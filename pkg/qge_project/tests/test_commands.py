"""
Tests for the study management commands.

Every command runs on the coarsest meshes only; the minute-scale acceptance
suite is marked slow.
"""

import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from qge_project.apps.experiments.commands import ACCEPTANCE_FAILURE, SOLVER_FAILURE, format_table
from qge_project.apps.experiments.models import ConvergenceRow, ExperimentRun
from qge_project.apps.fem.analysis import ConvergenceRecord


class CommandTestMixin:
    def setUp(self):
        super().setUp()
        self.out = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.out, ignore_errors=True)

    def run_command(self, name, *args):
        stdout = StringIO()
        call_command(name, *args, "--out", str(self.out), stdout=stdout)
        return stdout.getvalue()

    def write_config(self, text):
        path = self.out / "study.toml"
        path.write_text(text)
        return str(path)


@pytest.mark.commands
class SolveCommandTestCase(CommandTestMixin, TestCase):
    """The solve command at h = 1/4 with both methods"""

    def test_one_level(self):
        output = self.run_command("solve", "--method", "one-level", "--h-list", "1/4")
        self.assertIn("one-level", output)
        self.assertIn("solve finished with 1 row(s)", output)

        run = ExperimentRun.objects.get()
        self.assertEqual(run.kind, "solve")
        self.assertEqual(run.method, "one-level")
        self.assertEqual(run.status, "converged")
        self.assertIsNone(run.acceptance_passed)
        row = run.rows.get()
        self.assertEqual(row.dofs_h, 106)
        self.assertTrue(row.converged)

        document = json.loads((self.out / "solve.json").read_text())
        self.assertEqual(document["config"]["solver"]["method"], "one-level")
        self.assertTrue((self.out / "solve.csv").exists())

    def test_two_level_with_check(self):
        output = self.run_command("solve", "--method", "two-level", "--h-list", "1/4", "--check", "--no-store")
        self.assertIn("[PASS] all rows converged", output)
        self.assertIn("[PASS] energy identity", output)
        self.assertFalse(ExperimentRun.objects.exists())

    def test_empty_size_list(self):
        output = self.run_command("solve", "--h-list", "")
        self.assertIn("solve finished with 0 row(s)", output)
        self.assertEqual((self.out / "solve.csv").read_text().count("\n"), 1)
        self.assertFalse(ConvergenceRow.objects.exists())

    def test_config_file_and_plot_data(self):
        config = self.write_config("[problem]\nre = 2.0\n\n[mesh]\nh_list = [0.25]\n\n[solver]\nmethod = 'one-level'\n")
        self.run_command("solve", "--config", config, "--plot-data", "--no-store")
        document = json.loads((self.out / "solve.json").read_text())
        self.assertEqual(document["config"]["problem"]["re"], 2.0)
        self.assertTrue((self.out / "time_vs_dofs.dat").exists())

    def test_invalid_ratio(self):
        with self.assertRaises(CommandError) as raised:
            self.run_command("solve", "--ratio", "3")
        self.assertIn("power of two", str(raised.exception))

    def test_unparsable_size(self):
        with self.assertRaises(CommandError):
            self.run_command("solve", "--h-list", "1/zero")

    def test_unconverged_rows(self):
        config = self.write_config("[problem]\nro = 2.0\n\n[solver]\nnewton_max_iters = 1\n")
        with self.assertRaises(CommandError) as raised:
            self.run_command("solve", "--config", config, "--method", "one-level", "--h-list", "1/4")
        self.assertEqual(raised.exception.returncode, SOLVER_FAILURE)
        self.assertEqual(ExperimentRun.objects.get().status, "failed")


@pytest.mark.commands
class StudyCommandsTestCase(CommandTestMixin, TestCase):
    """Efficiency and sweep commands on tiny meshes"""

    def test_efficiency(self):
        self.run_command("efficiency", "--h-list", "1/4")
        run = ExperimentRun.objects.get()
        self.assertEqual(run.kind, "efficiency")
        self.assertEqual(list(run.rows.values_list("method", flat=True)), ["one-level", "two-level"])
        two_level = run.rows.get(method="two-level")
        self.assertEqual(two_level.dofs_H, 18)

    def test_sweep_fine(self):
        self.run_command("sweep_fine", "--h-list", "1/4,1/8", "--no-store")
        document = json.loads((self.out / "sweep_fine.json").read_text())
        orders = [row["order_H2"] for row in document["rows"]]
        self.assertIsNone(orders[0])
        self.assertIsNotNone(orders[1])

    def test_sweep_coarse(self):
        self.run_command("sweep_coarse", "--sweep-h", "1/8", "--H-list", "1/2,1/4", "--no-store")
        document = json.loads((self.out / "sweep_coarse.json").read_text())
        self.assertEqual(len(document["rows"]), 2)
        self.assertEqual({row["dofs_h"] for row in document["rows"]}, {498})

    def test_sweep_coarse_without_coarse_sizes(self):
        output = self.run_command("sweep_coarse", "--H-list", "", "--no-store")
        self.assertIn("sweep_coarse finished with 0 row(s)", output)

    def test_coarse_size_below_sweep_size(self):
        with self.assertRaises(CommandError) as raised:
            self.run_command("sweep_coarse", "--sweep-h", "1/4", "--H-list", "1/2,1/8", "--no-store")
        self.assertIn("sweep_h", str(raised.exception))

    def test_failed_acceptance(self):
        # A single row has no order to check.
        with self.assertRaises(CommandError) as raised:
            self.run_command("sweep_fine", "--h-list", "1/4", "--check")
        self.assertEqual(raised.exception.returncode, ACCEPTANCE_FAILURE)
        self.assertIs(ExperimentRun.objects.get().acceptance_passed, False)


class FormatTableTestCase(TestCase):
    def test_missing_values(self):
        record = ConvergenceRecord(h=0.25, dofs_h=106, e_L2=None, e_H1=None, e_H2=None, time_s=0.5)
        lines = format_table([record]).splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[0].strip().startswith("method"))
        self.assertIn("-", lines[2].split())
        self.assertIn("106", lines[2])


@pytest.mark.slow
@pytest.mark.commands
class AcceptanceSuiteTestCase(CommandTestMixin, TestCase):
    """The full acceptance suite without the boundary-layer problem"""

    def test_suite(self):
        output = self.run_command("check_acceptance", "--skip-boundary-layer", "--no-store")
        self.assertIn("[PASS] parent search", output)
        self.assertIn("All acceptance checks passed", output)


@pytest.mark.slow
@pytest.mark.commands
class BoundaryLayerSweepTestCase(CommandTestMixin, TestCase):
    """Fine-size sweep of the boundary-layer problem at its default sizes"""

    def test_final_orders(self):
        output = self.run_command("sweep_fine", "--problem", "boundary-layer", "--check", "--no-store")
        self.assertIn("[PASS] all rows converged", output)
        self.assertIn("[PASS] H2 order in h", output)

        document = json.loads((self.out / "sweep_fine.json").read_text())
        orders = [row["order_H2"] for row in document["rows"]]
        self.assertEqual(len(orders), 4)
        for order in orders[-2:]:
            self.assertGreaterEqual(order, 3.5)
            self.assertLessEqual(order, 5.0)
