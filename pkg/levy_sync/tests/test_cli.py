import csv
import tempfile
from contextlib import redirect_stdout
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from levy_sync import __version__
from levy_sync.services.csv_io import read_path_csv

EXAMPLES = Path(__file__).resolve().parents[2] / "experiment_examples"

SMALL_SWEEP = """
[experiment]
kind = sweep
name = small_sweep
seeds = 0

[grid]
t_end = 1
dt = 0.01

[system]
preset = paper-example

[sweep]
lambda_values = {lambdas}
"""

SMALL_INTEGRATE = """
[experiment]
kind = integrate
name = small_integrate
seeds = 4, 5

[grid]
t_end = 2
dt = 0.01

[system]
f = cubic(1)
alpha = 0.5
y0 = 1

[noise]
family = compound_poisson
rate = 3
distribution = normal
distribution_params = 0, 1
variance = 0.5
"""


class LevysyncCommandTests(SimpleTestCase):
    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.tmp = Path(directory.name)

    def write_config(self, name, text):
        path = self.tmp / name
        path.write_text(text, encoding="utf-8")
        return path

    def levysync(self, *args):
        out = StringIO()
        call_command("levysync", *args, stdout=out)
        return out.getvalue()

    def test_registry_lists_drifts_noises_and_presets(self):
        output = self.levysync("registry")
        self.assertIn("affine(a=1, b=0)", output)
        self.assertIn("cubic(a=1)", output)
        self.assertIn("compound_poisson", output)
        self.assertIn("paper-example", output)
        self.assertIn("coupled-example", output)

    def test_run_sample_writes_paths_and_manifest(self):
        output = self.levysync("run", str(EXAMPLES / "sample_pure_drift.ini"), "--output", str(self.tmp))
        run_dir = self.tmp / "sample_pure_drift"
        path = read_path_csv(run_dir / "paths" / "noise_seed0.csv")
        self.assertAlmostEqual(path.eval(1.0)[0], 2.0, places=12)
        self.assertTrue((run_dir / "paths" / "noise_seed0_jumps.csv").exists())
        manifest = (run_dir / "manifest.txt").read_text(encoding="utf-8")
        self.assertIn(f"tool_version = {__version__}", manifest)
        self.assertIn("file_1 = paths/noise_seed0.csv", manifest)
        self.assertIn(str(run_dir / "manifest.txt"), output)

    def test_run_sweep_summary(self):
        config = self.write_config("small_sweep.ini", SMALL_SWEEP.format(lambdas="1, 10"))
        output = self.levysync("run", str(config), "--output", str(self.tmp))
        self.assertIn("lambda=1 median_gap=", output)
        with (self.tmp / "small_sweep" / "summary.csv").open(newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual([float(row["lambda"]) for row in rows], [1.0, 10.0])
        for row in rows:
            expected = 2.0 / (1.0 + 2.0 * float(row["lambda"]))
            self.assertAlmostEqual(float(row["median_gap"]), expected, delta=1e-6)
        with (self.tmp / "small_sweep" / "report.csv").open(newline="", encoding="utf-8") as handle:
            header = next(csv.reader(handle))
        self.assertEqual(header[:3], ["seed", "lambda", "gap"])

    def test_descending_lambda_exits_with_config_code(self):
        config = self.write_config("bad.ini", SMALL_SWEEP.format(lambdas="10, 1"))
        with self.assertRaises(CommandError) as caught:
            self.levysync("run", str(config), "--output", str(self.tmp))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("lambda_values", str(caught.exception))
        self.assertIn("line 15", str(caught.exception))
        self.assertFalse((self.tmp / "small_sweep").exists())

    def test_zero_lambda_exits_with_config_code(self):
        config = self.write_config("zero.ini", SMALL_SWEEP.format(lambdas="0, 1"))
        with self.assertRaises(CommandError) as caught:
            self.levysync("run", str(config), "--output", str(self.tmp))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("absorption radius needs lambda > 0", str(caught.exception))

    def test_expanding_drift_exits_with_numerical_code(self):
        text = SMALL_SWEEP.format(lambdas="1").replace("preset = paper-example", "f = linear(-1)\ng = linear(1)")
        config = self.write_config("expanding.ini", text)
        with self.assertRaises(CommandError) as caught:
            self.levysync("run", str(config), "--output", str(self.tmp))
        self.assertEqual(caught.exception.returncode, 3)

    def test_missing_config(self):
        with self.assertRaises(CommandError) as caught:
            self.levysync("run", str(self.tmp / "absent.ini"))
        self.assertEqual(caught.exception.returncode, 2)

    def test_reruns_are_byte_identical(self):
        config = self.write_config("small_integrate.ini", SMALL_INTEGRATE)
        first, second = self.tmp / "first", self.tmp / "second"
        self.levysync("run", str(config), "--output", str(first))
        self.levysync("run", str(config), "--output", str(second))
        for seed in (4, 5):
            name = Path("small_integrate") / "paths" / f"solution_seed{seed}.csv"
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())
        a = (first / "small_integrate" / "paths" / "solution_seed4.csv").read_bytes()
        b = (first / "small_integrate" / "paths" / "solution_seed5.csv").read_bytes()
        self.assertNotEqual(a, b)

    def test_metric_with_witness(self):
        output = self.levysync(
            "metric", str(EXAMPLES / "step_a.csv"), str(EXAMPLES / "step_b.csv"), "--m", "1", "--witness"
        )
        lines = output.splitlines()
        self.assertEqual(lines[0], "value,certified_gap")
        value, gap = (float(item) for item in lines[1].split(","))
        self.assertAlmostEqual(value, 0.10536, delta=1e-3)
        self.assertLess(gap, 1e-3)
        self.assertEqual(lines[2], "t,lambda_t")
        self.assertEqual(lines[3], "-1.0,-1.0")

    def test_global_metric(self):
        output = self.levysync("metric", str(EXAMPLES / "step_a.csv"), str(EXAMPLES / "step_a.csv"), "--m-max", "1")
        self.assertEqual(output.splitlines(), ["value,uncertainty", "0.0,0.5"])

    def test_no_subcommand_prints_help(self):
        captured = StringIO()
        with redirect_stdout(captured):
            self.levysync()
        self.assertIn("registry", captured.getvalue())


class ManifestTests(SimpleTestCase):
    perturbations = (
        ("seeds = 4, 5", "seeds = 4, 6"),
        ("t_end = 2", "t_end = 3"),
        ("dt = 0.01", "dt = 0.005"),
        ("f = cubic(1)", "f = cubic(2)"),
        ("alpha = 0.5", "alpha = 0.75"),
        ("y0 = 1", "y0 = 2"),
        ("rate = 3", "rate = 4"),
        ("distribution_params = 0, 1", "distribution_params = 0, 2"),
        ("variance = 0.5", "variance = 0.25"),
    )

    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.tmp = Path(directory.name)

    def run_integrate(self, label, text):
        config = self.tmp / f"{label}.ini"
        config.write_text(text, encoding="utf-8")
        root = self.tmp / label
        call_command("levysync", "run", str(config), "--output", str(root), stdout=StringIO())
        run_dir = root / "small_integrate"
        outputs = {
            path.relative_to(run_dir).as_posix(): path.read_bytes() for path in sorted((run_dir / "paths").iterdir())
        }
        manifest = (run_dir / "manifest.txt").read_text(encoding="utf-8")
        recorded = [
            line for line in manifest.splitlines() if not line.startswith(("started", "wall_clock_seconds", "config ="))
        ]
        return outputs, recorded

    def test_every_field_that_changes_output_changes_the_manifest(self):
        outputs, recorded = self.run_integrate("baseline", SMALL_INTEGRATE)
        for index, (old, new) in enumerate(self.perturbations):
            with self.subTest(field=new):
                self.assertIn(old, SMALL_INTEGRATE)
                changed_outputs, changed_recorded = self.run_integrate(f"changed{index}", SMALL_INTEGRATE.replace(old, new))
                self.assertNotEqual(changed_outputs, outputs)
                self.assertNotEqual(changed_recorded, recorded)

    def test_numeric_settings_are_recorded(self):
        _, recorded = self.run_integrate("baseline", SMALL_INTEGRATE)
        self.assertIn("[settings]", recorded)
        self.assertIn("LEVY_SYNC_SKOROHOD_M_MAX = 5", recorded)
        with override_settings(LEVY_SYNC_DIVERGENCE_GUARD=1e6):
            _, guarded = self.run_integrate("guarded", SMALL_INTEGRATE)
        self.assertIn("LEVY_SYNC_DIVERGENCE_GUARD = 1000000.0", guarded)
        self.assertNotEqual(guarded, recorded)
