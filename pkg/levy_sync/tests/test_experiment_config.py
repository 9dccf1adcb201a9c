from pathlib import Path

from django.test import SimpleTestCase, override_settings

from levy_sync.exceptions import ConfigError
from levy_sync.services.experiment_config import DriftSpec, load_config, parse_config, parse_drift

EXAMPLES = Path(__file__).resolve().parents[2] / "experiment_examples"

SWEEP = """
[experiment]
kind = sweep
seeds = 0, 1

[grid]
t_end = 2
dt = 0.01

[system]
preset = paper-example

[sweep]
lambda_values = 1, 10
"""


class DriftParsingTests(SimpleTestCase):
    def test_name_and_parameters(self):
        self.assertEqual(parse_drift("affine(1, 3)"), DriftSpec("affine", (1.0, 3.0)))
        self.assertEqual(parse_drift("cubic"), DriftSpec("cubic", ()))

    def test_label_round_trips(self):
        spec = parse_drift("affine(1, 3)")
        self.assertEqual(parse_drift(spec.label), spec)

    def test_garbage(self):
        with self.assertRaises(ValueError):
            parse_drift("affine(1")


class ParseConfigTests(SimpleTestCase):
    def test_preset_fills_system(self):
        config = parse_config(SWEEP)
        self.assertEqual(config.kind, "sweep")
        self.assertEqual(config.f, DriftSpec("affine", (1.0, 1.0)))
        self.assertEqual(config.g, DriftSpec("affine", (1.0, 3.0)))
        self.assertEqual((config.alpha, config.beta), (1.0, 2.0))
        self.assertEqual(config.lambda_values, (1.0, 10.0))
        self.assertEqual(config.seeds, (0, 1))
        self.assertEqual(config.window, (0.0, 2.0))

    def test_explicit_values_override_preset(self):
        config = parse_config(SWEEP.replace("preset = paper-example", "preset = coupled-example\nbeta = 0.5"))
        self.assertEqual(config.beta, 0.5)

    @override_settings(LEVY_SYNC_DEFAULT_DT=0.05, LEVY_SYNC_WORKERS=2)
    def test_defaults_come_from_settings(self):
        config = parse_config("[experiment]\nkind = sample\n[noise]\nfamily = brownian\n")
        self.assertEqual(config.dt, 0.05)
        self.assertEqual(config.workers, 2)
        self.assertEqual(config.name, "sample")

    def test_descending_lambda_names_field_and_line(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config(SWEEP.replace("lambda_values = 1, 10", "lambda_values = 10, 1"))
        self.assertEqual(caught.exception.field, "lambda_values")
        self.assertEqual(caught.exception.line, 14)
        self.assertIn("ascending", str(caught.exception))

    def test_zero_lambda_explains_the_absorption_radius(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config(SWEEP.replace("lambda_values = 1, 10", "lambda_values = 0, 10"))
        self.assertEqual(caught.exception.field, "lambda_values")
        self.assertIn("absorption radius needs lambda > 0", str(caught.exception))

    def test_unknown_kind(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config("[experiment]\nkind = plot\n")
        self.assertEqual(caught.exception.field, "kind")
        self.assertEqual(caught.exception.line, 2)

    def test_bad_number(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config(SWEEP.replace("dt = 0.01", "dt = fast"))
        self.assertEqual(caught.exception.field, "dt")

    def test_unknown_noise_parameter(self):
        with self.assertRaises(ConfigError):
            parse_config("[experiment]\nkind = sample\n[noise]\nfamily = brownian\nrate = 3\n")

    def test_unknown_drift(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config("[experiment]\nkind = integrate\n[system]\nf = quartic(1)\n")
        self.assertEqual(caught.exception.field, "f")

    def test_missing_header(self):
        with self.assertRaises(ConfigError):
            parse_config("kind = sweep\n")

    def test_stationary_needs_rate_or_drift(self):
        with self.assertRaises(ConfigError):
            parse_config("[experiment]\nkind = stationary\n[noise]\nfamily = brownian\n")

    def test_resolved_lists_defaults(self):
        sections = parse_config(SWEEP).resolved()
        self.assertEqual(sections["sweep"]["same_noise"], "no")
        self.assertEqual(sections["system"]["f"], "affine(1.0, 1.0)")
        self.assertEqual(sections["grid"]["t_start"], "0.0")
        self.assertEqual(sections["sweep"]["m_max"], "5")

    @override_settings(LEVY_SYNC_SKOROHOD_M_MAX=3)
    def test_resolved_m_max_follows_settings(self):
        self.assertEqual(parse_config(SWEEP).resolved()["sweep"]["m_max"], "3")


class LoadConfigTests(SimpleTestCase):
    def test_shipped_examples_parse(self):
        for path in sorted(EXAMPLES.glob("*.ini")):
            with self.subTest(path=path.name):
                config = load_config(path)
                self.assertEqual(config.name, path.stem)

    def test_metric_paths_resolve_next_to_config(self):
        config = load_config(EXAMPLES / "metric_steps.ini")
        self.assertEqual(config.resolve_path(config.path_a), EXAMPLES / "step_a.csv")

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(EXAMPLES / "absent.ini")
