from __future__ import annotations

import logging

from django.core.management.base import BaseCommand, CommandError

from levy_sync.exceptions import (
    CapabilityError,
    ConfigError,
    DivergenceError,
    LevySyncError,
    NonConvergenceError,
    NotDissipativeError,
)
from levy_sync.services.csv_io import read_path_csv
from levy_sync.services.experiment_config import load_config
from levy_sync.services.registry import list_registry
from levy_sync.services.runner import run_experiment
from levy_sync.services.skorohod import skorohod_bounded, skorohod_global

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CAPABILITY = 4


def exit_code_for(exc: LevySyncError) -> int:
    if isinstance(exc, CapabilityError):
        return EXIT_CAPABILITY
    if isinstance(exc, (NonConvergenceError, DivergenceError, NotDissipativeError)):
        return EXIT_NUMERICAL
    # Remaining errors are bad input: config, parameters, domains.
    return EXIT_CONFIG


def _describe(exc: LevySyncError) -> str:
    if isinstance(exc, ConfigError):
        where = []
        if exc.line is not None:
            where.append(f"line {exc.line}")
        if exc.field is not None:
            where.append(f"field '{exc.field}'")
        if where:
            return f"{exc} ({', '.join(where)})"
    return str(exc)


class Command(BaseCommand):
    help = "Levy-noise synchronization experiments: run a config, list the registry, or compare two paths."

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand")

        run = subparsers.add_parser("run", help="Run an experiment config.")
        run.add_argument("config", help="Path to the experiment .ini file.")
        run.add_argument("--output", default=None, help="Output root; overrides [experiment] output.")
        run.add_argument("--workers", type=int, default=None, help="Sweep worker threads.")

        subparsers.add_parser("registry", help="List drifts, noise families and presets.")

        metric = subparsers.add_parser("metric", help="Skorohod distance between two path CSV files.")
        metric.add_argument("path_a")
        metric.add_argument("path_b")
        metric.add_argument("--m", type=float, default=None, help="Half-width of [-m, m]; omit for the global metric.")
        metric.add_argument("--tol", type=float, default=None)
        metric.add_argument("--m-max", dest="m_max", type=int, default=None, help="Levels of the global metric.")
        metric.add_argument("--witness", action="store_true", help="Also print the witness time change.")

    def handle(self, *args, **options):
        subcommand = options.get("subcommand")
        if not subcommand:
            self.print_help("manage.py", "levysync")
            return
        try:
            getattr(self, f"_handle_{subcommand}")(options)
        except LevySyncError as exc:
            code = exit_code_for(exc)
            logger.debug("levysync %s failed with exit code %d", subcommand, code)
            raise CommandError(_describe(exc), returncode=code)

    def _handle_registry(self, options) -> None:
        self.stdout.write(list_registry())

    def _handle_run(self, options) -> None:
        config = load_config(options["config"])
        result = run_experiment(config, output_root=options.get("output"), workers=options.get("workers"))
        for path in result.files:
            self.stdout.write(str(path))
        for row in result.summary:
            self.stdout.write(
                f"lambda={row['lambda']:g} median_gap={row['median_gap']:.6g} "
                f"median_skorohod_x={row['median_skorohod_x']:.6g}"
            )

    def _handle_metric(self, options) -> None:
        x = read_path_csv(options["path_a"])
        y = read_path_csv(options["path_b"])
        if options.get("m") is None:
            metric = skorohod_global(x, y, options.get("m_max"), options.get("tol"))
            self.stdout.write("value,uncertainty")
            self.stdout.write(f"{float(metric.value)!r},{float(metric.uncertainty)!r}")
            return
        result = skorohod_bounded(x, y, options["m"], options.get("tol"))
        self.stdout.write("value,certified_gap")
        self.stdout.write(f"{float(result.value)!r},{float(result.certified_gap)!r}")
        if options.get("witness"):
            self.stdout.write("t,lambda_t")
            for t, s in result.witness.breakpoints:
                self.stdout.write(f"{float(t)!r},{float(s)!r}")
