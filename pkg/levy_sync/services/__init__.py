from .cadlag_path import CadlagPath, cadlag_modulus, oscillation, shift, sup_norm
from .levy_process import (
    AlphaStable,
    CompoundPoisson,
    GeneratingTriplet,
    JumpDistribution,
    NoJumps,
    NoiseRealization,
    SimulationGrid,
    build_two_sided,
    empirical_drift,
    sample_levy_path,
)
from .integrator import (
    AdditiveSdeSpec,
    GeneralSdeSpec,
    check_linear_growth,
    estimate_dissipativity,
    flow_residual,
    integrate_additive,
    integrate_general,
)
from .skorohod import TimeChange, skorohod_bounded, skorohod_global, skorohod_oracle_small
from .stationary import (
    StationaryOrbit,
    example_closed_form,
    langevin_stationary,
    lemma1_iii_check,
    ou_convolution,
    ou_window_sup,
    pullback_stationary,
    recenter_example_noise,
)
from .sync_experiments import (
    CoupledSpec,
    SyncReport,
    absorption_radius,
    averaged_spec,
    contraction_check,
    coupled_stationary_pair,
    deterministic_equilibria,
    hausdorff_semidistance,
    pullback_attraction,
    run_sync_sweep,
    summarize,
    sync_gap,
)
from .registry import build_drift, build_noise, list_registry
from .experiment_config import ExperimentConfig, load_config, parse_config
from .runner import run_experiment

__all__ = [
    "AdditiveSdeSpec",
    "AlphaStable",
    "CadlagPath",
    "CompoundPoisson",
    "CoupledSpec",
    "ExperimentConfig",
    "GeneralSdeSpec",
    "GeneratingTriplet",
    "JumpDistribution",
    "NoJumps",
    "NoiseRealization",
    "SimulationGrid",
    "StationaryOrbit",
    "SyncReport",
    "TimeChange",
    "absorption_radius",
    "averaged_spec",
    "build_drift",
    "build_noise",
    "build_two_sided",
    "cadlag_modulus",
    "check_linear_growth",
    "contraction_check",
    "coupled_stationary_pair",
    "deterministic_equilibria",
    "empirical_drift",
    "estimate_dissipativity",
    "example_closed_form",
    "flow_residual",
    "hausdorff_semidistance",
    "integrate_additive",
    "integrate_general",
    "langevin_stationary",
    "lemma1_iii_check",
    "list_registry",
    "load_config",
    "ou_convolution",
    "ou_window_sup",
    "oscillation",
    "parse_config",
    "pullback_attraction",
    "pullback_stationary",
    "recenter_example_noise",
    "run_experiment",
    "run_sync_sweep",
    "sample_levy_path",
    "shift",
    "skorohod_bounded",
    "skorohod_global",
    "skorohod_oracle_small",
    "summarize",
    "sup_norm",
    "sync_gap",
]
