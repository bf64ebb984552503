"""Quantum kicked rotor under renewal (Levy) noise: simulation, renewal calculus and theory."""

__version__ = "0.1.0"

from .harness import (  # noqa: E402
    EnsembleResult,
    ExperimentConfig,
    compare_theory_sim,
    fit_dstar,
    fit_exponent,
    run_ensemble,
    run_single_realization,
    theory_for,
)
from .mittag_leffler import mittag_leffler  # noqa: E402
from .renewal import WaitingTimeDistribution, renewal_tables  # noqa: E402
from .rotor import FloquetPropagator, LatticeParams, floquet_step, init_state  # noqa: E402
from .theory import LocalizationModel, predict_variance_full, subdiffusion_asymptote  # noqa: E402

__all__ = [
    "__version__",
    "EnsembleResult",
    "ExperimentConfig",
    "FloquetPropagator",
    "LatticeParams",
    "LocalizationModel",
    "WaitingTimeDistribution",
    "compare_theory_sim",
    "fit_dstar",
    "fit_exponent",
    "floquet_step",
    "init_state",
    "mittag_leffler",
    "predict_variance_full",
    "renewal_tables",
    "run_ensemble",
    "run_single_realization",
    "subdiffusion_asymptote",
    "theory_for",
]
