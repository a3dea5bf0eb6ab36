"""Block-sparse tensor recovery with tensor generalized block OMP."""

from .bounds import BoundReport, bound_report, w_bounds
from .coherence import CoherenceProfile, coherence_profile, irregular_fallback_coherence
from .datagen import EnsembleSpec, SignalSpec, add_noise, gen_ensemble, gen_signal
from .ensemble import MeasurementEnsemble
from .exceptions import ConfigError, RankDeficiencyError, ShapeError, StructureError
from .harness import ExperimentSpec, load_preset, run_experiment
from .recovery import RecoveryConfig, RecoveryResult, run_variant, tgbomp
from .tensor import BlockStructure, BlockSupport, kron_chain, mode_product, multi_mode_product

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "bound_report", "w_bounds",
    "CoherenceProfile", "coherence_profile", "irregular_fallback_coherence",
    "EnsembleSpec", "SignalSpec", "add_noise", "gen_ensemble", "gen_signal",
    "MeasurementEnsemble",
    "ConfigError", "RankDeficiencyError", "ShapeError", "StructureError",
    "ExperimentSpec", "load_preset", "run_experiment",
    "RecoveryConfig", "RecoveryResult", "run_variant", "tgbomp",
    "BlockStructure", "BlockSupport", "kron_chain", "mode_product", "multi_mode_product",
]
