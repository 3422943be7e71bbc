"""Hybrid quantum-classical dynamics: exact evolution and jump trajectories.

A finite classical system is coupled to a quantum one; classical
transitions ("events") fire at rates set by the quantum state. The
package integrates the statistical evolution exactly, simulates single
experimental runs as piecewise deterministic jump trajectories, and
verifies that trajectory ensembles reproduce the exact statistics.
"""

__version__ = "0.1.0"

from .ensemble import (
    EnsembleConfig,
    EnsembleReport,
    EventStatistics,
    compare_to_master,
    event_statistics,
    run_ensemble,
)
from .errors import InvariantViolation, ValidationError
from .hilbert import adjoint, hermitian_eigen, mat_exp, mat_mul, trace, trace_distance
from .master import IntegratorConfig, integrate_heisenberg, integrate_master
from .model import (
    ClassicalSpace,
    EventRecord,
    HybridDensity,
    HybridModel,
    PureHybridState,
    classical_probabilities,
    compute_lambdas,
    diag_projection,
    effective_quantum_state,
    embed_pure,
    expectation,
    validate_model,
)
from .modelio import bundled_model_path, list_bundled_models, load_model, save_model
from .pdp import (
    Trajectory,
    TrajectoryConfig,
    TrajectoryRandom,
    deterministic_step,
    jump_distribution,
    jump_rate,
    post_jump_state,
    run_trajectory,
)

__all__ = [
    "__version__",
    "ValidationError",
    "InvariantViolation",
    "mat_mul",
    "adjoint",
    "trace",
    "mat_exp",
    "hermitian_eigen",
    "trace_distance",
    "ClassicalSpace",
    "HybridModel",
    "HybridDensity",
    "PureHybridState",
    "EventRecord",
    "diag_projection",
    "compute_lambdas",
    "validate_model",
    "effective_quantum_state",
    "classical_probabilities",
    "expectation",
    "embed_pure",
    "IntegratorConfig",
    "integrate_master",
    "integrate_heisenberg",
    "TrajectoryConfig",
    "Trajectory",
    "TrajectoryRandom",
    "jump_rate",
    "jump_distribution",
    "post_jump_state",
    "deterministic_step",
    "run_trajectory",
    "EnsembleConfig",
    "EnsembleReport",
    "EventStatistics",
    "run_ensemble",
    "compare_to_master",
    "event_statistics",
    "load_model",
    "save_model",
    "bundled_model_path",
    "list_bundled_models",
]
