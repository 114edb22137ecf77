"""kamtori: numerical invariant tori of symplectic integrators.

Applies symplectic one-step schemes to integrable Hamiltonian systems,
measures numerical frequencies with NAFF, classifies step sizes as
Diophantine or resonant, and reproduces the associated quantitative
experiments (frequency drift, energy near-conservation, resonance peaks).
"""

from ._version import __version__
from .errors import (
    ConfigError,
    DegenerateAngleError,
    DimensionError,
    DivergenceError,
    KamtoriError,
    LatticeSizeError,
    NonConvergenceError,
    OutOfRegimeError,
    RefinementError,
    UnsupportedDimensionError,
)
from .state import PhaseState
from .systems import (
    PENDULUM,
    RUESSMANN3,
    RUESSMANN3_X0,
    RUESSMANN3_Y0,
    SystemModel,
    eval_gradients,
    eval_hamiltonian,
    first_integral_values,
    from_action_angle,
    get_system,
    make_expression_system,
    pendulum_frequency,
    pendulum_period,
    register_system,
    system_names,
    to_action_angle,
)
from .integrators import (
    DEFAULT_SOLVER,
    IMPLICIT_MIDPOINT,
    RUNGE_EXPLICIT_MIDPOINT,
    SCHEMES,
    STOERMER_VERLET,
    SYMPLECTIC_EULER,
    Scheme,
    SolverConfig,
    Trajectory,
    get_scheme,
    integrate,
    integrate_batch,
    jacobian_determinant,
    solve_implicit,
    step,
    step_batch,
    step_jacobian,
    symplecticity_defect,
)
from .naff import (
    SignalSeries,
    SpectrumLine,
    fundamental_frequencies,
    naff_decompose,
    refine_peak,
    windowed_correlation,
)
from .resonance import (
    DiophantineParams,
    ResonanceLabel,
    ScanRow,
    default_diophantine_params,
    detect_peaks,
    diophantine_check,
    energy_drift_check,
    fit_convergence_order,
    scan_step_sizes,
    search_resonance,
    verify_resonance,
)
from .config import RunConfig, validate_config
from .experiments import RunManifest, emit_phase_portrait, run

__all__ = [name for name in dir() if not name.startswith("_")]
