"""Delayed velocity-alignment dynamics: simulation, diagnostics, certificates."""

from .delay import DelaySpec, delay_bounds, initial_delay, tau_eval
from .errors import BracketError, ConfigError, DegenerateConnectivityWarning, LookbackError
from .experiments import (
    ConsensusCriteria,
    ThresholdReport,
    certificate_report,
    classify_consensus,
    reference_runs,
    reference_scenario,
    threshold_bisect,
)
from .integrator import (
    BallisticInit,
    ExplicitInit,
    HistoryBuffer,
    RunResult,
    Scenario,
    effective_step,
    init_history,
    interpolate,
    run,
    step,
)
from .metrics import (
    DecayCertificate,
    DiagnosticsRow,
    accel_energy_window,
    accel_peak_window,
    diameters,
    l2_certificate,
    linf_certificate,
    lyapunov_l2,
    lyapunov_linf,
    position_variance,
    scaled_functional,
    solve_l2_gate,
    solve_linf_gate,
    velocity_fluctuation,
    velocity_variance,
    verify_decay,
)
from .model import (
    ModelParams,
    PhaseState,
    PotentialSpec,
    psi_eval,
    rhs,
    validate_normalization,
    weight_matrix,
)
from .spectral import (
    augment_self_weights,
    connectivity_certificate,
    eigenvalues_sym,
    fiedler_number,
    jacobi_eigh,
    laplacian,
    pairwise_mixing_min,
)

__version__ = "0.1.0"
