"""colmode: steady-state entanglement of two coupled collective bosonic modes.

Simulation, certification, null-model falsification, and operational
threshold calculators for Gaussian drift-diffusion dynamics of a pair of
collective modes.
"""

__version__ = "0.1.0"

from .errors import (
    ColmodeError,
    NumericalError,
    ValidationError,
)
from .gaussian_core import (
    OMEGA,
    ModelParams,
    Preset,
    build_diffusion,
    build_drift,
    check_physicality,
    closed_form_covariance,
    closed_form_dynamics,
    evolve_covariance,
    infer_diffusion,
    is_stable,
    solve_steady_lyapunov,
    steady_dynamics,
    steady_state_covariance,
)
from .entanglement import (
    WitnessReport,
    analytic_boundary,
    analytic_nu_minus,
    duan_witness,
    partial_transpose,
    ppt_nu_minus,
    symplectic_eigenvalues,
    witness_report_from_covariance,
)
from .trajectory import (
    Scheme,
    SourceTag,
    TrajectoryConfig,
    TrajectoryRecord,
    derive_stream_seed,
    sample_ensemble,
    sample_euler_maruyama,
    sample_exact_ou,
)
from .null_models import (
    NullKind,
    NullModelSpec,
    enforce_classicality,
    gen_classical_paramp,
    gen_optimized_mixture,
    gen_shared_noise,
    matched_null_specs,
)
from .pipeline import (
    EstimatedCovariance,
    PipelineConfig,
    analyze_record,
    bandlimit,
    convergence_sweep,
    demodulate,
    estimate_covariance,
    witness_from_estimate,
    witness_with_uncertainty,
)
from .thresholds import (
    CouplingCurve,
    NoiseInputSpec,
    VminForm,
    collective_occupation,
    cooperativity,
    coupling_at,
    max_entangled_distance,
    n_eff_from_noise,
    phase_diffusion,
    v_min,
)
