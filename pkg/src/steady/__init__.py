"""STEADY: stochastic estimation of dynamical variables for few-qubit systems."""

from .linalg import (
    TOL,
    Tolerances,
    EigenDecomposition,
    dexp_frechet,
    eig_hermitian,
    evolve_unitary,
    hermitian_from_parts,
    propagator,
)
from .models import (
    ControlPulse,
    ForwardModel,
    GeneralParams,
    LindbladParams,
    LinearMixParams,
    OperatorBasis,
    evolve_lindblad,
    evolve_piecewise,
    hamiltonian_at,
    predict_probs,
    predict_probs_grad,
)
from .hardware import (
    Dataset,
    TrueSystem,
    build_true_system,
    gauge_rotate_alpha,
    generate_dataset,
    nominal_params,
    pauli_exchange_basis,
    sample_measurements,
    spam_confusion_matrix,
    true_probs,
)
from .estimation import (
    AnnealSpec,
    DistanceKind,
    EstimationReport,
    FitConfig,
    cost,
    cost_grad,
    distance,
    duration_ladder,
    fit,
    fit_ladder,
    fit_ladder_joint,
    ladder_joint_cost,
    parameter_error_mod_gauge,
    shot_noise_floor,
    validate,
    validation_pulses,
)
from .fisher import (
    CRBReport,
    FisherMatrix,
    crb_report,
    design_pulses,
    fisher_per_pulse,
    fisher_total,
    validation_metric,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
