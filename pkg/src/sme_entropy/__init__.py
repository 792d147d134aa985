"""Entropy-rate bounds for continuously monitored, dissipative quantum systems."""
from .bounds import (
    BoundReport,
    DriftTerms,
    InequalityVerdict,
    abe_term_check,
    bound_terms,
    drift_terms,
    ensemble_entropy_rate,
    entropy_consistency,
    ito_identity_check,
    verify_inequality,
)
from .integrators import (
    ControlPolicy,
    ModelSpec,
    SanitizePolicy,
    TimeGrid,
    TrajectoryEnsemble,
    TrajectoryRecord,
    sample_wiener,
    simulate_ensemble,
    simulate_trajectory,
    solve_me,
    step_me,
    step_sme,
)
from .models import build_model, model_names
from .statecore import (
    DensityMatrix,
    SpectralFloor,
    dissipative_commutator,
    expectation,
    generalized_variance,
    make_density,
    variance,
    von_neumann_entropy,
)
from .superops import dissipator, innovation

__version__ = "0.1.0"
