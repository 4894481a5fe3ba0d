"""Bayesian joint models of bi-exponential biomarkers and competing risks.

Per treatment line, nonlinear mixed-effects trajectories of multiple
biomarkers share their patient-level parameters with Weibull cause-specific
hazards for death and transition to the next line.  The package provides
simultaneous (joint) and corrected two-stage estimation via a built-in
gradient-based sampler, dynamic individual risk prediction, model-performance
metrics, a generative simulator, and a batch CLI.
"""

__version__ = "0.1.0"

from .model import (
    BiexpParams,
    BiexpPopulation,
    LotParams,
    ParamLayout,
    PriorConfig,
    RandomEffects,
    SurvivalParams,
    VarianceComponents,
    natural_params,
)
from .data import (
    LongitudinalRecord,
    LotCohort,
    PosteriorDraws,
    SurvivalRecord,
    validate_cohort,
)
from .likelihood import (
    JointTarget,
    biexp_mean,
    cause_specific_hazard,
    cumulative_hazard,
    joint_log_posterior,
    linear_predictor,
    longitudinal_loglik,
    overall_survival,
    survival_loglik,
)

__all__ = [name for name in dir() if not name.startswith("_")]
