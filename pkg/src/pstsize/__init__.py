"""Bayesian sample sizing for two-arm superiority trials by the probability of a successful trial."""

__version__ = "0.1.0"

from .conjugate import (
    ArmPrior,
    KnownPrecisionDesign,
    PstResult,
    TwoArmLayout,
    allocate,
    limiting_pst,
    prior_prob_superiority,
    pst_closed_form,
    pst_monte_carlo,
)
from .design_tools import build_design, find_min_n, frequentist_n_per_group, sweep
from .errors import (
    ConfigurationError,
    DomainError,
    InfeasibleLayoutError,
    InfeasibleMomentsError,
    InfeasibleTargetError,
    PstError,
)
from .mixture import (
    MixtureDesign,
    NormalMixturePrior,
    posterior_prob_positive,
    prior_prob_positive_mixture,
    pst_monte_carlo_mixture,
    solve_mixture_hyperparams,
)
from .numerics import McEstimate, RandomStream
from .unknown_precision import GammaPrior, UnknownPrecisionDesign, fit_gamma_moments, pst_simulation
