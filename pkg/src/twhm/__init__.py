"""Two-way heterogeneity model for dynamic networks."""
from .model import (
    PairProbabilities,
    ParamVector,
    SnapshotSeries,
    degree_moments,
    edge_acf,
    expected_density,
    expected_pair_moments,
    pair_probabilities,
)
from .simulate import SimConfig, empirical_density, simulate
from .objective import (
    HessianBlocks,
    SufficientStats,
    block_pd_sufficient,
    expected_hessian,
    gradient,
    hessian,
    neg_log_likelihood,
    smallest_eigenvalue,
    sufficient_stats,
)
from .estimation import (
    DegenerateDegree,
    FitResult,
    NoFiniteSolution,
    SolverOptions,
    fit,
    fit_mle,
    fit_mme,
    fit_mme_beta0,
    fit_mme_beta1,
    fit_static_beta_model,
)
from .forecast import PredictionConfig, link_probability, predict_degrees, predict_links, prediction_accuracy, select_omega

__version__ = "0.1.0"
