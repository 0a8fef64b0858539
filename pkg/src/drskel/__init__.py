"""Distributionally robust skeleton learning for discrete Bayesian networks."""

from .bayesnet import (
    Dag,
    Dataset,
    DiscreteBayesNet,
    bic_score,
    load_dataset,
    load_fixture,
    load_network,
    random_network,
    sample,
    save_dataset,
    save_network,
)
from .encoding import EncodedView, EncodingScheme, encode_sample, encode_value
from .moments import (
    CrossMoment,
    DiagnosticsReport,
    WeightMatrix,
    cross_moment,
    diagnostics,
    empirical_risk,
    solve_surrogate,
    squared_loss,
)

__version__ = "0.1.0"
