"""Bayesian analysis of finite unsupervised domain adaptation under covariate shift.

Posteriors over classifier families, the optimal (hardened aggregate)
learner and its risks, the target-label-uncertainty proxies with their
Fano-type lower bounds, and classical discrepancy measures for comparison.
"""

from .domain import (
    ClassEntry,
    Classifier,
    ClassifierFamily,
    Domain,
    FiniteDistribution,
    LabelSet,
    PartialTable,
    Sample,
    UDAClass,
    restrict,
    validate_class,
)
from .errors import NumericError, UDAError, ValidationError
from .posterior import (
    Posterior,
    SoftPrediction,
    aggregate,
    consistent_set,
    consistent_set_infinite,
    harden,
    posterior_finite,
    posterior_infinite,
)
from .risk import (
    Mixture,
    OptimalLearner,
    expected_risk,
    learner_zoo,
    optimal_overall_risk_infinite,
    optimal_samplewise_risk,
    overall_risk,
    overall_risk_decomposed,
    samplewise_risk,
    target_risk,
)
from .sampling import RngSpec, UDAInstance, draw_instance, draw_sample, enumerate_samples
from .uncertainty import BITS, NATS, EntropyConfig, eptlu, eptlu_bound, fano_bound, ptlu, risk_lower_bound_for_g

__version__ = "0.1.0"
