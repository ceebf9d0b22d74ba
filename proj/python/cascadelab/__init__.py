"""Cascade deferral toolkit: synthetic worlds with exact posteriors,
deferral rules, post-hoc rule training, and risk/curve evaluation."""

from cascadelab._core import (  # noqa: F401
    ConfigError,
    CurvePoint,
    Dataset,
    LabeledExample,
    ShapeError,
    SyntheticWorld,
    analytic_classifier,
    argmax_label,
    deferral_curve,
    discrete_world,
    entropy,
    extract_features,
    gaussian_mixture_world,
    load_classifier,
    normalize,
    optimal_selector,
    run_scenario,
    save_classifier,
    score_bayes,
    score_confidence,
    score_entropy,
    score_onehot_oracle,
    score_prob_oracle,
    score_relative_confidence,
    temperature_classifier,
    train_classifier,
)

__version__ = "0.1.0"
