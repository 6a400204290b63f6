"""Crowd label aggregation and epsilon-fair post-processing under
demographic parity."""

from .aggregate import (
    ConfusionModel,
    PosteriorTable,
    bayes_posterior,
    dawid_skene,
    estimate_confusion,
    harden,
    log_likelihood,
    majority_vote,
)
from .baseline import post_td
from .dataset import (
    GroupAssignment,
    LabelMatrix,
    SkillProfile,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    save_csv,
    subset_tasks,
    train_test_split,
)
from .metrics import FairnessReport, annotator_dp_gaps, dp_gap, f1_accuracy
from .postprocess import (
    FairCrowdConfig,
    RandomizedClassifier,
    L_hat,
    apply,
    fairify,
    minimize_M,
    preprocess_posteriors,
    solve_omega,
)
from .theory import (
    BoundReport,
    ExponentInput,
    baillon_eta,
    bayes_exponent,
    divergence_condition_check,
    dp_bound_check,
    mv_exponent,
    mv_tail_derivative,
    poisson_binomial_pmf,
    small_crowd_bound,
)

__version__ = "0.1.0"
