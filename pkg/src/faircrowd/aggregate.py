"""Label aggregation: Majority Vote, Bayes-optimal posterior, Dawid-Skene EM."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .dataset import GroupAssignment, LabelMatrix

SOURCES = ("MV", "Bayes", "DS")
SKILL_CLAMP = 1e-6


@dataclass(frozen=True)
class PosteriorTable:
    """Per-task estimate of P(Y=1 | votes, a)."""

    phi1: np.ndarray
    source: str

    def __post_init__(self):
        phi1 = np.array(self.phi1, dtype=float, copy=True)
        if np.any(~np.isfinite(phi1)) or np.any((phi1 < 0) | (phi1 > 1)):
            raise ValueError("phi1 must lie in [0, 1]")
        phi1.setflags(write=False)
        object.__setattr__(self, "phi1", phi1)

    @property
    def phi0(self) -> np.ndarray:
        return 1.0 - self.phi1

    def __len__(self):
        return self.phi1.size


@dataclass(frozen=True)
class ConfusionModel:
    """Group-conditional annotator confusion probabilities.

    ``pi[r, a, k, y] = P(annotator r says k | Y=y, A=a)`` and
    ``prior[a] = P(Y=1 | A=a)``.
    """

    pi: np.ndarray
    prior: np.ndarray
    one_coin: bool = False

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float, copy=True)
        prior = np.array(self.prior, dtype=float, copy=True)
        if pi.ndim != 4 or pi.shape[1:] != (2, 2, 2):
            raise ValueError("pi must have shape (n_annotators, 2, 2, 2)")
        if prior.shape != (2,):
            raise ValueError("prior must have shape (2,)")
        if not np.allclose(pi.sum(axis=2), 1.0, rtol=0, atol=1e-12):
            raise ValueError("confusion columns must sum to 1")
        pi.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "prior", prior)

    @classmethod
    def from_skills(cls, skills, prior=(0.5, 0.5)) -> "ConfusionModel":
        """One-coin model from an ``(n_annotators, 2)`` skill array."""
        skills = np.asarray(skills, dtype=float)
        pi = np.empty(skills.shape + (2, 2))
        pi[..., 1, 1] = pi[..., 0, 0] = skills
        pi[..., 0, 1] = pi[..., 1, 0] = 1.0 - skills
        return cls(pi, np.asarray(prior, dtype=float), one_coin=True)

    @property
    def skills(self) -> np.ndarray:
        """P(correct | Y=1, A=a); equals the one-coin skill when ``one_coin``."""
        return self.pi[:, :, 1, 1]

    @property
    def n_annotators(self) -> int:
        return self.pi.shape[0]


def harden(p) -> np.ndarray:
    """Plug-in labels ``1{phi1 >= 1/2}``; ties go to class 1."""
    phi1 = p.phi1 if isinstance(p, PosteriorTable) else np.asarray(p, dtype=float)
    return (phi1 >= 0.5).astype(np.int8)


def majority_vote(m: LabelMatrix) -> PosteriorTable:
    return PosteriorTable(m.ones_per_task() / m.votes_per_task(), "MV")


def estimate_confusion(m: LabelMatrix, g: GroupAssignment, smoothing: float = 1.0) -> ConfusionModel:
    """Count confusion probabilities against ground truth, Laplace-smoothed."""
    g.require_truth()
    g.require_both_groups()
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    a = g.group[m.task].astype(np.int64)
    y = g.truth[m.task].astype(np.int64)
    k = m.label.astype(np.int64)
    R = m.n_annotators
    counts = np.zeros((R, 2, 2, 2))
    np.add.at(counts, (m.annotator, a, k, y), 1.0)
    totals = counts.sum(axis=2, keepdims=True)
    denom = totals + 2.0 * smoothing
    if np.any(denom == 0):
        r, aa, _, yy = np.argwhere(denom == 0)[0]
        raise ValueError(
            f"annotator {r} has no votes with Y={yy}, A={aa}; use smoothing > 0"
        )
    pi = (counts + smoothing) / denom

    sizes = g.group_sizes()
    positives = np.bincount(g.group, weights=g.truth, minlength=2)
    return ConfusionModel(pi, positives / sizes)


def _vote_llr(m: LabelMatrix, g: GroupAssignment, cm: ConfusionModel) -> np.ndarray:
    """Per-task log-likelihood ratio log P(votes|Y=0) - log P(votes|Y=1)."""
    pi = cm.pi
    if np.any((pi <= 0) | (pi >= 1)):
        raise ValueError("confusion entries must lie strictly inside (0, 1)")
    a = g.group[m.task]
    r = m.annotator
    k = m.label
    # log pi[k, y=0] - log pi[k, y=1] for the observed k
    term = np.log(pi[r, a, k, 0]) - np.log(pi[r, a, k, 1])
    return np.bincount(m.task, weights=term, minlength=m.n_tasks)


def _prior_log_odds(prior) -> np.ndarray:
    prior = np.asarray(prior, dtype=float)
    if np.any((prior <= 0) | (prior >= 1)):
        raise ValueError(f"prior must lie strictly inside (0, 1), got {prior}")
    return np.log1p(-prior) - np.log(prior)


def bayes_posterior(m: LabelMatrix, g: GroupAssignment, cm: ConfusionModel, source: str = "Bayes") -> PosteriorTable:
    """Posterior P(Y=1 | observed votes, a) = 1 / (1 + Pi), in log space.

    Only annotators who voted on a task enter its product.
    """
    log_pi = _prior_log_odds(cm.prior)[g.group] + _vote_llr(m, g, cm)
    return PosteriorTable(expit(-log_pi), source)


def log_likelihood(m: LabelMatrix, g: GroupAssignment, cm: ConfusionModel) -> float:
    """Observed-data log-likelihood sum_t log sum_y P(y | a) P(votes | y, a)."""
    pi = cm.pi
    a = g.group[m.task]
    ll1 = np.bincount(m.task, weights=np.log(pi[m.annotator, a, m.label, 1]), minlength=m.n_tasks)
    ll0 = np.bincount(m.task, weights=np.log(pi[m.annotator, a, m.label, 0]), minlength=m.n_tasks)
    prior = cm.prior[g.group]
    return float(np.sum(np.logaddexp(np.log(prior) + ll1, np.log1p(-prior) + ll0)))


def dawid_skene(
    m: LabelMatrix,
    g: GroupAssignment,
    iters: int = 20,
    init_skill: float = 0.7,
    update_prior: bool = True,
    trace: Optional[list] = None,
):
    """One-coin Dawid-Skene EM with skills and class priors conditioned on A.

    Starts from uniform skills ``init_skill`` and prior 1/2, then runs exactly
    ``iters`` E/M rounds. The returned posterior comes from a final E-step
    on the last parameters. If ``trace`` is a list, the observed-data
    log-likelihood of every parameter iterate (``iters + 1`` values) is
    appended to it.

    Returns ``(PosteriorTable, ConfusionModel)``.
    """
    g.require_both_groups()
    R = m.n_annotators
    skills = np.full((R, 2), float(init_skill))
    prior = np.array([0.5, 0.5])
    a_vote = g.group[m.task].astype(np.int64)
    cell = m.annotator * 2 + a_vote
    n_cell = np.bincount(cell, minlength=2 * R).reshape(R, 2)
    sizes = g.group_sizes()

    cm = ConfusionModel.from_skills(skills, prior)
    for _ in range(iters):
        if trace is not None:
            trace.append(log_likelihood(m, g, cm))
        q = bayes_posterior(m, g, cm).phi1
        qv = q[m.task]
        agree = np.where(m.label == 1, qv, 1.0 - qv)
        hits = np.bincount(cell, weights=agree, minlength=2 * R).reshape(R, 2)
        seen = n_cell > 0
        skills = np.where(seen, hits / np.maximum(n_cell, 1), skills)
        skills = np.clip(skills, SKILL_CLAMP, 1.0 - SKILL_CLAMP)
        if update_prior:
            prior = np.bincount(g.group, weights=q, minlength=2) / sizes
            prior = np.clip(prior, SKILL_CLAMP, 1.0 - SKILL_CLAMP)
        cm = ConfusionModel.from_skills(skills, prior)
    if trace is not None:
        trace.append(log_likelihood(m, g, cm))
    return bayes_posterior(m, g, cm, source="DS"), cm
