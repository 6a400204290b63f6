import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircrowd.aggregate import (
    ConfusionModel,
    PosteriorTable,
    bayes_posterior,
    dawid_skene,
    estimate_confusion,
    harden,
    log_likelihood,
    majority_vote,
)
from faircrowd.dataset import GroupAssignment, LabelMatrix, SyntheticConfig, generate_synthetic, subset_tasks, train_test_split
from faircrowd.metrics import f1_accuracy

from oracles import enumerate_posterior


def one_task(votes):
    return LabelMatrix.from_dense(np.array([votes]))


@pytest.mark.parametrize("votes, phi, label", [([1, 1, 0], 2 / 3, 1), ([1, 0], 0.5, 1), ([0] * 5, 0.0, 0)])
def test_majority_vote(votes, phi, label):
    p = majority_vote(one_task(votes))
    assert p.phi1[0] == pytest.approx(phi, abs=1e-15)
    assert harden(p)[0] == label


def test_majority_vote_ignores_missing():
    p = majority_vote(LabelMatrix.from_dense(np.array([[1, -1, 0, 1], [-1, -1, 0, -1]])))
    assert np.allclose(p.phi1, [2 / 3, 0.0])


@pytest.mark.parametrize("phi, label", [(0.5, 1), (0.4999, 0), (1.0, 1), (0.0, 0)])
def test_harden(phi, label):
    assert harden(PosteriorTable([phi], "MV"))[0] == label


def test_posterior_table_range():
    with pytest.raises(ValueError):
        PosteriorTable([1.2], "MV")
    assert np.allclose(PosteriorTable([0.3], "MV").phi0, [0.7])


def test_bayes_single_annotator_returns_skill():
    cm = ConfusionModel.from_skills([[0.9, 0.9]])
    p = bayes_posterior(one_task([1]), GroupAssignment([0]), cm)
    assert p.phi1[0] == pytest.approx(0.9, abs=1e-15)


def test_bayes_symmetric_cancellation():
    cm = ConfusionModel.from_skills([[0.8, 0.8], [0.8, 0.8]])
    p = bayes_posterior(one_task([1, 0]), GroupAssignment([1]), cm)
    assert p.phi1[0] == pytest.approx(0.5, abs=1e-15)


def test_bayes_three_annotators_odds_24():
    skills = [[0.9, 0.9], [0.8, 0.8], [0.6, 0.6]]
    cm = ConfusionModel.from_skills(skills)
    p = bayes_posterior(one_task([1, 1, 0]), GroupAssignment([0]), cm).phi1[0]
    pi = [[[s[0], 1 - s[0]], [1 - s[0], s[0]]] for s in skills]
    oracle = enumerate_posterior([1, 1, 0], pi, 0.5)
    assert p == pytest.approx(oracle, abs=1e-12)
    # odds (0.9/0.1)(0.8/0.2)(0.4/0.6) = 24
    assert p == pytest.approx(24 / 25, abs=1e-12)


def test_bayes_rejects_degenerate_prior():
    cm = ConfusionModel.from_skills([[0.9, 0.9]], prior=(0.0, 0.5))
    with pytest.raises(ValueError, match="prior"):
        bayes_posterior(one_task([1]), GroupAssignment([0]), cm)


def test_bayes_large_crowd_no_underflow():
    R = 2000
    cm = ConfusionModel.from_skills(np.full((R, 2), 0.9))
    p = bayes_posterior(one_task([1] * R), GroupAssignment([0]), cm)
    assert p.phi1[0] == 1.0
    p = bayes_posterior(one_task([0] * R), GroupAssignment([0]), cm)
    assert p.phi1[0] == 0.0


@st.composite
def confusion_instance(draw):
    R = draw(st.integers(1, 4))
    n = draw(st.integers(1, 6))
    probs = st.floats(0.02, 0.98)
    pi = np.empty((R, 2, 2, 2))
    for r, a, y in itertools.product(range(R), range(2), range(2)):
        p1 = draw(probs)
        pi[r, a, 1, y] = p1
        pi[r, a, 0, y] = 1 - p1
    prior = np.array([draw(probs), draw(probs)])
    votes = np.array([[draw(st.sampled_from([-1, 0, 1])) for _ in range(R)] for _ in range(n)])
    for t in range(n):
        if np.all(votes[t] < 0):
            votes[t, 0] = draw(st.integers(0, 1))
    group = [draw(st.integers(0, 1)) for _ in range(n)]
    return ConfusionModel(pi, prior), votes, group


@settings(max_examples=200, deadline=None)
@given(confusion_instance())
def test_bayes_matches_enumeration(inst):
    cm, votes, group = inst
    m = LabelMatrix.from_dense(votes)
    p = bayes_posterior(m, GroupAssignment(group), cm).phi1
    for t, a in enumerate(group):
        pi_r = [[[cm.pi[r, a, k, y] for y in (0, 1)] for k in (0, 1)] for r in range(votes.shape[1])]
        v = [None if x < 0 else int(x) for x in votes[t]]
        assert p[t] == pytest.approx(enumerate_posterior(v, pi_r, cm.prior[a]), abs=1e-12)


def test_estimate_confusion_counts():
    # annotator 0: on (Y=1, A=0) three right, one wrong; always right elsewhere
    dense = np.array([[1, 1], [1, 1], [1, 1], [0, 1], [0, 0], [1, 1], [0, 0]])
    group = [0, 0, 0, 0, 0, 1, 1]
    truth = [1, 1, 1, 1, 0, 1, 0]
    cm = estimate_confusion(LabelMatrix.from_dense(dense), GroupAssignment(group, truth), smoothing=0)
    assert cm.pi[0, 0, 1, 1] == pytest.approx(0.75)
    assert cm.pi[1, 1, 1, 1] == 1.0 and cm.pi[1, 0, 0, 0] == 1.0
    assert np.allclose(cm.prior, [0.8, 0.5])


def test_estimate_confusion_empty_cell():
    m = LabelMatrix.from_dense(np.array([[1], [0]]))
    g = GroupAssignment([0, 1], [1, 0])
    cm = estimate_confusion(m, g, smoothing=1)
    assert cm.pi[0, 1, 1, 1] == 0.5  # never saw Y=1 in group 1
    with pytest.raises(ValueError, match="smoothing"):
        estimate_confusion(m, g, smoothing=0)


def test_estimate_confusion_requires_truth():
    with pytest.raises(ValueError):
        estimate_confusion(one_task([1]), GroupAssignment([0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 3))
def test_confusion_columns_sum_to_one(seed, smoothing):
    m, g, _ = generate_synthetic(SyntheticConfig(60, 7, 3, seed=seed))
    if min(g.group_sizes()) == 0:
        return
    try:
        cm = estimate_confusion(m, g, smoothing)
    except ValueError:
        assert smoothing == 0
        return
    assert np.allclose(cm.pi.sum(axis=2), 1.0, rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_majority_vote_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    dense = rng.integers(-1, 2, size=(8, 6))
    dense[:, 0] = rng.integers(0, 2, 8)
    perm = rng.permutation(6)
    a = majority_vote(LabelMatrix.from_dense(dense)).phi1
    b = majority_vote(LabelMatrix.from_dense(dense[:, perm])).phi1
    assert np.array_equal(a, b)


def test_ds_perfect_annotators():
    m, g, _ = generate_synthetic(SyntheticConfig(200, 6, 6, skill_law=((1, 1), (1, 1)), seed=2))
    p, cm = dawid_skene(m, g, iters=5)
    assert np.array_equal(harden(p), g.truth)
    assert np.all(np.abs(p.phi1 - g.truth) < 1e-6)
    assert np.allclose(cm.skills, 1 - 1e-6)


def test_ds_single_task_single_annotator():
    p, _ = dawid_skene(LabelMatrix.from_dense(np.array([[1], [0]])), GroupAssignment([0, 1]), iters=0)
    assert p.phi1[0] == pytest.approx(0.7)
    assert p.phi1[1] == pytest.approx(0.3)


def test_ds_keeps_skill_for_unseen_group():
    # annotator 1 never votes on group 1
    dense = np.array([[1, 1], [0, 0], [1, -1], [0, -1]])
    _, cm = dawid_skene(LabelMatrix.from_dense(dense), GroupAssignment([0, 0, 1, 1]), iters=3, init_skill=0.65)
    assert cm.skills[1, 1] == 0.65


def test_ds_exact_iteration_count():
    m, g, _ = generate_synthetic(SyntheticConfig(300, 10, 5, seed=8))
    trace = []
    dawid_skene(m, g, trace=trace)
    assert len(trace) == 21


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([((0.5, 1), (0.6, 1)), ((0.2, 0.6), (0.1, 0.6)), ((0.49, 0.51), (0.49, 0.51))]))
def test_ds_log_likelihood_monotone(seed, law):
    m, g, _ = generate_synthetic(SyntheticConfig(150, 12, 4, skill_law=law, seed=seed))
    if min(g.group_sizes()) == 0:
        return
    trace = []
    dawid_skene(m, g, trace=trace)
    assert np.all(np.diff(trace) >= -1e-9)


def test_log_likelihood_single_vote():
    cm = ConfusionModel.from_skills([[0.9, 0.9]])
    assert log_likelihood(one_task([1]), GroupAssignment([0]), cm) == pytest.approx(np.log(0.5))


def test_ds_tracks_bayes_accuracy():
    m, g, _ = generate_synthetic(SyntheticConfig(5000, 20, 20, seed=21))
    train, test = train_test_split(m, 0.6, seed=0)
    cm = estimate_confusion(*subset_tasks(m, g, train))
    bayes_acc = f1_accuracy(harden(bayes_posterior(m, g, cm))[test], g.truth[test])[1]
    ds_acc = f1_accuracy(harden(dawid_skene(m, g)[0])[test], g.truth[test])[1]
    assert abs(ds_acc - bayes_acc) <= 0.02
