"""Experiment drivers: gap convergence with crowd size and the
fairness/F1 trade-off of the post-processors."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .aggregate import bayes_posterior, dawid_skene, estimate_confusion, harden, majority_vote
from .baseline import post_td
from .dataset import SyntheticConfig, generate_synthetic, subset_tasks, train_test_split
from .metrics import dp_gap, f1_accuracy
from .postprocess import FairCrowdConfig, apply, fairify
from .theory import SCENARIOS

DEFAULT_R = (3, 5, 8, 10, 15, 20, 40)
DEFAULT_EPSILONS = (0.01, 0.05, 0.1, 0.2)
AGGREGATORS = ("mv", "bayes", "ds")


def sub_seed(seed: int, *key: int) -> int:
    """Independent 63-bit seed for a labelled sub-experiment."""
    return int(np.random.SeedSequence([seed, *key]).generate_state(2, np.uint64)[0] >> np.uint64(1))


def posteriors(method, m, g, confusion_tasks=None, ds_update_prior=True):
    """Posterior table for ``method``. Bayes counts confusion against the
    truth of ``confusion_tasks`` (all tasks when None)."""
    if method == "mv":
        return majority_vote(m)
    if method == "ds":
        return dawid_skene(m, g, update_prior=ds_update_prior)[0]
    if method == "bayes":
        if confusion_tasks is None:
            cm = estimate_confusion(m, g)
        else:
            cm = estimate_confusion(*subset_tasks(m, g, confusion_tasks))
        return bayes_posterior(m, g, cm)
    raise ValueError(f"unknown aggregation method {method!r}")


def convergence(scenario="competent", R_list=DEFAULT_R, n_tasks=10_000, mc_reps=20, seed=0, ds_update_prior=True):
    """Mean and sd over ``mc_reps`` crowds of gap(aggregate) - gap(truth).

    Every annotator of a pool of size R labels every task. Bayes counts
    its confusion tables against the truth of the same tasks.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    rows = []
    for R in R_list:
        diffs = {k: [] for k in AGGREGATORS}
        for rep in range(mc_reps):
            cfg = SyntheticConfig(n_tasks, R, R, skill_law=SCENARIOS[scenario], seed=sub_seed(seed, R, rep))
            m, g, _ = generate_synthetic(cfg)
            base = dp_gap(g.truth, g).dp_gap
            for k in AGGREGATORS:
                diffs[k].append(dp_gap(harden(posteriors(k, m, g, ds_update_prior=ds_update_prior)), g).dp_gap - base)
        for k in AGGREGATORS:
            d = np.asarray(diffs[k])
            rows.append({
                "scenario": scenario,
                "R": R,
                "aggregator": k,
                "diff_mean": float(d.mean()),
                "diff_std": float(d.std(ddof=1)) if d.size > 1 else 0.0,
                "mc_reps": mc_reps,
            })
    return rows


def tradeoff_config(seed=0, n_tasks=2000) -> SyntheticConfig:
    """Synthetic trade-off dataset: P(A=1)=0.6, P(Y=1|A=a) = 1/2 +- 0.1,
    5 votes per task from a pool of 100."""
    return SyntheticConfig(
        n_tasks, 100, 5, p_a1=0.6, p_y1_given_a=(0.4, 0.6), skill_law=((0.5, 1.0), (0.6, 1.0)), seed=seed
    )


def tradeoff(
    m,
    g,
    epsilons=DEFAULT_EPSILONS,
    methods=AGGREGATORS,
    fairifiers=("fc", "post_td"),
    resamples=10,
    test_fraction=0.6,
    seed=0,
    fc_config: FairCrowdConfig = FairCrowdConfig(),
):
    """F1, accuracy and DP gap on held-out tasks per (method, fairifier, epsilon).

    Aggregation and fairification use all tasks; Bayes confusion tables
    are counted on the training split of each resample. FC is scored by
    its expected DP gap and by F1 of its sampled labels.
    """
    g.require_truth()
    acc = {}
    for rep in range(resamples):
        train, test = train_test_split(m, test_fraction, sub_seed(seed, 0, rep))
        g_test = g.group[test]
        y_test = g.truth[test]
        for method in methods:
            p = posteriors(method, m, g, confusion_tasks=train)
            hard = harden(p)
            for eps in epsilons:
                for fz in fairifiers:
                    s = sub_seed(seed, 1, rep, int(round(eps * 1e6)))
                    if fz == "fc":
                        cfg = replace(fc_config, epsilon=eps)
                        rc = fairify(p, g, cfg)
                        q, labels = apply(rc, p, g, seed=s)
                        gap = dp_gap(q[test], g_test).dp_gap
                    elif fz == "post_td":
                        labels = post_td(hard, g, eps, seed=s)
                        gap = dp_gap(labels[test], g_test).dp_gap
                    else:
                        raise ValueError(f"unknown fairifier {fz!r}")
                    f1, accuracy = f1_accuracy(labels[test], y_test)
                    acc.setdefault((method, fz, eps), []).append((gap, f1, accuracy))
    rows = []
    for (method, fz, eps), vals in acc.items():
        v = np.asarray(vals)
        sd = v.std(axis=0, ddof=1) if len(v) > 1 else np.zeros(3)
        rows.append({
            "method": method,
            "fairifier": fz,
            "epsilon": eps,
            "dp_gap_mean": float(v[:, 0].mean()),
            "dp_gap_std": float(sd[0]),
            "f1_mean": float(v[:, 1].mean()),
            "f1_std": float(sd[1]),
            "accuracy_mean": float(v[:, 2].mean()),
            "accuracy_std": float(sd[2]),
            "n_resamples": len(v),
        })
    return rows
