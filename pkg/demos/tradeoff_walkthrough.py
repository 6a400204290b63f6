"""Aggregate a synthetic crowd three ways, then compare FairCrowd with
label massaging at a few fairness budgets.

Run:  python3 demos/tradeoff_walkthrough.py
"""

import numpy as np

from faircrowd import (
    FairCrowdConfig,
    apply,
    dawid_skene,
    dp_gap,
    f1_accuracy,
    fairify,
    generate_synthetic,
    harden,
    majority_vote,
    post_td,
)
from faircrowd.experiments import tradeoff_config

m, g, skills = generate_synthetic(tradeoff_config(seed=3))
print(f"{m.n_tasks} tasks, {m.n_annotators} annotators, {m.n_votes} votes")
print(f"truth gap: {dp_gap(g.truth, g).dp_gap:.3f}")

mv = majority_vote(m)
ds, _ = dawid_skene(m, g)
for name, p in (("mv", mv), ("ds", ds)):
    r = dp_gap(harden(p), g)
    print(f"{name}: gap {r.dp_gap:.3f}  f1 {r.f1:.3f}  acc {r.accuracy:.3f}")

# FairCrowd randomizes only on the threshold set; Post_TD flips hard labels
print("\neps    fc_gap  fc_f1   td_gap  td_f1")
for eps in (0.01, 0.05, 0.1, 0.2):
    rc = fairify(ds, g, FairCrowdConfig(epsilon=eps, preprocess=False))
    q, labels = apply(rc, ds, g, seed=0)
    td = post_td(harden(ds), g, eps, seed=0)
    print(f"{eps:<6} {dp_gap(q, g).dp_gap:.4f}  {f1_accuracy(labels, g.truth)[0]:.4f}  "
          f"{dp_gap(td, g).dp_gap:.4f}  {f1_accuracy(td, g.truth)[0]:.4f}")

rc = fairify(ds, g, FairCrowdConfig(epsilon=0.01, preprocess=False))
print(f"\nat eps=0.01: beta*={rc.beta_star:.4f} tau={np.round(rc.tau, 4)} omega={np.round(rc.omega, 4)}")
