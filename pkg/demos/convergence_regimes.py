"""How the aggregators' parity gap tracks the truth's as the crowd grows,
under competent, adversarial and near-chance annotators.

Run:  python3 demos/convergence_regimes.py   (about a minute)
"""

from faircrowd.experiments import convergence
from faircrowd.theory import SCENARIOS

for name in SCENARIOS:
    print(f"\n{name}")
    print("R    mv        bayes     ds")
    rows = convergence(name, R_list=(3, 10, 40), n_tasks=4000, mc_reps=5, seed=1)
    by_r = {}
    for r in rows:
        by_r.setdefault(r["R"], {})[r["aggregator"]] = r["diff_mean"]
    for R, d in by_r.items():
        print(f"{R:<4} {d['mv']:+.4f}  {d['bayes']:+.4f}  {d['ds']:+.4f}")
