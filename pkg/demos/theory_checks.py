"""Numbers behind the fairness-gap bounds.

Run:  python3 demos/theory_checks.py
"""

import numpy as np

from faircrowd.theory import (
    baillon_eta,
    bayes_exponent,
    mv_exponent,
    poisson_binomial_pmf,
    small_crowd_bound_population,
    verification_checks,
)

eta = baillon_eta()
print(f"uniform pmf constant eta = {eta:.6f}")

skills = np.array([0.95, 0.9, 0.6, 0.55, 0.3])
print(f"exponents for skills {skills}: bayes {bayes_exponent(skills):.4f}, mv {mv_exponent(skills):.4f}")

l0 = np.array([0.7, 0.6, 0.5, 0.8])
l1 = np.array([0.75, 0.55, 0.6, 0.8])
bound, gap, holds = small_crowd_bound_population(l0, l1, eta)
print(f"MV gap {gap:.4f} <= bound {bound:.4f}: {holds}")
print("pmf of votes for 1, group 0:", np.round(poisson_binomial_pmf(l0), 4))

rows = verification_checks(seed=0, n_tasks=2000, n_random=50)
print(f"\n{sum(r['holds'] for r in rows)}/{len(rows)} checks hold")
