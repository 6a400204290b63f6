"""Numerical checks of the fairness-gap theory: error exponents, the
non-asymptotic DP bound, Poisson-binomial tails and the small-crowd bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .aggregate import ConfusionModel, bayes_posterior, harden, majority_vote
from .dataset import GroupAssignment, LabelMatrix, SyntheticConfig, generate_synthetic
from .metrics import annotator_dp_gaps, annotator_rates, dp_gap
from .optim import golden_section

T_MIN = 1e-6

# per-group uniform skill laws ((lo_0, hi_0), (lo_1, hi_1))
SCENARIOS = {
    "competent": ((0.5, 1.0), (0.6, 1.0)),
    "adversarial": ((0.2, 0.6), (0.1, 0.6)),
    "uninformative": ((0.49, 0.51), (0.49, 0.51)),
}


def _skills(inp) -> np.ndarray:
    return np.asarray(getattr(inp, "skills", inp), dtype=float).ravel()


@dataclass(frozen=True)
class ExponentInput:
    skills: np.ndarray


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    holds: bool
    std_error: float = 0.0
    aggregator: str = ""


# --------------------------------------------------------------------------
# error exponents
# --------------------------------------------------------------------------


def bayes_exponent(inp) -> float:
    """-(1/R) sum ln(2 sqrt(p (1-p))); a perfect or perfectly wrong
    annotator makes it ``inf``."""
    p = _skills(inp)
    if np.any((p == 0) | (p == 1)):
        return math.inf
    return float(-np.mean(np.log(2.0 * np.sqrt(p * (1.0 - p)))))


def mv_objective(t, p) -> float:
    return float(np.mean(np.log(p * t + (1.0 - p) / t)))


def mv_exponent(inp) -> float:
    """-min_{t in [1e-6, 1]} (1/R) sum ln(p t + (1-p)/t).

    The objective is convex in ``u = ln t`` (a log-sum-exp), so a
    200-point log-spaced scan followed by golden section in ``u`` finds
    the global minimum.
    """
    p = _skills(inp)

    def f(u):
        return mv_objective(math.exp(u), p)

    u_grid = np.linspace(math.log(T_MIN), 0.0, 200)
    vals = [f(u) for u in u_grid]
    i = int(np.argmin(vals))
    lo, hi = u_grid[max(i - 1, 0)], u_grid[min(i + 1, u_grid.size - 1)]
    _, best = golden_section(f, lo, hi, tol=1e-10)
    return float(-min(best, vals[i]))


def homogeneous_mv_optimum(p: float) -> float:
    """Minimizer ``sqrt((1-p)/p)`` of ln(p t + (1-p)/t), capped to [1e-6, 1]."""
    if p <= 0:
        return 1.0
    return float(min(max(math.sqrt((1.0 - p) / p), T_MIN), 1.0))


def _rhs_term(R, K):
    return 0.0 if math.isinf(K) else math.exp(-R * K)


def dp_bound_check(cfg: SyntheticConfig, aggregator: str = "mv") -> BoundReport:
    """Monte-Carlo check of |gap(aggregate) - gap(truth)| <= sum_a exp(-R K_a).

    Every annotator of the pool votes on every task. ``K_a`` is the
    exponent of the chosen aggregator computed from the drawn skills of
    group ``a``. Bayes uses the true skills and priors. The check passes
    when lhs <= rhs + 3 standard errors.
    """
    if cfg.votes_per_task != cfg.pool_size:
        cfg = replace(cfg, votes_per_task=cfg.pool_size)
    m, g, prof = generate_synthetic(cfg)
    R = cfg.pool_size
    if aggregator == "mv":
        pred = harden(majority_vote(m))
        exponent = mv_exponent
    elif aggregator == "bayes":
        skills = np.clip(prof.skills, 1e-12, 1 - 1e-12)
        cm = ConfusionModel.from_skills(skills, np.asarray(cfg.p_y1_given_a, dtype=float))
        pred = harden(bayes_posterior(m, g, cm))
        exponent = bayes_exponent
    else:
        raise ValueError(f"unknown aggregator {aggregator!r}")

    lhs = abs(dp_gap(pred, g).dp_gap - dp_gap(g.truth, g).dp_gap)
    rhs = sum(_rhs_term(R, exponent(prof.skills[:, a])) for a in (0, 1))
    diff = pred.astype(float) - g.truth
    se2 = 0.0
    for a in (0, 1):
        d = diff[g.group == a]
        se2 += d.var() / d.size
    se = math.sqrt(se2)
    return BoundReport(float(lhs), float(rhs), bool(lhs <= rhs + 3 * se), se, aggregator)


# --------------------------------------------------------------------------
# Poisson binomial and the uniform pmf bound
# --------------------------------------------------------------------------


def _log_series(lam, tol=1e-14):
    """log sum_k (lam^k / k!)^2, truncated once the tail is below ``tol``."""
    if lam <= 0:
        return 0.0
    # terms peak near k = lam and decay super-geometrically past it
    k_max = int(lam + 10.0 * math.sqrt(lam) + 40)
    k = np.arange(k_max + 1)
    logt = 2.0 * (k * math.log(lam) - gammaln(k + 1))
    total = logsumexp(logt)
    assert logt[-1] - total < math.log(tol)
    return float(total)


def baillon_h(lam: float) -> float:
    """sqrt(2 lam) exp(-2 lam) sum_k (lam^k/k!)^2."""
    if lam <= 0:
        return 0.0
    return math.sqrt(2.0 * lam) * math.exp(_log_series(lam) - 2.0 * lam)


def baillon_eta() -> float:
    """Universal constant eta with max_k P(S = k) <= eta / sd(S) for any
    Poisson-binomial sum S."""
    grid = np.linspace(1e-6, 10.0, 201)
    vals = [baillon_h(x) for x in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    _, neg = golden_section(lambda x: -baillon_h(x), lo, hi, tol=1e-10)
    return float(-neg)


def poisson_binomial_pmf(l) -> np.ndarray:
    """pmf of a sum of independent Bernoulli(l_i) over {0, ..., R}."""
    pmf = np.zeros(len(l) + 1)
    pmf[0] = 1.0
    for i, p in enumerate(np.asarray(l, dtype=float)):
        pmf[1:i + 2] = pmf[1:i + 2] * (1.0 - p) + pmf[:i + 1] * p
        pmf[0] *= 1.0 - p
    return pmf


def mv_tail(l) -> float:
    """P(sum > R/2) for independent Bernoulli(l_i)."""
    pmf = poisson_binomial_pmf(l)
    R = len(l)
    return float(pmf[R // 2 + 1:].sum())


def mv_tail_derivative(l, r: int) -> float:
    """d P(sum > R/2) / d l_r = P(sum without r == floor(R/2)); ``r`` is 0-based."""
    l = np.asarray(l, dtype=float)
    if not 0 <= r < l.size:
        raise IndexError(f"annotator index {r} out of range")
    pmf = poisson_binomial_pmf(np.delete(l, r))
    return float(pmf[l.size // 2])


def mv_positive_rate(l) -> float:
    """P(MV predicts 1) = P(sum >= R/2), ties going to 1."""
    pmf = poisson_binomial_pmf(l)
    R = len(l)
    return float(pmf[math.ceil(R / 2):].sum())


def leave_one_out_variance(l) -> float:
    """Smallest variance of the sum over R-1 of the R variables."""
    v = np.asarray(l, dtype=float)
    v = v * (1.0 - v)
    return float(v.sum() - v.max())


def small_crowd_bound_population(l0, l1, eta=None):
    """Exact MV gap and its upper bound from per-group vote rates.

    Returns ``(bound, gap, holds)``.
    """
    l0 = np.asarray(l0, dtype=float)
    l1 = np.asarray(l1, dtype=float)
    eta = baillon_eta() if eta is None else eta
    gap = abs(mv_positive_rate(l1) - mv_positive_rate(l0))
    total = float(np.abs(l1 - l0).sum())
    V = min(leave_one_out_variance(l0), leave_one_out_variance(l1))
    if total == 0:
        bound = 0.0
    elif V <= 0:
        bound = math.inf
    else:
        bound = eta / math.sqrt(V) * total
    return bound, gap, bool(gap <= bound + 1e-12)


def small_crowd_bound(m: LabelMatrix, g: GroupAssignment, eta=None):
    """Empirical version: rates and gaps are estimated from the votes.

    Returns ``(bound, observed_gap, holds)`` where ``observed_gap`` is the
    gap of hard majority-vote labels.
    """
    rates = annotator_rates(m, g)
    if np.any(np.isnan(rates)):
        raise ValueError("every annotator needs votes in both groups")
    eta = baillon_eta() if eta is None else eta
    total = float(np.nansum(annotator_dp_gaps(m, g)))
    V = min(leave_one_out_variance(rates[:, 0]), leave_one_out_variance(rates[:, 1]))
    if total == 0:
        bound = 0.0
    elif V <= 0:
        bound = math.inf
    else:
        bound = eta / math.sqrt(V) * total
    observed = dp_gap(harden(majority_vote(m)), g).dp_gap
    return bound, observed, bool(observed <= bound + 1e-12)


def divergence_condition_check(g1: int, g2: int, R: int, epsilon: float, epsilon_prime: float, C: float) -> bool:
    """Finite-R reading of the divergence condition for a crowd split into
    g1 competent, g2 weakly informative and R - g1 - g2 other annotators:
    (g1/R)(1 + 2 epsilon) + 2 C g2 / R > 1."""
    if g1 < 0 or g2 < 0 or g1 + g2 > R or R <= 0:
        raise ValueError("need 0 <= g1, g2 and g1 + g2 <= R")
    if not (0 < epsilon < 0.5 and 0 < epsilon_prime < 0.5):
        raise ValueError("margins must lie in (0, 1/2)")
    if not 0 <= C < 0.5:
        raise ValueError("C must lie in [0, 1/2)")
    return bool((g1 / R) * (1.0 + 2.0 * epsilon) + 2.0 * C * g2 / R > 1.0)


def two_cell_population():
    """Exact weighted population where a single annotator is biased only
    through a feature correlated with A.

    P(X=1|A=1) = 3/4, P(X=1|A=0) = 1/4, P(vote=1|X=0) = 0.2,
    P(vote=1|X=1) = 0.8, groups of equal mass. Returns
    ``(votes, group, weights)`` over the 8 (a, x, vote) cells; the vote
    gap is 0.65 - 0.35 = 0.3.
    """
    px1 = {0: 0.25, 1: 0.75}
    pv1 = {0: 0.2, 1: 0.8}
    votes, group, weights = [], [], []
    for a in (0, 1):
        for x in (0, 1):
            px = px1[a] if x else 1.0 - px1[a]
            for v in (0, 1):
                pv = pv1[x] if v else 1.0 - pv1[x]
                votes.append(v)
                group.append(a)
                weights.append(0.5 * px * pv)
    return np.array(votes), np.array(group), np.array(weights)


# --------------------------------------------------------------------------
# batch verification
# --------------------------------------------------------------------------


def _enumerated_pmf(l):
    R = len(l)
    pmf = np.zeros(R + 1)
    for bits in range(1 << R):
        x = np.array([(bits >> i) & 1 for i in range(R)])
        pmf[x.sum()] += np.prod(np.where(x == 1, l, 1.0 - l))
    return pmf


def verification_checks(seed: int = 0, n_tasks: int = 10_000, n_random: int = 200):
    """Run every numerical check; rows of ``(check_name, lhs, rhs, holds)``.

    Each row states a bound ``lhs <= rhs`` (or an equality within the
    tolerance folded into ``rhs``).
    """
    rng = np.random.default_rng(seed)
    rows = []

    def add(name, lhs, rhs, holds=None):
        rows.append({
            "check_name": name,
            "lhs": float(lhs),
            "rhs": float(rhs),
            "holds": bool(lhs <= rhs) if holds is None else bool(holds),
        })

    eta = baillon_eta()
    add("baillon_eta_near_0.4688", eta, 0.4688, abs(eta - 0.4688) <= 1e-4)

    votes, group, weights = two_cell_population()
    gap = dp_gap(votes, group, weights).dp_gap
    add("two_cell_population_gap_0.3", gap, 0.3, abs(gap - 0.3) <= 1e-12)

    err = 0.0
    for _ in range(n_random):
        l = rng.random(rng.integers(1, 11))
        err = max(err, float(np.max(np.abs(poisson_binomial_pmf(l) - _enumerated_pmf(l)))))
    add("poisson_binomial_vs_enumeration", err, 1e-12)

    err, h = 0.0, 1e-6
    for _ in range(n_random):
        l = rng.uniform(0.01, 0.99, rng.integers(2, 16))
        r = int(rng.integers(l.size))
        up, dn = l.copy(), l.copy()
        up[r] += h
        dn[r] -= h
        fd = (mv_tail(up) - mv_tail(dn)) / (2 * h)
        err = max(err, abs(fd - mv_tail_derivative(l, r)))
    add("tail_derivative_vs_finite_difference", err, 1e-6)

    excess = -math.inf
    for _ in range(n_random):
        R = int(rng.integers(3, 16))
        bound, gap, _ = small_crowd_bound_population(rng.random(R), rng.random(R), eta)
        excess = max(excess, gap - bound)
    add("small_crowd_bound_excess", excess, 0.0)

    worst = 0.0
    for _ in range(n_random):
        l = rng.random(rng.integers(1, 31))
        V = float(np.sum(l * (1 - l)))
        if V > 0:
            worst = max(worst, float(poisson_binomial_pmf(l).max() * math.sqrt(V)))
    add("pmf_max_times_sd_vs_eta", worst, eta)

    gap_exp = -math.inf
    for _ in range(n_random):
        p = rng.uniform(0.0, 1.0, rng.integers(1, 20))
        gap_exp = max(gap_exp, mv_exponent(p) - bayes_exponent(p))
    add("mv_exponent_below_bayes", gap_exp, 1e-9)

    diff = 0.0
    for p in np.linspace(0.5, 0.99, 25):
        diff = max(diff, abs(mv_exponent(np.full(7, p)) - bayes_exponent(np.full(7, p))))
    add("homogeneous_exponents_equal", diff, 1e-8)

    for k, (scen, law) in enumerate(SCENARIOS.items()):
        for R in (3, 10, 40):
            for agg in ("mv", "bayes"):
                cfg = SyntheticConfig(n_tasks, R, R, skill_law=law, seed=seed * 1000 + k * 100 + R)
                rep = dp_bound_check(cfg, agg)
                add(f"dp_bound_{scen}_R{R}_{agg}", rep.lhs, rep.rhs + 3 * rep.std_error, rep.holds)
    return rows
