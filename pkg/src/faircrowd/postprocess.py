"""FairCrowd: optimal epsilon-fair randomized post-processing under
demographic parity.

The optimal classifier thresholds the posterior per group at
``tau_a = (pi_a + s_a * beta) / (2 pi_a)`` (``s_a = 2a - 1``) and randomizes
with weight ``omega_a`` on the threshold set. ``beta`` minimizes
``M(beta) = L(beta) + epsilon |beta|`` where

    L(beta) = sum_a mean_{i in a} max_k (pi_a Phi_k(i) - beta/2 * s_a * s_k).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .aggregate import PosteriorTable
from .dataset import GroupAssignment
from .optim import golden_section

SIGN = np.array([-1.0, 1.0])  # s_a = 2a - 1


@dataclass(frozen=True)
class FairCrowdConfig:
    epsilon: float = 0.05
    softmax_c: float = 1e-4
    delta: float = 1e-5
    alpha: float = 0.04
    beta_bound: float = 2.0
    omega_grid: int = 101
    # "exact" solves the signed-gap equation in closed form; "grid" is the
    # plain lattice search over omega_grid x omega_grid.
    omega_method: str = "exact"
    # Snap the smoothed minimizer to the exact breakpoint of the unsmoothed M.
    exact_beta: bool = True
    # Skip the tail spreading entirely (alpha is then ignored).
    preprocess: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.softmax_c <= 0:
            raise ValueError("softmax_c must be > 0")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.beta_bound <= 0 or self.omega_grid < 2:
            raise ValueError("beta_bound must be > 0 and omega_grid >= 2")
        if self.omega_method not in ("exact", "grid"):
            raise ValueError("omega_method must be 'exact' or 'grid'")


@dataclass(frozen=True)
class RandomizedClassifier:
    beta_star: float
    tau: np.ndarray
    omega: np.ndarray
    delta: float
    pi_hat: np.ndarray
    alpha: Optional[float] = None
    residual: float = 0.0
    beta_smooth: float = float("nan")

    def __post_init__(self):
        for name in ("tau", "omega", "pi_hat"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any((self.omega < 0) | (self.omega > 1)):
            raise ValueError("omega must lie in [0, 1]")

    def predict_proba(self, phi1, group) -> np.ndarray:
        """Probability of predicting 1 for already-preprocessed posteriors."""
        group = np.asarray(group, dtype=np.int64)
        above, boundary = _split(np.asarray(phi1, dtype=float), group, self.tau, self.delta)
        return np.where(boundary, self.omega[group], above.astype(float))


def _split(phi1, group, tau, delta):
    """Items strictly decided as 1, and items on the randomization set.

    The randomization set is ``|phi1 - tau_a| < delta``; everything else is
    predicted 1 iff ``phi1 >= tau_a`` (so delta = 0 reproduces the >= rule).
    """
    diff = phi1 - tau[group]
    boundary = np.abs(diff) < delta
    above = ~boundary & (diff >= 0)
    return above, boundary


def _weights(n, weights):
    return np.ones(n) if weights is None else np.asarray(weights, dtype=float)


def _group_mass(group, w):
    mass = np.bincount(group, weights=w, minlength=2)
    if mass[0] <= 0 or mass[1] <= 0:
        raise ValueError("both groups must be non-empty")
    return mass


def estimate_pi_hat(g, weights=None) -> np.ndarray:
    """pi_hat_a = N_a / (N_0 + N_1), or the weighted analogue."""
    group = _group_array(g)
    mass = _group_mass(group, _weights(group.size, weights))
    return mass / mass.sum()


def _group_array(g):
    return (g.group if isinstance(g, GroupAssignment) else np.asarray(g)).astype(np.int64)


def _phi(p):
    return p.phi1 if isinstance(p, PosteriorTable) else np.asarray(p, dtype=float)


# --------------------------------------------------------------------------
# Step 0: tail spreading
# --------------------------------------------------------------------------


def preprocess_posteriors(p, alpha: Optional[float] = 0.04) -> PosteriorTable:
    """Spread posteriors in the upper tail ``[1 - alpha, 1]`` uniformly.

    The k-th smallest tail value (ties kept in input order) becomes
    ``k / |tail|``; values below ``1 - alpha`` are left alone.
    ``alpha=None`` returns the posteriors unchanged.
    """
    phi1 = _phi(p)
    out = phi1.copy()
    in_tail = np.flatnonzero(phi1 >= 1.0 - alpha) if alpha is not None else np.array([], dtype=np.int64)
    if in_tail.size:
        order = in_tail[np.argsort(phi1[in_tail], kind="stable")]
        out[order] = np.arange(1, order.size + 1) / order.size
    source = p.source if isinstance(p, PosteriorTable) else "MV"
    return PosteriorTable(out, source)


# --------------------------------------------------------------------------
# Step 1: the dual objective
# --------------------------------------------------------------------------


def _soft_max_pair(v0, v1, c):
    """Softmax-weighted average of two values, stable in ``c -> 0``.

    With ``d = |v1 - v0|`` it equals ``max - d * sigmoid(-d / c)``;
    ``c = 0`` gives the hard max.
    """
    mx = np.maximum(v0, v1)
    if c == 0:
        return mx
    d = np.abs(v1 - v0)
    return mx - d * expit(-d / c)


def L_hat(beta, p, g, pi_hat, c: float = 1e-4, weights=None):
    """Smoothed plug-in estimate of L at ``beta`` (scalar or 1-d array).

    ``c = 0`` evaluates the exact (hard max) objective.
    """
    phi1 = _phi(p)
    group = _group_array(g)
    w = _weights(phi1.size, weights)
    mass = _group_mass(group, w)
    pi_hat = np.asarray(pi_hat, dtype=float)
    # per-item weight 1/N_a makes the double sum a sum of group means
    item_w = w / mass[group]
    s = SIGN[group]
    base1 = pi_hat[group] * phi1
    base0 = pi_hat[group] * (1.0 - phi1)

    betas = np.atleast_1d(np.asarray(beta, dtype=float))
    out = np.empty(betas.size)
    chunk = max(1, 2_000_000 // max(phi1.size, 1))
    for start in range(0, betas.size, chunk):
        b = betas[start:start + chunk, None] * 0.5 * s
        vals = _soft_max_pair(base0 + b, base1 - b, c)
        out[start:start + chunk] = vals @ item_w
    return out if np.ndim(beta) else float(out[0])


def M_hat(beta, p, g, pi_hat, epsilon, c=1e-4, weights=None):
    return L_hat(beta, p, g, pi_hat, c, weights) + epsilon * np.abs(beta)


def _pick(betas, values, tie_tol=1e-12):
    """Minimum of ``values``; among near-ties prefer the smallest ``|beta|``."""
    betas = np.asarray(betas)
    values = np.asarray(values)
    best = values.min()
    near = np.flatnonzero(values <= best + tie_tol)
    i = near[np.argmin(np.abs(betas[near]))]
    return float(betas[i]), float(values[i])


def _scan(M, lo, hi, n, n_brackets=3):
    """Evaluate ``M`` on ``n`` points of ``[lo, hi]`` and golden-refine the
    brackets of the ``n_brackets`` lowest local minima."""
    grid = np.linspace(lo, hi, n)
    vals = M(grid)
    interior = np.r_[True, vals[1:] <= vals[:-1]] & np.r_[vals[:-1] <= vals[1:], True]
    minima = np.flatnonzero(interior)
    minima = minima[np.argsort(vals[minima], kind="stable")[:n_brackets]]
    xs, fs = [grid], [vals]
    for i in minima:
        x, f = golden_section(M, grid[max(i - 1, 0)], grid[min(i + 1, n - 1)], tol=1e-8)
        xs.append([x])
        fs.append([f])
    return np.concatenate(xs), np.concatenate(fs)


def minimize_M(p, g, pi_hat, cfg: FairCrowdConfig, weights=None) -> float:
    """Global minimizer of the smoothed objective over ``[-B, B]``.

    A 401-point grid locates the best brackets and golden-section search
    refines them to width 1e-8. Within about ``c`` of each kink the
    smoothed objective has two shallow dips, so the search is repeated on
    windows of half-width ``50c`` and ``5c`` around the incumbent.
    Near-ties resolve toward the smallest ``|beta|`` and a minimum
    indistinguishable from ``M(0)`` returns 0.
    """
    B, eps, c = cfg.beta_bound, cfg.epsilon, cfg.softmax_c

    def M(b):
        return M_hat(b, p, g, pi_hat, eps, c, weights)

    step = 2.0 * B / 400
    xs, fs = _scan(M, -B, B, 401)
    beta, fbest = _pick(xs, fs)
    for half, n in ((50 * c, 401), (5 * c, 1001)):
        if half >= step:
            continue
        x2, f2 = _scan(M, max(beta - half, -B), min(beta + half, B), n)
        beta, fbest = _pick(np.append(x2, beta), np.append(f2, fbest))
    if abs(fbest - M(0.0)) < 1e-10:
        beta = 0.0
    if abs(beta) >= B - step:
        warnings.warn(f"beta* = {beta:.4g} sits at the search bound {B}; increase beta_bound", stacklevel=2)
    return beta


def breakpoints(p, g, pi_hat) -> np.ndarray:
    """Values of beta at which some item lies exactly on its group threshold."""
    phi1 = _phi(p)
    group = _group_array(g)
    pi_hat = np.asarray(pi_hat, dtype=float)
    return SIGN[group] * pi_hat[group] * (2.0 * phi1 - 1.0)


def exact_minimizer(p, g, pi_hat, epsilon, weights=None, bound=2.0) -> float:
    """Minimizer of the unsmoothed (piecewise-linear, convex) M.

    The minimum of a convex piecewise-linear function is attained at a
    kink, so only the item breakpoints and 0 need checking.
    """
    cand = np.unique(np.append(breakpoints(p, g, pi_hat), 0.0))
    cand = cand[np.abs(cand) <= bound]
    vals = M_hat(cand, p, g, pi_hat, epsilon, 0.0, weights)
    beta, fbest = _pick(cand, vals)
    f0 = M_hat(0.0, p, g, pi_hat, epsilon, 0.0, weights)
    if abs(fbest - f0) < 1e-10:
        beta = 0.0
    return beta


# --------------------------------------------------------------------------
# Step 2: randomization weights
# --------------------------------------------------------------------------


def thresholds(beta, pi_hat) -> np.ndarray:
    pi_hat = np.asarray(pi_hat, dtype=float)
    return (pi_hat + SIGN * beta) / (2.0 * pi_hat)


def _gap_terms(beta, p, g, pi_hat, delta, weights):
    phi1 = _phi(p)
    group = _group_array(g)
    w = _weights(phi1.size, weights)
    mass = _group_mass(group, w)
    above, boundary = _split(phi1, group, thresholds(beta, pi_hat), delta)
    base = np.bincount(group, weights=w * above, minlength=2) / mass
    edge = np.bincount(group, weights=w * boundary, minlength=2) / mass
    return base, edge


def signed_gap(omega, base, edge) -> float:
    """P(pred=1 | A=1) - P(pred=1 | A=0) for given randomization weights."""
    r = base + np.asarray(omega) * edge
    return float(r[1] - r[0])


def _exact_omega(target, base, edge):
    """Minimal-norm omega with signed gap as close to ``target`` as possible."""
    d = target - (base[1] - base[0])
    omega = np.zeros(2)
    if d > 0 and edge[1] > 0:
        omega[1] = min(d / edge[1], 1.0)
    elif d < 0 and edge[0] > 0:
        omega[0] = min(-d / edge[0], 1.0)
    return omega


def _grid_omega(dist, base, edge, n):
    axis = np.linspace(0.0, 1.0, n)
    w0, w1 = np.meshgrid(axis, axis, indexing="ij")
    gaps = (base[1] + w1 * edge[1]) - (base[0] + w0 * edge[0])
    err = dist(gaps)
    ok = err <= err.min() + 1.0 / n
    norm = np.where(ok, w0 + w1, np.inf)
    i, j = np.unravel_index(np.argmin(norm), norm.shape)
    return np.array([axis[i], axis[j]])


def solve_omega(beta_star, p, g, pi_hat, cfg: FairCrowdConfig, weights=None):
    """Randomization weights on the threshold sets.

    For ``beta* != 0`` the signed gap must equal ``epsilon * sign(beta*)``;
    for ``beta* = 0`` any gap in ``[-epsilon, epsilon]`` will do and
    ``(1/2, 1/2)`` is kept when feasible. When discrete posterior mass makes
    the target unreachable the closest achievable gap is used.

    Returns ``(omega0, omega1, residual)`` where ``residual`` is the signed
    distance of the achieved gap from the admissible set.
    """
    eps = cfg.epsilon
    base, edge = _gap_terms(beta_star, p, g, pi_hat, cfg.delta, weights)
    half = np.array([0.5, 0.5])

    if beta_star != 0:
        target = eps * np.sign(beta_star)

        def dist(gap):
            return np.abs(gap - target)

        def resid(gap):
            return gap - target
    else:
        if abs(signed_gap(half, base, edge)) <= eps:
            return 0.5, 0.5, 0.0

        def dist(gap):
            return np.maximum(np.abs(gap) - eps, 0.0)

        def resid(gap):
            return np.sign(gap) * max(abs(gap) - eps, 0.0)

        g0 = base[1] - base[0]
        target = float(np.clip(g0, -eps, eps))

    if cfg.omega_method == "grid":
        omega = _grid_omega(dist, base, edge, cfg.omega_grid)
    else:
        omega = _exact_omega(target, base, edge)
    return float(omega[0]), float(omega[1]), float(resid(signed_gap(omega, base, edge)))


# --------------------------------------------------------------------------
# Full pipeline
# --------------------------------------------------------------------------


def fairify(p, g, cfg: FairCrowdConfig = FairCrowdConfig(), weights=None) -> RandomizedClassifier:
    """Turn posterior estimates into the optimal epsilon-fair randomized classifier.

    Steps: tail preprocessing, minimization of the smoothed dual objective
    (optionally snapped to the exact breakpoint), then the randomization
    weights. ``weights`` lets each row stand for a population cell.
    """
    group = _group_array(g)
    if isinstance(g, GroupAssignment):
        g.require_both_groups()
    alpha = cfg.alpha if cfg.preprocess else None
    pp = preprocess_posteriors(p, alpha)
    pi_hat = estimate_pi_hat(group, weights)
    beta_smooth = minimize_M(pp, group, pi_hat, cfg, weights)
    if cfg.exact_beta:
        beta = exact_minimizer(pp, group, pi_hat, cfg.epsilon, weights, cfg.beta_bound)
    else:
        beta = beta_smooth
    w0, w1, residual = solve_omega(beta, pp, group, pi_hat, cfg, weights)
    delta = cfg.delta
    if beta == 0.0 and abs(signed_gap((0.0, 0.0), *_gap_terms(0.0, pp, group, pi_hat, 0.0, weights))) <= cfg.epsilon:
        # the constraint is slack for the plug-in rule itself: keep it
        # deterministic, so posteriors within delta of 1/2 are not randomized
        delta = 0.0
    return RandomizedClassifier(
        beta_star=beta,
        tau=thresholds(beta, pi_hat),
        omega=(w0, w1),
        delta=delta,
        pi_hat=pi_hat,
        alpha=alpha,
        residual=residual,
        beta_smooth=beta_smooth,
    )


def apply(rc: RandomizedClassifier, p, g, seed: int = 0):
    """Per-task probability of predicting 1 and a seeded Bernoulli draw.

    ``p`` is the raw posterior table; the classifier's tail preprocessing is
    re-applied to it.
    """
    group = _group_array(g)
    pp = preprocess_posteriors(p, rc.alpha)
    q = rc.predict_proba(pp.phi1, group)
    labels = (np.random.default_rng(seed).random(q.size) < q).astype(np.int8)
    return q, labels


def expected_risk(q, truth_prob, weights=None) -> float:
    """0-1 risk of a randomized classifier against P(Y=1 | cell)."""
    q = np.asarray(q, dtype=float)
    t = np.asarray(truth_prob, dtype=float)
    w = _weights(q.size, weights)
    return float(np.sum(w * (q * (1.0 - t) + (1.0 - q) * t)) / w.sum())
