"""Post_TD: label massaging that only looks at hard predictions."""

import numpy as np

from .dataset import GroupAssignment


def post_td(pred, g, epsilon: float, seed: int = 0) -> np.ndarray:
    """Flip hard labels until the demographic parity gap is at most ``epsilon``.

    Positives of the favored group (higher positive rate) are demoted and
    negatives of the other group promoted, alternating and starting with a
    demotion, until the favored-minus-other gap drops to ``epsilon`` or
    below. Which items get flipped is uniformly random under ``seed``. When
    one side has nothing left to flip the remaining flips use the other.
    """
    pred = np.asarray(pred).astype(np.int8)
    group = (g.group if isinstance(g, GroupAssignment) else np.asarray(g)).astype(np.int64)
    sizes = np.bincount(group, minlength=2)
    if sizes[0] == 0 or sizes[1] == 0:
        raise ValueError("both groups must be non-empty")
    ones = np.bincount(group, weights=pred, minlength=2)
    fav = int(ones[1] / sizes[1] > ones[0] / sizes[0])
    other = 1 - fav
    out = pred.copy()

    rng = np.random.default_rng(seed)
    demote = rng.permutation(np.flatnonzero((group == fav) & (pred == 1)))
    promote = rng.permutation(np.flatnonzero((group == other) & (pred == 0)))
    n_dem = n_pro = 0
    c_fav, c_oth = ones[fav], ones[other]
    tol = 1e-12
    turn_demote = True
    while c_fav / sizes[fav] - c_oth / sizes[other] > epsilon + tol:
        can_dem, can_pro = n_dem < demote.size, n_pro < promote.size
        if not (can_dem or can_pro):
            break
        if (turn_demote and can_dem) or not can_pro:
            out[demote[n_dem]] = 0
            n_dem += 1
            c_fav -= 1
        else:
            out[promote[n_pro]] = 1
            n_pro += 1
            c_oth += 1
        turn_demote = not turn_demote
    return out
