"""Derivative-free 1-D minimization helpers."""

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-8, max_iter=500):
    """Minimize a unimodal ``f`` on ``[lo, hi]`` until the bracket is below ``tol``.

    Returns ``(x, f(x))`` for the best point evaluated, endpoints included.
    """
    a, b = float(lo), float(hi)
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    best = min(((x1, f1), (x2, f2), (lo, f(lo)), (hi, f(hi))), key=lambda p: p[1])
    return best
