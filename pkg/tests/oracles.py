"""Independent reference computations used to freeze expected values."""
import itertools
from fractions import Fraction
from math import pi

import numpy as np


def brute_force_resonance(beta, v, K, tol, scale=2 * pi):
    """All k in the box with |beta - scale*<k, v>| <= tol, best first.

    Order: residual, then |k|_inf, then lexicographic k.
    """
    hits = []
    for k in itertools.product(range(-K, K + 1), repeat=len(v)):
        val = scale * sum(ki * vi for ki, vi in zip(k, v))
        r = abs(beta - val)
        if r <= tol:
            hits.append((r, max(abs(x) for x in k), k))
    hits.sort()
    return [h[2] for h in hits]


def cofactor_det(M):
    """Exact determinant by Laplace expansion along the first row."""
    M = [[int(x) for x in row] for row in M]
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    total = 0
    for j in range(n):
        if M[0][j] == 0:
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        total += (-1) ** j * M[0][j] * cofactor_det(minor)
    return total


def far_from_rationals(rng, d, max_den=50, margin=1e-3, low=0.1, high=1.9):
    """Frequencies whose entries and pairwise ratios avoid p/q with q <= max_den."""
    fracs = sorted({Fraction(p, q) for q in range(1, max_den + 1) for p in range(0, 2 * q + 1)})
    fl = np.array([float(f) for f in fracs])
    while True:
        w = rng.uniform(low, high, size=d)
        ok = all(np.abs(fl - x).min() > margin for x in w)
        ok = ok and all(np.abs(fl - w[i] / w[j]).min() > margin
                        for i in range(d) for j in range(d) if i != j and w[i] < w[j])
        if ok:
            return w
