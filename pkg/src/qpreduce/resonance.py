"""Integer-lattice arithmetic for exponents.

Resonance questions are answered inside a finite box |k|_inf <= K with an
absolute tolerance. Every answer stores that box, because a miss only means
"no hit in this box".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .torus import as_frequency


class AmbiguityError(ValueError):
    """Lattice points of two different classes both match within tolerance."""


@dataclass(frozen=True)
class SearchBox:
    K: int = 10
    tolerance: float = 1e-9

    def __post_init__(self):
        if int(self.K) < 1:
            raise ValueError("search bound K must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def lattice(self, d: int) -> np.ndarray:
        """All integer vectors with |k|_inf <= K, shape (m, d)."""
        rng = np.arange(-self.K, self.K + 1, dtype=np.int64)
        mesh = np.meshgrid(*([rng] * d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_dict(self) -> dict:
        return {"K": int(self.K), "tolerance": float(self.tolerance)}


@dataclass(frozen=True)
class ResonanceHit:
    k: tuple[int, ...]
    value: float
    residual: float

    def to_dict(self) -> dict:
        return {"k": list(self.k), "value": self.value, "residual": self.residual}


REAL_CLASS = "RealClass"
HALF_RESONANT = "HalfResonant"
NON_RESONANT = "NonResonant"


@dataclass(frozen=True)
class ExponentClass:
    tag: str
    witness: Optional[ResonanceHit]
    box: SearchBox = field(default_factory=SearchBox)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "box": self.box.to_dict(),
        }


def _best(ks: np.ndarray, values: np.ndarray, beta: float, tol: float) -> Optional[ResonanceHit]:
    """Smallest residual, then smallest |k|_inf, then lexicographic k."""
    res = np.abs(beta - values)
    ok = np.nonzero(res <= tol)[0]
    if ok.size == 0:
        return None
    sub = ks[ok]
    keys = [sub[:, i] for i in range(sub.shape[1] - 1, -1, -1)]
    keys += [np.abs(sub).max(axis=1), res[ok]]
    i = ok[np.lexsort(keys)[0]]
    return ResonanceHit(tuple(int(x) for x in ks[i]), float(values[i]), float(res[i]))


def _search(beta: float, v: np.ndarray, box: SearchBox, scale: float) -> Optional[ResonanceHit]:
    ks = box.lattice(v.size)
    return _best(ks, scale * (ks @ v), float(beta), box.tolerance)


def detect_resonance(beta: float, omega, N: int, box: SearchBox) -> Optional[ResonanceHit]:
    """Find k with beta = 2*pi*<k, omega/N> inside the box, if any."""
    if int(N) < 1:
        raise ValueError("N must be a positive integer")
    w = as_frequency(omega).omega
    return _search(beta, w / N, box, 2 * np.pi)


def detect_resonance_discrete(beta: float, omega, N: int, box: SearchBox) -> Optional[ResonanceHit]:
    """As :func:`detect_resonance` with the extended vector (omega, 1)."""
    if int(N) < 1:
        raise ValueError("N must be a positive integer")
    w = as_frequency(omega).extended().omega
    return _search(beta, w / N, box, 2 * np.pi)


def classify_exponent(beta: float, omega, box: SearchBox, discrete: bool = False) -> ExponentClass:
    """Place beta in the 2*pi lattice, the odd part of the pi lattice, or neither.

    The half-resonant witness is the k of the pi lattice, so that
    beta = pi*<k, omega> with at least one odd entry of k.
    """
    w = as_frequency(omega)
    v = w.extended().omega if discrete else w.omega
    ks = box.lattice(v.size)
    proj = ks @ v
    real_hit = _best(ks, 2 * np.pi * proj, float(beta), box.tolerance)
    odd = np.any(ks % 2 != 0, axis=1)
    half_hit = _best(ks[odd], np.pi * proj[odd], float(beta), box.tolerance)
    if real_hit is not None and half_hit is not None:
        raise AmbiguityError(
            f"beta={beta!r} matches 2pi-lattice point {real_hit.k} and odd pi-lattice point "
            f"{half_hit.k} within {box.tolerance}; tolerance too large or omega near-rational")
    if real_hit is not None:
        return ExponentClass(REAL_CLASS, real_hit, box)
    if half_hit is not None:
        return ExponentClass(HALF_RESONANT, half_hit, box)
    return ExponentClass(NON_RESONANT, None, box)


def normalize_exponent(alpha_beta: complex, omega, N: int, box: SearchBox,
                       discrete: bool = False) -> tuple[complex, tuple[int, ...]]:
    """Shift the imaginary part by the lattice point that minimizes its size.

    Returns ``(alpha + i*beta', m)`` with ``beta' = beta - 2*pi*<m, v/N>`` where
    ``v`` is omega, or (omega, 1) when ``discrete``. A result within tolerance
    of zero is snapped to exactly zero.
    """
    w = as_frequency(omega)
    v = (w.extended().omega if discrete else w.omega) / N
    lam = complex(alpha_beta)
    ks = box.lattice(v.size)
    shifted = lam.imag - 2 * np.pi * (ks @ v)
    mag = np.abs(shifted)
    keys = [ks[:, i] for i in range(ks.shape[1] - 1, -1, -1)]
    keys += [np.abs(ks).max(axis=1), mag]
    i = np.lexsort(keys)[0]
    # keep m = 0 when it ties the minimum, so minimal inputs come back unchanged
    zero = int(np.nonzero(~ks.any(axis=1))[0][0])
    if mag[zero] <= mag[i]:
        i = zero
    beta_new = float(shifted[i])
    if abs(beta_new) <= box.tolerance:
        beta_new = 0.0
    return complex(lam.real, beta_new), tuple(int(x) for x in ks[i])


# -- exact integer linear algebra -----------------------------------------

def integer_det(M: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    a = [[int(x) for x in row] for row in M]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def unimodular_complete(v: Sequence[int], dim: int | None = None) -> list[list[int]]:
    """Integer matrix with first row ``v`` and determinant exactly +1.

    Euclidean column reduction takes ``v`` to ``e_1``; recording the inverse
    of every elementary operation gives a unimodular matrix whose first row
    is ``v``. A final row negation fixes the sign of the determinant.
    """
    vec = [int(x) for x in v]
    n = len(vec)
    if dim is not None and int(dim) != n:
        raise ValueError(f"vector has length {n}, expected {dim}")
    if n == 0 or all(x == 0 for x in vec):
        raise ValueError("zero vector has no unimodular completion")
    if reduce(math.gcd, (abs(x) for x in vec)) != 1:
        raise ValueError("vector is not primitive (gcd of entries != 1)")
    if n == 1:
        if vec[0] != 1:
            raise ValueError("in dimension 1 only v=(1) has a determinant-one completion")
        return [[1]]
    cur = vec[:]
    inv = [[int(i == j) for j in range(n)] for i in range(n)]
    while sum(1 for x in cur if x != 0) > 1:
        p = min((i for i in range(n) if cur[i] != 0), key=lambda i: (abs(cur[i]), i))
        for i in range(n):
            if i != p and cur[i] != 0:
                q = cur[i] // cur[p]
                cur[i] -= q * cur[p]
                inv[p] = [a + q * b for a, b in zip(inv[p], inv[i])]
    j = next(i for i in range(n) if cur[i] != 0)
    if j != 0:
        cur[0], cur[j] = cur[j], cur[0]
        inv[0], inv[j] = inv[j], inv[0]
    if cur[0] == -1:
        inv[0] = [-a for a in inv[0]]
    if integer_det(inv) == -1:
        inv[-1] = [-a for a in inv[-1]]
    if inv[0] != vec or integer_det(inv) != 1:
        raise RuntimeError("unimodular completion bookkeeping failed")
    return inv
