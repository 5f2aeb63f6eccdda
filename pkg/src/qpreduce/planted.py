"""Seeded generators of reducible cocycles with known certificates.

A planted cocycle is ``X^t = P(theta + t w) expm(t C) P(theta)^{-1}`` where
``P`` is a product of elementary factors whose inverses are again
trigonometric polynomials, and ``C`` is a real block-diagonal matrix built
from recipe tokens. The matching complex certificate Jordanizes ``C`` and
then applies per-block complex scalars and torus characters, so the
reduction pipeline has real work to do.

Recipe tokens (sizes in parentheses):

``real`` (1) real eigenvalue; ``real2`` (2) real Jordan block; ``zero`` (1);
``rot`` (2) rotation at a 2*pi-lattice frequency; ``half`` (2) / ``half2`` (4)
rotation at an odd pi-lattice frequency; ``nonres`` (2) / ``nonres2`` (4)
rotation at a generic frequency; ``hyper`` (2) diag(a, -a); ``nilp`` (2)
nilpotent; ``imag`` (1) purely imaginary eigenvalue (unitary only).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import block_diag, expm
from scipy.stats import ortho_group, unitary_group

from .cocycle import Certificate, CocycleEvaluator
from .groups import symplectic_J
from .torus import EvaluationGrid, FrequencyVector, TorusMap, hstack

TOKEN_SIZE = {"real": 1, "real2": 2, "zero": 1, "rot": 2, "half": 2, "half2": 4,
              "nonres": 2, "nonres2": 4, "hyper": 2, "nilp": 2, "imag": 1}
GROUPS = ("GL_R", "SL_R", "Sp_R", "O_n", "U_n")


class RecipeError(ValueError):
    """The requested group, dimension and tokens are incompatible."""


@dataclass
class PlantedInstance:
    """A cocycle together with its ground truth."""

    cocycle: CocycleEvaluator
    certificate: Certificate
    real_frame: TorusMap
    C: np.ndarray
    frame_inverse: TorusMap
    recipe: tuple
    group: str
    has_half: bool


def random_omega(rng: np.random.Generator, d: int) -> FrequencyVector:
    """Frequencies bounded away from rationals of small denominator."""
    while True:
        w = rng.uniform(0.2, 0.9, size=d)
        q = np.arange(1, 51)
        dist = np.abs(w[:, None] * q - np.round(w[:, None] * q)) / q
        if dist.min() > 1e-3 and (d == 1 or abs(w[0] - w[-1]) > 0.05):
            return FrequencyVector(w)


def _scalar_poly(rng, d: int, degree: int = 1, scale: float = 0.4) -> TorusMap:
    """Real scalar trigonometric polynomial with zero mean."""
    coeffs = {}
    rng_k = range(-degree, degree + 1)
    for k in np.array(np.meshgrid(*([list(rng_k)] * d), indexing="ij")).reshape(d, -1).T:
        if np.any(k) and tuple(k) > tuple(-k):
            c = scale * (rng.normal() + 1j * rng.normal()) / 2
            coeffs[tuple(int(x) for x in k)] = np.array([[c]])
            coeffs[tuple(int(-x) for x in k)] = np.array([[np.conj(c)]])
    if not coeffs:
        return TorusMap.zeros((1, 1), d)
    return TorusMap.from_dict(coeffs, d, real=True)


def _frequency_index(rng, d: int, max_abs: int = 1) -> np.ndarray:
    while True:
        k = rng.integers(-max_abs, max_abs + 1, size=d)
        if np.any(k):
            return k


def _embed(small: TorusMap, n: int, idx: Sequence[int]) -> TorusMap:
    """Identity outside ``idx``, ``small`` on the coordinates ``idx``."""
    ks, cs = small.ks, small.cs
    big = np.zeros((ks.shape[0], n, n), dtype=complex)
    ix = np.ix_(range(ks.shape[0]), idx, idx)
    big[ix] = cs
    zero = np.nonzero(~ks.any(axis=1))[0]
    rest = [i for i in range(n) if i not in idx]
    if zero.size:
        big[zero[0], rest, rest] = 1.0
        return TorusMap(ks, big, small.period, shape=(n, n), real=small.real)
    extra = np.zeros((1, n, n))
    extra[0, rest, rest] = 1.0
    return TorusMap(np.concatenate([ks, np.zeros((1, small.d), dtype=np.int64)]),
                    np.concatenate([big, extra]), small.period, shape=(n, n), real=small.real)


def rotation_map(k, d: int, scale: float = 2 * np.pi) -> TorusMap:
    """theta -> R(scale*<k, theta>) for integer multiples of 2*pi (period one)."""
    k = np.asarray(k, dtype=np.int64)
    f = int(round(scale / (2 * np.pi)))
    if not np.isclose(f * 2 * np.pi, scale):
        raise ValueError("scale must be an integer multiple of 2*pi")
    e = f * k
    plus = np.array([[0.5, 0.5j], [-0.5j, 0.5]])
    minus = np.conj(plus)
    return TorusMap(np.stack([e, -e]), np.stack([plus, minus]), 1, real=True)


def shear(n, i, j, p: TorusMap) -> tuple[TorusMap, TorusMap]:
    """I + p E_ij and its inverse I - p E_ij (i != j)."""
    E = np.zeros((n, n))
    E[i, j] = 1.0
    I = TorusMap.identity(n, p.d)
    step = _outer(p, E)
    return I + step, I - step


def _product(factors):
    P, Pinv = factors[0]
    for f, finv in factors[1:]:
        P = P.multiply(f)
        Pinv = finv.multiply(Pinv)
    return P, Pinv


def random_frame(rng, n: int, d: int, group: str) -> tuple[TorusMap, TorusMap]:
    """Real frame of degree at most one in each factor, with exact inverse."""
    factors = []
    if group in ("GL_R", "SL_R"):
        if n > 1:
            i, j = rng.choice(n, size=2, replace=False)
            if rng.uniform() < 0.5:
                factors.append(shear(n, int(i), int(j), _scalar_poly(rng, d)))
            else:
                i, j = sorted((int(i), int(j)))
                k = _frequency_index(rng, d)
                factors.append((_embed(rotation_map(k, d), n, [i, j]),
                                _embed(rotation_map(-k, d), n, [i, j])))
        M = rng.normal(size=(n, n)) + 2 * np.eye(n)
        factors.append((TorusMap.constant(M, d), TorusMap.constant(np.linalg.inv(M), d)))
    elif group == "O_n":
        if n > 1:
            i, j = sorted(rng.choice(n, size=2, replace=False))
            k = _frequency_index(rng, d)
            factors.append((_embed(rotation_map(k, d), n, [i, j]),
                            _embed(rotation_map(-k, d), n, [i, j])))
        Q = ortho_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
        factors.append((TorusMap.constant(Q, d), TorusMap.constant(Q.T, d)))
    elif group == "Sp_R":
        h = n // 2
        if rng.uniform() < 0.5:
            S = _sym_poly(rng, h, d)
            upper = bool(rng.uniform() < 0.5)
            factors.append((_block_map(S, h, upper), _block_map(S.scale(-1.0), h, upper)))
        else:
            q = int(rng.integers(h))
            k = _frequency_index(rng, d)
            factors.append((_embed(rotation_map(k, d), n, [q, q + h]),
                            _embed(rotation_map(-k, d), n, [q, q + h])))
        Msp = _random_symplectic(rng, n)
        factors.append((TorusMap.constant(Msp, d), TorusMap.constant(np.linalg.inv(Msp), d)))
    else:
        raise RecipeError(f"no real frame generator for group {group!r}")
    return _product(factors)


def _sym_poly(rng, h: int, d: int) -> TorusMap:
    out = TorusMap.zeros((h, h), d)
    for a in range(h):
        for b in range(a, h):
            p = _scalar_poly(rng, d, scale=0.3)
            E = np.zeros((h, h))
            E[a, b] = E[b, a] = 1.0
            out = out + _outer(p, E)
    return out


def _outer(p: TorusMap, E: np.ndarray) -> TorusMap:
    return TorusMap(p.ks, p.cs[:, 0, 0][:, None, None] * E[None], p.period, shape=E.shape,
                    real=p.real)


def _block_map(S: TorusMap, h: int, upper: bool) -> TorusMap:
    """[[I, S], [0, I]] (upper) or [[I, 0], [S, I]]."""
    n = 2 * h
    cs = np.zeros((S.nterms, n, n), dtype=complex)
    if upper:
        cs[:, :h, h:] = S.cs
    else:
        cs[:, h:, :h] = S.cs
    off = TorusMap(S.ks, cs, S.period, shape=(n, n), real=S.real)
    return TorusMap.identity(n, S.d) + off


def _random_symplectic(rng, n: int) -> np.ndarray:
    J = symplectic_J(n).astype(float)
    H = rng.normal(size=(n, n)) * 0.3
    H = H + H.T
    return expm(J @ H)


def omega_dot(k, omega) -> float:
    return float(np.dot(k, np.asarray(omega)))


def _rotation_generator(a: float, b: float) -> np.ndarray:
    return np.array([[a, -b], [b, a]])


def _token_block(token: str, rng, omega, group: str):
    """Real block of C plus its complex Jordan data ``[(S_cols, lam, rank)]``.

    ``S_cols`` are columns (in block coordinates) of a Jordan chain.
    """
    d = len(omega)
    alpha = 0.0 if group in ("SL_R", "Sp_R", "O_n", "U_n") else float(rng.uniform(-0.4, 0.4))
    vp = np.array([1.0, -1j])
    if token == "zero":
        return np.zeros((1, 1)), [(np.ones((1, 1)), 0.0, 1)], False
    if token == "real":
        a = float(rng.uniform(-0.5, 0.5)) if group == "GL_R" else 0.0
        return np.array([[a]]), [(np.ones((1, 1)), a, 1)], False
    if token == "real2":
        C = np.array([[alpha, 1.0], [0.0, alpha]])
        return C, [(np.eye(2), alpha, 2)], False
    if token == "nilp":
        C = np.array([[0.0, 1.0], [0.0, 0.0]])
        return C, [(np.eye(2), 0.0, 2)], False
    if token == "hyper":
        a = float(rng.uniform(0.1, 0.5))
        return np.diag([a, -a]), [(np.eye(2)[:, [0]], a, 1), (np.eye(2)[:, [1]], -a, 1)], False
    if token in ("rot", "half", "half2", "nonres", "nonres2"):
        if token == "rot":
            beta = 2 * np.pi * omega_dot(_frequency_index(rng, d), omega)
        elif token.startswith("half"):
            k = _frequency_index(rng, d)
            if not np.any(k % 2):
                k[0] += 1
            beta = np.pi * omega_dot(k, omega)
        else:
            beta = float(rng.uniform(0.3, 1.2))
        R = _rotation_generator(alpha, beta)
        if token.endswith("2"):
            C = np.block([[R, np.eye(2)], [np.zeros((2, 2)), R]])
            chain = np.zeros((4, 2), dtype=complex)
            chain[:2, 0] = vp
            chain[2:, 1] = vp
            return C, [(chain, alpha + 1j * beta, 2), (np.conj(chain), alpha - 1j * beta, 2)], \
                token.startswith("half")
        return R, [(vp[:, None], alpha + 1j * beta, 1),
                   (np.conj(vp)[:, None], alpha - 1j * beta, 1)], token == "half"
    raise RecipeError(f"unknown recipe token {token!r}")


def _check_recipe(group: str, n: int, recipe: Sequence[str]):
    size = sum(TOKEN_SIZE.get(t, 0) for t in recipe)
    unknown = [t for t in recipe if t not in TOKEN_SIZE]
    if unknown:
        raise RecipeError(f"unknown recipe tokens {unknown}")
    if size != n:
        raise RecipeError(f"recipe occupies {size} dimensions, expected n={n}")
    if group == "Sp_R" and n % 2:
        raise RecipeError("Sp needs an even dimension")
    if group == "U_n" and any(t != "imag" for t in recipe):
        raise RecipeError("unitary recipes use only the 'imag' token")
    if group != "U_n" and "imag" in recipe:
        raise RecipeError("'imag' is only valid for U(n)")
    if group == "O_n" and any(t not in ("zero", "rot", "half", "nonres") for t in recipe):
        raise RecipeError("orthogonal recipes use zero, rot, half and nonres only")
    if group == "SL_R" and any(t == "real" for t in recipe):
        raise RecipeError("use 'zero' or 'hyper' for real eigenvalues in SL")
    if group == "Sp_R" and any(TOKEN_SIZE[t] != 2 for t in recipe):
        raise RecipeError("symplectic recipes use one 2-dimensional token per plane")


def _sp_layout(recipe, h):
    """Coordinates of the p-th canonical plane: (q_p, p_p) = (p, p + h)."""
    return [[p, p + h] for p in range(len(recipe))]


def generate(group: str, n: int, d: int, recipe: Sequence[str], seed: int = 0,
             char_shift: int = 1) -> PlantedInstance:
    """Planted cocycle and complex certificate for ``group`` with the given recipe."""
    if group not in GROUPS:
        raise RecipeError(f"unknown group {group!r}")
    recipe = tuple(recipe)
    _check_recipe(group, n, recipe)
    rng = np.random.default_rng(seed)
    omega = random_omega(rng, d)
    if group == "U_n":
        return _generate_unitary(rng, n, d, omega, recipe, char_shift)

    C = np.zeros((n, n))
    S = np.zeros((n, n), dtype=complex)
    lams, ranks = [], []
    has_half = False
    if group == "Sp_R":
        planes = _sp_layout(recipe, n // 2)
        col = 0
        for token, idx in zip(recipe, planes):
            Cb, jordan, half = _token_block(token, rng, omega, group)
            has_half |= half
            C[np.ix_(idx, idx)] = Cb
            for cols, lam, r in jordan:
                S[np.ix_(idx, range(col, col + r))] = cols
                lams.append(lam)
                ranks.append(r)
                col += r
    else:
        pos = col = 0
        for token in recipe:
            Cb, jordan, half = _token_block(token, rng, omega, group)
            has_half |= half
            sz = Cb.shape[0]
            C[pos:pos + sz, pos:pos + sz] = Cb
            for cols, lam, r in jordan:
                S[pos:pos + sz, col:col + r] = cols
                lams.append(lam)
                ranks.append(r)
                col += r
            pos += sz

    P, Pinv = random_frame(rng, n, d, group)
    cocycle = CocycleEvaluator.conjugated(P, C, omega)

    # complex certificate: per-block scalar and character
    cols, Bdiag = [], []
    start = 0
    F0 = P @ S
    for lam, r in zip(lams, ranks):
        block = F0.columns(list(range(start, start + r)))
        c = complex(rng.normal(), rng.normal())
        c = c / abs(c) * rng.uniform(0.5, 2.0)
        m = rng.integers(-char_shift, char_shift + 1, size=d) if char_shift else np.zeros(d, int)
        block = block.scale(c).character_multiply(m)
        cols.append(block)
        Bdiag.append(lam + 2j * np.pi * omega_dot(m, omega))
        start += r
    frame = hstack(cols)
    Jb = [Bdiag[i] * np.eye(r) + np.eye(r, k=1) for i, r in enumerate(ranks)]
    B = block_diag(*Jb)
    cert = Certificate(frame, B, 1, "GL_C", omega=omega)
    return PlantedInstance(cocycle, cert, P, C, Pinv, recipe, group, has_half)


def _generate_unitary(rng, n, d, omega, recipe, char_shift) -> PlantedInstance:
    U0 = unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1, dtype=complex)
    ks = np.array([_frequency_index(rng, d) if j % 2 == 0 else np.zeros(d, dtype=np.int64)
                   for j in range(n)])
    units = np.zeros((n, n, n), dtype=complex)
    units[np.arange(n), np.arange(n), np.arange(n)] = 1.0
    Dm = TorusMap(ks, units, 1, shape=(n, n))
    P = Dm @ U0
    Pinv = U0.conj().T @ Dm.adjoint()
    betas = rng.uniform(0.3, 1.5, size=n)
    betas = np.sort(betas + 0.37 * np.arange(n))
    C = np.diag(1j * betas)
    cocycle = CocycleEvaluator.conjugated(P, C, omega)
    cols, Bd = [], []
    for j in range(n):
        c = complex(rng.normal(), rng.normal())
        c /= abs(c)
        m = rng.integers(-char_shift, char_shift + 1, size=d) if char_shift else np.zeros(d, int)
        cols.append(P.columns([j]).scale(c).character_multiply(m))
        Bd.append(1j * betas[j] + 2j * np.pi * omega_dot(m, omega))
    cert = Certificate(hstack(cols), np.diag(Bd), 1, "GL_C", omega=omega)
    return PlantedInstance(cocycle, cert, P, C, Pinv, tuple(recipe), "U_n", False)


def planted_discrete(seed: int, n: int = 2, d: int = 1, amplitude: float = 0.25,
                     generator_scale: float = 0.6):
    """Discrete cocycle X1 = P(. + w) expm(C) P^{-1} with exact certificate (P, expm(C)).

    The shear amplitude and the size of ``C`` are kept small so that X1 has
    a continuous principal logarithm.
    """
    from .suspension import _branch_offenders
    rng = np.random.default_rng(seed)
    omega = random_omega(rng, d)
    H = rng.normal(size=(n, n)) * generator_scale / np.sqrt(n)
    M = expm(H)
    shears = []
    for _ in range(1 if n > 1 else 0):
        i, j = rng.choice(n, size=2, replace=False)
        shears.append(shear(n, int(i), int(j), _scalar_poly(rng, d, scale=amplitude)))
    rotations = []
    if n > 1 and rng.uniform() < 0.5:
        k = _frequency_index(rng, d)
        rotations.append((_embed(rotation_map(k, d), n, [0, 1]),
                          _embed(rotation_map(-k, d), n, [0, 1])))
    probe = EvaluationGrid(16, 1, d).points()
    for factors in (shears + rotations, shears):
        if not factors:
            factors = [(TorusMap.identity(n, d), TorusMap.identity(n, d))]
        P, Pinv = _product(factors)
        X1 = P.translate(omega.omega).multiply(Pinv.__rmatmul__(M))
        # a rotation that turns X1 close to -1 has no continuous logarithm
        if not _branch_offenders(X1.evaluate_many(probe), probe, 0.3):
            break
    cert = Certificate(P, M, 1, "GL_R", discrete=True, omega=omega)
    from .suspension import DiscreteCocycle
    return DiscreteCocycle(X1, omega), cert, H
