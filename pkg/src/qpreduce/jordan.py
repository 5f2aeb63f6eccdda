"""Jordan bases over the torus and the complex-to-real reduction pipeline.

A Jordan basis of exponent ``lam`` is an ordered family of column maps
``z_1..z_k`` with

    X^t(theta) z_j(theta) = e^{t lam} sum_{i<=j} t^{j-i}/(j-i)! z_i(theta + t w)

equivalently ``X^t M = M(. + t w) expm(t J)`` for the stacked columns ``M``
and the Jordan block ``J`` of size ``k``. For discrete cocycles ``t`` is an
integer and ``lam`` is a logarithm of the multiplier eigenvalue.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import block_diag, expm

from .cocycle import Certificate, CocycleEvaluator, clean_matrix
from .resonance import (HALF_RESONANT, NON_RESONANT, REAL_CLASS, ExponentClass, SearchBox,
                        classify_exponent, detect_resonance)
from .torus import (EvaluationGrid, FrequencyVector, TorusMap, as_frequency, common_period,
                    grid_points, hstack)
from .verify import default_times, jordan_relation_defect, residual_conjugation

SINGULAR_DET = 1e-10
INDEPENDENCE_SV = 1e-8
EXPONENT_SNAP = 1e-9


class JordanFormError(ValueError):
    """B is not in Jordan normal form."""


class SingularFrameError(ValueError):
    """The frame is not invertible at some grid point."""


class RealifyError(ValueError):
    """Both the real and imaginary first vectors vanish."""


class MergeError(ValueError):
    """Block merging met inconsistent input."""


class PairingError(ValueError):
    """A non-self-conjugate subbundle has no conjugate partner."""


class ConjugationError(ValueError):
    """An assembled certificate failed verification."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class JordanBlockSpec:
    exponent: complex
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")

    def matrix(self) -> np.ndarray:
        return jordan_block(self.exponent, self.rank)


def jordan_block(lam: complex, k: int) -> np.ndarray:
    return clean_matrix(lam * np.eye(k, dtype=complex) + np.eye(k, k=1))


@dataclass(frozen=True)
class JordanBasis:
    """Columns ``z_1..z_k`` stored as one ``n x k`` map."""

    columns: TorusMap
    exponent: complex
    modulus: int
    indices: tuple = ()

    def __post_init__(self):
        if self.columns.period != self.modulus:
            raise ValueError("column period must equal the modulus")

    @property
    def rank(self) -> int:
        return self.columns.cols

    @property
    def n(self) -> int:
        return self.columns.rows

    def column(self, j: int) -> TorusMap:
        """0-based column ``z_{j+1}``."""
        return self.columns.columns([j])

    def spec(self) -> JordanBlockSpec:
        return JordanBlockSpec(self.exponent, self.rank)

    def generator(self) -> np.ndarray:
        return jordan_block(self.exponent, self.rank)

    def lifted(self, factor: int) -> "JordanBasis":
        if factor == 1:
            return self
        return JordanBasis(self.columns.lift_period(factor), self.exponent,
                           self.modulus * factor, self.indices)


def default_grid(modulus: int, d: int, points: int = 8) -> EvaluationGrid:
    return EvaluationGrid(points, modulus, d)


def _grid_max(tmap: TorusMap, pts: np.ndarray) -> float:
    return float(np.abs(tmap.evaluate_many(pts)).max())


# -- Jordan structure of B ---------------------------------------------------

def jordan_structure(B, tol: float = EXPONENT_SNAP) -> list[tuple[int, int, complex]]:
    """Split a Jordan matrix into blocks ``(start, stop, eigenvalue)``."""
    B = np.asarray(B, dtype=complex)
    n = B.shape[0]
    if B.shape != (n, n):
        raise JordanFormError("B must be square")
    mask = np.ones((n, n), dtype=bool)
    np.fill_diagonal(mask, False)
    mask[np.arange(n - 1), np.arange(1, n)] = False
    if n and np.abs(B[mask]).max(initial=0.0) > tol:
        raise JordanFormError("entries outside the diagonal and superdiagonal")
    blocks, start = [], 0
    for i in range(n - 1):
        s = B[i, i + 1]
        if abs(s) <= tol:
            blocks.append((start, i + 1, B[start, start]))
            start = i + 1
        elif abs(s - 1) <= tol:
            if abs(B[i, i] - B[i + 1, i + 1]) > tol:
                raise JordanFormError(f"unequal diagonal inside a block at index {i}")
        else:
            raise JordanFormError(f"superdiagonal entry {s} is neither 0 nor 1")
    if n:
        blocks.append((start, n, B[start, start]))
    return blocks


def check_frame_invertible(F: TorusMap, grid=None, min_det: float = SINGULAR_DET) -> float:
    grid = grid if grid is not None else default_grid(F.period, F.d)
    dets = np.abs(np.linalg.det(F.evaluate_many(grid_points(grid, F.d))))
    worst = float(dets.min())
    if worst < min_det:
        raise SingularFrameError(f"frame determinant {worst:.3e} below {min_det:.1e} on grid")
    return worst


def extract_jordan_bases(F: TorusMap, B, grid=None, tol: float = EXPONENT_SNAP,
                         cocycle: Optional[CocycleEvaluator] = None,
                         verify_tol: float = 1e-8) -> list[JordanBasis]:
    """One basis per Jordan block of ``B``, taken from the matching columns of ``F``.

    When ``cocycle`` is given each basis is checked against its defining
    relations.
    """
    check_frame_invertible(F, grid)
    out = []
    for start, stop, lam in jordan_structure(B, tol):
        idx = tuple(range(start, stop))
        basis = JordanBasis(F.columns(list(idx)), complex(lam), F.period, idx)
        if cocycle is not None:
            g = grid if grid is not None else default_grid(F.period, F.d)
            r = verify_jordan_basis(basis, cocycle, g, default_times(cocycle.is_discrete))
            if r > verify_tol:
                raise ConjugationError(f"block {idx} fails its Jordan relations ({r:.3e})", r)
        out.append(basis)
    return out


def verify_jordan_basis(basis: JordanBasis, cocycle: CocycleEvaluator, grid=None,
                        times: Optional[Sequence[float]] = None) -> float:
    grid = grid if grid is not None else default_grid(basis.modulus, basis.columns.d)
    times = times if times is not None else default_times(cocycle.is_discrete)
    return jordan_relation_defect(cocycle, basis.columns, basis.exponent, grid, times)


# -- exponent shifts and realification ---------------------------------------

def shift_exponent(basis: JordanBasis, m, omega, discrete: bool = False) -> JordanBasis:
    """Multiply every column by exp(-2*pi*i*<theta/N, m>).

    The exponent gains 2*pi*i*<m, omega/N>. For discrete cocycles ``m`` may
    carry one extra integer entry that only adds 2*pi*i*m_last to the
    exponent (the multiplier is unchanged).
    """
    w = as_frequency(omega).omega
    m = np.atleast_1d(np.asarray(m, dtype=np.int64))
    d = w.size
    extra = 0
    if discrete and m.size == d + 1:
        extra = int(m[-1])
        m = m[:d]
    if m.size != d:
        raise ValueError("shift dimension mismatch")
    N = basis.modulus
    gain = 2 * np.pi * (float(m @ w) / N + extra)
    cols = basis.columns.character_multiply(m) if m.any() else basis.columns
    return JordanBasis(cols, basis.exponent + 1j * gain, N, basis.indices)


def with_exponent(basis: JordanBasis, exponent: complex) -> JordanBasis:
    return replace(basis, exponent=complex(exponent))


def realify_block(basis: JordanBasis, tol: float = 1e-9, grid=None, discrete: bool = False):
    """Split a basis with real exponent into real and imaginary parts.

    Returns ``(U, V, l, m)`` where ``U = (Re z_l..Re z_k)``, ``V = (Im z_m..Im z_k)``
    and ``l``, ``m`` are the 1-based first indices whose part is nonzero on
    the grid. An empty part is returned as ``None`` with index ``k + 1``.
    For discrete cocycles an imaginary exponent part equal to pi is allowed,
    since the multiplier is then still real.
    """
    lam = complex(basis.exponent)
    beta = lam.imag
    if discrete:
        allowed = abs(beta) <= tol or abs(abs(beta) - np.pi) <= tol
    else:
        allowed = abs(beta) <= tol
    if not allowed:
        raise RealifyError(f"exponent {lam} is not real; shift it first")
    if discrete:
        beta = np.pi if abs(abs(beta) - np.pi) <= tol else 0.0
    else:
        beta = 0.0
    lam = complex(lam.real, beta)
    pts = grid_points(grid if grid is not None else default_grid(basis.modulus, basis.columns.d),
                      basis.columns.d)
    k = basis.rank
    re = basis.columns.real_part()
    im = basis.columns.imag_part()
    scale = max(_grid_max(basis.columns, pts), 1.0)

    def first_nonzero(part):
        vals = np.abs(part.evaluate_many(pts)).max(axis=(0, 1))
        nz = np.nonzero(vals > tol * scale)[0]
        return int(nz[0]) if nz.size else k

    l0, m0 = first_nonzero(re), first_nonzero(im)
    if l0 > 0 and m0 > 0:
        raise RealifyError("both real and imaginary first vectors vanish")
    U = None if l0 == k else JordanBasis(re.columns(list(range(l0, k))), lam, basis.modulus,
                                         basis.indices[l0:] if basis.indices else ())
    V = None if m0 == k else JordanBasis(im.columns(list(range(m0, k))), lam, basis.modulus,
                                         basis.indices[m0:] if basis.indices else ())
    return U, V, l0 + 1, m0 + 1


# -- merging real blocks -----------------------------------------------------

def _first_vectors(blocks: Sequence[JordanBasis]) -> TorusMap:
    return hstack([b.column(0) for b in blocks])


def _solve_first(u: JordanBasis, blocks: Sequence[JordanBasis], pts: np.ndarray, tol: float):
    """Least-squares coefficients of u_1 on the first vectors at theta = 0.

    Returns ``None`` when u_1 is independent of them; otherwise the
    coefficient vector after checking it on every grid point.
    """
    W1 = _first_vectors(blocks)
    d = u.columns.d
    zero = np.zeros((1, d))
    A0 = W1.evaluate_many(zero)[0]
    b0 = u.column(0).evaluate_many(zero)[0][:, 0]
    scale = max(np.abs(b0).max(), np.abs(A0).max(initial=0.0), 1.0)
    lam, *_ = np.linalg.lstsq(A0, b0, rcond=None)
    r0 = float(np.abs(A0 @ lam - b0).max())
    Ag = W1.evaluate_many(pts)
    bg = u.column(0).evaluate_many(pts)[:, :, 0]
    if r0 > tol * scale:
        # independent at theta = 0; an invariant intersection must be empty everywhere
        stacked = np.concatenate([Ag, bg[:, :, None]], axis=2)
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[:, -1].min() <= INDEPENDENCE_SV * scale:
            raise MergeError("first vector is independent at theta=0 but not on the grid")
        return None
    rg = float(np.abs(np.einsum("pij,j->pi", Ag, lam) - bg).max())
    if rg > tol * scale * 10:
        raise MergeError(f"coefficients vary over the grid (defect {rg:.3e}); input is inconsistent")
    return lam


def _merge_long(u: JordanBasis, blocks: list[JordanBasis], pts, tol) -> list[JordanBasis]:
    """Merge ``u`` into blocks that are all at least as long as ``u``."""
    while u is not None:
        if not blocks:
            return [u]
        lam = _solve_first(u, blocks, pts, tol)
        if lam is None:
            return blocks + [u]
        if u.rank == 1:
            return blocks
        # u'_j = u_{j+1} - sum_i lam_i w^i_{j+1}
        shifted = u.columns.columns(list(range(1, u.rank)))
        for coef, w in zip(lam, blocks):
            if coef != 0:
                shifted = shifted - w.columns.columns(list(range(1, u.rank))).scale(coef)
        u = JordanBasis(shifted, u.exponent, u.modulus)
    return blocks


def merge_real_blocks(u_block: JordanBasis, w_blocks: Sequence[JordanBasis], tol: float = 1e-8,
                      grid=None) -> list[JordanBasis]:
    """Add a Jordan basis to a direct sum of Jordan bases with the same exponent.

    Blocks at least as long as ``u_block`` absorb it first; every shorter
    block is then merged back into the result, so the output is again a
    direct sum spanning the union.
    """
    w_blocks = list(w_blocks)
    for w in w_blocks:
        if w.modulus != u_block.modulus:
            raise MergeError("blocks live on different covering tori")
        if abs(w.exponent - u_block.exponent) > EXPONENT_SNAP:
            raise MergeError("blocks have different exponents")
    pts = grid_points(grid if grid is not None else default_grid(u_block.modulus, u_block.columns.d),
                      u_block.columns.d)
    long_blocks = [w for w in w_blocks if w.rank >= u_block.rank]
    short_blocks = [w for w in w_blocks if w.rank < u_block.rank]
    result = _merge_long(u_block, long_blocks, pts, tol)
    for s in sorted(short_blocks, key=lambda b: -b.rank):
        result = merge_real_blocks(s, result, tol, grid)
    return result


# -- subbundle intersections ----------------------------------------------------

def _stack_columns(maps) -> TorusMap:
    cols = [m.columns if isinstance(m, JordanBasis) else m for m in maps]
    if not cols:
        raise ValueError("empty basis list")
    return hstack(common_period(cols))


def _rank(mats: np.ndarray, threshold: float) -> np.ndarray:
    sv = np.linalg.svd(mats, compute_uv=False)
    return (sv > threshold).sum(axis=-1)


def intersection_dims(bases_a, bases_b, grid, threshold: float = INDEPENDENCE_SV) -> np.ndarray:
    """dim(span a cap span b) at every grid point."""
    A = _stack_columns(bases_a)
    Bm = _stack_columns(bases_b)
    if A.rows != Bm.rows:
        raise ValueError("ambient dimension mismatch")
    pts = grid_points(grid, A.d)
    a, b = A.evaluate_many(pts), Bm.evaluate_many(pts)
    both = np.concatenate([a, b], axis=2)
    return _rank(a, threshold) + _rank(b, threshold) - _rank(both, threshold)


def subbundle_intersection_dim(bases_a, bases_b, grid,
                               threshold: float = INDEPENDENCE_SV) -> tuple[int, bool]:
    """Intersection dimension at the first grid point and whether it is constant."""
    dims = intersection_dims(bases_a, bases_b, grid, threshold)
    return int(dims[0]), bool(np.all(dims == dims[0]))


# -- exponent representatives -----------------------------------------------------

def select_representatives(betas: Sequence[float], v: np.ndarray, box: SearchBox,
                           ) -> list[tuple[float, tuple[int, ...]]]:
    """Lattice-shift each beta towards zero so that the chosen values stay apart.

    Candidates are tried in order of increasing |beta'|; a candidate is
    rejected when it collides (within tolerance) with the difference or the
    sum of an earlier choice. Returns ``(beta', m)`` with
    ``beta' = beta - 2*pi*<m, v>``.
    """
    ks = box.lattice(v.size)
    proj = 2 * np.pi * (ks @ v)
    chosen: list[tuple[float, tuple[int, ...]]] = []
    for beta in betas:
        cand = beta - proj
        order = np.lexsort([np.abs(ks).max(axis=1), np.abs(cand)])
        pick = None
        for i in order:
            b = float(cand[i])
            if all(abs(b - c) > box.tolerance and abs(b + c) > box.tolerance for c, _ in chosen):
                pick = (b, tuple(int(x) for x in ks[i]))
                break
        if pick is None:
            raise PairingError("no collision-free exponent representative in the box")
        chosen.append(pick)
    return chosen


# -- the reduction pipeline -------------------------------------------------------

@dataclass
class RealDecomposition:
    """Real reduced form: W on the doubled torus, W' on the base torus.

    For discrete cocycles ``A1`` and ``A2`` are multiplier blocks; otherwise
    they are generators.
    """

    W_basis: list
    A1: np.ndarray
    Wp_basis: list
    A2: np.ndarray
    classes: list
    modulus: int
    certificate: Certificate
    shifts: list = field(default_factory=list)
    discrete: bool = False

    @property
    def s(self) -> int:
        return int(self.A1.shape[0])

    @property
    def B(self) -> np.ndarray:
        return self.certificate.B


@dataclass(frozen=True)
class RealPairBasis:
    """Columns [Re z_1, Im z_1, ..., Re z_k, Im z_k] of a basis with non-real exponent.

    Their generator has 2x2 diagonal blocks [[a, b], [-b, a]] and identity
    blocks on the block superdiagonal, where ``exponent = a + i*b``.
    """

    columns: TorusMap
    exponent: complex
    modulus: int

    @property
    def rank(self) -> int:
        return self.columns.cols

    def generator(self) -> np.ndarray:
        return _real_pair_block(self.exponent, self.rank // 2)


@dataclass
class _Block:
    basis: JordanBasis
    cls: ExponentClass
    index: int


class _DisjointSets:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        a, b = self.find(i), self.find(j)
        if a != b:
            self.parent[max(a, b)] = min(a, b)


def discrete_to_generator_form(F: TorusMap, M, tol: float = EXPONENT_SNAP):
    """Rewrite a discrete certificate ``(F, multiplier M)`` in logarithmic Jordan form.

    Each block ``mu*I + N`` of the multiplier has the logarithm
    ``log(mu) I + L`` with ``L`` nilpotent; the chain
    ``[L^{k-1} e_k, ..., L e_k, e_k]`` turns ``L`` into a standard Jordan block.
    Returns the new frame and the generator Jordan matrix.
    """
    blocks = jordan_structure(M, tol)
    n = F.rows
    S = np.zeros((n, n), dtype=complex)
    G = np.zeros((n, n), dtype=complex)
    for start, stop, mu in blocks:
        k = stop - start
        if abs(mu) == 0:
            raise JordanFormError("multiplier is singular")
        Nil = np.eye(k, k=1) / mu
        L = np.zeros((k, k), dtype=complex)
        P = np.eye(k, dtype=complex)
        for j in range(1, k):
            P = P @ Nil
            L += ((-1) ** (j + 1)) * P / j
        e = np.zeros(k, dtype=complex)
        e[-1] = 1.0
        chain = [e]
        for _ in range(k - 1):
            chain.append(L @ chain[-1])
        S[start:stop, start:stop] = np.stack(chain[::-1], axis=1)
        G[start:stop, start:stop] = jordan_block(np.log(complex(mu)), k)
    return F @ S, G


def _class_vector(omega: FrequencyVector, N: int) -> FrequencyVector:
    return FrequencyVector(omega.omega / N)


def _lattice_vector(omega: FrequencyVector, N: int, discrete: bool) -> np.ndarray:
    v = omega.omega / N
    return np.append(v, 1.0) if discrete else v


def _in_lattice(delta: float, omega: FrequencyVector, N: int, box: SearchBox, discrete: bool):
    v = _class_vector(omega, N)
    if discrete:
        v = v.extended()
    return detect_resonance(delta, v, 1, box)


def _snap_imag(lam: complex, discrete: bool, tol: float) -> complex:
    """Exactly real exponent (or real plus i*pi for discrete cocycles)."""
    b = lam.imag
    if abs(b) <= tol:
        return complex(lam.real, 0.0)
    if discrete:
        q = round(b / np.pi)
        if abs(b - q * np.pi) <= tol:
            return complex(lam.real, np.pi if q % 2 else 0.0)
    raise RealifyError(f"exponent {lam} did not become real after shifting")


def _make_real(blk: _Block, omega: FrequencyVector, discrete: bool, tol: float) -> JordanBasis:
    """Shift a self-conjugate block to real exponent, lifting when half resonant."""
    basis = blk.basis
    d = omega.dim
    k = np.asarray(blk.cls.witness.k, dtype=np.int64)
    kd = k[:d]
    if blk.cls.tag == REAL_CLASS:
        shifted = shift_exponent(basis, -kd, omega)
    elif discrete and not np.any(kd % 2):
        shifted = shift_exponent(basis, -(kd // 2), omega)
    else:
        shifted = shift_exponent(basis.lifted(2), -kd, omega)
    return with_exponent(shifted, _snap_imag(shifted.exponent, discrete, tol))


def _real_pair_block(lam: complex, k: int) -> np.ndarray:
    """Generator of [Re z_1, Im z_1, ..., Re z_k, Im z_k] for a rank-k basis."""
    a, b = lam.real, lam.imag
    R = np.array([[a, b], [-b, a]])
    G = np.zeros((2 * k, 2 * k))
    for j in range(k):
        G[2 * j:2 * j + 2, 2 * j:2 * j + 2] = R
        if j + 1 < k:
            G[2 * j:2 * j + 2, 2 * j + 2:2 * j + 4] = np.eye(2)
    return G


def _interleave_real(basis: JordanBasis) -> TorusMap:
    re, im = basis.columns.real_part(), basis.columns.imag_part()
    parts = []
    for j in range(basis.rank):
        parts += [re.columns([j]), im.columns([j])]
    return hstack(parts)


def decompose_real(cert: Certificate, omega=None, box: SearchBox = SearchBox(),
                   grid=None, times=None, cocycle: Optional[CocycleEvaluator] = None,
                   verify_tol: float = 1e-8, merge_tol: float = 1e-8) -> RealDecomposition:
    """Turn a complex reducing frame of a real cocycle into a real one.

    Exponents in the odd part of the pi lattice force the doubled torus;
    otherwise the real frame lives on the same torus as the input.

    Raises:
        AmbiguityError: an exponent classification is ambiguous in the box.
        PairingError: a non-self-conjugate subbundle has no conjugate partner.
        ConjugationError: the assembled real certificate fails verification.
    """
    w = as_frequency(omega if omega is not None else cert.omega)
    discrete = cert.discrete
    N = cert.modulus
    d = w.dim
    if cocycle is None:
        cocycle = CocycleEvaluator.from_certificate(cert, w)
    F, G = (discrete_to_generator_form(cert.frame, cert.B) if discrete
            else (cert.frame, np.asarray(cert.B, dtype=complex)))
    bases = extract_jordan_bases(F, G)
    v_class = _class_vector(w, N)
    blocks = [_Block(b, classify_exponent(b.exponent.imag, v_class, box, discrete), i)
              for i, b in enumerate(bases)]

    # subbundles with the same exponent modulo the lattice
    sets = _DisjointSets(len(blocks))
    for i, bi in enumerate(blocks):
        for j in range(i + 1, len(blocks)):
            bj = blocks[j]
            if abs(bi.basis.exponent.real - bj.basis.exponent.real) > EXPONENT_SNAP:
                continue
            if _in_lattice(bi.basis.exponent.imag - bj.basis.exponent.imag, w, N, box, discrete) is not None:
                sets.union(i, j)
    groups: dict[int, list[_Block]] = {}
    for i, b in enumerate(blocks):
        groups.setdefault(sets.find(i), []).append(b)
    group_list = [groups[r] for r in sorted(groups)]

    half_groups, real_groups, nonres_groups = [], [], []
    for g in group_list:
        tags = {b.cls.tag for b in g}
        if len(tags) != 1:
            raise PairingError("blocks of one subbundle fall into different exponent classes")
        tag = tags.pop()
        if tag == HALF_RESONANT and discrete and not any(
                (np.asarray(b.cls.witness.k[:d]) % 2).any() for b in g):
            # multiplier -e^alpha: real without leaving the base torus
            tag = REAL_CLASS
        {HALF_RESONANT: half_groups, REAL_CLASS: real_groups,
         NON_RESONANT: nonres_groups}[tag].append(g)

    def realify_group(g: list[_Block]) -> list[JordanBasis]:
        acc: list[JordanBasis] = []
        target = None
        for blk in sorted(g, key=lambda b: (-b.basis.rank, b.index)):
            real_basis = _make_real(blk, w, discrete, EXPONENT_SNAP)
            if target is None:
                target = real_basis.exponent
            real_basis = with_exponent(real_basis, target)
            U, V, _, _ = realify_block(real_basis, discrete=discrete)
            for part in (U, V):
                if part is not None:
                    acc = merge_real_blocks(part, acc, merge_tol)
        dim = sum(b.basis.rank for b in g)
        if sum(b.rank for b in acc) != dim:
            raise MergeError(f"merged rank {sum(b.rank for b in acc)} != subbundle dimension {dim}")
        return acc

    # non-self-conjugate subbundles come in conjugate pairs; keep one of each
    pair_reps = []
    used = set()
    for gi, g in enumerate(nonres_groups):
        if gi in used:
            continue
        lam = g[0].basis.exponent
        partner = None
        for gj, h in enumerate(nonres_groups):
            if gj == gi or gj in used:
                continue
            mu = h[0].basis.exponent
            if abs(lam.real - mu.real) <= EXPONENT_SNAP and \
                    _in_lattice(lam.imag + mu.imag, w, N, box, discrete) is not None:
                partner = gj
                break
        if partner is None:
            raise PairingError(f"no conjugate partner for exponent {lam}")
        h = nonres_groups[partner]
        dim_g = sum(b.basis.rank for b in g)
        dim_h = sum(b.basis.rank for b in h)
        if dim_g != dim_h:
            raise PairingError("conjugate subbundles have different dimensions")
        conj_first = hstack([b.basis.columns.conjugate() for b in g])
        span_h = hstack([b.basis.columns for b in h])
        pts = default_grid(N, d).points()
        dims = intersection_dims([conj_first], [span_h], pts)
        if np.any(dims != dim_g):
            raise PairingError("conjugated subbundle does not match its partner")
        used.update({gi, partner})
        pair_reps.append(g)

    v_shift = _lattice_vector(w, N, discrete)
    reps = select_representatives([g[0].basis.exponent.imag for g in pair_reps], v_shift, box)

    W_blocks = [b for g in half_groups for b in realify_group(g)]
    Wr_blocks = [b for g in real_groups for b in realify_group(g)]
    s = sum(b.rank for b in W_blocks)
    M = 2 * N if W_blocks else N

    def gen_matrix(blks):
        mats = [b.generator() for b in blks]
        return block_diag(*mats) if mats else np.zeros((0, 0))

    out_columns, shifts = [], []
    pair_gens, pair_columns, pair_exponents = [], [], []
    for g, (beta, m) in zip(pair_reps, reps):
        target = complex(g[0].basis.exponent.real, beta)
        for blk in g:
            b = blk.basis
            hit = _in_lattice(b.exponent.imag - beta, w, N, box, discrete)
            if hit is None:
                raise PairingError("block exponent does not reduce to the group representative")
            shifted = with_exponent(shift_exponent(b, [-x for x in hit.k], w, discrete), target)
            shifts.append((blk.index, hit.k))
            pair_columns.append(_interleave_real(shifted))
            pair_gens.append(_real_pair_block(target, b.rank))
            pair_exponents.append(target)

    W_cols = [b.columns.lift_period(M // b.modulus) for b in W_blocks]
    Wp_cols = [b.columns.lift_period(M // b.modulus) for b in Wr_blocks]
    Wp_cols += [c.lift_period(M // c.period) for c in pair_columns]
    frame = hstack(W_cols + Wp_cols)._force_real()

    A1_gen = gen_matrix(W_blocks)
    A2_gen = block_diag(*([b.generator() for b in Wr_blocks] + pair_gens)) \
        if (Wr_blocks or pair_gens) else np.zeros((0, 0))
    B_gen = block_diag(A1_gen, A2_gen) if A1_gen.size and A2_gen.size else (
        A1_gen if A1_gen.size else A2_gen)
    if discrete:
        B_out = expm(np.asarray(B_gen, dtype=complex))
        A1 = expm(np.asarray(A1_gen, dtype=complex)) if A1_gen.size else np.zeros((0, 0))
        A2 = expm(np.asarray(A2_gen, dtype=complex)) if A2_gen.size else np.zeros((0, 0))
        B_out, A1, A2 = (np.real_if_close(x, tol=1e6).real for x in (B_out, A1, A2))
    else:
        B_out, A1, A2 = (np.asarray(x).real for x in (B_gen, A1_gen, A2_gen))

    grid = grid if grid is not None else default_grid(M, d)
    times = times if times is not None else default_times(discrete)
    out = Certificate(frame, B_out, M, "GL_R", discrete=discrete, omega=w,
                      grid_spec=grid if isinstance(grid, EvaluationGrid) else None,
                      time_samples=tuple(times))
    rep = residual_conjugation(cocycle, out, grid, times)
    out = out.with_(residual=rep.max_residual)
    if rep.max_residual > verify_tol:
        raise ConjugationError(
            f"real certificate residual {rep.max_residual:.3e} exceeds {verify_tol:.1e}",
            rep.max_residual)
    W_out = [b.lifted(M // b.modulus) for b in W_blocks]
    Wp_out: list = [b.lifted(M // b.modulus) for b in Wr_blocks]
    Wp_out += [RealPairBasis(c.lift_period(M // c.period)._force_real(), lam, M)
               for c, lam in zip(pair_columns, pair_exponents)]
    return RealDecomposition(W_out, A1, Wp_out, A2, [b.cls for b in blocks], M, out,
                             shifts, discrete)
