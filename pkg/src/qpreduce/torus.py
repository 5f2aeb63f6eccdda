"""Matrix-valued trigonometric polynomials on the covering torus N*T^d.

A :class:`TorusMap` stores finitely many Fourier coefficients ``c(k)`` and
represents

    Z(theta) = sum_k c(k) * exp(2*pi*i*<k, theta/N>)

All algebra (products, translations, characters, derivatives) is carried out
exactly on the coefficients. Inverses are *not* coefficient-level operations;
they are formed pointwise by the callers.

The frequency vector is assumed rationally independent. That cannot be
checked on floating point input, so it is a documented precondition only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

STRUCTURAL_ZERO = 1e-12


class FrequencyVector:
    """Torus frequencies ``omega`` in R^d."""

    __slots__ = ("_omega",)

    def __init__(self, omega):
        w = np.atleast_1d(np.asarray(omega, dtype=float)).copy()
        if w.ndim != 1 or w.size == 0:
            raise ValueError("frequency vector must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)):
            raise ValueError("frequency vector has non-finite entries")
        if w.size == 1 and w[0] == 0.0:
            raise ValueError("zero frequency in dimension 1 gives degenerate dynamics")
        w.setflags(write=False)
        self._omega = w

    @property
    def omega(self) -> np.ndarray:
        return self._omega

    @property
    def dim(self) -> int:
        return self._omega.size

    def scaled(self, factor: float) -> "FrequencyVector":
        return FrequencyVector(self._omega * factor)

    def extended(self) -> "FrequencyVector":
        """The vector (omega, 1) used for discrete-time cocycles."""
        return FrequencyVector(np.append(self._omega, 1.0))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._omega, dtype=dtype)

    def __len__(self):
        return self.dim

    def __eq__(self, other):
        if not isinstance(other, FrequencyVector):
            return NotImplemented
        return np.array_equal(self._omega, other._omega)

    def __hash__(self):
        return hash(self._omega.tobytes())

    def __repr__(self):
        return f"FrequencyVector({self._omega.tolist()})"

    def tolist(self) -> list[float]:
        return self._omega.tolist()


def as_frequency(omega) -> FrequencyVector:
    return omega if isinstance(omega, FrequencyVector) else FrequencyVector(omega)


@dataclass(frozen=True)
class EvaluationGrid:
    """Uniform grid theta = N*(j_1, ..., j_d)/points_per_axis on N*T^d."""

    points_per_axis: int
    period: int = 1
    dimension: int = 1

    def __post_init__(self):
        if self.points_per_axis < 1 or self.period < 1 or self.dimension < 1:
            raise ValueError("grid sizes must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dimension

    def points(self) -> np.ndarray:
        axis = self.period * np.arange(self.points_per_axis) / self.points_per_axis
        mesh = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_dict(self) -> dict:
        return {
            "points_per_axis": self.points_per_axis,
            "period": self.period,
            "dimension": self.dimension,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvaluationGrid":
        return cls(int(data["points_per_axis"]), int(data["period"]), int(data["dimension"]))


def grid_points(grid, d: int | None = None) -> np.ndarray:
    """Accept an :class:`EvaluationGrid` or an explicit array of points."""
    if isinstance(grid, EvaluationGrid):
        return grid.points()
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if d in (None, 1) else pts[None, :]
    return pts


def _phase(ks: np.ndarray, theta: np.ndarray, period: int) -> np.ndarray:
    """exp(2*pi*i*<k, theta/N>) for theta of shape (P, d); returns (P, m).

    The argument is reduced modulo one before scaling by 2*pi so values at
    theta and theta + N*e_i agree to rounding of the reduction only.
    """
    theta = np.mod(theta, period)
    x = theta @ ks.T.astype(float) / period
    x -= np.round(x)
    return np.exp(2j * np.pi * x)


class TorusMap:
    """Finite Fourier series with complex ``rows x cols`` matrix coefficients.

    Instances are immutable. Coefficients are kept in lexicographic order of
    ``k`` with exact-zero matrices removed. A map flagged ``real`` satisfies
    ``c(-k) == conj(c(k))`` exactly and evaluates to real matrices.
    """

    __slots__ = ("_ks", "_cs", "_period", "_shape", "_real")
    # let ``ndarray @ TorusMap`` dispatch to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, ks, cs, period: int = 1, *, shape=None, real: bool | None = None):
        ks = np.asarray(ks, dtype=np.int64)
        cs = np.asarray(cs, dtype=complex)
        if ks.ndim != 2:
            raise ValueError("ks must have shape (m, d)")
        if cs.ndim != 3 or cs.shape[0] != ks.shape[0]:
            if cs.size == 0 and shape is not None:
                cs = np.zeros((0,) + tuple(shape), dtype=complex)
            else:
                raise ValueError("cs must have shape (m, rows, cols)")
        if shape is None:
            if cs.shape[0] == 0:
                raise ValueError("shape is required for an empty map")
            shape = cs.shape[1:]
        shape = tuple(int(s) for s in shape)
        if cs.shape[1:] != shape:
            raise ValueError("coefficient shape mismatch")
        if int(period) < 1:
            raise ValueError("period must be a positive integer")
        self._period = int(period)
        self._shape = shape
        ks, cs = _canonical(ks, cs)
        if real is None:
            real = _is_conjugate_symmetric(ks, cs)
        if real:
            ks, cs = _symmetrize(ks, cs)
        ks.setflags(write=False)
        cs.setflags(write=False)
        self._ks, self._cs, self._real = ks, cs, bool(real)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, coeffs: Mapping[Sequence[int], np.ndarray], d: int, period: int = 1,
                  shape=None, real=None) -> "TorusMap":
        keys = [tuple(int(x) for x in k) for k in coeffs]
        for k in keys:
            if len(k) != d:
                raise ValueError("index dimension mismatch")
        mats = [np.atleast_2d(np.asarray(v, dtype=complex)) for v in coeffs.values()]
        ks = np.array(keys, dtype=np.int64).reshape(len(keys), d)
        if mats:
            cs = np.stack(mats)
        else:
            cs = np.zeros((0,) + tuple(shape), dtype=complex)
        return cls(ks, cs, period, shape=shape, real=real)

    @classmethod
    def constant(cls, matrix, d: int, period: int = 1) -> "TorusMap":
        m = np.atleast_2d(np.asarray(matrix))
        return cls(np.zeros((1, d), dtype=np.int64), m[None].astype(complex), period,
                   shape=m.shape, real=not np.iscomplexobj(m) or bool(np.all(m.imag == 0)))

    @classmethod
    def identity(cls, n: int, d: int, period: int = 1) -> "TorusMap":
        return cls.constant(np.eye(n), d, period)

    @classmethod
    def zeros(cls, shape, d: int, period: int = 1) -> "TorusMap":
        return cls(np.zeros((0, d), dtype=np.int64), np.zeros((0,) + tuple(shape)), period,
                   shape=shape, real=True)

    @classmethod
    def character(cls, m, period: int = 1) -> "TorusMap":
        """Scalar map theta -> exp(2*pi*i*<m, theta/N>)."""
        m = np.atleast_1d(np.asarray(m, dtype=np.int64))
        return cls(m[None, :], np.ones((1, 1, 1)), period)

    # -- basic properties -------------------------------------------------
    @property
    def ks(self) -> np.ndarray:
        return self._ks

    @property
    def cs(self) -> np.ndarray:
        return self._cs

    @property
    def period(self) -> int:
        return self._period

    @property
    def shape(self) -> tuple[int, int]:
        return self._shape

    @property
    def rows(self) -> int:
        return self._shape[0]

    @property
    def cols(self) -> int:
        return self._shape[1]

    @property
    def d(self) -> int:
        return self._ks.shape[1]

    @property
    def real(self) -> bool:
        return self._real

    @property
    def degree(self) -> int:
        if self._ks.shape[0] == 0:
            return 0
        return int(np.abs(self._ks).max())

    @property
    def nterms(self) -> int:
        return self._ks.shape[0]

    def coeff(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64).reshape(-1)
        hit = np.nonzero(np.all(self._ks == k, axis=1))[0]
        if hit.size == 0:
            return np.zeros(self._shape, dtype=complex)
        return self._cs[hit[0]].copy()

    def items(self):
        for k, c in zip(self._ks, self._cs):
            yield tuple(int(x) for x in k), c

    def __repr__(self):
        return (f"TorusMap(shape={self._shape}, d={self.d}, period={self._period}, "
                f"terms={self.nterms}, degree={self.degree}, real={self._real})")

    # -- evaluation -------------------------------------------------------
    def evaluate_many(self, thetas) -> np.ndarray:
        """Values at an array of points of shape (P, d); returns (P, rows, cols)."""
        th = np.asarray(thetas, dtype=float)
        if th.ndim == 1:
            th = th[None, :] if th.size == self.d else th[:, None]
        if th.shape[-1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got {th.shape[-1]}")
        if self._ks.shape[0] == 0:
            out = np.zeros((th.shape[0],) + self._shape, dtype=complex)
        else:
            out = np.einsum("pm,mij->pij", _phase(self._ks, th, self._period), self._cs)
        return out.real if self._real else out

    def evaluate(self, theta) -> np.ndarray:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        if th.shape != (self.d,):
            raise ValueError(f"expected a point of dimension {self.d}, got shape {th.shape}")
        return self.evaluate_many(th[None, :])[0]

    __call__ = evaluate

    # -- algebra ----------------------------------------------------------
    def _new(self, ks, cs, period=None, shape=None, real=None) -> "TorusMap":
        return TorusMap(ks, cs, self._period if period is None else period,
                        shape=self._shape if shape is None else shape, real=real)

    def translate(self, v) -> "TorusMap":
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if v.shape != (self.d,):
            raise ValueError("translation dimension mismatch")
        ph = _phase(self._ks, v[None, :], self._period)[0]
        return self._new(self._ks, self._cs * ph[:, None, None], real=self._real)

    def multiply(self, other: "TorusMap") -> "TorusMap":
        if not isinstance(other, TorusMap):
            raise TypeError("multiply expects a TorusMap")
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self._shape} x {other.shape}")
        if self._period != other.period:
            raise ValueError("period mismatch; lift one map with lift_period first")
        if self.d != other.d:
            raise ValueError("torus dimension mismatch")
        shape = (self.rows, other.cols)
        if self.nterms == 0 or other.nterms == 0:
            return TorusMap.zeros(shape, self.d, self._period)
        ksum = (self._ks[:, None, :] + other.ks[None, :, :]).reshape(-1, self.d)
        prods = np.einsum("aij,bjk->abik", self._cs, other.cs).reshape((-1,) + shape)
        real = self._real and other.real
        return TorusMap(ksum, prods, self._period, shape=shape, real=real)

    def __matmul__(self, other):
        if isinstance(other, TorusMap):
            return self.multiply(other)
        m = np.atleast_2d(np.asarray(other))
        real = self._real and not _has_imag(m)
        return self._new(self._ks, self._cs @ m, shape=(self.rows, m.shape[1]), real=real)

    def __rmatmul__(self, other):
        m = np.atleast_2d(np.asarray(other))
        real = self._real and not _has_imag(m)
        return self._new(self._ks, m @ self._cs, shape=(m.shape[0], self.cols), real=real)

    def __add__(self, other: "TorusMap") -> "TorusMap":
        if not isinstance(other, TorusMap):
            return NotImplemented
        if other.shape != self._shape or other.period != self._period or other.d != self.d:
            raise ValueError("shape, period or dimension mismatch")
        ks = np.concatenate([self._ks, other.ks])
        cs = np.concatenate([self._cs, other.cs])
        return self._new(ks, cs, real=self._real and other.real)

    def __neg__(self):
        return self._new(self._ks, -self._cs, real=self._real)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "TorusMap":
        real = self._real and not _has_imag(np.asarray(s))
        return self._new(self._ks, self._cs * s, real=real)

    def __mul__(self, s):
        if isinstance(s, TorusMap):
            return NotImplemented
        return self.scale(s)

    __rmul__ = __mul__

    def conjugate(self) -> "TorusMap":
        return self._new(-self._ks, np.conj(self._cs), real=self._real)

    def transpose(self) -> "TorusMap":
        return self._new(self._ks, np.transpose(self._cs, (0, 2, 1)),
                         shape=(self.cols, self.rows), real=self._real)

    def adjoint(self) -> "TorusMap":
        """Pointwise conjugate transpose."""
        return self.conjugate().transpose()

    def real_part(self) -> "TorusMap":
        return (self + self.conjugate()).scale(0.5)._force_real()

    def imag_part(self) -> "TorusMap":
        return (self - self.conjugate()).scale(-0.5j)._force_real()

    def _force_real(self) -> "TorusMap":
        return self._new(self._ks, self._cs, real=True)

    def character_multiply(self, m) -> "TorusMap":
        """Multiply pointwise by exp(-2*pi*i*<theta/N, m>): index k becomes k - m."""
        m = np.atleast_1d(np.asarray(m, dtype=np.int64))
        if m.shape != (self.d,):
            raise ValueError("character dimension mismatch")
        return self._new(self._ks - m[None, :], self._cs, real=self._real and not m.any())

    def lift_period(self, factor: int) -> "TorusMap":
        """The same function viewed on the (factor*N)-covering torus."""
        factor = int(factor)
        if factor < 1:
            raise ValueError("lift factor must be >= 1")
        return self._new(self._ks * factor, self._cs, period=self._period * factor,
                         real=self._real)

    def descend_period(self, factor: int) -> "TorusMap":
        """Inverse of :meth:`lift_period`; every index must be divisible by ``factor``."""
        factor = int(factor)
        if factor < 1 or self._period % factor:
            raise ValueError("factor must divide the period")
        if np.any(self._ks % factor):
            raise ValueError("map is not periodic on the smaller torus")
        return self._new(self._ks // factor, self._cs, period=self._period // factor,
                         real=self._real)

    def directional_derivative(self, omega) -> "TorusMap":
        w = as_frequency(omega)
        if w.dim != self.d:
            raise ValueError("frequency dimension mismatch")
        fac = 2j * np.pi * (self._ks @ w.omega) / self._period
        return self._new(self._ks, self._cs * fac[:, None, None], real=self._real)

    def columns(self, idx) -> "TorusMap":
        idx = list(np.atleast_1d(idx))
        return self._new(self._ks, self._cs[:, :, idx], shape=(self.rows, len(idx)),
                         real=self._real)

    def rows_of(self, idx) -> "TorusMap":
        idx = list(np.atleast_1d(idx))
        return self._new(self._ks, self._cs[:, idx, :], shape=(len(idx), self.cols),
                         real=self._real)

    def pruned(self, tol: float = STRUCTURAL_ZERO) -> "TorusMap":
        """Drop coefficients whose max-norm is below ``tol`` times the largest."""
        if self.nterms == 0:
            return self
        norms = np.abs(self._cs).reshape(self.nterms, -1).max(axis=1)
        keep = norms > tol * norms.max()
        return self._new(self._ks[keep], self._cs[keep], real=self._real)

    def coefficient_norm(self) -> float:
        return float(np.abs(self._cs).max()) if self.nterms else 0.0

    def allclose(self, other: "TorusMap", atol: float = 1e-13) -> bool:
        if other.shape != self._shape or other.d != self.d or other.period != self._period:
            return False
        diff = self - other
        return diff.coefficient_norm() <= atol

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "period": self._period,
            "rows": self.rows,
            "cols": self.cols,
            "d": self.d,
            "real": self._real,
            "coeffs": [
                {"k": [int(x) for x in k], "re": c.real.tolist(), "im": c.imag.tolist()}
                for k, c in zip(self._ks, self._cs)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "TorusMap":
        d = int(data["d"])
        shape = (int(data["rows"]), int(data["cols"]))
        entries = data["coeffs"]
        ks = np.array([e["k"] for e in entries], dtype=np.int64).reshape(len(entries), d)
        cs = np.array([np.asarray(e["re"]) + 1j * np.asarray(e["im"]) for e in entries],
                      dtype=complex).reshape((len(entries),) + shape)
        return cls(ks, cs, int(data["period"]), shape=shape, real=data.get("real"))


def _has_imag(a) -> bool:
    return np.iscomplexobj(a) and bool(np.any(np.asarray(a).imag != 0))


def _canonical(ks: np.ndarray, cs: np.ndarray):
    """Merge duplicate indices, sort lexicographically, drop exact-zero matrices."""
    d = ks.shape[1]
    if ks.shape[0] == 0:
        return ks.reshape(0, d).copy(), cs.copy()
    uniq, inv = np.unique(ks, axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    acc = np.zeros((uniq.shape[0],) + cs.shape[1:], dtype=complex)
    np.add.at(acc, inv, cs)
    keep = np.any(acc.reshape(acc.shape[0], -1) != 0, axis=1)
    return uniq[keep].copy(), acc[keep].copy()


def _mirror_index(ks: np.ndarray) -> np.ndarray:
    """Position of -k for every k (or -1 if absent); ks must be canonical."""
    lookup = {tuple(k): i for i, k in enumerate(ks.tolist())}
    return np.array([lookup.get(tuple(-x for x in k), -1) for k in ks.tolist()], dtype=int)


def _is_conjugate_symmetric(ks, cs, rtol: float = STRUCTURAL_ZERO) -> bool:
    if ks.shape[0] == 0:
        return True
    mirror = _mirror_index(ks)
    if np.any(mirror < 0):
        return False
    scale = max(np.abs(cs).max(), 1e-300)
    return bool(np.abs(cs - np.conj(cs[mirror])).max() <= rtol * scale)


def _symmetrize(ks, cs):
    """Enforce c(-k) = conj(c(k)) exactly by averaging the pair."""
    if ks.shape[0] == 0:
        return ks, cs
    full_ks = np.concatenate([ks, -ks])
    full_cs = np.concatenate([cs, np.conj(cs)]) * 0.5
    ks2, cs2 = _canonical(full_ks, full_cs)
    mirror = _mirror_index(ks2)
    cs2 = 0.5 * (cs2 + np.conj(cs2[mirror]))
    zero = np.all(ks2 == 0, axis=1)
    cs2[zero] = cs2[zero].real
    return ks2, cs2


# -- functional spellings of the core operations ---------------------------

def evaluate(tmap: TorusMap, theta) -> np.ndarray:
    return tmap.evaluate(theta)


def translate(tmap: TorusMap, v) -> TorusMap:
    return tmap.translate(v)


def multiply(a: TorusMap, b: TorusMap) -> TorusMap:
    return a.multiply(b)


def conjugate_map(tmap: TorusMap) -> TorusMap:
    return tmap.conjugate()


def character_multiply(tmap: TorusMap, m) -> TorusMap:
    return tmap.character_multiply(m)


def lift_period(tmap: TorusMap, factor: int) -> TorusMap:
    return tmap.lift_period(factor)


def directional_derivative(tmap: TorusMap, omega) -> TorusMap:
    return tmap.directional_derivative(omega)


def hstack(maps: Iterable[TorusMap]) -> TorusMap:
    """Concatenate column blocks that share period, rows and dimension."""
    maps = list(maps)
    if not maps:
        raise ValueError("nothing to stack")
    first = maps[0]
    for m in maps[1:]:
        if m.period != first.period or m.rows != first.rows or m.d != first.d:
            raise ValueError("hstack requires equal period, rows and dimension")
    widths = [m.cols for m in maps]
    total = sum(widths)
    ks_list, cs_list = [], []
    offset = 0
    for m, w in zip(maps, widths):
        block = np.zeros((m.nterms, m.rows, total), dtype=complex)
        block[:, :, offset:offset + w] = m.cs
        ks_list.append(m.ks)
        cs_list.append(block)
        offset += w
    ks = np.concatenate(ks_list)
    cs = np.concatenate(cs_list)
    return TorusMap(ks, cs, first.period, shape=(first.rows, total),
                    real=all(m.real for m in maps))


def common_period(maps: Sequence[TorusMap]) -> list[TorusMap]:
    """Lift every map to the least common multiple of the periods."""
    lcm = int(np.lcm.reduce([m.period for m in maps]))
    return [m.lift_period(lcm // m.period) for m in maps]


def fit_from_samples(samples, grid: EvaluationGrid, target_degree: int,
                     real: bool | None = None) -> tuple[TorusMap, float]:
    """Trigonometric interpolation of grid samples.

    Args:
        samples: values on ``grid``, shaped ``(P, rows, cols)`` in the order of
            ``grid.points()`` or ``grid.shape + (rows, cols)``.
        grid: the sampling grid.
        target_degree: largest |k|_inf kept.
        real: force the realness flag; by default real samples give a real map.

    Returns:
        The fitted map and the max-norm re-evaluation residual on the grid.
    """
    p = grid.points_per_axis
    if p <= 2 * target_degree:
        raise ValueError(
            f"aliasing: {p} points per axis cannot resolve degree {target_degree}")
    vals = np.asarray(samples)
    if vals.ndim == 3 and vals.shape[0] == grid.size:
        vals = vals.reshape(grid.shape + vals.shape[1:])
    if vals.shape[:grid.dimension] != grid.shape:
        raise ValueError("samples do not match the grid")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite samples")
    d = grid.dimension
    axes = tuple(range(d))
    spec = np.fft.fftn(vals, axes=axes) / grid.size
    rng = np.arange(-target_degree, target_degree + 1)
    mesh = np.meshgrid(*([rng] * d), indexing="ij")
    ks = np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)
    idx = tuple((ks[:, i] % p) for i in range(d))
    cs = spec[idx]
    if real is None:
        real = not np.iscomplexobj(vals)
    fitted = TorusMap(ks, cs, grid.period, shape=vals.shape[d:], real=real)
    recon = fitted.evaluate_many(grid.points()).reshape(vals.shape)
    residual = float(np.abs(recon - vals).max()) if vals.size else 0.0
    return fitted, residual
