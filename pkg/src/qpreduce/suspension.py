"""Suspension of a discrete cocycle to a continuous one over (omega, 1).

Given X^1(theta) = expm(A(theta)) and a bump ``psi`` supported in
[1/4, 3/4] with unit integral, the generator

    Bbar(theta, u) = psi(frac u) * A(theta - frac(u) * omega)

has a flow that is exactly computable: along an orbit the generator is a
fixed matrix times a scalar within each unit window of ``u``, so the flow
is a product of one matrix exponential per window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm, logm

from .cocycle import Certificate, CocycleEvaluator, discrete_product, integer_power
from .torus import (EvaluationGrid, FrequencyVector, TorusMap, as_frequency, fit_from_samples,
                    grid_points)
from .verify import DEFAULT_DISCRETE_TIMES, residual_conjugation

BRANCH_EXCLUSION = 1e-6
LOG_DEGREES = (12, 16, 24, 32, 48)
LIFT_TIMES = (0.1, 0.3, 0.5, 0.9, 1.7)


class BranchCutError(ValueError):
    """An eigenvalue lies on or near the closed negative real axis."""

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class LiftError(ValueError):
    """Inconsistent inputs to the reducibility lift."""


@dataclass(frozen=True)
class DiscreteCocycle:
    """Time-one map over the translation theta -> theta + omega.

    The frequencies (omega, 1) are assumed rationally independent.
    """

    X1: TorusMap
    omega: FrequencyVector

    def __post_init__(self):
        object.__setattr__(self, "omega", as_frequency(self.omega))
        if self.X1.d != self.omega.dim or self.X1.rows != self.X1.cols:
            raise ValueError("X1 must be square with torus dimension matching omega")

    @property
    def n(self) -> int:
        return self.X1.rows

    @property
    def d(self) -> int:
        return self.omega.dim

    def evaluator(self) -> CocycleEvaluator:
        return CocycleEvaluator.discrete(self.X1, self.omega)

    def power(self, thetas, k: int) -> np.ndarray:
        return discrete_product(self.X1, self.omega.omega, np.atleast_2d(thetas), k)

    def check_invertible(self, grid=None, min_det: float = 1e-10) -> float:
        grid = grid if grid is not None else EvaluationGrid(16, 1, self.d)
        dets = np.abs(np.linalg.det(self.X1.evaluate_many(grid_points(grid, self.d))))
        if dets.min() < min_det:
            raise ValueError(f"X1 is singular on the grid (|det| = {dets.min():.3e})")
        return float(dets.min())

    def to_dict(self) -> dict:
        return {"X1": self.X1.to_dict(), "omega": self.omega.tolist()}

    @classmethod
    def from_dict(cls, data) -> "DiscreteCocycle":
        return cls(TorusMap.from_json_dict(data["X1"]), FrequencyVector(data["omega"]))


class BumpProfile:
    """A smooth bump on [1/4, 3/4] with unit mass and closed-form primitive."""

    KINDS = ("raised_cosine", "quartic")

    def __init__(self, kind: str = "raised_cosine"):
        if kind not in self.KINDS:
            raise ValueError(f"unknown profile {kind!r}")
        self.kind = kind

    def __repr__(self):
        return f"BumpProfile({self.kind!r})"

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        s = u - 0.25
        inside = (u >= 0.25) & (u <= 0.75)
        if self.kind == "raised_cosine":
            val = 2.0 * (1.0 - np.cos(4 * np.pi * s))
        else:
            val = 960.0 * s**2 * (0.5 - s) ** 2
        return np.where(inside, val, 0.0)

    def Phi(self, u):
        """Primitive of psi on [0, 1]; 0 left of the support and 1 right of it."""
        u = np.asarray(u, dtype=float)
        s = np.clip(u - 0.25, 0.0, 0.5)
        if self.kind == "raised_cosine":
            val = 2.0 * s - np.sin(4 * np.pi * s) / (2 * np.pi)
        else:
            h = 0.5
            val = 960.0 * (h**2 * s**3 / 3 - h * s**4 / 2 + s**5 / 5)
        return np.where(u >= 0.75, 1.0, val)

    def Phi_per(self, u):
        """Extension with Phi_per(u + 1) = Phi_per(u) + 1."""
        u = np.asarray(u, dtype=float)
        f = np.floor(u)
        return f + self.Phi(u - f)


def _branch_offenders(vals: np.ndarray, pts: np.ndarray, exclusion: float):
    eig = np.linalg.eigvals(vals)
    near = (np.pi - np.abs(np.angle(eig)) <= exclusion) | (np.abs(eig) == 0)
    bad = np.nonzero(near.any(axis=1))[0]
    return [tuple(float(x) for x in pts[i]) for i in bad]


def _principal_logs(vals: np.ndarray, max_condition: float = 1e6) -> np.ndarray:
    """Pointwise principal logarithm; batched through eigendecomposition when well conditioned."""
    lam, V = np.linalg.eig(vals)
    cond = np.linalg.cond(V)
    good = np.isfinite(cond) & (cond <= max_condition)
    out = np.empty(vals.shape, dtype=complex)
    if good.any():
        Vg = V[good]
        out[good] = (Vg * np.log(lam[good].astype(complex))[:, None, :]) @ np.linalg.inv(Vg)
    for i in np.nonzero(~good)[0]:
        out[i] = logm(vals[i])
    return out


def matrix_log_field(X1: TorusMap, grid: Optional[EvaluationGrid] = None, degree: int = 12,
                     fit_tol: float = 1e-9, exclusion: float = BRANCH_EXCLUSION):
    """Principal logarithm of X1 sampled on ``grid`` and fitted at ``degree``.

    Returns ``(A_field, residual)`` where ``residual`` is the max-norm of
    ``expm(A(theta)) - X1(theta)`` on a grid shifted off the fitting points.
    """
    grid = grid if grid is not None else EvaluationGrid(2 * degree + 2, X1.period, X1.d)
    pts = grid.points()
    vals = X1.evaluate_many(pts)
    offenders = _branch_offenders(vals, pts, exclusion)
    if offenders:
        raise BranchCutError(
            f"{len(offenders)} grid points have eigenvalues near the negative real axis",
            offenders)
    logs = _principal_logs(vals)
    real = X1.real and np.abs(logs.imag).max() <= 1e-10 if np.iscomplexobj(logs) else X1.real
    if real:
        logs = logs.real
    A, fit_res = fit_from_samples(logs, grid, degree, real=real)
    A = A.pruned(1e-15)
    check = pts + (0.5 * X1.period / grid.points_per_axis)
    resid = float(np.abs(expm(A.evaluate_many(check)) - X1.evaluate_many(check)).max())
    if resid > fit_tol:
        raise ValueError(f"logarithm is not captured at degree {degree} (residual {resid:.3e})")
    return A, resid


@dataclass
class SuspensionEvaluator:
    """Continuous cocycle over (omega, 1) whose integer-time restriction is X."""

    base: DiscreteCocycle
    A_field: TorusMap
    profile: BumpProfile = field(default_factory=BumpProfile)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def omega(self) -> FrequencyVector:
        return self.base.omega.extended()

    def generator_at(self, points) -> np.ndarray:
        """Bbar(theta, u) at rows (theta, u)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        th, u = p[:, :-1], p[:, -1]
        fu = u - np.floor(u)
        A = self.A_field.evaluate_many(th - fu[:, None] * self.base.omega.omega)
        return self.profile.psi(fu)[:, None, None] * A

    def _forward(self, p: np.ndarray, t: float) -> np.ndarray:
        th, u = p[:, :-1], p[:, -1]
        w = self.base.omega.omega
        P, n = p.shape[0], self.n
        out = np.broadcast_to(np.eye(n), (P, n, n)).astype(float if self.A_field.real else complex)
        if t == 0:
            return out
        j0 = np.floor(u)
        base_theta = th - u[:, None] * w
        for i in range(int(math.ceil(t)) + 2):
            j = j0 + i
            c = self.profile.Phi(u + t - j) - self.profile.Phi(u - j)
            if not np.any(c):
                continue
            A = self.A_field.evaluate_many(base_theta + j[:, None] * w)
            out = expm(c[:, None, None] * A) @ out
        return out

    def evaluate(self, points, t: float) -> np.ndarray:
        """X~^t at rows (theta, u); shape (P, n, n)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if p.shape[1] != self.base.d + 1:
            raise ValueError("points must have dimension d + 1")
        if t >= 0:
            return self._forward(p, float(t))
        back = p + t * self.omega.omega
        return np.linalg.inv(self._forward(back, -float(t)))

    def as_cocycle(self) -> "SuspensionCocycle":
        return SuspensionCocycle(self)


class SuspensionCocycle:
    """Adapter so verification helpers can treat a suspension like any cocycle."""

    is_discrete = False

    def __init__(self, ev: SuspensionEvaluator):
        self.ev = ev
        self.omega = ev.omega

    @property
    def n(self) -> int:
        return self.ev.n

    @property
    def d(self) -> int:
        return self.omega.dim

    def evaluate(self, points, t):
        return self.ev.evaluate(points, t)

    def evaluate_one(self, point, t):
        return self.ev.evaluate(np.atleast_1d(np.asarray(point, dtype=float))[None, :], t)[0]


def suspend(dc: DiscreteCocycle, profile: Optional[BumpProfile] = None,
            A_field: Optional[TorusMap] = None, check_tol: float = 1e-11,
            degree: Optional[int] = None) -> SuspensionEvaluator:
    """Build the suspension; the log field is computed when not supplied.

    Without an explicit ``degree`` the log field is fitted at increasing
    degrees until ``expm(A)`` matches ``X1`` to ``check_tol``.
    """
    profile = profile or BumpProfile()
    if A_field is None:
        degrees = (degree,) if degree is not None else LOG_DEGREES
        for i, deg in enumerate(degrees):
            try:
                A_field, _ = matrix_log_field(dc.X1, degree=deg, fit_tol=check_tol)
                break
            except ValueError as exc:
                if isinstance(exc, BranchCutError) or i == len(degrees) - 1:
                    raise
    else:
        grid = EvaluationGrid(16, 1, dc.d)
        pts = grid.points()
        r = float(np.abs(expm(A_field.evaluate_many(pts)) - dc.X1.evaluate_many(pts)).max())
        if r > check_tol:
            raise ValueError(f"expm(A) differs from X1 by {r:.3e} on the grid")
    return SuspensionEvaluator(dc, A_field, profile)


def _base_points(grid, d):
    pts = grid_points(grid if grid is not None else EvaluationGrid(8, 1, d), d)
    return pts


def verify_suspension(ev: SuspensionEvaluator, grid=None, n_max: int = 5) -> float:
    """max ||X~^n(theta, 0) - X^n(theta)|| for 0 < |n| <= n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    pts = _base_points(grid, ev.base.d)
    ext = np.concatenate([pts, np.zeros((pts.shape[0], 1))], axis=1)
    worst = 0.0
    for k in range(-n_max, n_max + 1):
        if k == 0:
            continue
        diff = ev.evaluate(ext, k) - ev.base.power(pts, k)
        worst = max(worst, float(np.abs(diff).max()))
    return worst


@dataclass
class ContinuousLift:
    """Frame Ftilde over (omega, 1) reducing the suspension to expm(t B)."""

    ev: SuspensionEvaluator
    base_frame: TorusMap
    B: np.ndarray
    modulus: int
    periodicity_defect: float = float("nan")
    conjugation_defect: float = float("nan")

    @property
    def omega(self) -> FrequencyVector:
        return self.ev.omega

    def frame_at(self, points) -> np.ndarray:
        """Ftilde(theta, u) = X~^u(theta - u w, 0) F(theta - u w) expm(-u B)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        th, u = p[:, :-1], p[:, -1]
        w = self.ev.base.omega.omega
        shifted = th - u[:, None] * w
        start = np.concatenate([shifted, np.zeros((p.shape[0], 1))], axis=1)
        out = np.empty((p.shape[0], self.ev.n, self.ev.n), dtype=complex)
        F = self.base_frame.evaluate_many(shifted)
        # group points by u so the flow is evaluated once per distinct time
        for val in np.unique(u):
            sel = u == val
            X = self.ev.evaluate(start[sel], float(val))
            out[sel] = X @ F[sel] @ expm(-float(val) * self.B)
        if not np.iscomplexobj(self.B) and self.base_frame.real:
            return out.real
        return out


def _lift_samples(d: int, modulus: int, count: int, seed: int = 12345) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0, modulus, size=(count, d))


def lift_reduction(dc: DiscreteCocycle, discrete_cert: Certificate, ev: SuspensionEvaluator,
                   tol: float = 1e-8, times: Sequence[float] = LIFT_TIMES,
                   n_u: int = 32, n_theta: int = 8) -> ContinuousLift:
    """Continuous reducing frame for the suspension from a discrete certificate.

    The discrete certificate must satisfy X^1 F = F(. + w) M; the
    continuous constant is the principal logarithm of ``M``.
    """
    if not discrete_cert.discrete:
        raise LiftError("a discrete certificate (multiplier form) is required")
    rep = residual_conjugation(dc.evaluator(), discrete_cert,
                               EvaluationGrid(8, discrete_cert.modulus, dc.d),
                               DEFAULT_DISCRETE_TIMES)
    if rep.max_residual > tol:
        raise LiftError(f"discrete certificate residual {rep.max_residual:.3e} exceeds {tol:.1e}")
    M = np.asarray(discrete_cert.B)
    eig = np.linalg.eigvals(M)
    if np.any(np.pi - np.abs(np.angle(eig)) <= BRANCH_EXCLUSION) or np.any(eig == 0):
        raise BranchCutError("multiplier has eigenvalues near the negative real axis")
    B = logm(M)
    if not np.iscomplexobj(M) and np.abs(np.imag(B)).max() <= 1e-12:
        B = np.real(B)
    lift = ContinuousLift(ev, discrete_cert.frame, B, discrete_cert.modulus)

    thetas = _lift_samples(dc.d, discrete_cert.modulus, n_theta)
    us = (np.arange(n_u) + 0.37) / n_u
    pts = np.array([np.append(th, u) for th in thetas for u in us])
    per = lift.frame_at(pts + np.eye(dc.d + 1)[-1]) - lift.frame_at(pts)
    lift.periodicity_defect = float(np.abs(per).max())

    nu = ev.omega.omega
    rng = np.random.default_rng(54321)
    sample = np.concatenate([_lift_samples(dc.d, discrete_cert.modulus, 16, 999),
                             rng.uniform(0, 1, size=(16, 1))], axis=1)
    worst = 0.0
    F0 = lift.frame_at(sample)
    for t in times:
        lhs = ev.evaluate(sample, t) @ F0
        rhs = lift.frame_at(sample + t * nu) @ expm(t * B)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    lift.conjugation_defect = worst
    if lift.periodicity_defect > tol:
        raise LiftError(f"periodicity defect {lift.periodicity_defect:.3e} exceeds {tol:.1e}")
    if worst > tol:
        raise LiftError(f"conjugation defect {worst:.3e} exceeds {tol:.1e}")
    return lift


def restrict_to_subtorus(lift: ContinuousLift, degree: Optional[int] = None,
                         tol: float = 1e-8) -> Certificate:
    """Discrete certificate (theta -> Ftilde(theta, 0), expm(B)) verified against X."""
    d = lift.ev.base.d
    deg = lift.base_frame.degree if degree is None else degree
    grid = EvaluationGrid(2 * deg + 2, lift.modulus, d)
    pts = grid.points()
    samples = lift.frame_at(np.concatenate([pts, np.zeros((pts.shape[0], 1))], axis=1))
    frame, fit_res = fit_from_samples(samples, grid, deg,
                                      real=lift.base_frame.real and not np.iscomplexobj(lift.B))
    M = expm(lift.B)
    if not np.iscomplexobj(lift.B):
        M = M.real
    cert = Certificate(frame, M, lift.modulus, "GL_R" if frame.real else "GL_C", discrete=True,
                       omega=lift.ev.base.omega, time_samples=DEFAULT_DISCRETE_TIMES)
    rep = residual_conjugation(lift.ev.base.evaluator(), cert,
                               EvaluationGrid(8, lift.modulus, d), DEFAULT_DISCRETE_TIMES)
    cert = cert.with_(residual=rep.max_residual)
    if rep.max_residual > tol:
        raise LiftError(f"restricted certificate residual {rep.max_residual:.3e} exceeds {tol:.1e}")
    return cert


def suspension_cocycle_law(ev: SuspensionEvaluator, samples) -> float:
    """max ||X~^{t+s}(p) - X~^t(p + s nu) X~^s(p)|| over (t, s, p) samples."""
    nu = ev.omega.omega
    worst = 0.0
    for t, s, p in samples:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        lhs = ev.evaluate(p, t + s)
        rhs = ev.evaluate(p + s * nu, t) @ ev.evaluate(p, s)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst
