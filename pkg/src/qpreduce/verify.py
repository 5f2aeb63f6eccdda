"""Residual checks for certificates, Jordan relations and cocycle laws."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .cocycle import (DEFAULT_DISCRETE_TIMES, DEFAULT_TIMES, Certificate, CocycleEvaluator,
                      integer_power)
from .torus import EvaluationGrid, TorusMap, as_frequency, fit_from_samples, grid_points


class FitError(ValueError):
    """A pointwise-computed map is not well represented at the requested degree."""


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    argmax_theta: tuple
    argmax_t: float
    samples_checked: int
    max_condition: float = float("nan")

    def passed(self, tol: float) -> bool:
        return self.max_residual <= tol

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "argmax": {"theta": list(self.argmax_theta), "t": self.argmax_t},
            "samples_checked": self.samples_checked,
        }


def default_times(discrete: bool) -> tuple:
    return DEFAULT_DISCRETE_TIMES if discrete else DEFAULT_TIMES


def _max_norm(a: np.ndarray) -> np.ndarray:
    return np.abs(a).reshape(a.shape[0], -1).max(axis=1)


def conjugation_defect(cocycle: CocycleEvaluator, columns: TorusMap, G_of_t, grid,
                       times: Sequence[float]) -> ResidualReport:
    """max ||X^t(theta) M(theta) - M(theta + t*omega) G(t)|| over grid x times.

    ``G_of_t`` maps a time to the constant right factor (expm(tB), B**n, ...).
    """
    pts = grid_points(grid, columns.d)
    w = cocycle.omega.omega
    best, arg, count = -1.0, (None, None), 0
    M0 = columns.evaluate_many(pts)
    for t in times:
        X = cocycle.evaluate(pts, t)
        lhs = X @ M0
        rhs = columns.evaluate_many(pts + t * w) @ G_of_t(t)
        r = _max_norm(lhs - rhs)
        i = int(np.argmax(r))
        count += pts.shape[0]
        if r[i] > best:
            best, arg = float(r[i]), (tuple(float(x) for x in pts[i]), float(t))
    return ResidualReport(best, arg[0], arg[1], count)


def residual_conjugation(cocycle: CocycleEvaluator, cert: Certificate, grid=None,
                         times: Optional[Sequence[float]] = None,
                         form: str = "frame") -> ResidualReport:
    """Conjugation defect of a certificate against a cocycle.

    Args:
        cocycle: the cocycle being certified.
        cert: frame ``F``, constant ``B`` and modulus.
        grid: evaluation grid (period should equal the modulus) or points.
            Defaults to 8 points per axis on the certificate's covering torus.
        times: time samples; defaults depend on whether the certificate is discrete.
        form: ``"frame"`` measures ``X^t F - F(.+t w) e^{tB}``; ``"Z"`` measures
            ``X^t - Z(.+t w)^{-1} e^{tB} Z`` with ``Z = F^{-1}`` formed pointwise.
    """
    if grid is None:
        grid = EvaluationGrid(8, cert.modulus, cert.d)
    if times is None:
        times = cert.time_samples or default_times(cert.discrete)
    if form == "frame":
        return conjugation_defect(cocycle, cert.frame, cert.propagator, grid, times)
    if form != "Z":
        raise ValueError("form must be 'frame' or 'Z'")
    pts = grid_points(grid, cert.d)
    w = cocycle.omega.omega
    F0 = cert.frame.evaluate_many(pts)
    cond = float(np.linalg.cond(F0).max())
    Z0 = np.linalg.inv(F0)
    best, arg, count = -1.0, (None, None), 0
    for t in times:
        Z1inv = cert.frame.evaluate_many(pts + t * w)
        r = _max_norm(cocycle.evaluate(pts, t) - Z1inv @ cert.propagator(t) @ Z0)
        i = int(np.argmax(r))
        count += pts.shape[0]
        if r[i] > best:
            best, arg = float(r[i]), (tuple(float(x) for x in pts[i]), float(t))
    return ResidualReport(best, arg[0], arg[1], count, cond)


def certify(cocycle: CocycleEvaluator, cert: Certificate, grid=None, times=None) -> Certificate:
    """Return the certificate with its residual field filled in."""
    if grid is None:
        grid = EvaluationGrid(8, cert.modulus, cert.d)
    if times is None:
        times = cert.time_samples or default_times(cert.discrete)
    rep = residual_conjugation(cocycle, cert, grid, times)
    return cert.with_(residual=rep.max_residual,
                      grid_spec=grid if isinstance(grid, EvaluationGrid) else cert.grid_spec,
                      time_samples=tuple(times))


def inverse_map(frame: TorusMap, degree: int, points_per_axis: Optional[int] = None,
                fit_tol: float = 1e-9) -> tuple[TorusMap, float]:
    """Fit F^{-1} (formed pointwise) by a trigonometric polynomial."""
    p = points_per_axis or max(2 * degree + 2, 8)
    grid = EvaluationGrid(p, frame.period, frame.d)
    inv = np.linalg.inv(frame.evaluate_many(grid.points()))
    Z, fit_res = fit_from_samples(inv, grid, degree, real=frame.real)
    if fit_res > fit_tol:
        raise FitError(f"inverse frame fit residual {fit_res:.3e} at degree {degree}")
    return Z, fit_res


def check_derivative_relation(cert: Certificate, A_field: TorusMap, omega=None,
                              degree: int = 8, grid=None, fit_tol: float = 1e-9) -> float:
    """max-norm of d_omega Z - (B Z - Z A) with Z = F^{-1} fitted at ``degree``.

    The fit is checked on an independent grid so that truncation of the
    inverse shows up in the result; a fit worse than ``fit_tol`` raises.
    """
    w = as_frequency(omega if omega is not None else cert.omega)
    if cert.modulus != A_field.period:
        A_field = A_field.lift_period(cert.modulus // A_field.period)
    Z, _ = inverse_map(cert.frame, degree, fit_tol=fit_tol)
    if grid is None:
        grid = EvaluationGrid(2 * degree + 3, cert.modulus, cert.d)
    pts = grid_points(grid, cert.d)
    F_pts = cert.frame.evaluate_many(pts)
    Z_pts = Z.evaluate_many(pts)
    off_grid_fit = float(_max_norm(Z_pts @ F_pts - np.eye(cert.n)).max())
    if off_grid_fit > fit_tol:
        raise FitError(f"inverse frame fit defect {off_grid_fit:.3e} off the fitting grid")
    dZ = Z.directional_derivative(w).evaluate_many(pts)
    rhs = cert.B @ Z_pts - Z_pts @ A_field.evaluate_many(pts)
    return float(_max_norm(dZ - rhs).max())


def check_cocycle_law(cocycle: CocycleEvaluator, samples: Iterable[tuple]) -> float:
    """max ||X^{t+s}(theta) - X^t(theta + s*omega) X^s(theta)|| over (t, s, theta) samples."""
    w = cocycle.omega.omega
    worst = 0.0
    for t, s, theta in samples:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        lhs = cocycle.evaluate_one(th, t + s)
        rhs = cocycle.evaluate_one(th + s * w, t) @ cocycle.evaluate_one(th, s)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def jordan_relation_defect(cocycle: CocycleEvaluator, columns: TorusMap, exponent: complex,
                           grid, times: Sequence[float]) -> float:
    """Defect of X^t M = M(. + t w) expm(t J) with J the Jordan block of ``exponent``.

    For ``k`` columns this is exactly
    X^t z_j = e^{t lam} sum_{i<=j} t^{j-i}/(j-i)! z_i(. + t w).
    """
    k = columns.cols
    J = exponent * np.eye(k) + np.eye(k, k=1)
    if cocycle.is_discrete:
        def G(t):
            return integer_power(expm(J), int(t))
    else:
        def G(t):
            return expm(t * J)
    return conjugation_defect(cocycle, columns, G, grid, times).max_residual
