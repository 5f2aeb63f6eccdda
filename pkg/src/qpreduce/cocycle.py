"""Cocycles, reducibility certificates and the matrix ODE integrator.

Frame convention used throughout the package::

    X^t(theta) F(theta) = F(theta + t*omega) expm(t*B)

so ``F`` is the inverse of the conjugacy ``Z`` in the form
``X^t = Z(theta + t*omega)^{-1} expm(t*B) Z(theta)``. For a discrete
certificate ``B`` holds the time-one multiplier itself and ``expm(t*B)`` is
replaced by the integer power ``B**n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .torus import EvaluationGrid, FrequencyVector, TorusMap, as_frequency

GROUP_TAGS = ("GL_C", "GL_R", "SL_R", "Sp_R", "O_n", "U_n")
DEFAULT_TIMES = (0.1, 0.7, 1.3, 2.9, 5.0)
DEFAULT_DISCRETE_TIMES = (-2, -1, 1, 2, 3, 5)


class IntegrationError(RuntimeError):
    """Step-halving estimate exceeded the allowed global error."""


def complex_to_json(M) -> dict:
    M = np.asarray(M, dtype=complex)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def complex_from_json(data) -> np.ndarray:
    if isinstance(data, dict):
        return np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return np.asarray(data, dtype=complex)


def clean_matrix(M: np.ndarray) -> np.ndarray:
    """Drop an identically zero imaginary part."""
    M = np.asarray(M)
    if np.iscomplexobj(M) and not np.any(M.imag):
        return M.real.copy()
    return M


def integer_power(M: np.ndarray, n: int) -> np.ndarray:
    n = int(n)
    if n >= 0:
        return np.linalg.matrix_power(M, n)
    return np.linalg.matrix_power(np.linalg.inv(M), -n)


def is_integer_time(t: float) -> bool:
    return float(t) == math.floor(t)


@dataclass
class Certificate:
    """A reducibility witness in frame form."""

    frame: TorusMap
    B: np.ndarray
    modulus: int = 1
    group_tag: str = "GL_C"
    residual: float = float("nan")
    grid_spec: Optional[EvaluationGrid] = None
    time_samples: tuple = ()
    discrete: bool = False
    omega: Optional[FrequencyVector] = None

    def __post_init__(self):
        self.B = clean_matrix(np.atleast_2d(np.asarray(self.B)))
        if self.group_tag not in GROUP_TAGS:
            raise ValueError(f"unknown group tag {self.group_tag!r}")
        if self.frame.rows != self.frame.cols or self.B.shape != (self.frame.rows,) * 2:
            raise ValueError("frame and B must be square of the same size")
        if self.frame.period != self.modulus:
            raise ValueError(f"frame period {self.frame.period} != modulus {self.modulus}")
        if self.omega is not None:
            self.omega = as_frequency(self.omega)
        if not self.time_samples:
            self.time_samples = DEFAULT_DISCRETE_TIMES if self.discrete else DEFAULT_TIMES
        self.time_samples = tuple(self.time_samples)

    @property
    def n(self) -> int:
        return self.frame.rows

    @property
    def d(self) -> int:
        return self.frame.d

    def propagator(self, t: float) -> np.ndarray:
        """``expm(t*B)``, or ``B**t`` for a discrete certificate."""
        if self.discrete:
            if not is_integer_time(t):
                raise ValueError("discrete certificates only admit integer times")
            return integer_power(self.B, int(t))
        return expm(t * self.B)

    def with_(self, **changes) -> "Certificate":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "frame": self.frame.to_dict(),
            "B": complex_to_json(self.B),
            "modulus": self.modulus,
            "group_tag": self.group_tag,
            "residual": None if math.isnan(self.residual) else float(self.residual),
            "grid_spec": None if self.grid_spec is None else self.grid_spec.to_dict(),
            "time_samples": list(self.time_samples),
            "discrete": self.discrete,
            "omega": None if self.omega is None else self.omega.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "Certificate":
        res = data.get("residual")
        grid = data.get("grid_spec")
        omega = data.get("omega")
        return cls(
            frame=TorusMap.from_json_dict(data["frame"]),
            B=complex_from_json(data["B"]),
            modulus=int(data["modulus"]),
            group_tag=data["group_tag"],
            residual=float("nan") if res is None else float(res),
            grid_spec=None if grid is None else EvaluationGrid.from_dict(grid),
            time_samples=tuple(data.get("time_samples", ())),
            discrete=bool(data.get("discrete", False)),
            omega=None if omega is None else FrequencyVector(omega),
        )


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed-step classical Runge-Kutta settings."""

    step: float = 1e-3
    max_time: float = 100.0
    halving_tolerance: float = 1e-6

    def __post_init__(self):
        if not 0 < self.step <= 1e-2:
            raise ValueError("step must lie in (0, 1e-2]")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")

    def to_dict(self) -> dict:
        return {"step": self.step, "max_time": self.max_time,
                "halving_tolerance": self.halving_tolerance}


@dataclass(frozen=True)
class IntegrationResult:
    value: np.ndarray
    error_estimate: float
    steps: int


def _rk4(A: TorusMap, omega: np.ndarray, thetas: np.ndarray, t: float, nsteps: int) -> np.ndarray:
    """Batched RK4 for dX/dt = A(theta + s*omega) X, X(0) = I."""
    P, n = thetas.shape[0], A.rows
    X = np.broadcast_to(np.eye(n, dtype=A.cs.dtype if not A.real else float), (P, n, n)).copy()
    if nsteps == 0:
        return X
    h = t / nsteps

    def field_at(s):
        return A.evaluate_many(thetas + s * omega)

    for j in range(nsteps):
        s = j * h
        a0, ah, a1 = field_at(s), field_at(s + h / 2), field_at(s + h)
        k1 = a0 @ X
        k2 = ah @ (X + (h / 2) * k1)
        k3 = ah @ (X + (h / 2) * k2)
        k4 = a1 @ (X + h * k3)
        X = X + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def _steps_for(t: float, step: float) -> int:
    return int(math.ceil(abs(t) / step - 1e-9)) if t != 0 else 0


def integrate_many(A_field: TorusMap, omega, thetas, t: float,
                   settings: IntegratorSettings = IntegratorSettings(),
                   estimate_error: bool = True) -> IntegrationResult:
    """Fundamental solution at many base points at once."""
    w = as_frequency(omega).omega
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    if A_field.rows != A_field.cols:
        raise ValueError("generator must be square")
    if not math.isfinite(t):
        raise ValueError("time must be finite")
    if abs(t) > settings.max_time:
        raise ValueError(f"|t|={abs(t)} exceeds max_time={settings.max_time}")
    steps = _steps_for(t, settings.step)
    X = _rk4(A_field, w, th, t, steps)
    err = 0.0
    if estimate_error and steps > 0:
        X_fine = _rk4(A_field, w, th, t, 2 * steps)
        err = float(np.abs(X_fine - X).max())
        if err > settings.halving_tolerance:
            raise IntegrationError(
                f"step-halving disagreement {err:.3e} exceeds {settings.halving_tolerance:.1e}")
        X = X_fine
    return IntegrationResult(X, err, steps)


def integrate_cocycle(A_field: TorusMap, omega, theta, t: float,
                      settings: IntegratorSettings = IntegratorSettings()) -> IntegrationResult:
    """X^t(theta) for the generator ``A_field``, with a step-halving error estimate.

    The returned value is the fine (half-step) solution; ``error_estimate``
    is its max-norm distance to the coarse solution.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    res = integrate_many(A_field, omega, th[None, :], t, settings)
    return IntegrationResult(res.value[0], res.error_estimate, res.steps)


@dataclass
class CocycleEvaluator:
    """Evaluates X^t(theta) for one of three cocycle descriptions.

    ``conjugated``: X^t = F(theta + t*omega) expm(t*B) F(theta)^{-1}
    ``generator``: solution of dX/dt = A(theta + t*omega) X
    ``discrete``: telescoped products of the time-one map X1
    """

    kind: str
    omega: FrequencyVector
    frame: Optional[TorusMap] = None
    B: Optional[np.ndarray] = None
    A: Optional[TorusMap] = None
    X1: Optional[TorusMap] = None
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)
    discrete_multiplier: bool = False

    def __post_init__(self):
        self.omega = as_frequency(self.omega)
        if self.kind not in ("conjugated", "generator", "discrete"):
            raise ValueError(f"unknown cocycle kind {self.kind!r}")

    @classmethod
    def conjugated(cls, frame: TorusMap, B, omega, discrete: bool = False) -> "CocycleEvaluator":
        return cls("conjugated", as_frequency(omega), frame=frame,
                   B=clean_matrix(np.asarray(B)), discrete_multiplier=discrete)

    @classmethod
    def from_certificate(cls, cert: Certificate, omega=None) -> "CocycleEvaluator":
        w = omega if omega is not None else cert.omega
        if w is None:
            raise ValueError("frequency vector required")
        return cls.conjugated(cert.frame, cert.B, w, discrete=cert.discrete)

    @classmethod
    def generator(cls, A: TorusMap, omega, settings: IntegratorSettings = IntegratorSettings()):
        return cls("generator", as_frequency(omega), A=A, settings=settings)

    @classmethod
    def discrete(cls, X1: TorusMap, omega) -> "CocycleEvaluator":
        return cls("discrete", as_frequency(omega), X1=X1)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete" or (self.kind == "conjugated" and self.discrete_multiplier)

    @property
    def n(self) -> int:
        src = self.frame if self.kind == "conjugated" else (self.A if self.kind == "generator" else self.X1)
        return src.rows

    @property
    def d(self) -> int:
        return self.omega.dim

    def evaluate(self, thetas, t: float) -> np.ndarray:
        """X^t at each row of ``thetas``; returns shape (P, n, n)."""
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        if th.shape[1] != self.d:
            raise ValueError("point dimension does not match omega")
        if self.is_discrete and not is_integer_time(t):
            raise ValueError("discrete cocycles only admit integer times")
        w = self.omega.omega
        if self.kind == "conjugated":
            F0 = self.frame.evaluate_many(th)
            F1 = self.frame.evaluate_many(th + t * w)
            if self.discrete_multiplier:
                E = integer_power(self.B, int(t))
            else:
                E = expm(t * self.B)
            # F1 E F0^{-1} via a solve on the transpose
            right = np.linalg.solve(np.swapaxes(F0, 1, 2), np.swapaxes(F1 @ E, 1, 2))
            return clean_matrix(np.swapaxes(right, 1, 2))
        if self.kind == "generator":
            return integrate_many(self.A, w, th, t, self.settings, estimate_error=False).value
        return discrete_product(self.X1, w, th, int(t))

    def evaluate_one(self, theta, t: float) -> np.ndarray:
        return self.evaluate(np.atleast_1d(np.asarray(theta, dtype=float))[None, :], t)[0]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "omega": self.omega.tolist()}
        if self.kind == "conjugated":
            out.update(frame=self.frame.to_dict(), B=complex_to_json(self.B),
                       discrete=self.discrete_multiplier)
        elif self.kind == "generator":
            out.update(A=self.A.to_dict(), settings=self.settings.to_dict())
        else:
            out.update(X1=self.X1.to_dict())
        return out

    @classmethod
    def from_dict(cls, data) -> "CocycleEvaluator":
        omega = FrequencyVector(data["omega"])
        kind = data["kind"]
        if kind == "conjugated":
            return cls.conjugated(TorusMap.from_json_dict(data["frame"]),
                                  complex_from_json(data["B"]), omega,
                                  discrete=bool(data.get("discrete", False)))
        if kind == "generator":
            s = data.get("settings", {})
            return cls.generator(TorusMap.from_json_dict(data["A"]), omega,
                                 IntegratorSettings(**s))
        if kind == "discrete":
            return cls.discrete(TorusMap.from_json_dict(data["X1"]), omega)
        raise ValueError(f"unknown cocycle kind {kind!r}")


def discrete_product(X1: TorusMap, omega: np.ndarray, thetas: np.ndarray, n: int) -> np.ndarray:
    """X^n(theta) = X1(theta+(n-1)w) ... X1(theta); inverses for n < 0."""
    P, m = thetas.shape[0], X1.rows
    out = np.broadcast_to(np.eye(m), (P, m, m)).astype(complex if not X1.real else float)
    if n >= 0:
        for j in range(n):
            out = X1.evaluate_many(thetas + j * omega) @ out
    else:
        # X^{-n}(theta) = X1(theta - w)^{-1} ... X1(theta + n w)^{-1}
        for j in range(1, -n + 1):
            out = np.linalg.inv(X1.evaluate_many(thetas - j * omega)) @ out
    return out
