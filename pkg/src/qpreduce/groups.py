"""Normalization of reduced forms into SL(n,R), Sp(2n,R), O(n) and U(n).

The mechanism is always the same: a quadratic expression in the frame (a
Gram map, or the determinant) is shown to be constant by checking its
Fourier modes, and a constant change of basis then puts the frame into the
group.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cocycle import Certificate, CocycleEvaluator
from .jordan import (EXPONENT_SNAP, ConjugationError, JordanBasis, RealifyError, decompose_real,
                     jordan_structure, select_representatives, shift_exponent)
from .resonance import SearchBox, detect_resonance
from .torus import EvaluationGrid, FrequencyVector, TorusMap, as_frequency, fit_from_samples, hstack
from .verify import default_times, residual_conjugation

SYMPLECTIC = "Symplectic"
EUCLIDEAN = "Euclidean"
HERMITIAN = "Hermitian"

_TAG_FOR_FORM = {SYMPLECTIC: "Sp_R", EUCLIDEAN: "O_n", HERMITIAN: "U_n"}


class NonConstantError(ValueError):
    """A map that should be constant has nonzero Fourier modes."""

    def __init__(self, message, report: "ConstancyReport"):
        super().__init__(message)
        self.report = report


class GroupMembershipError(ValueError):
    """The cocycle (or a frame) does not take values in the requested group."""


def symplectic_J(n: int) -> np.ndarray:
    """[[0, -I], [I, 0]] of size n (n even)."""
    if n % 2:
        raise ValueError("symplectic forms need even dimension")
    h = n // 2
    J = np.zeros((n, n), dtype=np.int64)
    J[:h, h:] = -np.eye(h, dtype=np.int64)
    J[h:, :h] = np.eye(h, dtype=np.int64)
    return J


@dataclass(frozen=True)
class GramForm:
    kind: str

    def __post_init__(self):
        if self.kind not in (SYMPLECTIC, EUCLIDEAN, HERMITIAN):
            raise ValueError(f"unknown form {self.kind!r}")

    def matrix(self, n: int) -> np.ndarray:
        if self.kind == SYMPLECTIC:
            return symplectic_J(n)
        return np.eye(n, dtype=np.int64)

    @property
    def hermitian(self) -> bool:
        return self.kind == HERMITIAN

    @property
    def group_tag(self) -> str:
        return _TAG_FOR_FORM[self.kind]


@dataclass
class ConstancyReport:
    constant_part: np.ndarray
    max_nonzero_mode: float
    offending_modes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"max_nonzero_mode": self.max_nonzero_mode,
                "offending_modes": [list(k) for k in self.offending_modes]}


def gram_map(F: TorusMap, form: GramForm) -> TorusMap:
    """adjoint(F) M F (Hermitian) or transpose(F) M F (real forms), by convolution."""
    if F.rows != F.cols:
        raise ValueError("frame must be square")
    M = form.matrix(F.rows)
    left = F.adjoint() if form.hermitian else F.transpose()
    return left.multiply(F.__rmatmul__(M))


def assert_constant(Y: TorusMap, tol: float = 1e-9) -> ConstancyReport:
    """Check that every k != 0 Fourier coefficient is at most ``tol``."""
    const = Y.coeff(np.zeros(Y.d, dtype=np.int64))
    modes = []
    for k, c in Y.items():
        if any(k):
            modes.append((float(np.abs(c).max()), k))
    modes.sort(key=lambda x: -x[0])
    worst = modes[0][0] if modes else 0.0
    report = ConstancyReport(const.real if Y.real else const, worst,
                             [k for nrm, k in modes if nrm > tol])
    if worst > tol:
        raise NonConstantError(
            f"largest nonzero mode {worst:.3e} exceeds {tol:.1e} at k={modes[0][1]}", report)
    return report


def group_residual(M, tag: str) -> float:
    """Max-norm distance of a matrix from the group named by ``tag``."""
    M = np.asarray(M)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("square matrix expected")
    Mh = M.conj().T
    if tag == "Sp_R":
        J = symplectic_J(n)
        return float(np.abs(Mh @ J @ M - J).max())
    if tag in ("O_n", "U_n"):
        return float(np.abs(Mh @ M - np.eye(n)).max())
    if tag == "SL_R":
        return float(abs(np.linalg.det(M) - 1))
    if tag in ("GL_R", "GL_C"):
        return 0.0
    raise ValueError(f"unknown group tag {tag!r}")


def frame_group_residual(frame: TorusMap, tag: str, points) -> float:
    vals = frame.evaluate_many(points)
    return max(group_residual(v, tag) for v in vals)


def cocycle_group_residual(cocycle: CocycleEvaluator, tag: str, points,
                           times: Sequence[float]) -> float:
    """Largest group defect of X^t(theta) over the samples (realness included)."""
    worst = 0.0
    for t in times:
        vals = cocycle.evaluate(points, t)
        if tag != "U_n" and np.iscomplexobj(vals):
            worst = max(worst, float(np.abs(vals.imag).max()))
        worst = max(worst, max(group_residual(v, tag) for v in vals))
    return worst


def _verify(cocycle, cert, grid, tol):
    if grid is None:
        grid = EvaluationGrid(8, cert.modulus, cert.d)
    times = cert.time_samples or default_times(cert.discrete)
    rep = residual_conjugation(cocycle, cert, grid, times)
    out = cert.with_(residual=rep.max_residual,
                     grid_spec=grid if isinstance(grid, EvaluationGrid) else cert.grid_spec)
    if rep.max_residual > tol:
        raise ConjugationError(
            f"normalized certificate residual {rep.max_residual:.3e} exceeds {tol:.1e}",
            rep.max_residual)
    return out


def _evaluator(cert: Certificate, cocycle: Optional[CocycleEvaluator]) -> CocycleEvaluator:
    return cocycle if cocycle is not None else CocycleEvaluator.from_certificate(cert)


def normalize_base_point(cert: Certificate, form: GramForm, tol: float = 1e-9,
                         cocycle: Optional[CocycleEvaluator] = None, grid=None,
                         verify_tol: float = 1e-8) -> Certificate:
    """F -> F F(0)^{-1}, B -> F(0) B F(0)^{-1}, after checking the Gram map is constant."""
    ev = _evaluator(cert, cocycle)
    assert_constant(gram_map(cert.frame, form), tol)
    F0 = cert.frame.evaluate(np.zeros(cert.d))
    if abs(np.linalg.det(F0)) < 1e-12:
        raise ValueError("frame is singular at the base point")
    F0inv = np.linalg.inv(F0)
    frame = cert.frame @ F0inv
    if cert.frame.real and not form.hermitian:
        frame = frame._force_real()
    B = F0 @ cert.B @ F0inv
    if not form.hermitian:
        B = np.real_if_close(B, tol=1e6).real if np.iscomplexobj(B) else B
    out = cert.with_(frame=frame, B=B, group_tag=form.group_tag)
    pts = (grid if grid is not None else EvaluationGrid(8, cert.modulus, cert.d))
    pts = pts.points() if isinstance(pts, EvaluationGrid) else np.asarray(pts)
    g = frame_group_residual(frame, form.group_tag, pts)
    if g > max(tol * 10, 1e-9):
        raise GroupMembershipError(f"normalized frame group defect {g:.3e}")
    return _verify(ev, out, grid, verify_tol)


def determinant_map(F: TorusMap) -> tuple[TorusMap, float]:
    """det F(theta) as a trigonometric polynomial, fitted exactly at degree n*deg(F)."""
    deg = F.rows * F.degree
    grid = EvaluationGrid(2 * deg + 2, F.period, F.d)
    dets = np.linalg.det(F.evaluate_many(grid.points()))[:, None, None]
    return fit_from_samples(dets, grid, deg, real=F.real)


def fix_orientation(cert: Certificate) -> Certificate:
    """Flip the first column when det F is negative: F -> F D, B -> D B D."""
    sign = np.linalg.det(cert.frame.evaluate(np.zeros(cert.d)))
    if np.real(sign) >= 0:
        return cert
    D = np.eye(cert.n)
    D[0, 0] = -1.0
    return cert.with_(frame=cert.frame @ D, B=D @ cert.B @ D)


def normalize_sl(cert: Certificate, tol: float = 1e-9, cocycle: Optional[CocycleEvaluator] = None,
                 grid=None, verify_tol: float = 1e-8) -> Certificate:
    """Scale a real frame to determinant one and snap trace(B) to zero.

    The determinant of the frame must be a constant ``c``; the frame is
    divided by the real n-th root of ``c``. Negative ``c`` with even ``n``
    has no such root and is rejected.
    """
    if not cert.frame.real:
        raise ValueError("SL normalization needs a real frame")
    ev = _evaluator(cert, cocycle)
    n = cert.n
    det_map, fit_res = determinant_map(cert.frame)
    if fit_res > tol:
        raise NonConstantError("determinant fit failed", ConstancyReport(np.zeros((1, 1)), fit_res))
    report = assert_constant(det_map, tol)
    c = float(np.real(report.constant_part[0, 0]))
    if c == 0:
        raise ValueError("frame determinant vanishes")
    if c < 0 and n % 2 == 0:
        raise ValueError("negative constant determinant has no real root in even dimension; "
                         "fix the orientation first")
    root = np.sign(c) * abs(c) ** (1.0 / n)
    B = np.asarray(cert.B, dtype=float)
    if cert.discrete:
        dB = np.linalg.det(B)
        if abs(dB - 1) > tol:
            raise ValueError(f"multiplier determinant {dB} is not 1")
    else:
        tr = float(np.trace(B))
        if abs(tr) > tol:
            raise ValueError(f"trace(B) = {tr:.3e} exceeds {tol:.1e}")
        B = B - (tr / n) * np.eye(n)
    out = cert.with_(frame=cert.frame.scale(1.0 / root), B=B, group_tag="SL_R")
    return _verify(ev, out, grid, verify_tol)


def _unitary_representatives(cert: Certificate, box: SearchBox):
    w = as_frequency(cert.omega)
    N = cert.modulus
    structure = jordan_structure(cert.B)
    if any(stop - start > 1 for start, stop, _ in structure):
        raise RealifyError("a Jordan block of rank >= 2 cannot occur for a unitary cocycle")
    lams = np.diag(cert.B).astype(complex)
    if cert.discrete:
        lams = np.log(lams)
    if np.abs(lams.real).max(initial=0.0) > EXPONENT_SNAP:
        raise ValueError("unitary normalization needs purely imaginary exponents")
    v = w.omega / N
    if cert.discrete:
        v = np.append(v, 1.0)
    return lams, v, w, N


def normalize_unitary(cert: Certificate, box: SearchBox = SearchBox(), tol: float = 1e-9,
                      cocycle: Optional[CocycleEvaluator] = None, grid=None,
                      verify_tol: float = 1e-8) -> Certificate:
    """Unitary certificate from a diagonal complex one with imaginary exponents.

    Each exponent is moved to a lattice representative; equal exponents are
    shifted to exactly the same representative, and a lattice-resonant
    difference between distinct ones is rejected.
    """
    ev = _evaluator(cert, cocycle)
    lams, v, w, N = _unitary_representatives(cert, box)
    betas = lams.imag
    reps: list[float] = []
    cols, new_betas = [], []
    for j, beta in enumerate(betas):
        match = None
        for r in reps:
            hit = detect_resonance(beta - r, FrequencyVector(v), 1, box)
            if hit is not None:
                match = (r, hit.k)
                break
        if match is None:
            (b_new, m), = select_representatives([beta], v, box)
            for r in reps:
                if detect_resonance(b_new - r, FrequencyVector(v), 1, box) is not None:
                    raise ValueError("resonant exponent difference")
            reps.append(b_new)
            match = (b_new, m)
        r, m = match
        basis = JordanBasis(cert.frame.columns([j]), complex(lams[j]), N)
        shifted = shift_exponent(basis, [-x for x in m], w, cert.discrete)
        cols.append(shifted.columns)
        new_betas.append(r)
    for a in range(len(reps)):
        for b in range(a + 1, len(reps)):
            if detect_resonance(reps[a] - reps[b], FrequencyVector(v), 1, box) is not None:
                raise ValueError("resonant exponent difference")
    frame = hstack(cols)
    B = np.diag(1j * np.asarray(new_betas))
    if cert.discrete:
        B = np.diag(np.exp(1j * np.asarray(new_betas)))
    shifted_cert = cert.with_(frame=frame, B=B)
    return normalize_base_point(shifted_cert, GramForm(HERMITIAN), tol, ev, grid, verify_tol)


def reduce_to_group(cert: Certificate, group: str, box: SearchBox = SearchBox(),
                    cocycle: Optional[CocycleEvaluator] = None, tol: float = 1e-9,
                    verify_tol: float = 1e-8, grid=None) -> Certificate:
    """Run the normalization path for ``group`` starting from a GL_C or GL_R certificate."""
    ev = _evaluator(cert, cocycle)
    if group == "U_n":
        if cert.group_tag != "GL_C":
            raise ValueError("the unitary path starts from a complex certificate")
        return normalize_unitary(cert, box, tol, ev, None, verify_tol)
    if group not in ("SL_R", "Sp_R", "O_n", "GL_R"):
        raise ValueError(f"unknown group {group!r}")
    real = cert
    if cert.group_tag == "GL_C":
        real = decompose_real(cert, cert.omega, box, cocycle=ev, verify_tol=verify_tol).certificate
    elif not cert.frame.real:
        raise ValueError("a real certificate must have a real frame")
    if group == "GL_R":
        return real
    if group == "SL_R":
        return normalize_sl(fix_orientation(real), tol, ev, grid, verify_tol)
    form = GramForm(SYMPLECTIC if group == "Sp_R" else EUCLIDEAN)
    return normalize_base_point(real, form, tol, ev, grid, verify_tol)
