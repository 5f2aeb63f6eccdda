"""Small closed-form cocycles used as reference cases."""
from __future__ import annotations

import numpy as np

from .cocycle import Certificate, CocycleEvaluator
from .planted import rotation_map
from .suspension import DiscreteCocycle
from .torus import FrequencyVector, TorusMap, hstack

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
SQRT2 = np.sqrt(2.0)


def half_rotation() -> TorusMap:
    """theta -> R(pi*theta) as a map on the doubled torus 2T."""
    plus = np.array([[0.5, 0.5j], [-0.5j, 0.5]])
    return TorusMap(np.array([[1], [-1]]), np.stack([plus, np.conj(plus)]), 2, real=True)


def invariant_line() -> TorusMap:
    """u(theta) = (cos(pi*theta), sin(pi*theta)) on 2T; changes sign after one period."""
    return half_rotation().columns([0])


def literal_rotation_cocycle(omega: float = GOLDEN) -> DiscreteCocycle:
    """X^1(theta) = R(2*pi*theta) over theta -> theta + omega."""
    return DiscreteCocycle(rotation_map(np.array([1]), 1), FrequencyVector([omega]))


def mobius_cocycle(omega: float = GOLDEN, a: float = 0.3) -> DiscreteCocycle:
    """X^1(theta) = R(pi(theta + omega)) diag(e^a, e^-a) R(-pi theta).

    The line spanned by (cos(pi*theta), sin(pi*theta)) is invariant with
    multiplier e^a, and it turns by pi around the circle, so a real constant
    reduction needs the doubled torus.
    """
    R = half_rotation()
    D = np.diag([np.exp(a), np.exp(-a)])
    X1 = R.translate([omega]).multiply(R.transpose().__rmatmul__(D)).descend_period(2)
    return DiscreteCocycle(X1, FrequencyVector([omega]))


def mobius_complex_certificate(omega: float = GOLDEN, a: float = 0.3) -> Certificate:
    """Period-one complex frame [e^{i pi theta} u, e^{i pi theta} v] and its multiplier."""
    R = half_rotation()
    twisted = R.character_multiply(np.array([-1])).descend_period(2)
    M = np.diag([np.exp(a - 1j * np.pi * omega), np.exp(-a - 1j * np.pi * omega)])
    return Certificate(twisted, M, 1, "GL_C", discrete=True, omega=FrequencyVector([omega]))


def intersection_counterexample():
    """V = (1, 0) and W = (cos 2 pi theta, sin 2 pi theta) on T."""
    V = TorusMap.constant(np.array([[1.0], [0.0]]), 1)
    W = rotation_map(np.array([1]), 1).columns([0])
    return V, W


def commuting_fixture(omega: float = SQRT2, a: float = 0.2, b: float = 0.5):
    """Generator cocycle with A = B + 2*pi*omega*J2 and frame F = R(2*pi*theta).

    ``B = a I + b J2`` commutes with the rotation generator ``J2`` so the
    certificate X^t F = F(. + t w) expm(t B) holds in closed form.
    """
    J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
    B = a * np.eye(2) + b * J2
    A = B + 2 * np.pi * omega * J2
    F = rotation_map(np.array([1]), 1)
    w = FrequencyVector([omega])
    A_field = TorusMap.constant(A, 1)
    cert = Certificate(F, B, 1, "GL_R", omega=w)
    return CocycleEvaluator.generator(A_field, w), cert, A_field
