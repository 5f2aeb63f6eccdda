import json

import numpy as np
import pytest
from scipy.linalg import expm

from qpreduce.cocycle import (Certificate, CocycleEvaluator, IntegrationError,
                              IntegratorSettings, integrate_cocycle, integrate_many)
from qpreduce.fixtures import commuting_fixture
from qpreduce.groups import group_residual
from qpreduce.torus import EvaluationGrid, TorusMap
from qpreduce.verify import (FitError, check_cocycle_law, check_derivative_relation,
                             residual_conjugation)

from conftest import random_map

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
SQRT2 = np.sqrt(2.0)


def test_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(step=0.05)
    with pytest.raises(ValueError):
        IntegratorSettings(max_time=0)


def test_zero_generator_gives_identity():
    A = TorusMap.zeros((2, 2), 1)
    res = integrate_cocycle(A, [SQRT2], [0.3], 2.0)
    np.testing.assert_array_equal(res.value, np.eye(2))


def test_constant_generator_matches_expm():
    M = np.array([[0.3, -1.1], [0.7, -0.2]])
    res = integrate_cocycle(TorusMap.constant(M, 1), [SQRT2], [0.1], 1.0)
    assert np.abs(res.value - expm(M)).max() <= 1e-9
    assert res.error_estimate <= 1e-9


def test_rotation_generator_stays_orthogonal():
    A = TorusMap.from_dict({(1,): J2 / 2j, (-1,): -J2 / 2j}, d=1)
    res = integrate_cocycle(A, [SQRT2], [0.17], 2.0)
    assert group_residual(res.value, "O_n") <= 1e-8


def test_integrator_order_ratio():
    M = np.array([[0.5, -2.0], [1.5, -0.3]])
    A = TorusMap.constant(M, 1)
    exact = expm(M)
    errs = []
    for h in (1e-2, 5e-3):
        X = integrate_many(A, [SQRT2], [[0.0]], 1.0, IntegratorSettings(step=h),
                           estimate_error=False).value[0]
        errs.append(np.abs(X - exact).max())
    assert 12 <= errs[0] / errs[1] <= 20


def test_step_halving_failure_is_reported():
    A = TorusMap.constant(40 * J2 + 10 * np.eye(2), 1)
    with pytest.raises(IntegrationError):
        integrate_cocycle(A, [SQRT2], [0.0], 1.0, IntegratorSettings(step=1e-2))


def _planted_certificate(rng, d=1, n=3):
    A = random_map(rng, n, n, d, 1, real=True, scale=0.2)
    F = TorusMap.identity(n, d) + A.scale(0.5)
    B = rng.normal(size=(n, n)) * 0.4
    w = rng.uniform(0.3, 1.3, d)
    return Certificate(F, B, 1, "GL_R", omega=w)


def test_tautological_certificate(rng):
    cert = _planted_certificate(rng, d=2)
    ev = CocycleEvaluator.from_certificate(cert)
    assert residual_conjugation(ev, cert).max_residual <= 1e-12


def test_frame_and_z_forms_agree(rng):
    cert = _planted_certificate(rng, d=1)
    ev = CocycleEvaluator.from_certificate(cert)
    z = residual_conjugation(ev, cert, form="Z")
    assert z.max_condition <= 1e3
    assert abs(z.max_residual - residual_conjugation(ev, cert).max_residual) <= 1e-11


def test_perturbed_multiplier_is_detected(rng):
    cert = _planted_certificate(rng)
    ev = CocycleEvaluator.from_certificate(cert)
    bad = cert.with_(B=cert.B + 1e-4 * np.eye(3))
    rep = residual_conjugation(ev, bad, times=[1.0])
    assert rep.max_residual >= 1e-5


def test_generator_certificate_is_integrator_limited():
    ev, cert, _ = commuting_fixture()
    assert residual_conjugation(ev, cert).max_residual <= 1e-8


def test_residual_report_serialization(rng):
    cert = _planted_certificate(rng, d=2)
    rep = residual_conjugation(CocycleEvaluator.from_certificate(cert), cert)
    data = rep.to_dict()
    assert set(data) == {"max_residual", "argmax", "samples_checked"}
    assert data["samples_checked"] == 64 * 5
    assert len(data["argmax"]["theta"]) == 2 and data["argmax"]["t"] in cert.time_samples


def test_derivative_relation_trivial():
    B = np.array([[0.2, 1.0], [-0.5, 0.1]])
    cert = Certificate(TorusMap.identity(2, 1), B, 1, "GL_R", omega=[SQRT2])
    assert check_derivative_relation(cert, TorusMap.constant(B, 1)) <= 1e-14


def test_derivative_relation_commuting_fixture():
    _, cert, A = commuting_fixture()
    assert check_derivative_relation(cert, A) <= 1e-8


def test_derivative_relation_negative_control(rng):
    _, cert, A = commuting_fixture()
    wrong = TorusMap.constant(rng.normal(size=(2, 2)), 1)
    assert check_derivative_relation(cert, wrong) >= 1e-2


def test_derivative_relation_flags_poor_inverse_fit():
    # a nearly singular frame has an inverse far from any low-degree polynomial
    F = TorusMap.identity(2, 1) + TorusMap.from_dict(
        {(1,): 0.49 * np.eye(2), (-1,): 0.49 * np.eye(2)}, d=1)
    cert = Certificate(F, np.zeros((2, 2)), 1, "GL_R", omega=[SQRT2])
    with pytest.raises(FitError):
        check_derivative_relation(cert, TorusMap.zeros((2, 2), 1), degree=3)


def _samples(rng, d, integer=False, count=6):
    out = []
    for _ in range(count):
        if integer:
            t, s = (int(x) for x in rng.integers(-3, 4, 2))
        else:
            t, s = rng.uniform(-1.5, 2.5, 2)
        out.append((t, s, rng.uniform(0, 1, d)))
    return out


def test_cocycle_law_conjugated(rng):
    cert = _planted_certificate(rng, d=2)
    ev = CocycleEvaluator.from_certificate(cert)
    assert check_cocycle_law(ev, _samples(rng, 2)) <= 1e-12


def test_cocycle_law_generator(rng):
    A = random_map(rng, 2, 2, 1, 1, real=True, scale=0.3)
    ev = CocycleEvaluator.generator(A, [SQRT2])
    assert check_cocycle_law(ev, _samples(rng, 1, count=3)) <= 1e-8


def test_cocycle_law_discrete(rng):
    X1 = TorusMap.identity(2, 1) + random_map(rng, 2, 2, 1, 1, real=True, scale=0.1)
    ev = CocycleEvaluator.discrete(X1, [SQRT2])
    assert check_cocycle_law(ev, _samples(rng, 1, integer=True)) <= 1e-12
    with pytest.raises(ValueError):
        ev.evaluate_one([0.1], 0.5)


def test_certificate_round_trip(rng):
    cert = _planted_certificate(rng, d=2)
    back = Certificate.from_dict(json.loads(json.dumps(cert.to_dict())))
    assert back.frame.allclose(cert.frame, atol=0)
    np.testing.assert_array_equal(back.B, cert.B)
    assert back.time_samples == cert.time_samples and back.group_tag == "GL_R"


def test_certificate_validation():
    with pytest.raises(ValueError):
        Certificate(TorusMap.identity(2, 1), np.eye(2), 1, "GL_X")
    with pytest.raises(ValueError):
        Certificate(TorusMap.identity(2, 1), np.eye(2), 2, "GL_R")
    disc = Certificate(TorusMap.identity(2, 1), np.eye(2), 1, "GL_R", discrete=True)
    assert all(float(t).is_integer() for t in disc.time_samples)


def test_evaluator_round_trip(rng):
    cert = _planted_certificate(rng)
    for ev in (CocycleEvaluator.from_certificate(cert),
               CocycleEvaluator.generator(cert.frame, cert.omega),
               CocycleEvaluator.discrete(cert.frame, cert.omega)):
        back = CocycleEvaluator.from_dict(json.loads(json.dumps(ev.to_dict())))
        np.testing.assert_allclose(back.evaluate_one([0.3], 1), ev.evaluate_one([0.3], 1))
