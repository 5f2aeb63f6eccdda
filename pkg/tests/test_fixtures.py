import numpy as np

from qpreduce.fixtures import (GOLDEN, half_rotation, intersection_counterexample, invariant_line,
                               literal_rotation_cocycle, mobius_cocycle, mobius_complex_certificate)
from qpreduce.jordan import decompose_real, subbundle_intersection_dim
from qpreduce.suspension import lift_reduction, restrict_to_subtorus, suspend, verify_suspension
from qpreduce.torus import EvaluationGrid
from qpreduce.verify import DEFAULT_DISCRETE_TIMES, residual_conjugation


def rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def test_half_rotation_closed_form():
    R = half_rotation()
    assert R.period == 2 and R.real
    th = np.linspace(0, 2, 17)[:, None]
    expected = np.stack([rot(np.pi * t) for t in th[:, 0]])
    np.testing.assert_allclose(R.evaluate_many(th), expected, atol=1e-15)


def test_invariant_line_flips_sign_after_one_period():
    u = invariant_line()
    th = np.linspace(0, 1, 9)[:, None]
    np.testing.assert_allclose(u.evaluate_many(th + 1), -u.evaluate_many(th), atol=1e-15)
    np.testing.assert_allclose(u.evaluate_many(th + 2), u.evaluate_many(th), atol=1e-15)
    np.testing.assert_allclose(u.evaluate_many(th)[:, :, 0],
                               np.stack([np.cos(np.pi * th[:, 0]), np.sin(np.pi * th[:, 0])], 1),
                               atol=1e-15)


def test_literal_rotation_time_maps_wind():
    # X^n turns n times as theta goes once around, so no continuous frame can reduce it
    dc = literal_rotation_cocycle()
    th = np.linspace(0, 1, 401)[:, None]
    for n in (1, 2, 3):
        vals = dc.power(th, n)
        angle = np.unwrap(np.arctan2(vals[:, 1, 0], vals[:, 0, 0]))
        assert round((angle[-1] - angle[0]) / (2 * np.pi)) == n


def test_mobius_line_is_invariant():
    a = 0.3
    dc = mobius_cocycle(a=a)
    u = invariant_line()
    th = np.random.default_rng(1).uniform(0, 2, (20, 1))
    lhs = dc.X1.evaluate_many(th) @ u.evaluate_many(th)
    rhs = np.exp(a) * u.evaluate_many(th + GOLDEN)
    np.testing.assert_allclose(lhs, rhs, atol=1e-14)
    assert dc.X1.period == 1 and dc.X1.real


def test_mobius_complex_certificate_verifies():
    dc = mobius_cocycle()
    cert = mobius_complex_certificate()
    assert cert.modulus == 1 and cert.discrete
    rep = residual_conjugation(dc.evaluator(), cert, EvaluationGrid(8, 1, 1), DEFAULT_DISCRETE_TIMES)
    assert rep.max_residual <= 1e-12


def test_mobius_discrete_pipeline_needs_modulus_two():
    dc = mobius_cocycle()
    dec = decompose_real(mobius_complex_certificate(), cocycle=dc.evaluator())
    cert = dec.certificate
    assert dec.modulus == 2 and cert.modulus == 2
    assert cert.frame.real and cert.group_tag == "GL_R"
    rep = residual_conjugation(dc.evaluator(), cert, EvaluationGrid(8, 2, 1), DEFAULT_DISCRETE_TIMES)
    assert rep.max_residual <= 1e-8
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(cert.B).real),
                               [np.exp(-0.3), np.exp(0.3)], atol=1e-10)


def test_mobius_suspension_round_trip():
    dc = mobius_cocycle()
    cert = decompose_real(mobius_complex_certificate(), cocycle=dc.evaluator()).certificate
    ev = suspend(dc)
    assert verify_suspension(ev, n_max=5) <= 1e-8
    lift = lift_reduction(dc, cert, ev)
    assert lift.modulus == 2
    rc = restrict_to_subtorus(lift)
    assert rc.residual <= 1e-8 and rc.modulus == 2


def test_intersection_counterexample_dimension_jumps():
    V, W = intersection_counterexample()
    grid = EvaluationGrid(8, 1, 1)
    dim, constant = subbundle_intersection_dim([V], [W], grid)
    assert dim == 1
    assert constant is False
