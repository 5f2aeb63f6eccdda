import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpreduce.resonance import (HALF_RESONANT, NON_RESONANT, REAL_CLASS, AmbiguityError,
                                SearchBox, classify_exponent, detect_resonance,
                                detect_resonance_discrete, integer_det, normalize_exponent,
                                unimodular_complete)
from qpreduce.torus import FrequencyVector

from oracles import brute_force_resonance, cofactor_det, far_from_rationals

SQRT2 = math.sqrt(2)
BOX = SearchBox(10, 1e-9)


def test_search_box_validation():
    with pytest.raises(ValueError):
        SearchBox(0, 1e-9)
    with pytest.raises(ValueError):
        SearchBox(3, 0.0)


def test_zero_is_resonant():
    hit = detect_resonance(0.0, [SQRT2], 1, BOX)
    assert hit.k == (0,) and hit.residual == 0.0


def test_detect_examples_against_oracle():
    beta = 3 * math.pi * SQRT2
    assert brute_force_resonance(beta, [SQRT2 / 2], 10, 1e-9)[0] == (3,)
    assert detect_resonance(beta, [SQRT2], 2, BOX).k == (3,)
    assert brute_force_resonance(1.0, [SQRT2], 10, 1e-9) == []
    assert detect_resonance(1.0, [SQRT2], 1, BOX) is None


def test_detect_discrete_examples_against_oracle():
    assert detect_resonance_discrete(2 * math.pi, [SQRT2], 1, BOX).k == (0, 1)
    beta = math.pi * (SQRT2 + 1)
    assert brute_force_resonance(beta, [SQRT2 / 2, 0.5], 10, 1e-9)[0] == (1, 1)
    assert detect_resonance_discrete(beta, [SQRT2], 2, BOX).k == (1, 1)
    assert brute_force_resonance(0.5, [SQRT2, 1.0], 10, 1e-9) == []
    assert detect_resonance_discrete(0.5, [SQRT2], 1, BOX) is None


def test_invalid_modulus():
    with pytest.raises(ValueError):
        detect_resonance(0.0, [SQRT2], 0, BOX)


def test_classify_examples():
    c = classify_exponent(0.0, [SQRT2], BOX)
    assert c.tag == REAL_CLASS and c.witness.k == (0,)
    c = classify_exponent(math.pi * SQRT2, [SQRT2], BOX)
    assert c.tag == HALF_RESONANT and c.witness.k == (1,)
    assert brute_force_resonance(math.pi * SQRT2, [SQRT2], 10, 1e-9) == []
    c = classify_exponent(0.77, [SQRT2], BOX)
    assert c.tag == NON_RESONANT and c.witness is None
    assert brute_force_resonance(0.77, [SQRT2], 10, 1e-9, scale=math.pi) == []
    assert c.to_dict()["box"] == {"K": 10, "tolerance": 1e-9}


def test_classify_discrete_uses_extended_vector():
    c = classify_exponent(math.pi, [SQRT2], BOX, discrete=True)
    assert c.tag == HALF_RESONANT and c.witness.k == (0, 1)
    c = classify_exponent(2 * math.pi * (SQRT2 + 1), [SQRT2], BOX, discrete=True)
    assert c.tag == REAL_CLASS and c.witness.k == (1, 1)


def test_classify_ambiguity():
    # a rational frequency makes 2pi and odd pi lattice points coincide
    with pytest.raises(AmbiguityError):
        classify_exponent(math.pi, [1.0, 0.5], SearchBox(4, 1e-9))


@pytest.mark.parametrize("beta", [0.0, math.pi * SQRT2, 0.77, 2 * math.pi * SQRT2, -3.1])
def test_classify_conjugation_consistent(beta):
    a = classify_exponent(beta, [SQRT2], BOX)
    b = classify_exponent(-beta, [SQRT2], BOX)
    assert a.tag == b.tag
    if a.witness is not None:
        assert b.witness.k == tuple(-x for x in a.witness.k)


def test_normalize_examples():
    lam, m = normalize_exponent(0.3 + 0.2j, [SQRT2], 1, BOX)
    assert m == (0,) and lam == 0.3 + 0.2j
    lam, m = normalize_exponent(0.5 + 2j * math.pi * SQRT2, [SQRT2], 1, BOX)
    assert m == (1,) and lam == 0.5 + 0j
    lam, m = normalize_exponent(0.5 + 1j * math.pi * SQRT2, [SQRT2], 2, BOX)
    assert m == (1,) and lam == 0.5 + 0j


@pytest.mark.parametrize("beta", [0.77, 5.3, -12.0, 2 * math.pi * SQRT2 + 1e-3])
def test_normalize_idempotent_in_one_dimension(beta):
    lam, m = normalize_exponent(1j * beta, [SQRT2], 1, BOX)
    lam2, m2 = normalize_exponent(lam, [SQRT2], 1, BOX)
    assert m2 == (0,) and lam2 == lam


def test_planted_resonances_recovered(rng):
    for trial in range(40):
        d = 1 + trial % 3
        N = 1 + trial % 2
        w = far_from_rationals(rng, d)
        k = tuple(int(x) for x in rng.integers(-8, 9, size=d))
        beta = 2 * math.pi * float(np.dot(k, w / N))
        hit = detect_resonance(beta, w, N, SearchBox(8, 1e-9))
        assert hit is not None and hit.k == k
        assert brute_force_resonance(beta, list(w / N), 8, 1e-9)[0] == k


def test_monotone_in_box_and_tolerance():
    w = [SQRT2, math.sqrt(3)]
    beta = 2 * math.pi * (3 * SQRT2 - 2 * math.sqrt(3)) + 1e-10
    small = detect_resonance(beta, w, 1, SearchBox(3, 1e-9))
    big = detect_resonance(beta, w, 1, SearchBox(10, 1e-9))
    assert small is not None and big is not None and big.residual <= small.residual
    tight = detect_resonance(beta, w, 1, SearchBox(10, 1e-9 / 2))
    assert tight is None or tight.residual <= big.residual


def test_unimodular_examples():
    assert unimodular_complete([1, 0, 0]) == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    M = unimodular_complete([2, 3])
    assert M[0] == [2, 3] and cofactor_det(M) == 1
    M = unimodular_complete([6, 10, 15])
    assert M[0] == [6, 10, 15] and cofactor_det(M) == 1


def test_unimodular_errors():
    with pytest.raises(ValueError):
        unimodular_complete([2, 4])
    with pytest.raises(ValueError):
        unimodular_complete([0, 0])
    with pytest.raises(ValueError):
        unimodular_complete([1, 2], dim=3)


def test_integer_det_matches_cofactor(rng):
    for _ in range(50):
        n = int(rng.integers(1, 6))
        M = rng.integers(-20, 21, size=(n, n)).tolist()
        assert integer_det(M) == cofactor_det(M)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=2, max_size=6))
def test_unimodular_completion_property(v):
    if math.gcd(*v) != 1:
        with pytest.raises(ValueError):
            unimodular_complete(v)
        return
    M = unimodular_complete(v)
    assert M[0] == v
    assert all(isinstance(x, int) for row in M for x in row)
    assert cofactor_det(M) == 1


@settings(max_examples=50, deadline=None)
@given(st.floats(-40, 40), st.integers(1, 2))
def test_detect_agrees_with_brute_force(beta, N):
    w = [SQRT2]
    box = SearchBox(6, 1e-6)
    hit = detect_resonance(beta, w, N, box)
    oracle = brute_force_resonance(beta, [SQRT2 / N], 6, 1e-6)
    assert (hit is None) == (not oracle)
    if hit is not None:
        assert hit.k == oracle[0]
