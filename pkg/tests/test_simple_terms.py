import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxbundle.simple_terms import (BallIndicator, BoxIndicator, L1, Zero,
                                     eval_h, prox_h, term_from_dict,
                                     term_to_dict)

VARIANTS = [
    Zero(3),
    L1(3, weight=0.7),
    BoxIndicator(3, lower=np.array([-1.0, -np.inf, 0.0]),
                 upper=np.array([1.0, 2.0, np.inf])),
    BallIndicator(3, center=np.array([0.5, 0.0, -0.5]), radius=1.5),
]


def test_eval_examples():
    assert eval_h(Zero(2), np.array([3.0, -4.0])) == 0.0
    assert eval_h(L1(2, weight=2.0), np.array([1.0, -3.0])) == 8.0
    assert eval_h(BallIndicator(2, center=np.zeros(2), radius=1.0),
                  np.array([2.0, 0.0])) == np.inf


def test_prox_examples():
    v = np.array([1.3, -2.2])
    assert np.array_equal(prox_h(Zero(2), 1.0, v), v)
    out = prox_h(L1(2, weight=1.0), 1.0, np.array([2.0, -0.5]))
    assert np.allclose(out, [1.0, 0.0])
    out = prox_h(BallIndicator(2, center=np.zeros(2), radius=1.0), 7.3,
                 np.array([3.0, 4.0]))
    assert np.allclose(out, [0.6, 0.8])
    box = BoxIndicator(2, lower=np.array([0.0, 0.0]), upper=np.array([1.0, 1.0]))
    assert np.allclose(prox_h(box, 0.5, np.array([-1.0, 0.25])), [0.0, 0.25])


def test_prox_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        prox_h(Zero(2), 0.0, np.zeros(2))


@pytest.mark.parametrize("term", VARIANTS, ids=lambda t: type(t).__name__)
def test_prox_first_order_optimality(term):
    # g(u*) <= g(u* +- delta e_i) for the prox objective, per coordinate
    rng = np.random.default_rng(11)
    delta = 1e-6
    for _ in range(25):
        v = rng.uniform(-3, 3, size=3)
        t = float(rng.uniform(0.1, 2.0))
        u = prox_h(term, t, v)

        def obj(p):
            hv = eval_h(term, p)
            if hv == np.inf:
                return np.inf
            return hv + 0.5 * float((p - v) @ (p - v)) / t

        base = obj(u)
        for i in range(3):
            e = np.zeros(3)
            e[i] = delta
            assert base <= obj(u + e) + 1e-12
            assert base <= obj(u - e) + 1e-12


def test_l1_moreau_decomposition():
    # prox_t(v) + t * proj_{inf-ball(w)}(v / t) == v
    rng = np.random.default_rng(3)
    w = 0.8
    term = L1(4, weight=w)
    for _ in range(50):
        v = rng.uniform(-4, 4, size=4)
        t = float(rng.uniform(0.2, 3.0))
        proj = np.clip(v / t, -w, w)
        assert np.allclose(prox_h(term, t, v) + t * proj, v, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3),
       st.lists(st.floats(-50, 50), min_size=3, max_size=3),
       st.floats(0.01, 10.0))
def test_prox_nonexpansive(u_list, v_list, t):
    u = np.asarray(u_list)
    v = np.asarray(v_list)
    for term in VARIANTS:
        pu = prox_h(term, t, u)
        pv = prox_h(term, t, v)
        assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-9


def test_indicator_membership_after_prox():
    rng = np.random.default_rng(8)
    for term in VARIANTS:
        for _ in range(20):
            u = prox_h(term, 1.0, rng.uniform(-10, 10, size=3))
            assert eval_h(term, u) == 0.0 or isinstance(term, L1)


def test_box_invalid_bounds():
    with pytest.raises(ValueError):
        BoxIndicator(2, lower=np.array([1.0, 0.0]), upper=np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        BallIndicator(2, center=np.zeros(2), radius=0.0)
    with pytest.raises(ValueError):
        L1(2, weight=-1.0)


@pytest.mark.parametrize("term", VARIANTS, ids=lambda t: type(t).__name__)
def test_serialization_round_trip(term):
    clone = term_from_dict(term_to_dict(term))
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = rng.uniform(-3, 3, size=3)
        assert eval_h(clone, u) == eval_h(term, u)
        assert np.array_equal(prox_h(clone, 0.7, u), prox_h(term, 0.7, u))
