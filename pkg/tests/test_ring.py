import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ccflab.ring import (
    SUPPORTED_D,
    FieldElement,
    RingElement,
    RingError,
    count_ball,
    element,
    enumerate_annulus,
    enumerate_ball,
    norm,
    representation_counts,
    units,
)
from conftest import brute_ball

import pytest

ints = st.integers(-10**6, 10**6)


def test_norm_examples():
    assert norm(element(1, 1, 1)) == 2
    assert norm(element(3, 0, 1)) == 1
    assert norm(element(11, 0, 1)) == 3


def test_norm_matches_complex_modulus(d):
    for a in range(-5, 6):
        for b in range(-5, 6):
            x = element(d, a, b)
            assert math.isclose(abs(complex(x)) ** 2, x.norm(), abs_tol=1e-9)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(SUPPORTED_D), ints, ints, ints, ints)
def test_norm_multiplicative(d, a, b, c, e):
    x, y = element(d, a, b), element(d, c, e)
    assert (x * y).norm() == x.norm() * y.norm()
    assert x.norm() >= 0
    if not x.is_zero():
        assert x.norm() >= 1


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(SUPPORTED_D), ints, ints, ints, ints)
def test_product_matches_complex(d, a, b, c, e):
    x, y = element(d, a % 1000, b % 1000), element(d, c % 1000, e % 1000)
    assert abs(complex(x * y) - complex(x) * complex(y)) < 1e-6 * (1 + abs(complex(x) * complex(y)))
    assert complex(x.conj()) == pytest.approx(complex(x).conjugate())


def test_ring_closed_and_mixed_rings_rejected():
    x = element(7, 2, 3)
    assert isinstance(x + 1, RingElement) and isinstance(2 * x, RingElement)
    with pytest.raises(RingError):
        element(7, 1) + element(3, 1)
    with pytest.raises(RingError):
        element(9, 1)


def test_enumerate_ball_examples():
    assert len(enumerate_ball(1, 1)) == 5
    assert {e.to_pair().__repr__() for e in enumerate_ball(1, 1)} == {"[0, 0]", "[1, 0]", "[-1, 0]", "[0, 1]", "[0, -1]"}
    assert len(enumerate_ball(1, 5)) == 81
    assert len(enumerate_ball(3, 1)) == 7


@pytest.mark.parametrize("R", [0, 0.5, 1, 2.5, 7, 13.3, 50])
def test_enumerate_ball_matches_brute_force(d, R):
    got = [(e.a, e.b) for e in enumerate_ball(d, R)]
    assert len(got) == len(set(got))
    assert set(got) == brute_ball(d, R)


def test_enumerate_ball_sorted_and_quadratic_size(d):
    els = enumerate_ball(d, 30)
    keys = [e.sort_key() for e in els]
    assert keys == sorted(keys)
    assert len(els) <= 10 * 30**2


def test_annulus_examples():
    got = enumerate_annulus(1, 1)
    assert len(got) == 8
    assert sorted({e.norm() for e in got}) == [1, 2, 3] or sorted({e.norm() for e in got}) == [1, 2]


def test_annulus_norms_d1():
    # oracle: R=1 means norms 1 <= n < 4; Z[i] has no element of norm 3
    assert sorted(e.norm() for e in enumerate_annulus(1, 1)) == [1, 1, 1, 1, 2, 2, 2, 2]


def test_annulus_growth_window(d):
    # oracle table, brute force: count / R^2 must stay within a factor 1.25 across R in {10, 20, 40}
    ratios = []
    for R in (10, 20, 40):
        ball2 = brute_ball(d, 2 * R - 1e-7)
        ball1 = brute_ball(d, R - 1e-7)
        oracle = len(ball2) - len(ball1)
        got = len(enumerate_annulus(d, R))
        assert got == oracle
        ratios.append(got / R**2)
    assert max(ratios) / min(ratios) <= 1.25


def test_annulus_nonempty(d):
    for R in (2, 3, 4.5, 10, 17):
        assert enumerate_annulus(d, R)
    with pytest.raises(RingError):
        enumerate_annulus(d, 0.5)


def test_units():
    assert len(units(1)) == 4
    assert len(units(3)) == 6
    for d in (2, 7, 11):
        assert sorted((u.a, u.b) for u in units(d)) == [(-1, 0), (1, 0)]


def test_count_ball_and_representation_counts(d):
    counts = representation_counts(d, 2000)
    assert counts.sum() == count_ball(d, 2000)
    assert counts[0] == 1
    els = enumerate_ball(d, math.sqrt(2000))
    assert np.array_equal(np.bincount([e.norm() for e in els], minlength=2001), counts)


def test_multiplicity_growth(d):
    N = 10**5
    counts = representation_counts(d, N)
    n = np.arange(N + 1)
    # divisor bound: #{N(alpha) = n} <= #units * tau(n) for every n >= 1
    tau = np.zeros(N + 1, dtype=np.int64)
    for k in range(1, N + 1):
        tau[k::k] += 1
    assert np.all(counts[1:] <= len(units(d)) * tau[1:])
    # the coarse sqrt(n) stand-in fails for small n (n = 1 already has the units); it holds from 2000 on
    assert np.all(counts[2000:] <= np.sqrt(n[2000:]))


def test_field_element_equality_and_coords():
    x = FieldElement(element(1, 10), element(1, 3, 1))
    assert x == element(1, 3, -1)
    assert hash(x) == hash(FieldElement(element(1, 20), element(1, 6, 2)))
    assert complex(x) == pytest.approx(3 - 1j)
    with pytest.raises(ZeroDivisionError):
        FieldElement(element(1, 1), element(1, 0))
