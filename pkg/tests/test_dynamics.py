import json
import math
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccflab.dynamics import (
    AmbiguousDigit,
    ConvergentState,
    InputOutsideDomain,
    PoleAtInput,
    Status,
    ZeroInput,
    apply_inverse_branch,
    convergent_matrix,
    digits_residual,
    expand_exact,
    expand_float,
    gauss_step,
    levy_identity_gap,
    numerator_norms,
    read_jsonl,
    reconstruction_residual,
    write_jsonl,
)
from ccflab.geometry import build_domain, sample_uniform
from ccflab.ring import SUPPORTED_D, FieldElement, element

FIX = Path(__file__).parent / "fixtures"


# --- independent oracle: Euclidean expansion with Fraction coordinates -------------------

def _oracle_expand(d, num, den):
    """Digits of num/den via rational complex arithmetic and a brute-force nearest search."""
    s = Fraction(d)  # imaginary parts are tracked as multiples of sqrt(d)
    w_re, w_im = (Fraction(1, 2), Fraction(1, 2)) if d % 4 == 3 else (Fraction(0), Fraction(1))

    def val(a, b):
        return (a + b * w_re, b * w_im)  # (re, im / sqrt(d))

    def div(x, y):
        # (x_re + i sqrt(d) x_im) / (y_re + i sqrt(d) y_im)
        n = y[0] ** 2 + s * y[1] ** 2
        return ((x[0] * y[0] + s * x[1] * y[1]) / n, (x[1] * y[0] - x[0] * y[1]) / n)

    x = div(val(*num), val(*den))
    digits = []
    while x != (0, 0):
        n = x[0] ** 2 + s * x[1] ** 2
        inv = (x[0] / n, -x[1] / n)
        bc = inv[1] / w_im
        ac = inv[0] - bc * w_re
        best = None
        for b in range(math.floor(bc) - 2, math.floor(bc) + 3):
            for a in range(math.floor(ac) - 3, math.floor(ac) + 4):
                p = val(a, b)
                dist = (inv[0] - p[0]) ** 2 + s * (inv[1] - p[1]) ** 2
                nrm = p[0] ** 2 + s * p[1] ** 2
                key = (dist, nrm, a, b)
                if best is None or key < best:
                    best = key
        a, b = best[2], best[3]
        digits.append((a, b))
        p = val(a, b)
        x = (inv[0] - p[0], inv[1] - p[1])
    return digits


def random_field_elements(d, rng, n, box=200):
    dom = build_domain(d)
    out = []
    while len(out) < n:
        den = element(d, int(rng.integers(-box, box)), int(rng.integers(-box, box)))
        if den.is_zero():
            continue
        num = element(d, int(rng.integers(-box, box)), int(rng.integers(-box, box)))
        x = FieldElement(num, den)
        if dom.contains(complex(x), tol=-1e-9):
            out.append(x)
    return out


# --- convergents ------------------------------------------------------------------------

def test_convergent_examples():
    a = element(1, 2, 3)
    st1 = convergent_matrix([a])
    assert (st1.P_prev, st1.P_cur, st1.Q_prev, st1.Q_cur) == (element(1, 0), element(1, 1), element(1, 1), a)
    st2 = convergent_matrix([element(1, 3), element(1, 2, 2)])
    assert st2.Q_cur == element(1, 7, 6)
    st0 = convergent_matrix([], 1)
    assert (st0.P_prev, st0.P_cur, st0.Q_prev, st0.Q_cur) == (element(1, 1), element(1, 0), element(1, 0), element(1, 1))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(SUPPORTED_D), st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), max_size=25))
def test_determinant_and_matrix_product(d, pairs):
    word = [element(d, a, b) for a, b in pairs]
    state = convergent_matrix(word, d)
    assert state.determinant() == element(d, (-1) ** len(word))
    # oracle: explicit 2x2 product
    m = [[element(d, 1), element(d, 0)], [element(d, 0), element(d, 1)]]
    for b in word:
        m = [[m[0][1], m[0][0] + m[0][1] * b], [m[1][1], m[1][0] + m[1][1] * b]]
    assert (state.P_prev, state.P_cur, state.Q_prev, state.Q_cur) == (m[0][0], m[0][1], m[1][0], m[1][1])


def test_inverse_branch_basic(d):
    a = element(d, 3, 1)
    assert apply_inverse_branch([a], 0) == pytest.approx(1 / complex(a))
    z = 0.1 - 0.2j
    assert apply_inverse_branch([a], z) == pytest.approx(1 / (z + complex(a)))
    assert apply_inverse_branch([], z) == z
    with pytest.raises(PoleAtInput):
        apply_inverse_branch([element(d, 2)], -2)


# --- gauss step ----------------------------------------------------------------------------

def test_gauss_step_examples():
    a, zn = gauss_step(1 / 3, 1)
    assert a == element(1, 3) and abs(zn) < 1e-15
    a, zn = gauss_step((3 + 1j) / 10, 1)
    assert a == element(1, 3, -1) and abs(zn) < 1e-14
    with pytest.raises(InputOutsideDomain):
        gauss_step(0.9 + 0.9j, 1)
    with pytest.raises(ZeroInput):
        gauss_step(0, 3)


def test_gauss_step_ambiguous(d):
    beta = build_domain(d).neighbors[0]
    # 1/z sits on the wall between 3 and 3 + beta
    w = 3 + complex(beta) / 2
    with pytest.raises(AmbiguousDigit):
        gauss_step(1 / w, d)


def test_gauss_step_lands_in_domain(d, rng):
    dom = build_domain(d)
    for z in sample_uniform(d, rng, 500):
        a, zn = gauss_step(z, d)
        assert dom.contains(zn, tol=1e-12)
        assert abs(a) >= 1 / dom.R - 1e-9


# --- float expansions --------------------------------------------------------------------

def test_fixture_orbit_regression():
    rec = json.loads((FIX / "orbit_pi7_d1.json").read_text())
    z = complex(*rec["start"])
    e = expand_float(z, rec["n_max"], 1)
    assert len(e) == 100 and e.status is Status.RUNNING
    assert [x.to_pair() for x in e.digits] == rec["digits"]
    # compiled path agrees
    assert expand_float(z, 100, 1, record_margins=False).digits == e.digits


def test_expand_float_terminates_at_zero():
    e = expand_float(1 / 3, 10, 1)
    assert [x.to_pair() for x in e.digits] == [[3, 0]]
    assert e.status is Status.TERMINATED_AT_ZERO


def test_expand_float_wall_preimage(d):
    beta = build_domain(d).neighbors[0]
    w = complex(element(d, 2, 1)) + 1 / (3 + complex(beta) / 2)
    z = 1 / w
    e = expand_float(z, 50, d)
    assert e.status is Status.ABORTED_BOUNDARY
    assert len(e) <= 3


def test_expansion_invariants_on_samples(d, rng):
    dom = build_domain(d)
    for z in sample_uniform(d, rng, 60):
        e = expand_float(z, 200, d)
        assert e.status is Status.RUNNING
        assert all(abs(a) >= 1 / dom.R - 1e-9 for a in e.digits)
        assert len(e.residual_log) == len(e)
        # shift property
        a1, z1 = gauss_step(z, d)
        assert expand_float(z1, 150, d).digits == e.digits[1:151]
        # strict denominator growth, exact norms
        state = ConvergentState.identity(d)
        for k, a in enumerate(e.digits, 1):
            state = state.push(a)
            assert state.determinant() == element(d, (-1) ** k)
            if k >= 2:
                assert state.Q_prev.norm() < state.Q_cur.norm()
        # compiled and python paths agree
        assert expand_float(z, 200, d, record_margins=False).digits == e.digits


def test_reconstruction_residuals(d, rng):
    for z in sample_uniform(d, rng, 40):
        assert reconstruction_residual(z, 50, d) <= 1e-9
    x = random_field_elements(d, rng, 5)[0]
    assert reconstruction_residual(x, 0, d) == 0.0


def test_corrupted_word_residual(d, rng):
    hits = 0
    for z in sample_uniform(d, rng, 200):
        e = expand_float(z, 50, d)
        if abs(e.digits[0]) > 10:
            continue
        good = digits_residual(z, e.digits, e.end)
        bad_word = (e.digits[0] + 1,) + e.digits[1:]
        assert good < 1e-9
        assert digits_residual(z, bad_word, e.end) >= 1e-3
        hits += 1
    assert hits > 50


def test_levy_identity(d, rng):
    for z in sample_uniform(d, rng, 20):
        assert levy_identity_gap(z, d, 300) <= 1e-8


def test_extended_precision_agrees_with_double_prefix(d, rng):
    import mpmath

    for z in sample_uniform(d, rng, 5):
        e53 = expand_float(z, 12, d)
        e200 = expand_float(z, 40, d, precision="ext:200")
        assert e200.digits[:10] == e53.digits[:10]
        with mpmath.workprec(400):
            e400 = expand_float(mpmath.mpc(z), 40, d, precision="ext:400")
        assert e400.digits[: len(e200)] == e200.digits[: len(e400)]


def test_outside_domain_rejected():
    with pytest.raises(InputOutsideDomain):
        expand_float(0.8, 10, 1)
    with pytest.raises(InputOutsideDomain):
        expand_exact(FieldElement(element(1, 4), element(1, 5)))


# --- exact expansions -------------------------------------------------------------------

def test_expand_exact_examples():
    e = expand_exact(FieldElement(element(1, 1), element(1, 2, 2)))
    assert e.digits == (element(1, 2, 2),) and e.status is Status.TERMINATED_AT_ZERO
    assert e.convergents().value() == FieldElement(element(1, 1), element(1, 2, 2))
    e = expand_exact(FieldElement(element(1, 3, 1), element(1, 10)))
    assert e.digits == (element(1, 3, -1),)
    e = expand_exact(FieldElement(element(1, 0), element(1, 1)))
    assert e.digits == () and e.status is Status.TERMINATED_AT_ZERO


def test_expand_exact_matches_oracle(d, rng):
    for x in random_field_elements(d, rng, 150):
        got = [a.to_pair() for a in expand_exact(x).digits]
        assert got == [list(t) for t in _oracle_expand(d, (x.num.a, x.num.b), (x.den.a, x.den.b))]


def test_expand_exact_invariants(d, rng):
    for x in random_field_elements(d, rng, 200):
        e = expand_exact(x)
        norms = numerator_norms(x)
        assert all(p > q for p, q in zip(norms, norms[1:]))
        assert len(e) <= x.den.norm()
        assert e.convergents().value() == x
        state = ConvergentState.identity(d)
        for k, a in enumerate(e.digits, 1):
            state = state.push(a)
            assert state.determinant() == element(d, (-1) ** k)


def test_jsonl_roundtrip(tmp_path):
    es = [expand_float(0.3 + 0.2j, 20, 1), expand_exact(FieldElement(element(1, 1), element(1, 2, 2)))]
    p = tmp_path / "x.jsonl"
    write_jsonl(es, p)
    recs = read_jsonl(p)
    assert recs[0]["digits"] == [a.to_pair() for a in es[0].digits]
    assert recs[1] == {"d": 1, "start": {"num": [1, 0], "den": [2, 2]}, "digits": [[2, 2]], "status": "TerminatedAtZero"}
