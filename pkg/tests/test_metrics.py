import math

import numpy as np
import pytest

from ccflab.metrics import (
    InadmissibleWord,
    SeparationViolated,
    Targets,
    bb_exceedance,
    check_admissible,
    cylinder_measure,
    digit_stream,
    khinchine_estimate,
    khinchine_mean,
    levy_estimate,
    load_criteria,
    log_abs_q_exact,
    log_abs_q_float,
    loglaw_profile,
    mixing_probe,
    shrinking_target_run,
    tail_estimate,
    threshold_targets,
)
from ccflab.ring import element


def test_stream_deterministic(d):
    s1 = digit_stream(d, 5, 500, burn_in=100)
    s2 = digit_stream(d, 5, 500, burn_in=100)
    assert np.array_equal(s1.a, s2.a) and np.array_equal(s1.b, s2.b)
    assert len(s1) == 500
    s3 = digit_stream(d, 6, 500, burn_in=100)
    assert not np.array_equal(s1.a, s3.a)


def test_stream_burn_in_is_suffix():
    full = digit_stream(1, 3, 600, burn_in=0)
    tail = digit_stream(1, 3, 500, burn_in=100)
    assert np.array_equal(full.a[100:], tail.a) and np.array_equal(full.b[100:], tail.b)


def test_stream_abort_injection():
    # 1/z = 3.5 sits on a cell wall, so this start aborts at the first step
    wall = 1 / 3.5
    s = digit_stream(1, 7, 200, burn_in=0, fault_starts=[wall, wall])
    assert s.n_discarded == 2 and len(s) == 200
    clean = digit_stream(1, 7, 200, burn_in=0)
    assert clean.n_discarded == 0
    assert np.array_equal(clean.a, s.a)


def test_first_digit_law():
    # n=1, burn_in=0 over many replicates samples a_1 under Lebesgue measure
    firsts = [digit_stream(1, 9, 1, burn_in=0, rep=r).norms[0] for r in range(3000)]
    assert min(firsts) >= 2  # no unit digits for d=1
    frac_large = np.mean(np.array(firsts) > 100)
    assert 0 < frac_large < 0.1


def test_discard_rate_small(d):
    n = 1000
    disc = sum(digit_stream(d, 11, 10_000, burn_in=0, rep=r).n_discarded for r in range(n))
    assert disc / n < 1e-3


def test_tail_monotone_and_bounds():
    r = tail_estimate(1, [2, 3, 5, 8, 13, 21, 34, 50], 400_000, seed=1)
    vals = [f.value for f in r.F]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    assert all(0 <= v <= 1 for v in vals)
    sc = r.scaled()
    assert np.all(sc > 1) and np.all(sc < 10)
    assert r.H.value > 0 and r.plateau_ratio >= 1


def test_tail_rejects_bad_t():
    with pytest.raises(ValueError):
        tail_estimate(1, [1.0, 5.0], 1000)


def test_bb_u_one_counts_everything():
    rep = bb_exceedance(1, 0.0, [100, 1000], 3, seed=2)
    assert [c[1] for c in rep.checkpoints] == [100, 1000]
    assert np.array_equal(np.array(rep.extra["counts"]), np.tile([100, 1000], (3, 1)))


def test_bb_counts_monotone_integer():
    rep = bb_exceedance(1, 0.4, [1000, 10_000], 4, seed=3)
    S = np.array(rep.extra["counts"])
    assert S.dtype.kind == "i" and np.all(S[:, 1] >= S[:, 0])
    assert rep.verdict in (True, False)


def test_bb_callable_matches_power():
    a = bb_exceedance(1, 0.5, [2000], 2, seed=4)
    b = bb_exceedance(1, lambda n: n ** 0.5, [2000], 2, seed=4)
    assert a.extra["counts"] == b.extra["counts"]


def test_log_q_exact_vs_float(d):
    s = digit_stream(d, 12, 3000)
    ex = log_abs_q_exact(d, s.a, s.b)
    fl = log_abs_q_float(d, s.a, s.b)
    assert abs(ex - fl) < 1e-8 * ex


def test_levy_small(d):
    r = levy_estimate(d, 1000, 8, seed=13)
    assert r.method_a.value > r.lower_bound > 0
    assert r.method_b.value > r.lower_bound
    assert abs(r.method_a.value - r.method_b.value) < 1e-3
    assert r.L == pytest.approx(math.exp(r.method_a.value))
    assert abs(r.growth_fit - r.method_a.value) < 0.05


def test_levy_rejects_short():
    with pytest.raises(ValueError):
        levy_estimate(1, 100, 2)


def test_khinchine_small(d):
    r = khinchine_estimate(d, 1000, 8, seed=14)
    assert r.estimate.value > 0 and math.isfinite(r.K)


def test_khinchine_synthetic_units():
    assert khinchine_mean(np.ones(100, dtype=np.int64)) == 0.0


def test_loglaw():
    rep = loglaw_profile(1, 20_000, 4, seed=15)
    assert all(c[1] >= 0 for c in rep.checkpoints)
    alltime = np.array(rep.extra["alltime_max"])
    assert np.all(np.diff(alltime, axis=1) >= 0)


def test_cylinder_large_digit_window():
    lo, hi = load_criteria()["cylinder"]["window"]
    for a in (element(1, 4), element(1, 6, 2)):
        e = cylinder_measure([a], 1, 400_000, seed=16)
        assert lo <= e.value * abs(a) ** 4 <= hi
        assert 0 <= e.value <= 1


def test_inadmissible_unit_digit():
    with pytest.raises(InadmissibleWord):
        check_admissible([element(1, 1)], 1)
    with pytest.raises(InadmissibleWord):
        check_admissible([], 1)
    check_admissible([element(1, 1, 1)], 1)
    check_admissible([element(1, 5), element(1, -4, 3)], 1)


def test_mixing_lag0_positive():
    m = mixing_probe([element(1, 2)], [element(1, 2)], range(0, 8), 200_000, seed=18, d=1)
    assert m.lag0 > 0
    late = [abs(c) <= 3 * s + 1e-12 for c, s in zip(m.cov[5:], m.stderr[5:])]
    assert m.status == "NoDecayDetected" or (m.rho is not None and m.rho < 1) or all(late)


def test_mixing_large_gap_independent():
    m = mixing_probe([element(1, 3)], [element(1, 2, 1)], [30, 40], 300_000, seed=19, d=1)
    for c, s in zip(m.cov, m.stderr):
        assert abs(c) <= 3 * s + 1e-9


def test_targets_separation():
    with pytest.raises(SeparationViolated):
        Targets(times=np.array([1, 1, 3]), thresholds=np.ones(3)).check_separation()
    w = (element(1, 3), element(1, 3))
    with pytest.raises(SeparationViolated):
        Targets(times=np.array([0, 1]), words=(w, w)).check_separation()


def test_target_run_small():
    t = threshold_targets(0.4, 2000)
    rep = shrinking_target_run(t, [200, 2000], 20, seed=20, kappa=10)
    assert rep.verdict is True
    assert all(isinstance(v, int) for row in rep.extra["counts"] for v in row)


def test_target_words_match_thresholds():
    # words of length 1 reproduce the threshold count for a single fixed digit
    J = 300
    times = 2 * np.arange(1, J + 1)
    w = (element(1, 2),)
    rep = shrinking_target_run(Targets(times=times, words=(w,) * J), [J], 5, seed=21)
    s = digit_stream(1, 21, int(times[-1]) + 1, burn_in=0, rep=0)
    want = int(((s.a[times] == 2) & (s.b[times] == 0)).sum())
    assert rep.extra["counts"][0][0] == want


def test_parallel_equals_serial():
    a = bb_exceedance(1, 0.4, [1000, 5000], 6, seed=22, workers=1)
    b = bb_exceedance(1, 0.4, [1000, 5000], 6, seed=22, workers=3)
    assert a.to_dict() == b.to_dict()
    k1 = khinchine_estimate(1, 1000, 6, seed=23, workers=1)
    k2 = khinchine_estimate(1, 1000, 6, seed=23, workers=4)
    assert k1 == k2


def test_criteria_file_present():
    c = load_criteria()
    assert c["target"]["kappa"] > 0 and "dim" in c


def test_mixing_no_hits_is_not_a_fit():
    m = mixing_probe([element(1, 2)], [element(1, 1, 1), element(1, 3)], range(0, 4), 20_000, seed=3, d=1)
    assert m.status == "NoDecayDetected" and m.rho is None
