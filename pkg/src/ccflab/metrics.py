"""Monte Carlo estimators for the almost-everywhere laws of T_d.

Every estimator samples certified double-precision orbits from Lebesgue-random
starts in I_d.  Replicate r of an experiment with seed s draws its starts from
SeedSequence([s, r]), so results depend only on (config, seed) and never on
how replicates are scheduled across threads.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence

import numpy as np

from ._kernel import HIT_ZERO, RUNNING, run_orbit
from .estimate import Estimate, ExperimentReport
from .geometry import build_domain, sample_uniform
from .ifs import InadmissibleWord, compute_A0
from .ring import RingElement, check_d, norm_form, omega

__all__ = [
    "Estimate", "ExperimentReport", "DigitStream", "digit_stream", "tail_estimate",
    "bb_exceedance", "levy_estimate", "khinchine_estimate", "loglaw_profile",
    "cylinder_measure", "shrinking_target_run", "mixing_probe", "load_criteria",
    "SeparationViolated", "InadmissibleWord",
]

DEFAULT_BURN_IN = 1000
MAX_RESTARTS = 1000


class SeparationViolated(ValueError):
    pass


# --- criteria ----------------------------------------------------------------------------

def load_criteria(path: str | None = None) -> dict:
    """Frozen pass thresholds: CCF_CRITERIA if set, else the packaged file."""
    path = path or os.environ.get("CCF_CRITERIA")
    if path:
        with open(path) as fh:
            return json.load(fh)
    return _packaged_criteria()


@lru_cache(maxsize=None)
def _packaged_criteria() -> dict:
    try:
        return json.loads(resources.files("ccflab").joinpath("data/criteria.json").read_text())
    except (FileNotFoundError, OSError):
        return {}


# --- orbit sampling ---------------------------------------------------------------------

def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))


@dataclass(frozen=True)
class DigitStream:
    """n certified digits (basis coordinates) of one orbit, after burn-in."""

    d: int
    a: np.ndarray
    b: np.ndarray
    logz: np.ndarray  # log|T^j z| for the point each digit was read from
    n_discarded: int
    start: complex

    def __len__(self):
        return len(self.a)

    @property
    def norms(self) -> np.ndarray:
        return norm_form(self.d, self.a, self.b)

    @property
    def moduli(self) -> np.ndarray:
        return np.sqrt(self.norms.astype(float))

    def digits(self) -> list[RingElement]:
        return [RingElement(self.d, int(x), int(y)) for x, y in zip(self.a, self.b)]


def digit_stream(d: int, seed: int, n: int, burn_in: int = DEFAULT_BURN_IN, rep: int = 0,
                 fault_starts: Sequence[complex] = ()) -> DigitStream:
    """Digits of a certified orbit from a uniform start; aborted orbits restart and are counted.

    fault_starts are tried first (fault injection for tests); after them, points come from
    the (seed, rep) substream.
    """
    check_d(d)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = replicate_rng(seed, rep)
    discarded = 0
    pending = list(fault_starts)
    for _ in range(MAX_RESTARTS):
        z0 = complex(pending.pop(0)) if pending else complex(sample_uniform(d, rng, 1)[0])
        status, a, b, logz, _ = run_orbit(z0, d, n, burn=burn_in)
        if status == RUNNING:
            return DigitStream(d, a, b, logz, discarded, z0)
        discarded += 1
    raise RuntimeError(f"{MAX_RESTARTS} consecutive aborted orbits")


def _map(fn: Callable[[int], object], reps: int, workers: int = 1) -> list:
    if workers <= 1 or reps <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(reps)))


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


# --- tail ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class TailResult:
    t_values: tuple[float, ...]
    F: tuple[Estimate, ...]
    H: Estimate
    plateau: tuple[float, float]
    plateau_ratio: float
    n_discarded: int

    def scaled(self) -> np.ndarray:
        return np.array([t * t * f.value for t, f in zip(self.t_values, self.F)])


def tail_estimate(d: int, t_values: Sequence[float], n_samples: int, seed: int = 0,
                  orbit_len: int = 10_000, burn_in: int = DEFAULT_BURN_IN,
                  plateau: tuple[float, float] = (5.0, 50.0), workers: int = 1) -> TailResult:
    """F(t) = frequency of |digit| > t; H_d as the plateau median of t^2 F(t)."""
    t = np.asarray(sorted(t_values), dtype=float)
    if t.size == 0 or t.min() < 2 or t.max() > 100:
        raise ValueError("t_values must lie in [2, 100]")
    n_orbits = max(1, math.ceil(n_samples / orbit_len))

    def one(r):
        s = digit_stream(d, seed, orbit_len, burn_in, rep=r)
        nm = np.sort(s.norms)
        # |a| > t  <=>  N(a) > t^2
        above = nm.size - np.searchsorted(nm, t * t, side="right")
        return above, s.n_discarded

    out = _map(one, n_orbits, workers)
    counts = np.array([c for c, _ in out], dtype=np.int64)
    disc = sum(k for _, k in out)
    total = n_orbits * orbit_len
    F_hat = counts.sum(axis=0) / total
    per = counts / orbit_len
    se = per.std(axis=0, ddof=1) / math.sqrt(n_orbits) if n_orbits > 1 else np.full(t.size, math.nan)
    F = tuple(Estimate(float(v), float(e), total, disc, seed, "orbit-frequency")
              for v, e in zip(F_hat, se))
    mask = (t >= plateau[0]) & (t <= plateau[1])
    if not mask.any():
        raise ValueError("no t value inside the plateau window")
    sc = t[mask] ** 2 * F_hat[mask]
    sc_se = t[mask] ** 2 * se[mask]
    k = int(np.argsort(sc)[len(sc) // 2])
    H = Estimate(float(np.median(sc)), float(sc_se[k]), total, disc, seed, "plateau-median")
    ratio = float(sc.max() / sc.min()) if sc.min() > 0 else math.inf
    return TailResult(tuple(t.tolist()), F, H, plateau, ratio, disc)


# --- Borel-Bernstein ------------------------------------------------------------------------

def _u_array(u_spec, n: int) -> np.ndarray:
    idx = np.arange(1, n + 1, dtype=float)
    if isinstance(u_spec, (int, float)):
        return idx ** float(u_spec)
    if isinstance(u_spec, str) and u_spec.startswith("power:"):
        return idx ** float(u_spec.split(":", 1)[1])
    if callable(u_spec):
        return np.asarray([float(u_spec(int(k))) for k in idx])
    raise ValueError(f"bad u_spec {u_spec!r}")


def bb_exceedance(d: int, u_spec, checkpoints: Sequence[int], reps: int, seed: int = 0,
                  workers: int = 1, factor: float | None = None, fraction: float = 0.9,
                  case: str | None = None) -> ExperimentReport:
    """Counts S_N = #{n <= N : |a_n| >= u_n} per replicate at each checkpoint.

    u_spec is a power exponent theta (u_n = n^theta), "power:<theta>", or a callable.
    The verdict follows the case: "divergent" needs S_last / S_first >= factor in at
    least `fraction` of replicates, "convergent" needs identical counts over the last
    two checkpoints in at least `fraction` of replicates.
    """
    cps = sorted(int(c) for c in checkpoints)
    N = cps[-1]
    u2 = _u_array(u_spec, N) ** 2
    idx = np.array(cps) - 1

    def one(r):
        s = digit_stream(d, seed, N, burn_in=0, rep=r)
        hit = s.norms >= u2 * (1 - 1e-12)
        return np.cumsum(hit)[idx], s.n_discarded

    out = _map(one, reps, workers)
    S = np.array([c for c, _ in out], dtype=np.int64)
    disc = sum(k for _, k in out)
    theta = u_spec if isinstance(u_spec, (int, float)) else None
    if case is None and theta is not None:
        case = "divergent" if theta < 0.5 else "convergent"
    rep = ExperimentReport("bb", criterion=case or "",
                           config={"d": d, "u": str(u_spec), "checkpoints": cps, "reps": reps,
                                   "seed": seed})
    for j, n in enumerate(cps):
        col = S[:, j]
        rep.add(n, float(np.median(col)), (float(np.quantile(col, 0.1)), float(np.quantile(col, 0.9))))
    rep.extra["counts"] = S.tolist()
    rep.extra["n_discarded"] = disc
    if case == "divergent" and len(cps) >= 2:
        f = 5.0 if factor is None else factor
        ok = S[:, -1] >= f * np.maximum(S[:, 0], 1)
        ok &= S[:, 0] > 0
        rep.extra["pass_fraction"] = float(ok.mean())
        rep.extra["ratio_median"] = float(np.median(S[:, -1] / np.maximum(S[:, 0], 1)))
        rep.verdict = bool(ok.mean() >= fraction)
    elif case == "convergent" and len(cps) >= 2:
        ok = S[:, -1] == S[:, -2]
        rep.extra["pass_fraction"] = float(ok.mean())
        rep.verdict = bool(ok.mean() >= fraction)
    return rep


# --- Levy and Khinchine -------------------------------------------------------------------

EXACT_Q_LIMIT = 10_000


def log_abs_q_exact(d: int, a: np.ndarray, b: np.ndarray) -> float:
    """log|Q_n| from exact integer recursion Q_k = a_k Q_{k-1} + Q_{k-2}."""
    from .ring import mul_coords

    qp = (0, 0)
    qc = (1, 0)
    for x, y in zip(a.tolist(), b.tolist()):
        m = mul_coords(d, x, y, qc[0], qc[1])
        qp, qc = qc, (m[0] + qp[0], m[1] + qp[1])
    return 0.5 * math.log(norm_form(d, qc[0], qc[1]))


def log_abs_q_float(d: int, a: np.ndarray, b: np.ndarray, every: int = 0):
    """log|Q_n| by float recursion with log-magnitude renormalisation.

    With every > 0 also returns log|Q_k| at k = every, 2*every, ...
    """
    digits = (a.astype(float) + b.astype(float) * omega(d)).tolist()
    qp, qc, acc = 0j, 1 + 0j, 0.0
    trace = []
    for k, z in enumerate(digits, 1):
        qp, qc = qc, z * qc + qp
        m = abs(qc)
        if m > 1e100:
            qp, qc = qp / m, qc / m
            acc += math.log(m)
        if every and k % every == 0:
            trace.append(acc + math.log(abs(qc)))
    val = acc + math.log(abs(qc))
    return (val, np.array(trace)) if every else val


@dataclass(frozen=True)
class LevyResult:
    method_a: Estimate
    method_b: Estimate
    growth_fit: float
    lower_bound: float

    @property
    def L(self) -> float:
        return math.exp(self.method_a.value)

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.method_a.stderr, self.method_b.stderr)

    @property
    def agree(self) -> bool:
        return abs(self.method_a.value - self.method_b.value) <= 2 * self.combined_stderr


def levy_estimate(d: int, n: int, reps: int, seed: int = 0, burn_in: int = DEFAULT_BURN_IN,
                  workers: int = 1) -> LevyResult:
    """beta_d by Birkhoff averages of -log|z| (A) and by (1/n) log|Q_n| (B)."""
    if n < 1000:
        raise ValueError("n must be >= 1000")

    def one(r):
        s = digit_stream(d, seed, n, burn_in, rep=r)
        A = -float(np.sum(s.logz)) / n
        if n <= EXACT_Q_LIMIT:
            B = log_abs_q_exact(d, s.a, s.b) / n
            _, tr = log_abs_q_float(d, s.a[: min(n, 2000)], s.b[: min(n, 2000)], every=100)
        else:
            B, tr = log_abs_q_float(d, s.a, s.b, every=100)
            B /= n
        ks = 100 * np.arange(1, len(tr) + 1)
        slope = float(np.polyfit(ks, tr, 1)[0]) if len(tr) >= 2 else math.nan
        return A, B, slope, s.n_discarded

    out = _map(one, reps, workers)
    arr = np.array([o[:3] for o in out])
    disc = sum(o[3] for o in out)
    ma, sa = _mean_se(arr[:, 0])
    mb, sb = _mean_se(arr[:, 1])
    method_b = "exact-Q" if n <= EXACT_Q_LIMIT else "float-log-Q"
    return LevyResult(
        Estimate(ma, sa, n * reps, disc, seed, "birkhoff-log"),
        Estimate(mb, sb, n * reps, disc, seed, method_b),
        float(np.mean(arr[:, 2])),
        -math.log(build_domain(d).R),
    )


@dataclass(frozen=True)
class KhinchineResult:
    estimate: Estimate
    half: Estimate

    @property
    def K(self) -> float:
        return math.exp(self.estimate.value)

    @property
    def cauchy_gap(self) -> float:
        return abs(self.estimate.value - self.half.value)


def khinchine_mean(norms: np.ndarray) -> float:
    return float(np.mean(0.5 * np.log(norms.astype(float))))


def khinchine_estimate(d: int, n: int, reps: int, seed: int = 0, burn_in: int = DEFAULT_BURN_IN,
                       workers: int = 1) -> KhinchineResult:
    """kappa_d = mean of (1/n) sum log|a_j|, with the running average at n/2 for comparison."""
    if n < 1000:
        raise ValueError("n must be >= 1000")

    def one(r):
        s = digit_stream(d, seed, n, burn_in, rep=r)
        nm = s.norms
        return khinchine_mean(nm), khinchine_mean(nm[: n // 2]), s.n_discarded

    out = _map(one, reps, workers)
    full = [o[0] for o in out]
    half = [o[1] for o in out]
    disc = sum(o[2] for o in out)
    m, s = _mean_se(full)
    mh, sh = _mean_se(half)
    return KhinchineResult(Estimate(m, s, n * reps, disc, seed, "birkhoff-log-digit"),
                           Estimate(mh, sh, (n // 2) * reps, disc, seed, "birkhoff-log-digit-half"))


# --- log laws -------------------------------------------------------------------------------

def loglaw_profile(d: int, N: int, reps: int, seed: int = 0, workers: int = 1,
                   window: tuple[float, float] | None = None) -> ExperimentReport:
    """Running maxima of log|a_n| / log n over n in [M/10, M] for M = N/4, N/2, N."""
    cps = [N // 4, N // 2, N]

    def one(r):
        s = digit_stream(d, seed, N, burn_in=0, rep=r)
        la = 0.5 * np.log(s.norms.astype(float))
        n = np.arange(1, N + 1, dtype=float)
        ln = np.log(np.maximum(n, 2.0))
        first = la / ln
        first[0] = 0.0
        second = (la - 0.5 * ln) / np.log(np.maximum(ln, math.e))
        rows = []
        for M in cps:
            lo = max(M // 10, 2) - 1
            rows.append((float(first[lo:M].max()), float(second[lo:M].max()),
                         float(first[1:M].max())))
        return rows

    out = np.array(_map(one, reps, workers))  # reps x checkpoints x 3
    rep = ExperimentReport("loglaw", criterion="limit 1/2",
                           config={"d": d, "N": N, "reps": reps, "seed": seed})
    for j, M in enumerate(cps):
        col = out[:, j, 0]
        rep.add(M, float(np.median(col)), (float(np.quantile(col, 0.1)), float(np.quantile(col, 0.9))))
    rep.extra["second_order_median"] = [float(np.median(out[:, j, 1])) for j in range(len(cps))]
    rep.extra["alltime_max"] = out[:, :, 2].tolist()
    if window is not None:
        rep.verdict = bool(window[0] <= rep.checkpoints[-1][1] <= window[1])
    return rep


# --- cylinders and mixing -----------------------------------------------------------------

def check_admissible(word: Sequence[RingElement], d: int, n_search: int = 4000, seed: int = 0) -> None:
    """Raise InadmissibleWord unless the cylinder of word is shown to be nonempty."""
    if not word:
        raise InadmissibleWord("empty word")
    dom = build_domain(d)
    floor = 1 / dom.R - dom.R
    for k, a in enumerate(word):
        if a.d != d or a.is_zero() or abs(a) < floor - 1e-12:
            raise InadmissibleWord(f"letter {k + 1} ({a}) is below the first-digit modulus floor")
    A0 = compute_A0(d)
    if all(abs(a) >= A0 for a in word):
        return  # full shift on the large-digit alphabet
    # search: code interior sample points through the word and check their digits
    rng = np.random.default_rng(seed)
    base = sample_uniform(d, rng, n_search) * 0.999
    k = len(word)
    for u in base:
        z = complex(u)
        for a in reversed(word):
            z = 1 / (z + complex(a))
        if dom.wall_margin(z) <= 0:
            continue
        status, aa, bb, _, _ = run_orbit(z, d, k)
        if status in (RUNNING, HIT_ZERO) and len(aa) == k and all(
                (int(x), int(y)) == (w.a, w.b) for x, y, w in zip(aa, bb, word)):
            return
    raise InadmissibleWord(f"no point of the cylinder of {list(word)} found")


def _word_indicator(s: DigitStream, word: Sequence[RingElement]) -> np.ndarray:
    k = len(word)
    L = len(s) - k + 1
    if L <= 0:
        return np.zeros(0, dtype=bool)
    ind = np.ones(L, dtype=bool)
    for i, w in enumerate(word):
        ind &= (s.a[i:i + L] == w.a) & (s.b[i:i + L] == w.b)
    return ind


def cylinder_measure(word: Sequence[RingElement], d: int, n_samples: int, seed: int = 0,
                     orbit_len: int = 10_000, burn_in: int = DEFAULT_BURN_IN,
                     workers: int = 1) -> Estimate:
    """Birkhoff frequency of the cylinder <word>."""
    word = list(word)
    check_admissible(word, d)
    n_orbits = max(1, math.ceil(n_samples / orbit_len))

    def one(r):
        s = digit_stream(d, seed, orbit_len + len(word) - 1, burn_in, rep=r)
        return int(_word_indicator(s, word).sum()), s.n_discarded

    out = _map(one, n_orbits, workers)
    per = np.array([c for c, _ in out]) / orbit_len
    m, se = _mean_se(per)
    return Estimate(m, 0.0 if math.isnan(se) else se, n_orbits * orbit_len,
                    sum(k for _, k in out), seed, "orbit-frequency")


@dataclass(frozen=True)
class MixingResult:
    gaps: tuple[int, ...]
    cov: tuple[float, ...]
    stderr: tuple[float, ...]
    mu_b: float
    mu_c: float
    lag0: float
    rho: float | None
    status: str  # "fit" or "NoDecayDetected"


def mixing_probe(word_b: Sequence[RingElement], word_c: Sequence[RingElement],
                 gap_range: Sequence[int], n_samples: int, seed: int = 0, d: int | None = None,
                 orbit_len: int = 10_000, burn_in: int = DEFAULT_BURN_IN,
                 workers: int = 1) -> MixingResult:
    """mu(<b> cap T^-(n+k)<c>) - mu(<b>)mu(<c>) over gaps n, with k = len(b), and a decay fit.

    lag0 is mu(<b> cap <c>) - mu(<b>)mu(<c>) (no shift), positive when b = c.
    """
    wb, wc = list(word_b), list(word_c)
    d = wb[0].d if d is None else d
    check_admissible(wb, d)
    check_admissible(wc, d)
    gaps = [int(g) for g in gap_range]
    k = len(wb)
    # keep at least 20 replicate orbits so the stderr means something
    L = max(100, min(orbit_len, n_samples // 20))
    n_orbits = max(2, math.ceil(n_samples / L))
    max_shift = k + max(gaps)

    def one(r):
        s = digit_stream(d, seed, L + max_shift + len(wc), burn_in, rep=r)
        X = _word_indicator(s, wb)[:L].astype(float)
        Y = _word_indicator(s, wc).astype(float)
        joint = [float(np.mean(X * Y[k + g: k + g + L])) for g in gaps]
        same = float(np.mean(X * Y[:L]))
        return float(X.mean()), float(Y[:L].mean()), joint, same

    out = _map(one, n_orbits, workers)
    mb = float(np.mean([o[0] for o in out]))
    mc = float(np.mean([o[1] for o in out]))
    J = np.array([o[2] for o in out])
    cov_per = J - mb * mc
    cov = cov_per.mean(axis=0)
    se = cov_per.std(axis=0, ddof=1) / math.sqrt(n_orbits)
    lag0 = float(np.mean([o[3] for o in out]) - mb * mc)
    # a zero stderr means no joint hits at all, not a sharp signal
    sig = (se > 0) & (np.abs(cov) > 3 * se)
    rho, status = None, "NoDecayDetected"
    if sig.sum() >= 2:
        g = np.array(gaps)[sig]
        slope = float(np.polyfit(g, np.log(np.abs(cov[sig])), 1)[0])
        rho = float(min(max(math.exp(slope), 0.0), 1.0))
        status = "fit"
    return MixingResult(tuple(gaps), tuple(cov.tolist()), tuple(se.tolist()), mb, mc, lag0,
                        rho, status)


# --- shrinking targets --------------------------------------------------------------------------

@dataclass(frozen=True)
class Targets:
    """C_j, j = 1..J, as first-digit thresholds |a| >= u_j or as cylinder words."""

    times: np.ndarray  # n_j (0-based: T^{n_j} z in C_j reads digits n_j+1, ...)
    thresholds: np.ndarray | None = None
    words: tuple[tuple[RingElement, ...], ...] | None = None

    def lengths(self) -> np.ndarray:
        if self.words is None:
            return np.ones(len(self.times), dtype=np.int64)
        return np.array([len(w) for w in self.words], dtype=np.int64)

    def check_separation(self) -> None:
        t, k = self.times, self.lengths()
        bad = np.nonzero(t[1:] < t[:-1] + k[:-1])[0]
        if bad.size:
            j = int(bad[0])
            raise SeparationViolated(f"n_{j + 2} = {t[j + 1]} < n_{j + 1} + k_{j + 1} = {t[j] + k[j]}")


def threshold_targets(theta: float, J: int, spacing: int = 2) -> Targets:
    j = np.arange(1, J + 1, dtype=float)
    return Targets(times=(spacing * np.arange(1, J + 1)).astype(np.int64), thresholds=j ** theta)


def shrinking_target_run(targets: Targets, checkpoints: Sequence[int], reps: int, d: int = 1,
                         seed: int = 0, workers: int = 1, kappa: float | None = None,
                         case: str = "divergent") -> ExperimentReport:
    """S_N = #{j <= N : T^{n_j} z in C_j} across replicates; variance-to-mean per checkpoint."""
    targets.check_separation()
    cps = sorted(int(c) for c in checkpoints)
    J = cps[-1]
    if J > len(targets.times):
        raise ValueError("checkpoint beyond the number of targets")
    times = targets.times[:J]
    length = int(times[-1] + targets.lengths()[:J].max())
    idx = np.array(cps) - 1

    def one(r):
        s = digit_stream(d, seed, length, burn_in=0, rep=r)
        if targets.thresholds is not None:
            u2 = targets.thresholds[:J] ** 2
            hit = s.norms[times] >= u2 * (1 - 1e-12)
        else:
            hit = np.array([all(int(s.a[t + i]) == w.a and int(s.b[t + i]) == w.b
                                for i, w in enumerate(word))
                            for t, word in zip(times, targets.words[:J])])
        return np.cumsum(hit)[idx], s.n_discarded

    out = _map(one, reps, workers)
    S = np.array([c for c, _ in out], dtype=np.int64)
    rep = ExperimentReport("target", criterion=case,
                           config={"d": d, "checkpoints": cps, "reps": reps, "seed": seed})
    ratios = []
    for j, n in enumerate(cps):
        col = S[:, j].astype(float)
        mean = float(col.mean())
        var = float(col.var(ddof=1)) if reps > 1 else math.nan
        ratio = var / mean if mean > 0 else math.nan
        ratios.append(ratio)
        rep.add(n, mean, (var, ratio))
    rep.extra["var_over_mean"] = ratios
    rep.extra["counts"] = S.tolist()
    rep.extra["n_discarded"] = sum(k for _, k in out)
    if case == "divergent" and kappa is not None:
        rep.extra["kappa"] = kappa
        rep.verdict = bool(all(r <= kappa for r in ratios if not math.isnan(r)))
    elif case == "convergent":
        ok = S[:, -1] == S[:, -2]
        rep.extra["pass_fraction"] = float(ok.mean())
        rep.verdict = bool(ok.mean() >= 0.9)
    return rep
