"""The large-digit conformal IFS {z -> 1/(z + alpha) : |alpha| >= A0}.

Convergence exponents of digit sets, one-step pressure brackets for the
dimension of digit-restricted sets, and the sparse-pattern constructors.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np

from .dynamics import _scaled, convergent_matrix
from .estimate import Estimate
from .geometry import build_domain, round_nearest_exact
from .ring import (
    FieldElement,
    RingElement,
    check_d,
    count_ball,
    element,
    enumerate_norm_range,
    norms_in_range,
    to_complex,
)


class TrappingViolation(AssertionError):
    def __init__(self, alpha, detail):
        self.alpha = alpha
        super().__init__(f"trapping fails for alpha={alpha}: {detail}")


class InsufficientShells(ValueError):
    pass


class CutoffTooTight(ValueError):
    pass


class HorizonExhausted(ValueError):
    pass


class ValidationFailure(AssertionError):
    def __init__(self, index, reason):
        self.index = index
        self.reason = reason
        super().__init__(f"validation failed at index {index}: {reason}")


class PrecisionLoss(UserWarning):
    pass


class InadmissibleWord(ValueError):
    pass


# --- digit sets --------------------------------------------------------------------------

def _iroot(n: int, p: int) -> int:
    """floor(n ** (1/p)) for n >= 0."""
    if n < 1:
        return 0
    r = int(round(n ** (1.0 / p)))
    while r ** p > n:
        r -= 1
    while (r + 1) ** p <= n:
        r += 1
    return r


@dataclass(frozen=True)
class DigitSet:
    """A subset S of O_d (0 is never a digit and is excluded everywhere).

    kind is one of "full", "integers", "powers", "threshold", "explicit".
    """

    kind: str
    d: int
    p: int | None = None
    base: DigitSet | None = None
    min_norm: int = 0  # threshold: members satisfy N(alpha) >= min_norm
    elements: tuple[RingElement, ...] = ()

    # constructors
    @classmethod
    def full(cls, d):
        return cls("full", check_d(d))

    @classmethod
    def integers(cls, d):
        return cls("integers", check_d(d))

    @classmethod
    def powers(cls, d, p: int):
        if p < 1:
            raise ValueError("p must be a positive integer")
        return cls("powers", check_d(d), p=int(p))

    @classmethod
    def threshold(cls, base: DigitSet, A0: float):
        return cls("threshold", base.d, base=base, min_norm=math.ceil(A0 * A0 - 1e-9))

    @classmethod
    def explicit(cls, d, elements: Iterable[RingElement]):
        els = tuple(sorted({e for e in elements if not e.is_zero()}, key=RingElement.sort_key))
        return cls("explicit", check_d(d), elements=els)

    @classmethod
    def parse(cls, spec: str, d: int) -> DigitSet:
        """'full', 'integers', 'powers:<p>', 'file:<path>' (JSON list of [a, b])."""
        if spec in ("full", "ring"):
            return cls.full(d)
        if spec in ("integers", "Z", "rational"):
            return cls.integers(d)
        if spec.startswith("powers:"):
            return cls.powers(d, int(spec.split(":", 1)[1]))
        if spec.startswith("file:"):
            with open(spec[5:]) as fh:
                pairs = json.load(fh)
            return cls.explicit(d, [element(d, a, b) for a, b in pairs])
        raise ValueError(f"unknown digit set {spec!r}")

    @property
    def name(self) -> str:
        if self.kind == "powers":
            return f"powers:{self.p}"
        if self.kind == "threshold":
            return f"{self.base.name}>={math.sqrt(self.min_norm):g}"
        return self.kind

    @property
    def is_infinite(self) -> bool:
        if self.kind == "explicit":
            return False
        if self.kind == "threshold":
            return self.base.is_infinite
        return True

    def contains(self, alpha: RingElement) -> bool:
        if alpha.d != self.d or alpha.is_zero():
            return False
        if self.kind == "full":
            return True
        if self.kind == "integers":
            return alpha.b == 0
        if self.kind == "powers":
            return alpha.b == 0 and alpha.a > 0 and _iroot(alpha.a, self.p) ** self.p == alpha.a
        if self.kind == "threshold":
            return alpha.norm() >= self.min_norm and self.base.contains(alpha)
        return alpha in set(self.elements)

    __contains__ = contains

    @property
    def tau_analytic(self) -> Fraction | None:
        return tau_analytic(self)

    def norms_in(self, lo: int, hi: int) -> np.ndarray:
        """Sorted int64 array of N(alpha) for members with lo <= N(alpha) < hi (with multiplicity)."""
        lo = max(int(lo), 1)
        hi = int(hi)
        if hi <= lo:
            return np.zeros(0, dtype=np.int64)
        if self.kind == "full":
            return norms_in_range(self.d, lo, hi)
        if self.kind == "integers":
            n = np.arange(math.isqrt(lo - 1) + 1, math.isqrt(hi - 1) + 1, dtype=np.int64)
            return np.repeat(n * n, 2)
        if self.kind == "powers":
            # N(n^p) = n^(2p)
            n = np.arange(_iroot(lo - 1, 2 * self.p) + 1, _iroot(hi - 1, 2 * self.p) + 1, dtype=object)
            return np.array([int(k) ** (2 * self.p) for k in n], dtype=np.int64)
        if self.kind == "threshold":
            return self.base.norms_in(max(lo, self.min_norm), hi)
        ns = np.array(sorted(e.norm() for e in self.elements), dtype=np.int64)
        return ns[(ns >= lo) & (ns < hi)]

    def elements_in(self, lo: int, hi: int) -> list[RingElement]:
        """Members with lo <= N(alpha) < hi, sorted by the tie-break order."""
        lo = max(int(lo), 1)
        if self.kind == "full":
            return enumerate_norm_range(self.d, lo, hi)
        if self.kind == "integers":
            out = []
            for n in range(math.isqrt(lo - 1) + 1, math.isqrt(hi - 1) + 1):
                out += [RingElement(self.d, -n, 0), RingElement(self.d, n, 0)]
            return out
        if self.kind == "powers":
            return [RingElement(self.d, k ** self.p, 0)
                    for k in range(_iroot(lo - 1, 2 * self.p) + 1, _iroot(hi - 1, 2 * self.p) + 1)]
        if self.kind == "threshold":
            return self.base.elements_in(max(lo, self.min_norm), hi)
        return [e for e in self.elements if lo <= e.norm() < hi]

    def shell(self, R: float) -> list[RingElement]:
        """Members with R <= |alpha| < 2R."""
        lo = math.ceil(R * R - 1e-9) if not float(R).is_integer() else int(R) ** 2
        hi = 4 * lo if float(R).is_integer() else math.ceil(4 * R * R - 1e-9)
        return self.elements_in(lo, hi)

    def count_le(self, n: int) -> int:
        """#{alpha in S, alpha != 0 : N(alpha) <= n}."""
        n = int(n)
        if n < 1:
            return 0
        if self.kind == "full":
            return count_ball(self.d, n) - 1
        if self.kind == "integers":
            return 2 * math.isqrt(n)
        if self.kind == "powers":
            return _iroot(n, 2 * self.p)
        if self.kind == "threshold":
            return max(0, self.base.count_le(n) - self.base.count_le(self.min_norm - 1))
        return sum(1 for e in self.elements if e.norm() <= n)

    def count_modulus_le(self, R: float) -> int:
        if R < 1:
            return 0
        return self.count_le(math.floor(R * R + 1e-9))


def tau_analytic(s: DigitSet) -> Fraction | None:
    if s.kind == "full":
        return Fraction(2)
    if s.kind == "integers":
        return Fraction(1)
    if s.kind == "powers":
        return Fraction(1, s.p)
    if s.kind == "threshold":
        return tau_analytic(s.base)
    if s.kind == "explicit":
        return Fraction(0)
    return None


# --- A0, constants, alphabet ------------------------------------------------------------------

def compute_A0(d: int, gamma_factor: float = 1.0) -> int:
    """Smallest integer A0 meeting the explicit trapping conditions.

    gamma_factor <= 1 tightens the contraction requirement to gamma <= gamma_factor / 4.
    """
    dom = build_domain(d)
    r, R = dom.r, dom.R
    A = 1
    while True:
        if (A > R + 1 / r and A > 2 * R and 1 / (A - 2 * R) <= 2 * R
                and (A - R) ** -2 <= gamma_factor / 4):
            return A
        A += 1


def ifs_constants(d: int, A0: int | None = None) -> dict:
    R = build_domain(d).R
    A0 = compute_A0(d) if A0 is None else A0
    return {
        "A0": A0,
        "C1": (1 + R) ** -2,
        "C2": (1 - R / A0) ** -2,
        "gamma": (A0 - R) ** -2,
    }


def c_diam_cap(d: int, A0: int | None = None) -> float:
    """Analytic bound on diam h_w(I_d) / |Dh_w(0)| over words with letters of modulus >= A0.

    With q = Q_{k-1}/Q_k one has |q| <= 1/(A0 - 1) and
    diam h_w(I_d) = |Dh_w(0)| * max |z - z'| / (|1 + q z||1 + q z'|).
    """
    dom = build_domain(d)
    A0 = compute_A0(d) if A0 is None else A0
    qmax = 1 / (A0 - 1)
    up = dom.diameter / (1 - qmax * dom.R) ** 2
    lo = dom.diameter / (1 + qmax * dom.R) ** 2
    return max(up, 1 / lo, 1.0)


@lru_cache(maxsize=None)
def _frozen_constants() -> dict:
    try:
        text = resources.files("ccflab").joinpath("data/constants.json").read_text()
    except (FileNotFoundError, OSError):
        return {}
    return json.loads(text)


def frozen_c_diam(d: int) -> float:
    """C_diam frozen from the pilot (with margin), falling back to the analytic cap."""
    rec = _frozen_constants().get(str(d))
    if rec and "C_diam" in rec:
        return float(rec["C_diam"])
    return c_diam_cap(d)


@dataclass(frozen=True)
class IfsAlphabet:
    d: int
    A0: int
    B: float | None
    members: tuple[RingElement, ...] | None
    C1: float
    C2: float
    gamma: float
    digit_set: DigitSet | None = None

    @classmethod
    def build(cls, d: int, A0: int | None = None, B: float | None = None,
              digit_set: DigitSet | None = None) -> IfsAlphabet:
        A0 = compute_A0(d) if A0 is None else A0
        c = ifs_constants(d, A0)
        base = digit_set or DigitSet.full(d)
        members = None
        if B is not None:
            members = tuple(base.elements_in(A0 * A0, math.floor(B * B + 1e-9) + 1))
        return cls(d, A0, B, members, c["C1"], c["C2"], c["gamma"], digit_set)

    def contains(self, alpha: RingElement) -> bool:
        if alpha.norm() < self.A0 * self.A0:
            return False
        if self.B is not None and alpha.norm() > self.B * self.B + 1e-9:
            return False
        return self.digit_set is None or self.digit_set.contains(alpha)

    def sample_words(self, rng: np.random.Generator, n_words: int, length: int,
                     max_modulus: float = 12.0) -> list[tuple[RingElement, ...]]:
        """Random words with letters uniform on members up to max_modulus."""
        base = self.digit_set or DigitSet.full(self.d)
        hi = max_modulus if self.B is None else min(max_modulus, self.B)
        pool = base.elements_in(self.A0 * self.A0, math.floor(hi * hi) + 1)
        idx = rng.integers(0, len(pool), size=(n_words, length))
        return [tuple(pool[i] for i in row) for row in idx]


# --- trapping and cylinder geometry ---------------------------------------------------------

def boundary_samples(d: int, per_edge: int = 48) -> np.ndarray:
    v = build_domain(d).vertices_complex
    t = np.linspace(0, 1, per_edge, endpoint=False)
    return np.concatenate([p + t * (q - p) for p, q in zip(v, np.roll(v, -1))])


@dataclass(frozen=True)
class TrappingReport:
    n_members: int
    max_image_modulus: float
    r_d: float
    min_separation_margin: float
    n_pairs_checked: int

    @property
    def ok(self) -> bool:
        return self.max_image_modulus < self.r_d and self.min_separation_margin > 0


def verify_trapping(alphabet: IfsAlphabet, n_samples: int = 1000, rng=None,
                    max_modulus: float = 40.0) -> TrappingReport:
    """Check h_alpha(I_d) in B(0, r_d) and that images of interiors are disjoint."""
    rng = np.random.default_rng(0) if rng is None else rng
    d = alphabet.d
    dom = build_domain(d)
    if alphabet.members is not None:
        members = list(alphabet.members)
    else:
        base = alphabet.digit_set or DigitSet.full(d)
        members = base.elements_in(alphabet.A0 ** 2, math.floor(max_modulus ** 2) + 1)
        # plus a modulus-stratified sample further out
        for R in (64, 256, 1024, 4096):
            sh = base.shell(R)
            if sh:
                members += [sh[i] for i in rng.integers(0, len(sh), size=min(len(sh), 8))]
    members = [m for m in members if alphabet.contains(m)]
    bd = boundary_samples(d)
    worst = 0.0
    for a in members:
        m = float(np.max(1 / np.abs(bd + complex(a))))
        if m >= dom.r:
            raise TrappingViolation(a, f"max |h_alpha| = {m:.6g} >= r_d = {dom.r:.6g}")
        worst = max(worst, m)
    # disjointness: a point of h_alpha(I°) has reciprocal in alpha + I°, so it rounds back to alpha
    from .geometry import round_with_margin, sample_uniform

    pts = sample_uniform(d, rng, n_samples)
    min_margin = math.inf
    pairs = 0
    for i, z in enumerate(pts):
        a = members[i % len(members)]
        w = 1 / (z + complex(a))
        back, margin = round_with_margin(1 / w, d)
        if back != a:
            raise TrappingViolation(a, f"image point {w!r} lands in the translate of {back}")
        b = members[(i * 7 + 3) % len(members)]
        if b != a:
            pairs += 1
            # the same point cannot be in h_b(I°): 1/w - b must leave I°
            if dom.wall_margin(1 / w - complex(b)) > 0:
                raise TrappingViolation(a, f"images of {a} and {b} overlap")
        min_margin = min(min_margin, margin)
    return TrappingReport(len(members), worst, dom.r, float(min_margin), pairs)


def _log_q_data(word: Sequence[RingElement], d: int):
    st = convergent_matrix(list(word), d)
    qp, qc = _scaled(st.Q_prev, st.Q_cur)
    q = qp / qc
    log_qc = 0.5 * math.log(st.Q_cur.norm())
    return q, log_qc


def log_measured_diameter(word: Sequence[RingElement], d: int, per_edge: int = 48) -> float:
    """log diam h_w(I_d), sampled on the boundary of I_d, computed without overflow."""
    bd = boundary_samples(d, per_edge)
    if not word:
        return math.log(build_domain(d).diameter)
    q, log_qc = _log_q_data(word, d)
    den = np.abs(1 + q * bd)
    dist = np.abs(bd[:, None] - bd[None, :]) / (den[:, None] * den[None, :])
    return math.log(float(dist.max())) - 2 * log_qc


def log_derivative_at_0(word: Sequence[RingElement], d: int) -> float:
    """log |Dh_w(0)| = -log |Q_k|^2."""
    if not word:
        return 0.0
    return -math.log(convergent_matrix(list(word), d).Q_cur.norm())


def log_cylinder_bounds(word: Sequence[RingElement], d: int, C_diam: float | None = None):
    dom = build_domain(d)
    if not word:
        ld = math.log(dom.diameter)
        return ld, ld
    C = frozen_c_diam(d) if C_diam is None else C_diam
    mods = np.array([abs(a) for a in word])
    lo = -math.log(C) - 2 * float(np.sum(np.log(mods + dom.R)))
    hi = math.log(C) - 2 * float(np.sum(np.log(mods - dom.R)))
    return lo, hi


def cylinder_diameter_bounds(word: Sequence[RingElement], d: int | None = None,
                             C_diam: float | None = None) -> tuple[float, float]:
    """(C^-1 prod (|a|+R)^-2, C prod (|a|-R)^-2); the empty word gives diam(I_d) twice."""
    d = word[0].d if d is None else d
    lo, hi = log_cylinder_bounds(word, d, C_diam)
    return math.exp(lo), math.exp(hi)


def measure_c_diam(d: int, n_words: int = 400, max_len: int = 12, seed: int = 0) -> float:
    """Pilot estimate of C_diam: max of diam/|Dh(0)| and its reciprocal over random words."""
    rng = np.random.default_rng(seed)
    alph = IfsAlphabet.build(d)
    worst = 1.0
    for k in range(n_words):
        length = 1 + k % max_len
        (w,) = alph.sample_words(rng, 1, length, max_modulus=6 if k % 2 else 30)
        r = log_measured_diameter(w, d) - log_derivative_at_0(w, d)
        worst = max(worst, math.exp(abs(r)))
    return worst


# --- coding map --------------------------------------------------------------------------

def _bits_for(word, d) -> int:
    lo, _ = log_cylinder_bounds(word, d)
    return max(64, int(math.ceil(-lo / math.log(2))) + 64)


def coding_point(prefix: Sequence[RingElement], d: int | None = None, precision: str = "auto"):
    """h_{w_1} o ... o h_{w_n}(0).

    'exact' returns P_n/Q_n as a FieldElement, 'double' a complex (truncating the
    word with a PrecisionLoss warning once the cylinder drops below 1e-14), and
    'auto' / 'ext:<bits>' an mpmath.mpc at enough precision to resolve the cylinder.
    """
    if not prefix:
        raise ValueError("prefix must be nonempty")
    d = prefix[0].d if d is None else d
    if precision == "exact":
        return convergent_matrix(list(prefix), d).value()
    if precision == "double":
        dom = build_domain(d)
        C = frozen_c_diam(d)
        logb = -math.log(C)
        keep = len(prefix)
        for k, a in enumerate(prefix):
            logb -= 2 * math.log(abs(a) + dom.R)
            if logb < math.log(1e-14) and k + 1 < len(prefix):
                keep = k + 1
                warnings.warn(f"cylinder below 1e-14 after {keep} letters; prefix truncated",
                              PrecisionLoss, stacklevel=2)
                break
        z = 0j
        for a in reversed(prefix[:keep]):
            z = 1 / (z + complex(a))
        return z
    bits = _bits_for(prefix, d) if precision == "auto" else int(str(precision).split(":")[1])
    with mpmath.workprec(bits):
        z = mpmath.mpc(0)
        for a in reversed(prefix):
            z = 1 / (z + _mp(d, a))
        return z


def coding_bits(prefix: Sequence[RingElement], d: int | None = None) -> int:
    d = prefix[0].d if d is None else d
    return _bits_for(prefix, d)


def _mp(d, a):
    if d % 4 == 3:
        return mpmath.mpc(a.a + mpmath.mpf(a.b) / 2, a.b * mpmath.sqrt(d) / 2)
    return mpmath.mpc(a.a, a.b * mpmath.sqrt(d))


def fixed_point(alpha: RingElement) -> complex:
    """The attracting fixed point of h_alpha: root of z^2 + alpha z - 1 = 0 inside I_d."""
    a = complex(alpha)
    disc = np.sqrt(a * a + 4)
    roots = [(-a + disc) / 2, (-a - disc) / 2]
    return min(roots, key=abs)


# --- convergence exponents ---------------------------------------------------------------

def _dyadic_counts(counter: Callable[[float], int], R_max: float):
    ks = range(0, int(math.floor(math.log2(R_max))) + 1)
    Rs = [2.0 ** k for k in ks]
    return np.array(Rs), np.array([counter(R) for R in Rs], dtype=float)


def _tau_from_counts(Rs, Ns, R_max) -> tuple[float, float, int]:
    # a dyadic shell [2^k, 2^(k+1)) is nonempty when the count increases across it
    nonempty = int(np.sum(np.diff(Ns) > 0))
    if nonempty < 4:
        raise InsufficientShells(f"only {nonempty} nonempty dyadic shells below R_max={R_max}")
    mask = Ns > 0
    Rs, Ns = Rs[mask], Ns[mask]
    half = max(4, len(Rs) // 2)
    x = np.log(Rs[-half:])
    y = np.log(Ns[-half:])
    slope = float(np.polyfit(x, y, 1)[0])
    local = np.diff(y) / np.diff(x)
    spread = float(np.max(np.abs(local - slope)))
    resolution = 1 / math.log(R_max)
    return min(max(slope, 0.0), 2.0), math.hypot(spread, resolution), int(Ns[-1])


def tau_numeric(s: DigitSet, R_max: float, shift: float = 0.0) -> Estimate:
    """Regression slope of log #(S cap B(0,R)) on log R over dyadic R <= R_max.

    With shift = c the weight |alpha| + c is used, i.e. the count of |alpha| + c <= R.
    The fit uses the upper half of the dyadic range; the uncertainty combines the
    spread of local slopes with the 1/log R_max resolution of the scale range.
    """
    Rs, Ns = _dyadic_counts(lambda R: s.count_modulus_le(R - shift), R_max)
    value, unc, n = _tau_from_counts(Rs, Ns, R_max)
    return Estimate(value, unc, n, 0, None, "dyadic-count-regression")


def tau_invariance_check(s: DigitSet, finite_mod: Iterable[RingElement] = (), c: float = 0.0,
                         mode: str = "remove", R_max: float = 2.0 ** 14) -> bool:
    """tau of S, of S with a finite set added or removed, and of the (|alpha|+c) weight agree."""
    base = tau_numeric(s, R_max)
    mod = list(finite_mod)
    if mod:
        if mode == "remove":
            drop = set(mod)
            if s.kind == "explicit":
                changed = DigitSet.explicit(s.d, [e for e in s.elements if e not in drop])
            else:
                changed = _ModifiedSet(s, frozenset(), frozenset(drop))
        else:
            changed = _ModifiedSet(s, frozenset(m for m in mod if not s.contains(m)), frozenset())
        other = tau_numeric(changed, R_max)
        if abs(other.value - base.value) > math.hypot(base.stderr, other.stderr):
            return False
    if c:
        shifted = tau_numeric(s, R_max, shift=c)
        if abs(shifted.value - base.value) > math.hypot(base.stderr, shifted.stderr):
            return False
    return True


class _ModifiedSet:
    """S with finitely many elements added and removed; only counting is supported."""

    def __init__(self, base: DigitSet, added: frozenset, removed: frozenset):
        self.base, self.added, self.removed = base, added, removed

    def count_modulus_le(self, R):
        if R < 1:
            return 0
        n = math.floor(R * R + 1e-9)
        return (self.base.count_le(n) + sum(1 for e in self.added if e.norm() <= n)
                - sum(1 for e in self.removed if e.norm() <= n and self.base.contains(e)))


def smallest_members(s: DigitSet, k: int) -> list[RingElement]:
    """The k members of smallest modulus (tie-break order)."""
    out: list[RingElement] = []
    hi = 4
    while len(out) < k:
        out = s.elements_in(1, hi)
        hi *= 4
        if hi > 2 ** 62:
            break
    return out[:k]


# --- pressure ----------------------------------------------------------------------------

class PressureRoot(float):
    """A root s of sum (|alpha| + offset)^(-2s) = 1; no_root flags the single-member case."""

    no_root: bool = False

    def __new__(cls, value, no_root=False):
        obj = super().__new__(cls, value)
        obj.no_root = no_root
        return obj


def _moduli_weights(members) -> tuple[np.ndarray, np.ndarray]:
    """Distinct moduli and their multiplicities, from RingElements or an array of norms."""
    if isinstance(members, np.ndarray):
        norms = members
    else:
        norms = np.array([m.norm() for m in members], dtype=np.int64)
    u, c = np.unique(norms, return_counts=True)
    return np.sqrt(u.astype(float)), c.astype(float)


def log_partition(mods: np.ndarray, weights: np.ndarray, offset: float, s: float) -> float:
    """log sum_alpha (|alpha| + offset)^(-2s), by log-sum-exp."""
    e = -2 * s * np.log(mods + offset) + np.log(weights)
    m = float(e.max())
    return m + math.log(float(np.exp(e - m).sum()))


def pressure_root(members, offset: float, tol: float = 1e-6) -> PressureRoot:
    """Unique s >= 0 with sum (|alpha| + offset)^(-2s) = 1, by bisection.

    members are RingElements or an int array of norms.  All |alpha| + offset must exceed 1.
    """
    mods, w = _moduli_weights(members)
    total = float(w.sum())
    if total == 0:
        raise ValueError("empty member list")
    if total == 1:
        return PressureRoot(0.0, no_root=True)
    if float((mods + offset).min()) <= 1:
        raise ValueError("pressure equation needs |alpha| + offset > 1 for every member")
    lo, hi = 0.0, 1.0
    while log_partition(mods, w, offset, hi) > 0:
        hi *= 2
    while hi - lo > tol / 8:
        mid = 0.5 * (lo + hi)
        if log_partition(mods, w, offset, mid) > 0:
            lo = mid
        else:
            hi = mid
    return PressureRoot(0.5 * (lo + hi))


@dataclass(frozen=True)
class PressureBracket:
    s_lower: float
    s_upper: float
    alphabet_id: str
    n_members: int
    B: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.s_lower + self.s_upper)

    @property
    def width(self) -> float:
        return self.s_upper - self.s_lower


def _bracket(norms: np.ndarray, d: int, ident: str, B: float) -> PressureBracket:
    if norms.size < 2:
        raise ValueError(f"need at least two members for a bracket ({ident})")
    R = build_domain(d).R
    lo = pressure_root(norms, +R)
    hi = pressure_root(norms, -R)
    return PressureBracket(float(lo), float(hi), ident, int(norms.size), float(B))


def dimension_bracket(s: DigitSet, B: float, A0: int | None = None) -> PressureBracket:
    """One-step pressure bracket on the dyadic shell S cap {B <= |alpha| < 2B}.

    s_lower uses (|alpha| + R_d), s_upper (|alpha| - R_d); together they bound the
    dimension of the limit set of the shell subsystem, which tends to tau(S)/2.
    """
    A0 = compute_A0(s.d) if A0 is None else A0
    if B < A0:
        raise ValueError(f"B={B} is below A0={A0}")
    lo = math.ceil(B * B - 1e-9)
    norms = s.norms_in(lo, math.ceil(4 * B * B - 1e-9))
    return _bracket(norms, s.d, f"d={s.d};set={s.name};shell=[{B:g},{2 * B:g})", B)


def subsystem_bracket(s: DigitSet, B: float, A0: int | None = None) -> PressureBracket:
    """One-step pressure bracket on all members with A0 <= |alpha| <= B (nested in B)."""
    A0 = compute_A0(s.d) if A0 is None else A0
    norms = s.norms_in(A0 * A0, math.floor(B * B + 1e-9) + 1)
    return _bracket(norms, s.d, f"d={s.d};set={s.name};ball=[{A0},{B:g}]", B)


@dataclass(frozen=True)
class DimensionTrend:
    brackets: tuple[PressureBracket, ...]
    extrapolated: float
    extrapolated_lower: float
    extrapolated_upper: float
    target: float | None

    @property
    def monotone_lower(self) -> bool:
        return _monotone([b.s_lower for b in self.brackets])

    @property
    def monotone_upper(self) -> bool:
        return _monotone([b.s_upper for b in self.brackets])


def _monotone(xs, tol=1e-9) -> bool:
    dx = np.diff(xs)
    return bool(np.all(dx >= -tol) or np.all(dx <= tol))


def _extrapolate(Bs, ys, n_fit: int) -> float:
    x = 1 / np.log(np.asarray(Bs[-n_fit:], dtype=float))
    coef = np.polyfit(x, np.asarray(ys[-n_fit:]), 1)
    return float(coef[1])


def dimension_trend(s: DigitSet, Bs: Sequence[float], n_fit: int = 6) -> DimensionTrend:
    """Shell brackets along Bs and their limit by a linear fit against 1/log B."""
    brs = tuple(dimension_bracket(s, B) for B in Bs)
    k = min(n_fit, len(brs))
    mids = [b.midpoint for b in brs]
    ext = _extrapolate(Bs, mids, k)
    ext_lo = _extrapolate(Bs, [b.s_lower for b in brs], k)
    ext_hi = _extrapolate(Bs, [b.s_upper for b in brs], k)
    t = tau_analytic(s)
    return DimensionTrend(brs, ext, ext_lo, ext_hi, None if t is None else float(t) / 2)


# --- sparse patterns ---------------------------------------------------------------------

@dataclass(frozen=True)
class Blocks:
    """Level sets E_n (n0 <= n <= horizon) built from consecutive blocks F_k."""

    s: float
    n0: int
    horizon: int
    F: tuple[tuple[RingElement, ...], ...]
    N: tuple[int, ...]  # start level of block k
    sums: tuple[float, ...]

    def block_index(self, n: int) -> int:
        if n < self.n0:
            raise IndexError("level below n0")
        k = int(np.searchsorted(self.N, n, side="right")) - 1
        return k

    def E(self, n: int) -> tuple[RingElement, ...]:
        return self.F[self.block_index(n)]

    def R(self, n: int) -> float:
        return min(abs(a) for a in self.E(n))


def select_blocks(s: DigitSet, sigma: float, f: Callable[[int], float], n0: int = 2,
                  horizon: int = 10_000, A0: int | None = None) -> Blocks:
    """Consecutive blocks F_k of S' = S cap {|alpha| >= A0} with 1 <= sum (|a|+R_d)^-sigma <= 2.

    Block k becomes the level set E_n for N_k <= n < N_{k+1}, where N_k is the
    first level after N_{k-1} with f(N_k) >= max |F_k| and log #F_k <= N_k / k.
    """
    d = s.d
    R = build_domain(d).R
    A0 = compute_A0(d) if A0 is None else A0
    tau = tau_analytic(s)
    if tau is not None and sigma >= float(tau):
        raise ValueError(f"sigma={sigma} must be below tau(S)={tau}")
    if not s.is_infinite:
        raise ValueError("digit set must be infinite")
    F: list[tuple[RingElement, ...]] = []
    N: list[int] = []
    sums: list[float] = []
    lo_norm = A0 * A0
    cur: list[RingElement] = []
    acc = 0.0
    chunk = 64
    prev_N = n0 - 1
    while True:
        hi_norm = lo_norm + chunk
        for a in s.elements_in(lo_norm, hi_norm):
            cur.append(a)
            acc += (abs(a) + R) ** -sigma
            if acc >= 1:
                M = max(abs(x) for x in cur)
                k = len(F) + 1
                n = prev_N + 1
                while f(n) < M or math.log(len(cur)) > n / k:
                    n += 1
                    if n > horizon:
                        break
                if n > horizon:
                    if len(F) < 2:
                        # R_n cannot grow: the cutoff admits at most one block
                        raise CutoffTooTight(f"fewer than two blocks fit below the horizon {horizon}")
                    return Blocks(sigma, N[0], horizon, tuple(F), tuple(N), tuple(sums))
                F.append(tuple(cur))
                N.append(n)
                sums.append(acc)
                prev_N = n
                cur, acc = [], 0.0
        lo_norm = hi_norm
        chunk = min(chunk * 2, 1 << 20)


def sparse_conditions(Nk: Sequence[int], logB: Sequence[float], t: float, c0: float,
                      m: int, n0: int, ell: int) -> list[tuple[int, str]]:
    """Indices (k, condition) at which the four sparse-time inequalities fail."""
    bad = []
    for k in range(len(Nk)):
        if Nk[k] < n0 + ell:
            bad.append((k, "basic"))
        if k >= 1 and Nk[k] < Nk[k - 1] + m:
            bad.append((k, "disjoint"))
        if t * logB[k] > c0 * Nk[k] + 1e-12:
            bad.append((k, "smallratio"))
        need = (t * sum(logB[:k]) + 8 * c0 * m * (k + 1) + 1) / c0
        if Nk[k] < need - 1e-9:
            bad.append((k, "dominate"))
    return bad


def choose_sparse_times(N_r: Sequence[int], B_tilde: Sequence[float], c0: float, m: int,
                        n0: int, ell: int, t: float = 1.0, admissible=None,
                        horizon: int | None = None) -> list[int]:
    """Greedy increasing r_k (0-based positions into N_r) meeting the four inequalities.

    N_r[i], B_tilde[i] describe pattern i.  Raises HorizonExhausted when no index works.
    """
    out: list[int] = []
    logs: list[float] = []
    last_N = None
    for i, (n, bt) in enumerate(zip(N_r, B_tilde)):
        if horizon is not None and n + m - 1 > horizon:
            break
        if admissible is not None and not admissible(i):
            continue
        lb = math.log(bt)
        k = len(out)
        if n < n0 + ell:
            continue
        if last_N is not None and n < last_N + m:
            continue
        if t * lb > c0 * n:
            continue
        if n < (t * sum(logs) + 8 * c0 * m * (k + 1) + 1) / c0:
            continue
        out.append(i)
        logs.append(lb)
        last_N = n
    if not out:
        raise HorizonExhausted("no pattern index satisfies the sparse-time conditions")
    return out


@dataclass
class PatternReport:
    ok: bool
    n: int
    n0: int
    ell: int
    c0: float
    t: float
    r_k: list[int]
    times: list[int]
    first_failure: int | None = None
    reason: str = ""
    burn_in: int = 0
    profile_min_after_burn_in: float = math.nan


@dataclass
class PatternConfig:
    d: int = 1
    set_spec: str = "integers"
    t: float = 0.6
    eps: float = 0.2
    m: int = 2
    horizon: int = 10_000
    cutoff_shift: float = 3.0  # f(n) = n + shift
    seed: int = 0

    def cutoff(self) -> Callable[[int], float]:
        c = self.cutoff_shift
        return lambda n: n + c

    def pattern_time(self, r: int) -> int:
        return r * r

    def pattern_block(self, r: int, d: int) -> tuple[RingElement, ...]:
        # b^(r) = (r + 3, -(r + 3), r + 3, ...) so |b_j| <= f(N_r + j - 1) once r >= 1
        v = r + 3
        return tuple(element(d, v if j % 2 == 0 else -v) for j in range(self.m))


@dataclass
class PatternResult:
    word: tuple[RingElement, ...]
    levels: list[tuple[RingElement, ...]]
    report: PatternReport
    blocks: Blocks
    profile: np.ndarray
    prescribed: dict[int, tuple[RingElement, ...]]


def reference_word(s: DigitSet, f, blocks: Blocks, n: int, A0: int) -> list[RingElement]:
    """A canonical point of F_d(S, f): the smallest admissible digit at each level."""
    small = [a for a in s.elements_in(A0 * A0, 4 * A0 * A0 + 64)]
    out = []
    smallest = {}
    for j in range(1, n + 1):
        if j >= blocks.n0:
            k = blocks.block_index(j)
            if k not in smallest:
                smallest[k] = min(blocks.F[k], key=lambda a: (abs(a), a.sort_key()))
            out.append(smallest[k])
        else:
            ok = [a for a in small if abs(a) <= f(j)]
            if not ok:
                raise CutoffTooTight(f"no digit of S' fits the cutoff f({j}) = {f(j)}")
            out.append(ok[0])
    return out


def build_pattern_prefix(config: PatternConfig, corrupt_at: int | None = None,
                         verify_reexpansion: bool = True) -> PatternResult:
    """Construct a digit word of length horizon following the sparse-pattern recursion."""
    d = config.d
    s = DigitSet.parse(config.set_spec, d)
    A0 = compute_A0(d)
    sp = DigitSet.threshold(s, A0)
    R = build_domain(d).R
    f = config.cutoff()
    t, eps, m, n = config.t, config.eps, config.m, config.horizon
    sigma = t + eps
    c0 = eps * math.log(2) / 8
    blocks = select_blocks(sp, sigma, f, n0=2, horizon=n, A0=A0)
    n0 = blocks.n0
    ref = reference_word(sp, f, blocks, n, A0)
    ell = 1
    # candidate patterns r = 1, 2, ... with N_r <= horizon
    rs = []
    r = 1
    while config.pattern_time(r) + m - 1 <= n:
        rs.append(r)
        r += 1
    N_r = [config.pattern_time(r) for r in rs]
    blocks_r = [config.pattern_block(r, d) for r in rs]
    B_t = [float(np.prod([abs(b) + R for b in blk])) for blk in blocks_r]
    admissible = lambda i: all(sp.contains(b) for b in blocks_r[i])  # noqa: E731
    ks = choose_sparse_times(N_r, B_t, c0, m, n0, ell, t=t, admissible=admissible, horizon=n)
    times = [N_r[i] for i in ks]
    prescribed = {N_r[i]: blocks_r[i] for i in ks}
    # levels j = 1..n of the digit word (1-based positions)
    levels: list[tuple[RingElement, ...]] = []
    fixed_at = {}
    for T, blk in prescribed.items():
        for u, b in enumerate(blk):
            fixed_at[T + u] = b
    rng = np.random.default_rng(config.seed)
    word = []
    for j in range(1, n + 1):
        if j < n0 + ell:
            lev = (ref[j - 1],)
        elif j in fixed_at:
            lev = (fixed_at[j],)
        else:
            lev = blocks.E(j)
        levels.append(lev)
        word.append(lev[int(rng.integers(0, len(lev)))] if len(lev) > 1 else lev[0])
    if corrupt_at is not None:
        word[corrupt_at - 1] = word[corrupt_at - 1] + 1
    word = tuple(word)
    profile, burn = _pattern_profile(levels, t, R, c0, n0, ell, ref)
    rep = PatternReport(True, n, n0, ell, c0, t, list(ks), times, burn_in=burn)
    after = profile[burn:] if burn < len(profile) else profile[-1:]
    rep.profile_min_after_burn_in = float(np.min(after))
    try:
        validate_pattern(word, sp, f, prescribed, blocks, c0, t, m, n0, ell, R,
                         verify_reexpansion=verify_reexpansion)
    except ValidationFailure as exc:
        rep.ok = False
        rep.first_failure = exc.index
        rep.reason = exc.reason
    return PatternResult(word, levels, rep, blocks, profile, prescribed)


def _pattern_profile(levels, t, R, c0, n0, ell, ref):
    q = t / 2
    profile = nonaut_pressure_profile(levels, q, len(levels), R)
    # log Z_n >= 6 c0 n - 8 c0 (n0 + ell - 1) - 2 c0 (n0 - 1) + log C_init, where the first
    # n0 + ell - 1 levels are fixed; the profile is nonnegative from the index where this is >= 0
    fixed = n0 + ell - 1
    log_c_init = -t * sum(math.log(abs(a) + R) for a in ref[:fixed])
    burn = math.ceil((8 * c0 * fixed + 2 * c0 * (n0 - 1) - log_c_init) / (6 * c0))
    return profile, max(1, burn)


def validate_pattern(word, sp: DigitSet, f, prescribed, blocks: Blocks, c0, t, m, n0, ell, R,
                     verify_reexpansion: bool = True) -> None:
    """Raise ValidationFailure (1-based index) on the first violated predicate."""
    for j, a in enumerate(word, 1):
        if not sp.contains(a):
            raise ValidationFailure(j, f"digit {a} not in S")
        if abs(a) > f(j) + 1e-9:
            raise ValidationFailure(j, f"|{a}| exceeds the cutoff f({j})")
    for T, blk in prescribed.items():
        for u, b in enumerate(blk):
            if word[T + u - 1] != b:
                raise ValidationFailure(T + u, "prescribed digit missing")
    times = sorted(prescribed)
    logB = [sum(math.log(abs(b) + R) for b in prescribed[T]) for T in times]
    bad = sparse_conditions(times, logB, t, c0, m, n0, ell)
    if bad:
        k, cond = bad[0]
        raise ValidationFailure(times[k], f"sparse-time condition {cond} fails")
    mins = [min(abs(a) for a in blocks.F[k]) for k in range(len(blocks.F))]
    for k in range(1, len(mins)):
        if mins[k] < mins[k - 1]:
            raise ValidationFailure(blocks.N[k], "block minimum moduli decrease")
    for j in range(n0 + ell, len(word) + 1):
        if j in _covered(prescribed, m):
            continue
        if word[j - 1] not in set(blocks.E(j)):
            raise ValidationFailure(j, "variable-level digit outside E_n")
    if verify_reexpansion:
        x = coding_point(list(word), sp.d, precision="exact")
        got = exact_digits_fast(x, len(word) + 1)
        for j, (a, b) in enumerate(zip(got, word), 1):
            if a != b:
                raise ValidationFailure(j, "re-expansion disagrees")
        if len(got) != len(word):
            raise ValidationFailure(min(len(got), len(word)) + 1, "re-expansion length differs")


def _covered(prescribed, m):
    out = set()
    for T in prescribed:
        out.update(range(T, T + m))
    return out


def exact_digits_fast(x: FieldElement, n_max: int) -> list[RingElement]:
    """Euclidean digits of x; rounds from a float approximation when the margin certifies it."""
    from .geometry import round_with_margin

    d = x.d
    num, den = x.num, x.den
    out = []
    while not num.is_zero() and len(out) < n_max:
        bits = max(abs(c).bit_length() for c in (num.a, num.b, den.a, den.b))
        shift = max(0, bits - 60)
        nu = to_complex(d, num.a >> shift, num.b >> shift)
        de = to_complex(d, den.a >> shift, den.b >> shift)
        alpha = None
        if nu != 0:
            w = de / nu
            # truncation perturbs w by a relative 2^-50 at most; demand a much larger margin
            cand, margin = round_with_margin(w, d)
            if margin > 1e-6 * max(1.0, abs(w)):
                alpha = cand
        if alpha is None:
            alpha = round_nearest_exact(FieldElement(den, num))
        out.append(alpha)
        num, den = den - alpha * num, num
    return out


def nonaut_pressure_profile(levels: Sequence[Sequence[RingElement]], q: float, n: int | None = None,
                            R: float | None = None) -> np.ndarray:
    """(1/k) log Z_k(q) with Z_k = prod_{j<=k} sum_{alpha in I_j} (|alpha| + R_d)^(-2q), k = 1..n."""
    if not levels:
        return np.zeros(0)
    d = levels[0][0].d
    R = build_domain(d).R if R is None else R
    n = len(levels) if n is None else n
    logs = np.empty(n)
    cache: dict = {}
    for j in range(n):
        lev = levels[j]
        key = id(lev)
        if key not in cache:
            mods = np.array([abs(a) for a in lev])
            e = -2 * q * np.log(mods + R)
            mx = float(e.max())
            cache[key] = mx + math.log(float(np.exp(e - mx).sum()))
        logs[j] = cache[key]
    return np.cumsum(logs) / np.arange(1, n + 1)


def level_log_sums(levels, q, R):
    return np.array([math.log(sum((abs(a) + R) ** (-2 * q) for a in lev)) for lev in levels])
