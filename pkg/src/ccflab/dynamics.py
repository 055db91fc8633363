"""The Gauss-type map T_d(z) = 1/z - [1/z], digit expansions and convergents."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import mpmath

from ._kernel import BOUNDARY, HIT_ZERO, PRECISION, run_orbit
from .geometry import (
    EPS_TIE,
    AmbiguousRounding,
    build_domain,
    round_nearest_exact,
    round_with_margin,
)
from .ring import FieldElement, RingElement, check_d, norm_form, one, to_complex, zero

RESIDUAL_TOL = 1e-6


class ZeroInput(ValueError):
    pass


class AmbiguousDigit(AmbiguousRounding):
    pass


class InputOutsideDomain(ValueError):
    pass


class PoleAtInput(ZeroDivisionError):
    pass


class Status(str, enum.Enum):
    RUNNING = "Running"
    TERMINATED_AT_ZERO = "TerminatedAtZero"
    ABORTED_BOUNDARY = "AbortedBoundary"
    ABORTED_PRECISION = "AbortedPrecision"


@dataclass(frozen=True)
class ConvergentState:
    """Entries of M(b) = [[P_prev, P_cur], [Q_prev, Q_cur]] for a word b of length k."""

    P_prev: RingElement
    P_cur: RingElement
    Q_prev: RingElement
    Q_cur: RingElement
    k: int = 0

    @classmethod
    def identity(cls, d: int) -> ConvergentState:
        return cls(one(d), zero(d), zero(d), one(d), 0)

    def push(self, alpha: RingElement) -> ConvergentState:
        return ConvergentState(
            self.P_cur,
            self.P_prev + alpha * self.P_cur,
            self.Q_cur,
            self.Q_prev + alpha * self.Q_cur,
            self.k + 1,
        )

    def determinant(self) -> RingElement:
        return self.P_prev * self.Q_cur - self.P_cur * self.Q_prev

    def value(self) -> FieldElement:
        """P_k / Q_k = h_b(0)."""
        return FieldElement(self.P_cur, self.Q_cur)

    def evaluate(self, z) -> complex:
        """h_b(z) = (P_prev z + P_cur) / (Q_prev z + Q_cur) in floating point."""
        pp, pc, qp, qc = _scaled(self.P_prev, self.P_cur, self.Q_prev, self.Q_cur)
        den = qp * z + qc
        if den == 0:
            raise PoleAtInput(f"h_b has a pole at {z!r}")
        return (pp * z + pc) / den


def _scaled(*elems: RingElement) -> list[complex]:
    """The elements as complex floats after a common power-of-two rescaling."""
    bits = max(max(abs(e.a).bit_length(), abs(e.b).bit_length()) for e in elems)
    shift = max(0, bits - 900)
    d = elems[0].d
    if shift == 0:
        return [to_complex(d, e.a, e.b) for e in elems]
    return [to_complex(d, e.a >> shift, e.b >> shift) for e in elems]


def convergent_matrix(word: Sequence[RingElement], d: int | None = None) -> ConvergentState:
    """Left-to-right product of [[0, 1], [1, b_j]]."""
    if d is None:
        if not word:
            raise ValueError("d is required for an empty word")
        d = word[0].d
    state = ConvergentState.identity(d)
    for alpha in word:
        state = state.push(alpha)
    return state


def apply_inverse_branch(word: Sequence[RingElement], z, d: int | None = None) -> complex:
    if not word:
        return complex(z)
    return convergent_matrix(word, d).evaluate(complex(z))


@dataclass(frozen=True)
class Expansion:
    d: int
    digits: tuple[RingElement, ...]
    status: Status
    residual_log: tuple[float, ...]
    start: object
    end: object = None

    def __len__(self):
        return len(self.digits)

    def convergents(self) -> ConvergentState:
        return convergent_matrix(self.digits, self.d)

    def to_record(self) -> dict:
        if isinstance(self.start, FieldElement):
            start = {"num": self.start.num.to_pair(), "den": self.start.den.to_pair()}
        else:
            z = complex(self.start)
            start = [z.real, z.imag]
        return {
            "d": self.d,
            "start": start,
            "digits": [a.to_pair() for a in self.digits],
            "status": self.status.value,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))


def write_jsonl(expansions: Iterable[Expansion], path) -> None:
    with open(path, "w") as fh:
        for e in expansions:
            fh.write(e.to_json_line() + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _recip(z: complex) -> complex:
    # same operation order as the compiled kernel, so both paths agree bit for bit
    r2 = z.real * z.real + z.imag * z.imag
    return complex(z.real / r2, -z.imag / r2)


def _check_in_domain(z: complex, d: int, tol: float = 1e-12) -> None:
    dom = build_domain(d)
    if float(dom.wall_margin(complex(z))) < -tol:
        raise InputOutsideDomain(f"{z!r} is outside I_{d}")


def gauss_step(z: complex, d: int, eps_tie: float = EPS_TIE) -> tuple[RingElement, complex]:
    """One application of T_d: returns ([1/z], 1/z - [1/z])."""
    check_d(d)
    z = complex(z)
    if z == 0:
        raise ZeroInput("T_d is undefined at 0")
    _check_in_domain(z, d)
    w = _recip(z)
    alpha, margin = round_with_margin(w, d)
    if margin <= eps_tie * max(1.0, abs(w)):
        raise AmbiguousDigit(w, [alpha], margin)
    return alpha, w - complex(alpha)


def eps_for_bits(bits: int) -> float:
    """Tie tolerance for a p-bit mantissa: 1e-12 at double, scaled by 2^-(p-53) beyond."""
    return EPS_TIE * 2.0 ** -(bits - 53)


def parse_precision(precision: str | int | None) -> int:
    """'double' -> 53, 'ext:<bits>' -> bits, integer -> itself."""
    if precision is None or precision == "double":
        return 53
    if isinstance(precision, int):
        return precision
    if isinstance(precision, str) and precision.startswith("ext:"):
        bits = int(precision[4:])
        if bits < 53:
            raise ValueError("extended precision needs at least 53 bits")
        return bits
    raise ValueError(f"unknown precision mode {precision!r}")


def _round_mp(w, d: int):
    """Nearest lattice point to an mpc value and the wall margin, in working precision."""
    dom = build_domain(d)
    s = mpmath.sqrt(d)
    if d % 4 == 3:
        bf = 2 * w.imag / s
    else:
        bf = w.imag / s
    b0 = int(mpmath.floor(bf))
    best = None
    for b in range(b0 - 1, b0 + 3):
        if d % 4 == 3:
            a_c = w.real - mpmath.mpf(b) / 2
        else:
            a_c = w.real
        a0 = int(mpmath.floor(a_c + mpmath.mpf(1) / 2))
        for a in (a0 - 1, a0, a0 + 1):
            alpha = _mp_of(d, a, b)
            q = abs(w - alpha) ** 2
            key = (q, norm_form(d, a, b), a, b)
            if best is None or key < best:
                best = key
    a, b = best[2], best[3]
    u = w - _mp_of(d, a, b)
    margin = None
    for beta in dom.neighbors:
        bm = _mp_of(d, beta.a, beta.b)
        ab = abs(bm)
        m = ab / 2 - (u.real * bm.real + u.imag * bm.imag) / ab
        if margin is None or m < margin:
            margin = m
    return RingElement(d, a, b), u, margin


def _mp_of(d: int, a: int, b: int):
    if d % 4 == 3:
        return mpmath.mpc(a + mpmath.mpf(b) / 2, b * mpmath.sqrt(d) / 2)
    return mpmath.mpc(a, b * mpmath.sqrt(d))


def expand_float(z, n_max: int, d: int, precision="double", eps_tie: float | None = None,
                 record_margins: bool = True) -> Expansion:
    """Digits of z under T_d while the rounding certificate holds.

    precision is 'double' (compiled path when margins are not requested) or
    'ext:<bits>' (mpmath).  residual_log holds the wall margin of each 1/z_j.
    """
    check_d(d)
    bits = parse_precision(precision)
    if bits == 53:
        return _expand_double(complex(z), n_max, d, EPS_TIE if eps_tie is None else eps_tie,
                              record_margins)
    with mpmath.workprec(bits):
        return _expand_mp(mpmath.mpc(z), n_max, d, eps_for_bits(bits) if eps_tie is None else eps_tie)


def _expand_double(z: complex, n_max: int, d: int, eps_tie: float, record_margins: bool) -> Expansion:
    _check_in_domain(z, d)
    if not record_margins:
        status, a, b, _, end = run_orbit(z, d, n_max, 0, eps_tie, RESIDUAL_TOL)
        digits = tuple(RingElement(d, int(x), int(y)) for x, y in zip(a, b))
        st = {HIT_ZERO: Status.TERMINATED_AT_ZERO, BOUNDARY: Status.ABORTED_BOUNDARY,
              PRECISION: Status.ABORTED_PRECISION}.get(status, Status.RUNNING)
        return Expansion(d, digits, st, (), z, end)
    digits: list[RingElement] = []
    margins: list[float] = []
    state = ConvergentState.identity(d)
    cur = z
    status = Status.RUNNING
    for _ in range(n_max):
        if cur == 0:
            status = Status.TERMINATED_AT_ZERO
            break
        w = _recip(cur)
        alpha, margin = round_with_margin(w, d)
        margins.append(margin)
        if margin <= eps_tie * max(1.0, abs(w)):
            status = Status.ABORTED_BOUNDARY
            break
        digits.append(alpha)
        state = state.push(alpha)
        cur = w - complex(alpha)
        if abs(state.evaluate(cur) - z) > RESIDUAL_TOL:
            status = Status.ABORTED_PRECISION
            break
    return Expansion(d, tuple(digits), status, tuple(margins), z, cur)


def _expand_mp(z, n_max: int, d: int, eps_tie: float) -> Expansion:
    _check_in_domain(complex(z), d)
    digits: list[RingElement] = []
    margins: list[float] = []
    cur = z
    status = Status.RUNNING
    lost = 0.0
    budget = mpmath.mp.prec - 24
    for _ in range(n_max):
        if cur == 0:
            status = Status.TERMINATED_AT_ZERO
            break
        w = 1 / cur
        alpha, u, margin = _round_mp(w, d)
        margins.append(float(margin))
        if margin <= eps_tie * max(1.0, float(abs(w))):
            status = Status.ABORTED_BOUNDARY
            break
        # forward error grows by |T'(z)| = |z|^-2 per step; stop once it eats the mantissa
        lost += float(-2 * mpmath.log(abs(cur), 2))
        if lost > budget:
            status = Status.ABORTED_PRECISION
            break
        digits.append(alpha)
        cur = u
    return Expansion(d, tuple(digits), status, tuple(margins), z, cur)


def expand_exact(x: FieldElement) -> Expansion:
    """Euclidean expansion of x in Q(sqrt(-d)) cap I_d; always terminates."""
    d = x.d
    xa, xb, _ = x.rational_coords()
    if not build_domain(d).contains(to_complex(d, float(xa), float(xb)), tol=1e-12):
        raise InputOutsideDomain(f"{x!r} is outside I_{d}")
    num, den = x.num, x.den
    digits: list[RingElement] = []
    norms: list[float] = []
    while not num.is_zero():
        # 1/x = den/num; next remainder is (den - alpha num)/num
        alpha = round_nearest_exact(FieldElement(den, num))
        digits.append(alpha)
        num, den = den - alpha * num, num
        norms.append(float(num.norm()))
    return Expansion(d, tuple(digits), Status.TERMINATED_AT_ZERO, tuple(norms), x,
                     FieldElement(num, den))


def numerator_norms(x: FieldElement) -> list[int]:
    """Norms of the successive remainder numerators in expand_exact, starting with x."""
    num, den = x.num, x.den
    out = [num.norm()]
    while not num.is_zero():
        alpha = round_nearest_exact(FieldElement(den, num))
        num, den = den - alpha * num, num
        out.append(num.norm())
    return out


def reconstruction_residual(z, n: int, d: int, precision="double") -> float:
    """|z - h_{a_1..a_n}(T^n z)| for the float expansion of z."""
    if isinstance(z, FieldElement):
        e = expand_exact(z)
        value = e.convergents().value()
        return 0.0 if value == z else abs(complex(value) - complex(z))
    e = expand_float(z, n, d, precision)
    if not e.digits:
        return 0.0
    return abs(e.convergents().evaluate(complex(e.end)) - complex(z))


def digits_residual(z: complex, digits: Sequence[RingElement], end: complex) -> float:
    """|z - h_b(end)| for an arbitrary (possibly corrupted) word."""
    return abs(apply_inverse_branch(digits, end) - complex(z))


def levy_identity_gap(z: complex, d: int, n: int) -> float:
    """Relative gap in |Q_{n-1} T^n z + Q_n| = prod |T^j z|^-1 along the float orbit."""
    _, a, b, logz, end = run_orbit(complex(z), d, n, 0, EPS_TIE, RESIDUAL_TOL)
    if len(a) == 0:
        return 0.0
    st = convergent_matrix([RingElement(d, int(x), int(y)) for x, y in zip(a, b)], d)
    qp, qc = st.Q_prev, st.Q_cur
    bits = max(abs(qc.a).bit_length(), abs(qc.b).bit_length())
    shift = max(0, bits - 900)
    lhs = abs(to_complex(d, qp.a >> shift, qp.b >> shift) * end
              + to_complex(d, qc.a >> shift, qc.b >> shift))
    log_lhs = math.log(lhs) + shift * math.log(2)
    return abs(math.expm1(log_lhs + float(logz.sum())))


__all__ = [
    "AmbiguousDigit",
    "ConvergentState",
    "Expansion",
    "InputOutsideDomain",
    "PoleAtInput",
    "Status",
    "ZeroInput",
    "apply_inverse_branch",
    "convergent_matrix",
    "expand_exact",
    "expand_float",
    "gauss_step",
    "reconstruction_residual",
]
