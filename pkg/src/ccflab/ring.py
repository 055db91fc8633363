"""Exact arithmetic in the rings of integers O_d of Q(sqrt(-d)), d in {1, 2, 3, 7, 11}.

Elements are stored in the integral basis {1, w} with w = sqrt(-d) for
d in {1, 2} and w = (1 + sqrt(-d)) / 2 for d in {3, 7, 11}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

SUPPORTED_D = (1, 2, 3, 7, 11)


class RingError(ValueError):
    pass


def check_d(d: int) -> int:
    if d not in SUPPORTED_D:
        raise RingError(f"d must be one of {SUPPORTED_D}, got {d!r}")
    return d


def is_hex(d: int) -> bool:
    """True for the rings whose generator is (1 + sqrt(-d))/2."""
    return d % 4 == 3


def omega(d: int) -> complex:
    if is_hex(d):
        return complex(0.5, math.sqrt(d) / 2)
    return complex(0.0, math.sqrt(d))


def norm_form(d: int, a, b):
    """The norm |a + b w|^2 as a quadratic form; works for ints and Fractions."""
    if is_hex(d):
        return a * a + a * b + ((1 + d) // 4) * b * b
    return a * a + d * b * b


def bilinear_form(d: int, a1, b1, a2, b2):
    """Re((a1 + b1 w) * conj(a2 + b2 w)), the polarisation of norm_form."""
    if is_hex(d):
        k = (1 + d) // 4
        return a1 * a2 + Fraction(1, 2) * (a1 * b2 + a2 * b1) + k * b1 * b2
    return a1 * a2 + d * b1 * b2


def mul_coords(d: int, a, b, c, e):
    """Coordinates of (a + b w)(c + e w)."""
    if is_hex(d):
        # w^2 = w - (1 + d)/4
        be = b * e
        return a * c - ((1 + d) // 4) * be, a * e + b * c + be
    return a * c - d * b * e, a * e + b * c


def conj_coords(d: int, a, b):
    if is_hex(d):
        # conj(w) = 1 - w
        return a + b, -b
    return a, -b


def to_complex(d: int, a, b) -> complex:
    if is_hex(d):
        return complex(a + 0.5 * b, b * math.sqrt(d) / 2)
    return complex(a, b * math.sqrt(d))


def coords_of(d: int, z: complex) -> tuple[float, float]:
    """Real basis coordinates (a, b) with z = a + b w."""
    s = math.sqrt(d)
    if is_hex(d):
        b = 2.0 * z.imag / s
        return z.real - 0.5 * b, b
    return z.real, z.imag / s


@dataclass(frozen=True, slots=True)
class RingElement:
    """a + b*w in O_d."""

    d: int
    a: int
    b: int

    def _coerce(self, other) -> RingElement:
        if isinstance(other, RingElement):
            if other.d != self.d:
                raise RingError(f"mixed rings d={self.d} and d={other.d}")
            return other
        if isinstance(other, int):
            return RingElement(self.d, other, 0)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return RingElement(self.d, self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return RingElement(self.d, self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __neg__(self):
        return RingElement(self.d, -self.a, -self.b)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        a, b = mul_coords(self.d, self.a, self.b, o.a, o.b)
        return RingElement(self.d, a, b)

    __rmul__ = __mul__

    def conj(self) -> RingElement:
        a, b = conj_coords(self.d, self.a, self.b)
        return RingElement(self.d, a, b)

    def norm(self) -> int:
        return norm_form(self.d, self.a, self.b)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def __complex__(self) -> complex:
        return to_complex(self.d, self.a, self.b)

    def __abs__(self) -> float:
        return math.sqrt(self.norm())

    def sort_key(self) -> tuple[int, int, int]:
        """Deterministic total order used to break rounding ties."""
        return (self.norm(), self.a, self.b)

    def __repr__(self) -> str:
        return f"RingElement(d={self.d}, {self.a}, {self.b})"

    def __str__(self) -> str:
        sym = "i" if self.d == 1 else ("sqrt(-2)" if self.d == 2 else "w")
        if self.b == 0:
            return str(self.a)
        if self.a == 0:
            return f"{self.b}{sym}"
        sign = "+" if self.b > 0 else "-"
        return f"{self.a}{sign}{abs(self.b)}{sym}"

    def to_pair(self) -> list[int]:
        return [self.a, self.b]


def element(d: int, a: int, b: int = 0) -> RingElement:
    return RingElement(check_d(d), int(a), int(b))


def zero(d: int) -> RingElement:
    return RingElement(d, 0, 0)


def one(d: int) -> RingElement:
    return RingElement(d, 1, 0)


def norm(alpha: RingElement) -> int:
    return alpha.norm()


@dataclass(frozen=True, slots=True)
class FieldElement:
    """num/den in Q(sqrt(-d)); equality is by cross-multiplication."""

    num: RingElement
    den: RingElement

    def __post_init__(self):
        if self.num.d != self.den.d:
            raise RingError("numerator and denominator in different rings")
        if self.den.is_zero():
            raise ZeroDivisionError("FieldElement with zero denominator")

    @property
    def d(self) -> int:
        return self.num.d

    def __eq__(self, other) -> bool:
        if isinstance(other, RingElement):
            other = FieldElement(other, one(other.d))
        if not isinstance(other, FieldElement):
            return NotImplemented
        return self.num * other.den == other.num * self.den

    def __hash__(self):
        p, q, n = self.rational_coords()
        return hash((self.d, p, q))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def rational_coords(self) -> tuple[Fraction, Fraction, int]:
        """(x_a, x_b, den_norm) with self = x_a + x_b w, in lowest terms."""
        t = self.num * self.den.conj()
        n = self.den.norm()
        return Fraction(t.a, n), Fraction(t.b, n), n

    def __sub__(self, other: RingElement) -> FieldElement:
        return FieldElement(self.num - other * self.den, self.den)

    def reciprocal(self) -> FieldElement:
        return FieldElement(self.den, self.num)

    def __complex__(self) -> complex:
        t = self.num * self.den.conj()
        n = self.den.norm()
        return to_complex(self.d, t.a / n, t.b / n)

    def __repr__(self) -> str:
        return f"FieldElement(({self.num})/({self.den}))"


def _box_bounds(d: int, radius: float) -> tuple[int, int]:
    """Integer half-widths of a coordinate box containing the disc |z| <= radius."""
    if is_hex(d):
        # |z|^2 = (a + b/2)^2 + (d/4) b^2 -> |b| <= 2R/sqrt(d), |a| <= R + |b|/2
        bmax = math.floor(2 * radius / math.sqrt(d)) + 1
        amax = math.floor(radius + bmax / 2) + 1
    else:
        bmax = math.floor(radius / math.sqrt(d)) + 1
        amax = math.floor(radius) + 1
    return amax, bmax


def _within(n: int, radius) -> bool:
    if isinstance(radius, int) or (isinstance(radius, float) and radius.is_integer()):
        return n <= int(radius) ** 2
    return n <= radius * radius


def enumerate_ball(d: int, R: float) -> list[RingElement]:
    """All alpha in O_d with |alpha| <= R, sorted by the tie-break order."""
    check_d(d)
    if R < 0:
        raise RingError("radius must be nonnegative")
    amax, bmax = _box_bounds(d, R)
    out = []
    for b in range(-bmax, bmax + 1):
        for a in range(-amax, amax + 1):
            if _within(norm_form(d, a, b), R):
                out.append(RingElement(d, a, b))
    out.sort(key=RingElement.sort_key)
    return out


def enumerate_norm_range(d: int, lo: int, hi: int) -> list[RingElement]:
    """All alpha with lo <= N(alpha) < hi (integer norm bounds, exact)."""
    check_d(d)
    amax, bmax = _box_bounds(d, math.sqrt(max(hi, 0)))
    out = []
    for b in range(-bmax, bmax + 1):
        for a in range(-amax, amax + 1):
            n = norm_form(d, a, b)
            if lo <= n < hi:
                out.append(RingElement(d, a, b))
    out.sort(key=RingElement.sort_key)
    return out


def enumerate_annulus(d: int, R: float) -> list[RingElement]:
    """All alpha with R <= |alpha| < 2R."""
    if R < 1:
        raise RingError("annulus radius must be >= 1")
    amax, bmax = _box_bounds(d, 2 * R)
    r2 = R * R
    out = []
    for b in range(-bmax, bmax + 1):
        for a in range(-amax, amax + 1):
            n = norm_form(d, a, b)
            if r2 <= n < 4 * r2:
                out.append(RingElement(d, a, b))
    out.sort(key=RingElement.sort_key)
    return out


@lru_cache(maxsize=None)
def _units(d: int) -> tuple[RingElement, ...]:
    return tuple(e for e in enumerate_ball(d, 1) if e.norm() == 1)


def units(d: int) -> list[RingElement]:
    return list(_units(check_d(d)))


def representation_counts(d: int, n_max: int):
    """counts[n] = #{alpha : N(alpha) = n} for 0 <= n <= n_max (numpy array)."""
    import numpy as np

    check_d(d)
    amax, bmax = _box_bounds(d, math.sqrt(n_max))
    a = np.arange(-amax, amax + 1, dtype=np.int64)
    parts = []
    for b in range(-bmax, bmax + 1):
        n = norm_form(d, a, b)
        parts.append(n[n <= n_max])
    return np.bincount(np.concatenate(parts), minlength=n_max + 1)


def count_ball(d: int, n_max: int) -> int:
    """#{alpha : N(alpha) <= n_max}, counted row by row with integer square roots."""
    check_d(d)
    if n_max < 0:
        return 0
    _, bmax = _box_bounds(d, math.sqrt(n_max))
    total = 0
    for b in range(-bmax, bmax + 1):
        if is_hex(d):
            # (2a + b)^2 + d b^2 <= 4 n_max
            rest = 4 * n_max - d * b * b
            if rest < 0:
                continue
            m = math.isqrt(rest)
            # odd/even constraint: 2a + b ranges over integers of the parity of b in [-m, m]
            lo = -m + ((m + b) % 2)
            total += (m - lo) // 2 + 1 if lo <= m else 0
        else:
            rest = n_max - d * b * b
            if rest < 0:
                continue
            total += 2 * math.isqrt(rest) + 1
    return total


def norms_in_range(d: int, lo: int, hi: int):
    """Sorted numpy array of N(alpha) over all alpha with lo <= N(alpha) < hi."""
    import numpy as np

    check_d(d)
    amax, bmax = _box_bounds(d, math.sqrt(max(hi, 0)))
    a = np.arange(-amax, amax + 1, dtype=np.int64)
    parts = []
    for b in range(-bmax, bmax + 1):
        n = norm_form(d, a, b)
        parts.append(n[(n >= lo) & (n < hi)])
    out = np.concatenate(parts)
    out.sort()
    return out
