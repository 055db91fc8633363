"""The nearest-integer fundamental domain I_d and the rounding map [.].

I_d is the Voronoi cell of O_d at the origin.  Vertices are computed exactly
in basis coordinates (Fractions); the float data (edge normals, radii) is
derived from them once and cached.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from .ring import (
    FieldElement,
    RingElement,
    check_d,
    coords_of,
    enumerate_ball,
    is_hex,
    norm_form,
    omega,
    to_complex,
)

EPS_TIE = 1e-12


class AmbiguousRounding(ArithmeticError):
    """The point is within the tie tolerance of a cell wall."""

    def __init__(self, z, candidates, margin):
        self.z = z
        self.candidates = candidates
        self.margin = margin
        super().__init__(f"rounding of {z!r} is ambiguous (margin {margin:.3e})")


def _edge_coeffs(d: int, beta: RingElement) -> tuple[Fraction, Fraction, Fraction]:
    """Half-plane |u|^2 <= |u - beta|^2 as c1*x + c2*y <= c0 in basis coords."""
    ba, bb = beta.a, beta.b
    if is_hex(d):
        k = (1 + d) // 4
        c1 = ba + Fraction(bb, 2)
        c2 = Fraction(ba, 2) + k * bb
    else:
        c1 = Fraction(ba)
        c2 = Fraction(d * bb)
    return c1, c2, Fraction(beta.norm(), 2)


@dataclass(frozen=True)
class FundamentalDomain:
    d: int
    vertices: tuple[tuple[Fraction, Fraction], ...]
    neighbors: tuple[RingElement, ...]
    r2: Fraction
    R2: Fraction
    r: float = field(init=False)
    R: float = field(init=False)
    normals: np.ndarray = field(init=False, repr=False, compare=False)
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "r", math.sqrt(self.r2))
        object.__setattr__(self, "R", math.sqrt(self.R2))
        nb = np.array([complex(b) for b in self.neighbors])
        object.__setattr__(self, "normals", nb / np.abs(nb))
        object.__setattr__(self, "offsets", np.abs(nb) / 2)

    @property
    def vertices_complex(self) -> np.ndarray:
        return np.array([to_complex(self.d, float(a), float(b)) for a, b in self.vertices])

    @property
    def kind(self) -> str:
        return "hexagon" if len(self.vertices) == 6 else "rectangle"

    @property
    def area(self) -> float:
        v = self.vertices_complex
        x, y = v.real, v.imag
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @property
    def diameter(self) -> float:
        v = self.vertices_complex
        return float(np.max(np.abs(v[:, None] - v[None, :])))

    def wall_margin(self, u):
        """Signed distance from u (assumed near 0) to the walls of I_d; <0 outside."""
        u = np.asarray(u)
        proj = (u[..., None] * np.conj(self.normals)).real
        return np.min(self.offsets - proj, axis=-1)

    def contains(self, u, tol: float = 0.0):
        return self.wall_margin(u) >= -tol

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "kind": self.kind,
            "vertices": [[z.real, z.imag] for z in self.vertices_complex],
            "vertices_basis": [[str(a), str(b)] for a, b in self.vertices],
            "r": self.r,
            "R": self.R,
        }

    def export_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


def _voronoi_vertices(d: int, cands: list[RingElement]):
    lines = [_edge_coeffs(d, b) for b in cands]
    pts = set()
    for (a1, b1, c1), (a2, b2, c2) in combinations(lines, 2):
        det = a1 * b2 - a2 * b1
        if det == 0:
            continue
        x = (c1 * b2 - c2 * b1) / det
        y = (a1 * c2 - a2 * c1) / det
        if all(p * x + q * y <= c for p, q, c in lines):
            pts.add((x, y))
    return pts, lines


@lru_cache(maxsize=None)
def build_domain(d: int) -> FundamentalDomain:
    check_d(d)
    # I_d lies in B(0, R_d) with R_d < 1, so every wall comes from |beta| < 2.
    cands = [b for b in enumerate_ball(d, 2) if not b.is_zero()]
    pts, lines = _voronoi_vertices(d, cands)
    verts = sorted(pts, key=lambda v: math.atan2(to_complex(d, float(v[0]), float(v[1])).imag,
                                                  to_complex(d, float(v[0]), float(v[1])).real))
    relevant = []
    for beta, (p, q, c) in zip(cands, lines):
        on = sum(1 for x, y in verts if p * x + q * y == c)
        if on >= 2:
            relevant.append(beta)
    relevant.sort(key=lambda b: math.atan2(complex(b).imag, complex(b).real))
    r2 = min(Fraction(b.norm(), 4) for b in relevant)
    R2 = max(norm_form(d, x, y) for x, y in verts)
    return FundamentalDomain(d, tuple(verts), tuple(relevant), r2, R2)


def _float_candidates(z: complex, d: int):
    """Lattice points that can be nearest to z: nearest point in each nearby row."""
    w = omega(d)
    _, bf = coords_of(d, z)
    b0 = math.floor(bf)
    out = []
    for b in range(b0 - 1, b0 + 3):
        a_c = z.real - b * w.real
        a0 = math.floor(a_c + 0.5)
        for a in (a0 - 1, a0, a0 + 1):
            out.append((a, b))
    return out


def round_with_margin(z: complex, d: int) -> tuple[RingElement, float]:
    """Nearest lattice point (tie-break order on near-ties) and the wall distance of z - [z]."""
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"cannot round non-finite {z!r}")
    dom = build_domain(d)
    best = []
    for a, b in _float_candidates(z, d):
        u = z - to_complex(d, a, b)
        best.append((u.real * u.real + u.imag * u.imag, a, b))
    dmin = min(t[0] for t in best)
    tol = 1e-15 * (1.0 + dmin + abs(z))
    ties = [RingElement(d, a, b) for q, a, b in best if q <= dmin + tol]
    alpha = min(ties, key=RingElement.sort_key)
    margin = float(dom.wall_margin(z - complex(alpha)))
    return alpha, max(margin, 0.0)


def round_nearest(z: complex, d: int, *, strict: bool = False, eps_tie: float = EPS_TIE) -> RingElement:
    """[z]: the nearest element of O_d, ties broken by (norm, a, b).

    With strict=True, raise AmbiguousRounding when z lies within eps_tie
    (scaled by max(1, |z|)) of a cell wall.
    """
    alpha, margin = round_with_margin(z, d)
    if strict and margin <= eps_tie * max(1.0, abs(z)):
        raise AmbiguousRounding(z, [alpha], margin)
    return alpha


def distance_to_partition_boundary(z: complex, d: int) -> float:
    return round_with_margin(z, d)[1]


def round_nearest_exact(x: FieldElement) -> RingElement:
    """[x] for x in Q(sqrt(-d)) using integer comparisons only."""
    d = x.d
    t = x.num * x.den.conj()
    n = x.den.norm()
    p, q = t.a, t.b  # x = (p + q w) / n
    b0 = q // n
    best = None
    for b in range(b0 - 1, b0 + 3):
        # real part of x - b*w is (p + q/2)/n - b/2 (hex) or p/n; nearest a per row
        if is_hex(d):
            num_re = 2 * p + q - b * n  # 2n * (real part of x - b w)
            a0 = (num_re + n) // (2 * n)
        else:
            a0 = (2 * p + n) // (2 * n)
        for a in (a0 - 1, a0, a0 + 1):
            dist = norm_form(d, p - a * n, q - b * n)
            key = (dist, norm_form(d, a, b), a, b)
            if best is None or key < best:
                best = key
    return RingElement(d, best[2], best[3])


def sample_uniform(d: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Points uniform on I_d by rejection from the bounding box of the polygon."""
    dom = build_domain(d)
    v = dom.vertices_complex
    xlo, xhi = v.real.min(), v.real.max()
    ylo, yhi = v.imag.min(), v.imag.max()
    out = np.empty(0, dtype=complex)
    while out.size < size:
        m = max(16, int(1.3 * (size - out.size)) + 8)
        pts = rng.uniform(xlo, xhi, m) + 1j * rng.uniform(ylo, yhi, m)
        out = np.concatenate([out, pts[dom.wall_margin(pts) > 0]])
    return out[:size]


def round_nearest_array(z, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised [z]: basis coordinates (a, b) of the rounding and the wall margin of z - [z]."""
    z = np.asarray(z, dtype=complex)
    dom = build_domain(d)
    w = omega(d)
    b0 = np.floor(z.imag / w.imag).astype(np.int64)
    best_q = np.full(z.shape, np.inf)
    best_a = np.zeros(z.shape, dtype=np.int64)
    best_b = np.zeros(z.shape, dtype=np.int64)
    tol = 1e-15 * (1.0 + np.abs(z))
    for db in range(-1, 3):
        b = b0 + db
        a0 = np.floor(z.real - b * w.real + 0.5).astype(np.int64)
        for da in (-1, 0, 1):
            a = a0 + da
            u = z - (a + b * w)
            q = u.real * u.real + u.imag * u.imag
            n_new = norm_form(d, a, b)
            n_old = norm_form(d, best_a, best_b)
            key_less = (n_new < n_old) | ((n_new == n_old) & ((a < best_a) | ((a == best_a) & (b < best_b))))
            take = (q < best_q - tol) | ((np.abs(q - best_q) <= tol) & key_less)
            best_q = np.where(take, q, best_q)
            best_a = np.where(take, a, best_a)
            best_b = np.where(take, b, best_b)
    margin = dom.wall_margin(z - (best_a + best_b * w))
    return best_a, best_b, np.maximum(margin, 0.0)
