import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull, Voronoi

from ccflab.geometry import (
    AmbiguousRounding,
    build_domain,
    distance_to_partition_boundary,
    round_nearest,
    round_nearest_array,
    round_nearest_exact,
    sample_uniform,
)
from ccflab.ring import SUPPORTED_D, FieldElement, element, enumerate_ball, omega
from conftest import lattice_array


def voronoi_oracle(d):
    """Vertices of the cell at 0 from scipy's Voronoi diagram of a lattice patch."""
    w = omega(d)
    pts = np.array([[(a + b * w).real, (a + b * w).imag] for a in range(-4, 5) for b in range(-4, 5)])
    vor = Voronoi(pts)
    i0 = int(np.argmin(np.hypot(pts[:, 0], pts[:, 1])))
    region = vor.regions[vor.point_region[i0]]
    assert -1 not in region
    return vor.vertices[region]


def test_square_d1():
    dom = build_domain(1)
    assert set(dom.vertices) == {(Fraction(s1, 2), Fraction(s2, 2)) for s1 in (1, -1) for s2 in (1, -1)}
    assert dom.r == pytest.approx(0.5) and dom.R == pytest.approx(math.sqrt(2) / 2)
    assert dom.kind == "rectangle"


def test_hexagon_d3():
    dom = build_domain(3)
    assert dom.kind == "hexagon" and len(dom.vertices) == 6
    assert dom.r == pytest.approx(0.5)
    assert dom.R == pytest.approx(1 / math.sqrt(3))
    assert np.allclose(np.abs(dom.vertices_complex), 1 / math.sqrt(3))


def test_vertices_match_scipy_voronoi(d):
    dom = build_domain(d)
    ref = voronoi_oracle(d)
    got = np.array([[z.real, z.imag] for z in dom.vertices_complex])
    assert len(ref) == len(got)
    for p in ref:
        assert np.min(np.hypot(*(got - p).T)) < 1e-9
    assert dom.kind == ("rectangle" if d in (1, 2) else "hexagon")


def test_radii_bounds_and_recomputation(d):
    dom = build_domain(d)
    assert 0 < dom.r <= dom.R < 1
    assert dom.R <= math.sqrt(15 / 16)
    v = dom.vertices_complex
    # independent recomputation: inradius is the min distance to an edge line through consecutive vertices
    dists = []
    for p, q in zip(v, np.roll(v, -1)):
        e = q - p
        dists.append(abs((p.conjugate() * e).imag) / abs(e))
    assert min(dists) == pytest.approx(dom.r, rel=1e-12)
    assert np.max(np.abs(v)) == pytest.approx(dom.R, rel=1e-12)
    assert ConvexHull(np.c_[v.real, v.imag]).volume == pytest.approx(dom.area, rel=1e-12)
    # covolume of the lattice equals the cell area
    assert dom.area == pytest.approx(abs(omega(d).imag), rel=1e-12)


def test_convex_and_ball_containment(d, rng):
    dom = build_domain(d)
    v = dom.vertices_complex
    hull = ConvexHull(np.c_[v.real, v.imag])
    assert len(hull.vertices) == len(v)
    th = rng.uniform(0, 2 * np.pi, 2000)
    assert np.all(dom.wall_margin(0.999999 * dom.r * np.exp(1j * th)) > 0)
    pts = sample_uniform(d, rng, 2000)
    assert np.all(np.abs(pts) < dom.R)


def test_round_examples():
    assert round_nearest(0, 1) == element(1, 0)
    assert round_nearest(0.6 + 0.1j, 1) == element(1, 1)
    assert round_nearest(0.5, 1) == element(1, 0)
    with pytest.raises(AmbiguousRounding):
        round_nearest(0.5, 1, strict=True)


def test_round_matches_ball_minimiser(d, rng):
    zs = rng.uniform(-40, 40, (400, 2)) @ np.array([1, 1j])
    lat = lattice_array(d, 60)
    for z in zs:
        got = round_nearest(z, d)
        best = np.min(np.abs(z - lat))
        assert abs(z - complex(got)) <= best + 1e-12
        assert build_domain(d).contains(z - complex(got), tol=1e-12)


def test_round_matches_ball_minimiser_bulk(d, rng):
    # 10^5 points per d against a brute-force minimum over the enumerated ball
    z = rng.uniform(-6, 6, 100000) + 1j * rng.uniform(-6, 6, 100000)
    lat = lattice_array(d, 10)
    a, b, _ = round_nearest_array(z, d)
    got = np.abs(z - (a + b * omega(d)))
    for chunk in np.array_split(np.arange(z.size), 20):
        best = np.min(np.abs(z[chunk, None] - lat[None, :]), axis=1)
        assert np.all(got[chunk] <= best + 1e-12)
    # scalar and vectorised rounding agree on a subsample
    for i in range(0, 100000, 97):
        r = round_nearest(z[i], d)
        assert (r.a, r.b) == (a[i], b[i])


def test_exact_rounding_examples():
    assert round_nearest_exact(FieldElement(element(1, 3), element(1, 1))) == element(1, 3)
    x = FieldElement(element(1, 10), element(1, 3, 1))
    assert round_nearest_exact(x) == element(1, 3, -1)
    assert round_nearest_exact(FieldElement(element(3, 1), element(3, 2))) == element(3, 0)


@settings(max_examples=400, deadline=None)
@given(st.sampled_from(SUPPORTED_D), st.integers(-500, 500), st.integers(-500, 500),
       st.integers(-60, 60), st.integers(-60, 60))
def test_exact_rounding_is_nearest(d, a, b, c, e):
    den = element(d, c, e)
    if den.is_zero():
        return
    x = FieldElement(element(d, a, b), den)
    got = round_nearest_exact(x)
    xz = complex(x)
    cands = enumerate_ball(d, abs(xz) + 2)
    best = min(abs(xz - complex(k)) for k in cands)
    assert abs(xz - complex(got)) <= best + 1e-9
    # exact remainder lies in the closed cell
    assert build_domain(d).contains(complex(x - got), tol=1e-12)


def test_distance_to_boundary(d):
    dom = build_domain(d)
    assert distance_to_partition_boundary(0, d) == pytest.approx(dom.r)
    assert distance_to_partition_boundary(complex(element(d, 3, -2)), d) == pytest.approx(dom.r)
    mid = complex(dom.neighbors[0]) / 2
    assert distance_to_partition_boundary(mid, d) == pytest.approx(0, abs=1e-12)


def test_tiling_grid(d):
    dom = build_domain(d)
    g = np.linspace(-3.1, 3.3, 100)
    zz = (g[:, None] + 1j * g[None, :]).ravel()
    lat = lattice_array(d, 6)
    m = dom.wall_margin(zz[:, None] - lat[None, :])
    inside = np.sum(m > 1e-12, axis=1)
    boundary = np.sum(np.abs(m) <= 1e-12, axis=1)
    ok = ((inside == 1) & (boundary == 0)) | ((inside == 0) & (boundary >= 2))
    assert np.all(ok)


def test_tiling_on_walls():
    # points on the d=1 walls x = 1/2 + k belong to the boundary of two translates
    dom = build_domain(1)
    lat = lattice_array(1, 6)
    zz = 0.5 + 1j * np.linspace(-2.3, 2.3, 50)
    m = dom.wall_margin(zz[:, None] - lat[None, :])
    assert np.all(np.sum(np.abs(m) <= 1e-12, axis=1) >= 2)
    assert np.all(np.sum(m > 1e-12, axis=1) == 0)


def test_export_json(d, tmp_path):
    dom = build_domain(d)
    p = tmp_path / "dom.json"
    dom.export_json(p)
    rec = json.loads(p.read_text())
    assert set(rec) >= {"d", "vertices", "r", "R"}
    assert rec["d"] == d and len(rec["vertices"]) == len(dom.vertices)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        round_nearest(complex("nan"), 1)
