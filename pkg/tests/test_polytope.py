from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from toricvol import (OriginNotInteriorError, UnboundedPolytopeError, build_polytope,
                      degree_and_bounds, fano_index, is_smooth_fano, lattice_point_census,
                      standard_polytopes, support_function, volume_and_barycenter)
from toricvol.errors import NonPrimitiveNormalWarning
from toricvol.polytope import polytope_from_dict, polytope_to_dict

STD = standard_polytopes()


def shoelace(vertices):
    """Area and centroid of a convex polygon from its vertices (independent oracle)."""
    import math
    cx = sum(Fraction(v[0]) for v in vertices) / len(vertices)
    cy = sum(Fraction(v[1]) for v in vertices) / len(vertices)
    pts = sorted(vertices, key=lambda v: math.atan2(float(v[1] - cy), float(v[0] - cx)))
    area = Fraction(0)
    gx = gy = Fraction(0)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
        c = Fraction(x0) * y1 - Fraction(x1) * y0
        area += c
        gx += (x0 + x1) * c
        gy += (y0 + y1) * c
    area /= 2
    return abs(area), (gx / (6 * area), gy / (6 * area))


def census_oracle(P):
    """Count lattice points by testing each normal inequality directly."""
    import math
    box = [(math.floor(min(v[k] for v in P.vertices)), math.ceil(max(v[k] for v in P.vertices)))
           for k in range(P.dim)]
    interior, boundary = [], 0
    for x in product(*[range(a, b + 1) for a, b in box]):
        vals = [sum(l_i * x_i for l_i, x_i in zip(l, x)) - b for l, b in zip(P.normals, P.offsets)]
        if all(v < 0 for v in vals):
            interior.append(x)
        elif all(v <= 0 for v in vals):
            boundary += 1
    return sorted(interior), boundary


def test_p2_vertices_from_normals():
    assert set(STD["P2"].vertices) == {(-1, -1), (2, -1), (-1, 2)}


def test_segment_vertices():
    assert set(STD["P1"].vertices) == {(1,), (-1,)}


def test_vertices_to_normals_round_trip():
    P = build_polytope(vertices=[(-1, -1), (2, -1), (-1, 2)])
    assert set(P.normals) == {(-1, 0), (0, -1), (1, 1)}
    assert all(b == 1 for b in P.offsets)


@pytest.mark.parametrize("name", ["P2", "P1xP1", "F1", "Bl2P2", "hexagon"])
def test_volume_barycenter_against_shoelace(name):
    P = STD[name]
    vol, bar = volume_and_barycenter(P)
    area, cen = shoelace(list(P.vertices))
    assert vol == area
    assert bar == cen


def test_frozen_volumes_and_barycenters():
    assert volume_and_barycenter(STD["P2"]) == (Fraction(9, 2), (0, 0))
    assert volume_and_barycenter(STD["hexagon"]) == (3, (0, 0))
    assert volume_and_barycenter(STD["F1"]) == (4, (Fraction(-1, 12), Fraction(-1, 12)))
    assert volume_and_barycenter(STD["P3"]) == (Fraction(32, 3), (0, 0, 0))


@pytest.mark.parametrize("name,interior,boundary", [
    ("P2", [(0, 0)], 9), ("P1", [(0,)], 2), ("P1xP1", [(0, 0)], 8)])
def test_lattice_census(name, interior, boundary):
    got_int, got_bnd = lattice_point_census(STD[name])
    assert sorted(got_int) == interior and got_bnd == boundary
    assert census_oracle(STD[name]) == (interior, boundary)


def test_smoothness():
    assert is_smooth_fano(STD["P2"])
    assert is_smooth_fano(STD["P1"])
    assert not is_smooth_fano(build_polytope(normals=[(-1, 0), (0, -1), (2, 1)]))


def test_fano_index_examples():
    assert fano_index(STD["P2"]) == 3
    assert fano_index(STD["P1xP1"]) == 2
    assert fano_index(STD["hexagon"]) == 1
    assert fano_index(STD["P1"]) == 2
    assert fano_index(STD["P3"]) == 4


def test_degree_and_bounds_examples():
    inv = degree_and_bounds(STD["P2"])
    assert (inv.degree, inv.degree_bound, inv.fano_index, inv.bishop_bound) == (9, 9, 3, 9)
    assert inv.ke_candidate and inv.equality
    sq = degree_and_bounds(STD["P1xP1"])
    assert (sq.degree, sq.fano_index, sq.bishop_bound, sq.ke_candidate) == (8, 2, Fraction(27, 2), True)
    f1 = degree_and_bounds(STD["F1"])
    assert (f1.degree, f1.fano_index, f1.bishop_bound, f1.ke_candidate) == (8, 1, 27, False)


def test_support_function_examples():
    assert support_function(STD["P1xP1"], (3, 4)) == 7
    assert support_function(STD["P1"], (-5,)) == 5
    assert support_function(STD["P2"], (1, 1)) == 1


def test_build_errors():
    with pytest.raises(UnboundedPolytopeError):
        build_polytope(normals=[(1, 0), (0, 1), (-1, 0)])
    with pytest.raises(OriginNotInteriorError):
        build_polytope(vertices=[(1, 1), (2, 1), (1, 2)])
    with pytest.warns(NonPrimitiveNormalWarning):
        P = build_polytope(normals=[(-2, 0), (0, -1), (1, 1)], offsets=[2, 1, 1])
    assert (-1, 0) in P.normals


def test_json_round_trip():
    for P in STD.values():
        Q = polytope_from_dict(polytope_to_dict(P))
        assert set(Q.normals) == set(P.normals)
        R = polytope_from_dict(polytope_to_dict(P, form="vertices"))
        assert set(R.vertices) == set(P.vertices)


# ---------------------------------------------------------------------------
# properties

unimodular_2d = st.lists(st.sampled_from([((1, 1), (0, 1)), ((1, 0), (1, 1)), ((0, 1), (1, 0)),
                                          ((1, -1), (0, 1)), ((-1, 0), (0, 1))]),
                         min_size=1, max_size=6)


def _compose(ops):
    M = ((1, 0), (0, 1))
    for A in ops:
        M = tuple(tuple(sum(A[i][k] * M[k][j] for k in range(2)) for j in range(2))
                  for i in range(2))
    return M


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["P2", "P1xP1", "F1", "Bl2P2", "hexagon"]), unimodular_2d)
def test_unimodular_invariance(name, ops):
    U = _compose(ops)
    P = STD[name]
    Q = P.transform(U)
    a, b = degree_and_bounds(P), degree_and_bounds(Q)
    assert (a.volume, a.degree, a.fano_index, a.is_smooth_fano) == \
        (b.volume, b.degree, b.fano_index, b.is_smooth_fano)
    assert len(a.interior_lattice_points) == len(b.interior_lattice_points)
    assert a.boundary_lattice_points == b.boundary_lattice_points
    mapped = tuple(sum(U[i][k] * a.barycenter[k] for k in range(2)) for i in range(2))
    assert mapped == b.barycenter


@st.composite
def lattice_polygons(draw):
    pts = draw(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)),
                        min_size=3, max_size=8, unique=True))
    pts += [(-1, -1), (1, -1), (0, 2)]
    return pts


@settings(max_examples=40, deadline=None)
@given(lattice_polygons())
def test_pick_and_shoelace_on_random_polygons(pts):
    P = build_polytope(vertices=pts)
    vol, bar = volume_and_barycenter(P)
    area, cen = shoelace(list(P.vertices))
    assert vol == area and bar == cen
    interior, boundary = lattice_point_census(P)
    assert vol == len(interior) + Fraction(boundary, 2) - 1


@settings(max_examples=25, deadline=None)
@given(lattice_polygons(), st.integers(1, 3))
def test_scaling(pts, k):
    P = build_polytope(vertices=pts)
    kP = build_polytope(vertices=[tuple(k * x for x in v) for v in P.vertices])
    assert volume_and_barycenter(kP)[0] == k ** 2 * volume_and_barycenter(P)[0]


@settings(max_examples=25, deadline=None)
@given(lattice_polygons())
def test_duality_round_trip(pts):
    P = build_polytope(vertices=pts)
    Q = build_polytope(normals=P.normals, offsets=P.offsets)
    assert set(Q.vertices) == set(P.vertices)
    for v in P.vertices:
        active = [l for l, b in zip(P.normals, P.offsets)
                  if sum(a * x for a, x in zip(l, v)) == b]
        assert len(active) >= 2


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["P2", "P1xP1", "F1", "hexagon"]), unimodular_2d)
def test_reduced_representative(name, ops):
    from toricvol import reduced_representative
    P = STD[name].transform(_compose(ops))
    Q, U = reduced_representative(P)
    assert set(P.transform(U).vertices) == set(Q.vertices)
    a, b = degree_and_bounds(P), degree_and_bounds(Q)
    assert (a.degree, a.fano_index, a.is_smooth_fano) == (b.degree, b.fano_index, b.is_smooth_fano)
    spread = lambda R: sum(float(c) ** 2 for v in R.vertices for c in v)
    assert spread(Q) <= spread(P)
