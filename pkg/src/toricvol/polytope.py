"""Exact rational geometry of lattice polytopes.

A polytope is stored in the H-representation ``{x : <l_i, x> <= b_i}`` with
primitive integer normals ``l_i`` and positive rational offsets ``b_i``.
Fano polytopes (the toric moment polytopes of ``-K_X``) are those with all
``b_i = 1``. Vertices, facet incidences and the fan triangulation from the
origin are derived exactly and cached.

Nothing in this module touches floating point: scalars are
:class:`fractions.Fraction`, vectors are tuples of them.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import gcd
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _exact as ex
from .errors import (DegeneratePolytopeError, DimensionTooLargeError,
                     NonPrimitiveNormalWarning, NotReflexiveError,
                     OriginNotInteriorError, UnboundedPolytopeError)

Rational = Fraction
RationalVector = tuple  # tuple[Fraction, ...]

DEFAULT_POINT_BUDGET = 10**7

__all__ = [
    "LatticePolytope", "PolytopeInvariants", "SmoothnessCertificate",
    "build_polytope", "volume_and_barycenter", "lattice_point_census",
    "is_smooth_fano", "fano_index", "degree_and_bounds", "support_function",
    "reduced_representative",
    "polytope_to_dict", "polytope_from_dict", "invariants_to_dict",
    "standard_polytopes",
]


@dataclass(frozen=True)
class LatticePolytope:
    """Convex polytope ``{x : <l_i, x> <= b_i}`` containing 0 in its interior.

    Use :func:`build_polytope` (or the ``from_*`` constructors) rather than
    instantiating directly; those validate and remove redundant inequalities.
    """

    dim: int
    normals: tuple
    offsets: tuple
    label: Optional[str] = field(default=None, compare=False)

    @classmethod
    def from_normals(cls, normals, offsets=None, label=None):
        return build_polytope(normals=normals, offsets=offsets, label=label)

    @classmethod
    def from_vertices(cls, vertices, label=None):
        return build_polytope(vertices=vertices, label=label)

    # -- derived exact data -------------------------------------------------

    @cached_property
    def vertices(self):
        return _enumerate_vertices(self.normals, self.offsets, self.dim)

    @cached_property
    def facet_vertices(self):
        """Vertex-index set of each facet, aligned with ``normals``."""
        out = []
        for l, b in zip(self.normals, self.offsets):
            out.append(frozenset(k for k, v in enumerate(self.vertices)
                                 if ex.dot(l, v) == b))
        return tuple(out)

    @cached_property
    def vertex_facets(self):
        """Indices of the facets active at each vertex."""
        return tuple(
            tuple(i for i, fv in enumerate(self.facet_vertices) if k in fv)
            for k in range(len(self.vertices)))

    @cached_property
    def fan_simplices(self):
        """Simplices ``(w_1..w_n)`` on the boundary; cones over 0 tile P."""
        n = self.dim
        simplices = []
        for fv in self.facet_vertices:
            for s in self._triangulate_face(fv, n - 1):
                simplices.append(tuple(self.vertices[k] for k in s))
        return tuple(simplices)

    def _triangulate_face(self, face, d):
        # pulling triangulation: cone from the smallest vertex over the
        # sub-faces not containing it
        if d == 0:
            return [(min(face),)]
        apex = min(face)
        subfaces = set()
        for fv in self.facet_vertices:
            g = face & fv
            if g == face or len(g) < d:
                continue
            if ex.affine_rank(self.vertices[k] for k in g) == d - 1:
                subfaces.add(g)
        out = []
        for g in sorted(subfaces, key=sorted):
            if apex in g:
                continue
            for s in self._triangulate_face(g, d - 1):
                out.append((apex,) + s)
        return out

    @property
    def is_fano_form(self):
        """All offsets equal 1, i.e. the polytope has the ``<l_i, x> <= 1`` form."""
        return all(b == 1 for b in self.offsets)

    @cached_property
    def is_lattice(self):
        return all(x.denominator == 1 for v in self.vertices for x in v)

    @cached_property
    def volume(self):
        return volume_and_barycenter(self)[0]

    @cached_property
    def barycenter(self):
        return volume_and_barycenter(self)[1]

    # -- transformations ----------------------------------------------------

    def transform(self, matrix):
        """Image under ``x -> U x`` for a unimodular integer matrix ``U``."""
        u = [[int(a) for a in row] for row in matrix]
        if abs(ex.det(u)) != 1:
            raise ValueError("transformation is not unimodular")
        uinv_t = ex.transpose(ex.inverse(u))
        normals = [tuple(int(a) for a in ex.mat_vec(uinv_t, l)) for l in self.normals]
        return _from_halfspaces(self.dim, normals, self.offsets, label=self.label,
                                warn=False)

    def scaled(self, k):
        """The dilate ``k P`` for a positive rational ``k``."""
        k = Fraction(k)
        if k <= 0:
            raise ValueError("dilation factor must be positive")
        return _from_halfspaces(self.dim, self.normals,
                                [b * k for b in self.offsets], warn=False)

    def dual(self):
        """Polar dual ``{y : <y, x> <= 1 for x in P}`` = conv(l_i / b_i)."""
        pts = [tuple(Fraction(a) / b for a in l)
               for l, b in zip(self.normals, self.offsets)]
        return build_polytope(vertices=pts)

    def contains(self, x, strict=False):
        vals = [ex.dot(l, x) for l in self.normals]
        if strict:
            return all(v < b for v, b in zip(vals, self.offsets))
        return all(v <= b for v, b in zip(vals, self.offsets))

    def __repr__(self):
        name = f" {self.label!r}" if self.label else ""
        return (f"LatticePolytope{name}(dim={self.dim}, "
                f"facets={len(self.normals)}, vertices={len(self.vertices)})")


# ---------------------------------------------------------------------------
# construction

def build_polytope(normals=None, vertices=None, *, offsets=None, dim=None,
                   label=None):
    """Build a validated polytope from an H- or V-representation.

    Parameters
    ----------
    normals : sequence of integer (or rational) vectors, optional
        Facet normals ``l_i`` of ``{<l_i, x> <= b_i}``. Non-primitive integer
        normals are divided by their gcd with a :class:`NonPrimitiveNormalWarning`.
    vertices : sequence of rational vectors, optional
        Points whose convex hull is the polytope. Entries may be ints,
        Fractions or ``"p/q"`` strings.
    offsets : sequence of rationals, optional
        Right-hand sides ``b_i``; default all ones (the Fano form).
    dim : int, optional
        Checked against the data when given.

    Raises
    ------
    UnboundedPolytopeError
        The normals do not positively span.
    OriginNotInteriorError
        The origin is not an interior point (V-rep input, or offsets <= 0).
    """
    if (normals is None) == (vertices is None):
        raise ValueError("give exactly one of normals= or vertices=")
    if normals is not None:
        normals = [tuple(ex.as_fraction(a) for a in l) for l in normals]
        n = len(normals[0]) if normals else dim
        if offsets is None:
            offsets = [Fraction(1)] * len(normals)
        offsets = [ex.as_fraction(b) for b in offsets]
        if len(offsets) != len(normals):
            raise ValueError("offsets and normals differ in length")
        P = _from_halfspaces(n, normals, offsets, label=label, warn=True)
    else:
        pts = [tuple(ex.as_fraction(a) for a in v) for v in vertices]
        n = len(pts[0]) if pts else dim
        P = _from_points(n, pts, label=label)
    if dim is not None and P.dim != dim:
        raise ValueError(f"data has dimension {P.dim}, expected {dim}")
    return P


def _from_halfspaces(n, normals, offsets, label=None, warn=True):
    if n is None or n < 1:
        raise ValueError("dimension must be positive")
    if len(normals) < n + 1:
        raise UnboundedPolytopeError(
            f"need at least {n + 1} inequalities in dimension {n}")
    best = {}
    for a, b in zip(normals, offsets):
        if len(a) != n:
            raise ValueError("inconsistent normal lengths")
        if all(x == 0 for x in a):
            raise ValueError("zero normal vector")
        l, factor = ex.primitive(a)
        if warn and factor < 1 and all(Fraction(x).denominator == 1 for x in a):
            warnings.warn(f"normal {tuple(int(x) for x in a)} reduced to primitive {l}",
                          NonPrimitiveNormalWarning, stacklevel=3)
        b = Fraction(b) * factor
        if l not in best or b < best[l]:
            best[l] = b
    if any(b <= 0 for b in best.values()):
        raise OriginNotInteriorError("some inequality excludes the origin")
    items = sorted(best.items())
    ls = [l for l, _ in items]
    bs = [b for _, b in items]
    _check_bounded(ls, n)
    verts = _enumerate_vertices(ls, bs, n)
    keep = []
    for l, b in zip(ls, bs):
        active = [v for v in verts if ex.dot(l, v) == b]
        if ex.affine_rank(active) == n - 1:
            keep.append((l, b))
    P = LatticePolytope(n, tuple(l for l, _ in keep), tuple(b for _, b in keep),
                        label)
    P.__dict__["vertices"] = verts
    return P


def _check_bounded(ls, n):
    if ex.rank(ls) < n:
        raise UnboundedPolytopeError("normals do not span")
    for sub in itertools.combinations(ls, n - 1):
        d = ex.cross(sub)
        if all(x == 0 for x in d):
            continue
        for s in (1, -1):
            if all(s * ex.dot(l, d) <= 0 for l in ls):
                raise UnboundedPolytopeError(
                    f"recession direction {tuple(s * x for x in d)}")


def _enumerate_vertices(ls, bs, n):
    # clear denominators so every solve is an integer Cramer computation
    q = 1
    for b in bs:
        q = q * b.denominator // gcd(q, b.denominator)
    B = [int(b * q) for b in bs]
    verts = set()
    for idx in itertools.combinations(range(len(ls)), n):
        A = [list(ls[i]) for i in idx]
        d = ex.det_int(A)
        if d == 0:
            continue
        y = []
        for j in range(n):
            Aj = [row[:j] + [B[i]] + row[j + 1:] for row, i in zip(A, idx)]
            y.append(ex.det_int(Aj))
        sd, ad = (1, d) if d > 0 else (-1, -d)
        if all(sd * sum(a * c for a, c in zip(l, y)) <= b * ad
               for l, b in zip(ls, B)):
            verts.add(tuple(Fraction(c, d * q) for c in y))
    return tuple(sorted(verts))


def _from_points(n, pts, label=None):
    if len(pts) < n + 1 or ex.affine_rank(pts) < n:
        raise DegeneratePolytopeError("points are not full-dimensional")
    # scale to integer points; the hull normals do not change
    q = 1
    for p in pts:
        for a in p:
            a = Fraction(a)
            q = q * a.denominator // gcd(q, a.denominator)
    pts = sorted({tuple(int(Fraction(a) * q) for a in p) for p in pts})
    halfspaces = {}
    for sub in itertools.combinations(pts, n):
        p0 = sub[0]
        normal = ex.cross([[a - b for a, b in zip(p, p0)] for p in sub[1:]])
        if all(x == 0 for x in normal):
            continue
        c = ex.dot(normal, p0)
        vals = [ex.dot(normal, p) for p in pts]
        if all(v <= c for v in vals):
            sign = 1
        elif all(v >= c for v in vals):
            sign = -1
        else:
            continue
        normal = tuple(sign * x for x in normal)
        c = sign * c
        if c <= 0:
            raise OriginNotInteriorError("origin is not an interior point of the hull")
        l, factor = ex.primitive(normal)
        halfspaces[l] = Fraction(c) * factor / q
    ls = sorted(halfspaces)
    return _from_halfspaces(n, ls, [halfspaces[l] for l in ls], label=label,
                            warn=False)


# ---------------------------------------------------------------------------
# invariants

def volume_and_barycenter(P):
    """Exact Euclidean volume and barycenter.

    The cones over 0 on the boundary simplices of :attr:`fan_simplices`
    tile ``P``; each contributes ``|det| / n!`` with centroid ``sum(w) / (n+1)``.
    """
    n = P.dim
    total = Fraction(0)
    moment = [Fraction(0)] * n
    for simplex in P.fan_simplices:
        vol = abs(ex.det(simplex)) / math.factorial(n)
        total += vol
        for i in range(n):
            moment[i] += vol * sum(w[i] for w in simplex) / (n + 1)
    return total, tuple(m / total for m in moment)


def lattice_point_census(P, budget=DEFAULT_POINT_BUDGET):
    """Interior lattice points and the number of boundary lattice points.

    Scans the integer points of the vertex bounding box with exact integer
    arithmetic.

    Raises
    ------
    DimensionTooLargeError
        If the bounding box holds more than ``budget`` points.
    """
    n = P.dim
    lo = [math.floor(min(v[i] for v in P.vertices)) for i in range(n)]
    hi = [math.ceil(max(v[i] for v in P.vertices)) for i in range(n)]
    count = math.prod(h - l + 1 for l, h in zip(lo, hi))
    if count > budget:
        raise DimensionTooLargeError(
            f"bounding box has {count} lattice points (budget {budget})",
            points=count, budget=budget)
    denom = 1
    for b in P.offsets:
        denom = denom * b.denominator // math.gcd(denom, b.denominator)
    L = np.array(P.normals, dtype=np.int64) * denom
    B = np.array([int(b * denom) for b in P.offsets], dtype=np.int64)
    axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    vals = grid @ L.T
    inside = np.all(vals <= B, axis=1)
    strict = np.all(vals < B, axis=1)
    interior = [tuple(int(a) for a in row) for row in grid[strict]]
    boundary = int(np.count_nonzero(inside & ~strict))
    return interior, boundary


@dataclass(frozen=True)
class SmoothnessCertificate:
    smooth_fano: bool
    delzant: bool
    reflexive: bool
    vertex_determinants: tuple  # (vertex, det or None if not simple)

    def __bool__(self):
        return self.smooth_fano


def _is_reflexive(P):
    if not P.is_lattice:
        return False
    return all((Fraction(a) / b).denominator == 1
               for l, b in zip(P.normals, P.offsets) for a in l)


def is_smooth_fano(P):
    """Delzant test plus reflexivity, with per-vertex determinants.

    A vertex passes when exactly ``n`` facets meet there and their normals
    have determinant +-1. Reflexive means ``P`` and its polar dual
    ``conv(l_i / b_i)`` are both lattice polytopes.
    """
    n = P.dim
    dets = []
    delzant = True
    for v, facets in zip(P.vertices, P.vertex_facets):
        if len(facets) != n:
            dets.append((v, None))
            delzant = False
            continue
        d = int(ex.det([P.normals[i] for i in facets]))
        dets.append((v, d))
        if abs(d) != 1:
            delzant = False
    reflexive = _is_reflexive(P)
    return SmoothnessCertificate(delzant and reflexive, delzant, reflexive,
                                 tuple(dets))


def fano_index(P):
    """Largest ``I <= n + 1`` such that ``(P - v) / I`` is a lattice polytope.

    Translating by an integer ``v`` and dividing by ``I`` lands on the
    lattice iff all vertices are congruent modulo ``I``; the search runs
    from ``n + 1`` down and ``I = 1`` always succeeds.
    """
    if not P.is_lattice:
        raise NotReflexiveError("Fano index needs a lattice polytope")
    verts = [[int(x) for x in v] for v in P.vertices]
    v0 = verts[0]
    for I in range(P.dim + 1, 0, -1):
        if all((a - b) % I == 0 for v in verts for a, b in zip(v, v0)):
            return I
    return 1  # unreachable


@dataclass(frozen=True)
class PolytopeInvariants:
    dim: int
    volume: Fraction
    barycenter: tuple
    degree: Fraction
    interior_lattice_points: tuple
    boundary_lattice_points: int
    is_reflexive: bool
    is_smooth_fano: bool
    fano_index: Optional[int]
    bishop_bound: Optional[Fraction]
    volume_bound: Fraction
    degree_bound: Fraction
    theorem_bound_ok: bool
    bishop_ok: Optional[bool]
    ke_candidate: bool
    vertex_count: int
    facet_count: int

    @property
    def equality(self):
        return self.degree == self.degree_bound


def degree_and_bounds(P, budget=DEFAULT_POINT_BUDGET):
    """Assemble every invariant and the exact inequality checks for ``P``."""
    n = P.dim
    vol, bar = volume_and_barycenter(P)
    interior, boundary = lattice_point_census(P, budget=budget)
    cert = is_smooth_fano(P)
    degree = vol * math.factorial(n)
    degree_bound = Fraction((n + 1) ** n)
    if cert.reflexive:
        index = fano_index(P)
        bishop = degree_bound * (n + 1) / index
        bishop_ok = degree <= bishop
    else:
        index = bishop = bishop_ok = None
    return PolytopeInvariants(
        dim=n, volume=vol, barycenter=bar, degree=degree,
        interior_lattice_points=tuple(interior),
        boundary_lattice_points=boundary,
        is_reflexive=cert.reflexive, is_smooth_fano=cert.smooth_fano,
        fano_index=index, bishop_bound=bishop,
        volume_bound=degree_bound / math.factorial(n),
        degree_bound=degree_bound,
        theorem_bound_ok=degree <= degree_bound,
        bishop_ok=bishop_ok,
        ke_candidate=all(c == 0 for c in bar),
        vertex_count=len(P.vertices), facet_count=len(P.normals),
    )


def support_function(P, x):
    """``h_P(x) = max over vertices v of <v, x>``, exactly."""
    x = [ex.as_fraction(a) for a in x]
    return max(ex.dot(v, x) for v in P.vertices)


# ---------------------------------------------------------------------------
# serialization

def _spread(P):
    return sum(float(c) ** 2 for v in P.vertices for c in v)


def reduced_representative(P, entry_bound=1, max_rounds=20):
    """A unimodular image of ``P`` with small vertex coordinates.

    Greedy descent on the sum of squared vertex coordinates over unimodular
    matrices with entries in ``[-entry_bound, entry_bound]``. Invariants are
    unchanged; numerical grids behave better on compact representatives.

    Returns
    -------
    (Q, U) with ``Q = P.transform(U)``.
    """
    n = P.dim
    rng = range(-entry_bound, entry_bound + 1)
    moves = []
    for flat in itertools.product(rng, repeat=n * n):
        U = [list(flat[i * n:(i + 1) * n]) for i in range(n)]
        if abs(ex.det(U)) == 1:
            moves.append(U)
    total = [[int(i == j) for j in range(n)] for i in range(n)]
    best = _spread(P)
    for _ in range(max_rounds):
        cand = min(((P.transform(U), U) for U in moves), key=lambda t: _spread(t[0]))
        if _spread(cand[0]) >= best - 1e-12:
            break
        P, U = cand
        best = _spread(P)
        total = [[sum(U[i][k] * total[k][j] for k in range(n)) for j in range(n)]
                 for i in range(n)]
    return P, tuple(tuple(r) for r in total)


def polytope_to_dict(P, form="normals"):
    out = {"dim": P.dim}
    if P.label:
        out["label"] = P.label
    if form == "normals":
        out["normals"] = [list(l) for l in P.normals]
        if not P.is_fano_form:
            out["offsets"] = [ex.fraction_str(b) for b in P.offsets]
    elif form == "vertices":
        out["vertices"] = [[ex.fraction_str(x) for x in v] for v in P.vertices]
    else:
        raise ValueError(f"unknown form {form!r}")
    return out


def polytope_from_dict(data):
    """Inverse of :func:`polytope_to_dict`; accepts either representation."""
    dim = data.get("dim")
    label = data.get("label")
    if "normals" in data:
        return build_polytope(normals=data["normals"], offsets=data.get("offsets"),
                              dim=dim, label=label)
    if "vertices" in data:
        return build_polytope(vertices=data["vertices"], dim=dim, label=label)
    raise ValueError("polytope object needs 'normals' or 'vertices'")


def _exact_and_hint(x):
    return {"exact": ex.fraction_str(x), "decimal": float(x)}


def invariants_to_dict(inv):
    """JSON-ready invariants; rationals as ``"p/q"`` plus decimal hints."""
    def enc(x):
        if x is None:
            return None
        return _exact_and_hint(x)

    return {
        "dim": inv.dim,
        "volume": enc(inv.volume),
        "barycenter": [ex.fraction_str(c) for c in inv.barycenter],
        "barycenter_decimal": [float(c) for c in inv.barycenter],
        "degree": enc(inv.degree),
        "interior_lattice_points": [list(p) for p in inv.interior_lattice_points],
        "boundary_lattice_points": inv.boundary_lattice_points,
        "is_reflexive": inv.is_reflexive,
        "is_smooth_fano": inv.is_smooth_fano,
        "fano_index": inv.fano_index,
        "bishop_bound": enc(inv.bishop_bound),
        "volume_bound": enc(inv.volume_bound),
        "degree_bound": enc(inv.degree_bound),
        "theorem_bound_ok": inv.theorem_bound_ok,
        "bishop_ok": inv.bishop_ok,
        "ke_candidate": inv.ke_candidate,
        "equality": inv.equality,
        "vertex_count": inv.vertex_count,
        "facet_count": inv.facet_count,
    }


# ---------------------------------------------------------------------------
# named examples

def standard_polytopes():
    """A few named Fano polytopes used throughout the tests and demos."""
    return {
        "P1": build_polytope(normals=[(1,), (-1,)], label="P1"),
        "P2": build_polytope(normals=[(-1, 0), (0, -1), (1, 1)], label="P2"),
        "P1xP1": build_polytope(normals=[(1, 0), (-1, 0), (0, 1), (0, -1)],
                                label="P1xP1"),
        "F1": build_polytope(vertices=[(1, 0), (0, 1), (-2, 1), (1, -2)], label="F1"),
        "Bl2P2": build_polytope(normals=[(-1, 0), (0, -1), (1, 1), (1, 0), (0, 1)],
                                label="Bl2P2"),
        "hexagon": build_polytope(normals=[(1, 0), (-1, 0), (0, 1), (0, -1),
                                           (1, 1), (-1, -1)], label="hexagon"),
        "P3": build_polytope(normals=[(-1, 0, 0), (0, -1, 0), (0, 0, -1),
                                      (1, 1, 1)], label="P3"),
    }
