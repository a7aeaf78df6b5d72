"""Brute-force catalog of low-dimensional Fano polytopes.

Two enumerators:

* ``n = 1, 2`` -- a depth-first walk over cyclic sequences of primitive
  lattice points in the box ``[-B, B]^2``. Consecutive vertices must span an
  edge at lattice distance one from the origin, which is exactly the
  reflexivity condition for polygons, so every hit is reflexive and no hull
  computation is needed.
* ``n >= 3`` -- subsets of primitive points of the box are taken as vertex
  sets of the *dual* polytope; reflexive hulls are kept and dualized. This
  runs under a candidate budget and is never claimed complete.

Classes are merged up to ``GL(n, Z)`` by searching for a unimodular matrix
that maps one normal set onto the other.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from . import _exact as ex
from .errors import BudgetExceededError
from .polytope import (LatticePolytope, PolytopeInvariants, _from_halfspaces,
                       degree_and_bounds, invariants_to_dict, polytope_from_dict,
                       polytope_to_dict)

# Published counts of reflexive / smooth Fano polytopes up to lattice equivalence.
KNOWN_REFLEXIVE_COUNTS = {1: 1, 2: 16, 3: 4319}
KNOWN_SMOOTH_COUNTS = {1: 1, 2: 5, 3: 18}

DEFAULT_CANDIDATE_BUDGET = 200_000


@dataclass
class CatalogEntry:
    polytope: LatticePolytope
    invariants: PolytopeInvariants
    equivalence_class_id: int
    ke: bool
    representatives_in_box: int = 1


@dataclass
class Catalog:
    """Result of :func:`enumerate_fano`; iterates over its entries."""

    dim: int
    box: int
    entries: List[CatalogEntry]
    complete: bool
    candidates_examined: int
    caveat: str = ""

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def smooth(self):
        return [e for e in self.entries if e.invariants.is_smooth_fano]


@dataclass
class AuditReport:
    dimension: int
    scope: str
    counts: dict
    violations: list
    equality_cases: list
    extremal_entries: list
    rows: list
    caveat: str = ""

    @property
    def ok(self):
        return not self.violations


# ---------------------------------------------------------------------------
# equivalence

def _linear_basis(vectors, n):
    chosen = []
    for v in vectors:
        if ex.rank(chosen + [v]) > len(chosen):
            chosen.append(v)
            if len(chosen) == n:
                return chosen
    return None


def are_equivalent(P, Q):
    """Decide whether ``U P = Q`` for some ``U`` in ``GL(n, Z)``.

    Returns ``(flag, U)`` where ``U`` maps the normals of ``P`` onto the
    normals of ``Q`` (it acts on points by the inverse transpose). A basis of
    normals active at one vertex of ``P`` can only go to normals active at a
    common vertex of ``Q``, so only those images are tried.
    """
    n = P.dim
    if (Q.dim != n or len(P.normals) != len(Q.normals)
            or len(P.vertices) != len(Q.vertices)
            or sorted(P.offsets) != sorted(Q.offsets)
            or P.volume != Q.volume):
        return False, None
    target = set(zip(Q.normals, Q.offsets))
    src = None
    for facets in P.vertex_facets:
        basis = _linear_basis([P.normals[i] for i in facets], n)
        if basis is not None:
            src = basis
            break
    # U = B A^{-1} with A = src^T; keep everything integral via the adjugate
    A = ex.transpose(src)
    d = ex.det_int(A)
    adj = [[(-1) ** (r + c) * ex.det_int([row[:r] + row[r + 1:]
                                          for k, row in enumerate(A) if k != c])
            for c in range(n)] for r in range(n)]
    offset_of = dict(zip(P.normals, P.offsets))
    src_offsets = [offset_of[tuple(a)] for a in src]
    p_items = list(zip(P.normals, P.offsets))
    for facets in Q.vertex_facets:
        for images in itertools.permutations(facets, n):
            if [Q.offsets[i] for i in images] != src_offsets:
                continue
            b = ex.transpose([Q.normals[i] for i in images])
            num = [[sum(b[r][k] * adj[k][c] for k in range(n)) for c in range(n)]
                   for r in range(n)]
            if any(x % d for row in num for x in row):
                continue
            U = [[x // d for x in row] for row in num]
            if abs(ex.det_int(U)) != 1:
                continue
            mapped = {(tuple(sum(a * x for a, x in zip(row, l)) for row in U), o)
                      for l, o in p_items}
            if mapped == target:
                return True, U
    return False, None


def _bucket_key(P):
    return (len(P.normals), len(P.vertices), P.volume, tuple(sorted(P.offsets)),
            tuple(sorted(len(f) for f in P.vertex_facets)),
            tuple(sorted(len(f) for f in P.facet_vertices)))


def _serialized(P):
    return json.dumps([list(l) for l in P.normals])


def classify(polytopes):
    """Group polytopes into lattice-equivalence classes.

    Returns a list of ``(representative, members_count)`` sorted by the
    serialized normal matrix of the representative; the representative of
    each class is its member with the smallest serialized normal matrix.
    """
    buckets = {}
    for P in polytopes:
        reps = buckets.setdefault(_bucket_key(P), [])
        for cls in reps:
            if are_equivalent(cls[0], P)[0]:
                cls[1] += 1
                if _serialized(P) < _serialized(cls[2]):
                    cls[2] = P
                break
        else:
            reps.append([P, 1, P])
    classes = [(c[2], c[1]) for reps in buckets.values() for c in reps]
    classes.sort(key=lambda c: _serialized(c[0]))
    return classes


# ---------------------------------------------------------------------------
# enumeration

def _primitive_points(n, box):
    pts = []
    for p in itertools.product(range(-box, box + 1), repeat=n):
        if any(p) and math.gcd(*p) == 1:
            pts.append(p)
    return pts


def _half(p):
    return 0 if (p[1] > 0 or (p[1] == 0 and p[0] > 0)) else 1


def _angle_cmp(a, b):
    ha, hb = _half(a), _half(b)
    if ha != hb:
        return ha - hb
    c = a[0] * b[1] - a[1] * b[0]
    return -1 if c > 0 else (1 if c < 0 else 0)


def _det2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _edge_ok(a, b):
    d = _det2(a, b)
    return d > 0 and d == math.gcd(b[0] - a[0], b[1] - a[1])


def _turn(a, b, c):
    return _det2((b[0] - a[0], b[1] - a[1]), (c[0] - b[0], c[1] - b[1]))


def _reflexive_polygons(box):
    pts = sorted(_primitive_points(2, box), key=functools.cmp_to_key(_angle_cmp))
    found = []

    def dfs(path, start):
        last = path[-1]
        for j in range(start, len(pts)):
            w = pts[j]
            if not _edge_ok(last, w):
                continue
            if len(path) >= 2 and _turn(path[-2], last, w) <= 0:
                continue
            v0 = path[0]
            if (len(path) >= 2 and _edge_ok(w, v0) and _turn(last, w, v0) > 0
                    and _turn(w, v0, path[1]) > 0):
                found.append(path + [w])
            dfs(path + [w], j + 1)

    for i, v0 in enumerate(pts):
        dfs([v0], i + 1)
    return found


def _polygon_from_cycle(cycle):
    normals = []
    k = len(cycle)
    for i in range(k):
        a, b = cycle[i], cycle[(i + 1) % k]
        # edge at height one: outward normal is the primitive perpendicular
        normals.append((b[1] - a[1], a[0] - b[0]))
    normals = [tuple(x // math.gcd(*l) for x in l) for l in normals]
    return _from_halfspaces(2, normals, [Fraction(1)] * k, warn=False)


def _int_cross(rows, n):
    if n == 2:
        (a, b), = rows
        return (b, -a)
    if n == 3:
        (a1, a2, a3), (b1, b2, b3) = rows
        return (a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1)
    return tuple(int(x) for x in ex.cross(rows))


def _int_hull_facets(S, n):
    """Facets of conv(S) as {primitive normal: offset}, integer arithmetic."""
    facets = {}
    for sub in itertools.combinations(S, n):
        p0 = sub[0]
        normal = _int_cross([[a - b for a, b in zip(p, p0)] for p in sub[1:]], n)
        if not any(normal):
            continue
        c = sum(a * b for a, b in zip(normal, p0))
        lo = hi = False
        for p in S:
            v = sum(a * b for a, b in zip(normal, p))
            if v < c:
                lo = True
            elif v > c:
                hi = True
            if lo and hi:
                break
        if lo and hi:
            continue
        if not lo and not hi:
            return {}  # S lies in a hyperplane
        if hi:
            normal = tuple(-x for x in normal)
            c = -c
        g = math.gcd(*normal)
        facets[tuple(x // g for x in normal)] = Fraction(c, g)
    return facets


def _dual_subset_search(n, box, budget, max_vertices):
    pts = _primitive_points(n, box)
    boxpts = np.array([p for p in itertools.product(range(-box, box + 1), repeat=n)
                       if any(p)], dtype=np.int64)
    found = []
    examined = 0
    complete = True
    for size in range(n + 1, max_vertices + 1):
        for S in itertools.combinations(pts, size):
            examined += 1
            if examined > budget:
                return found, examined - 1, False
            facets = _int_hull_facets(S, n)
            if not facets or any(c != 1 for c in facets.values()):
                continue
            # every point must be a vertex: its active normals span
            ls = list(facets)
            if any(ex.rank([l for l in ls if sum(a * b for a, b in zip(l, p)) == 1]) < n
                   for p in S):
                continue
            M = np.array(ls, dtype=np.int64)
            if np.any(np.all(boxpts @ M.T < 1, axis=1)):
                continue  # a nonzero interior lattice point
            # conv(S) is reflexive; its polar has normals S and vertices ls
            P = LatticePolytope(n, tuple(sorted(S)), (Fraction(1),) * len(S))
            P.__dict__["vertices"] = tuple(sorted(
                tuple(Fraction(a) for a in l) for l in ls))
            found.append(P)
    return found, examined, complete


def enumerate_fano(n, box=3, *, budget=DEFAULT_CANDIDATE_BUDGET, max_vertices=None,
                   strict=False, method=None):
    """Enumerate reflexive polytopes up to lattice equivalence.

    Parameters
    ----------
    n : int
        Dimension, 1 to 3.
    box : int
        Coordinate bound. For ``n <= 2`` it bounds the vertices of the
        polytope itself; for the dual-subset method (default when
        ``n >= 3``) it bounds the vertices of the dual polytope.
    budget : int
        Maximum number of candidate subsets for the dual-subset method.
    strict : bool
        Raise :class:`BudgetExceededError` (carrying the partial catalog)
        instead of returning an incomplete catalog.
    method : {"cycles", "dual-subsets"}, optional
        Override the enumerator; ``"dual-subsets"`` works in any dimension and
        serves as an independent cross-check for ``n = 2``.
    """
    if n < 1 or n > 3:
        raise ValueError("enumeration supported for n in {1, 2, 3}")
    method = method or ("cycles" if n <= 2 else "dual-subsets")
    if method == "cycles":
        if n == 1:
            polys = [_from_halfspaces(1, [(1,), (-1,)], [Fraction(1)] * 2, warn=False)]
        else:
            polys = [_polygon_from_cycle(c) for c in _reflexive_polygons(box)]
        examined, complete = len(polys), True
        caveat = ""
    elif method == "dual-subsets":
        if max_vertices is None:
            max_vertices = {1: 2, 2: 6, 3: 8}[n]
        polys, examined, complete = _dual_subset_search(n, box, budget, max_vertices)
        caveat = "" if complete else f"within box {box}: candidate budget {budget} exhausted"
        if n >= 3:
            caveat = caveat or f"within box {box} (dual vertices); completeness not certified"
    else:
        raise ValueError(f"unknown method {method!r}")

    classes = classify(polys)
    entries = []
    for cid, (rep, count) in enumerate(classes):
        inv = degree_and_bounds(rep)
        entries.append(CatalogEntry(rep, inv, cid, inv.ke_candidate, count))
    cat = Catalog(n, box, entries, complete, examined, caveat)
    if strict and not complete:
        raise BudgetExceededError(caveat, partial=None)
    return cat


# ---------------------------------------------------------------------------
# audit

def audit(entries, scope="smooth"):
    """Check ``degree <= (n+1)^n`` over every barycenter-zero entry.

    ``scope="smooth"`` restricts to smooth Fano entries (the toric
    Kahler-Einstein statement); ``scope="all-reflexive"`` checks the
    lattice-polytope case of Ehrhart's volume bound, for entries with
    barycenter 0 and exactly one interior lattice point.
    """
    if scope not in ("smooth", "all-reflexive"):
        raise ValueError(f"unknown scope {scope!r}")
    caveat = getattr(entries, "caveat", "")
    entries = list(entries)
    if not entries:
        raise ValueError("no entries to audit")
    n = entries[0].invariants.dim
    rows, violations, equality = [], [], []
    reflexive = smooth = ke = 0
    checked = []
    for e in entries:
        inv = e.invariants
        reflexive += inv.is_reflexive
        smooth += inv.is_smooth_fano
        in_scope = inv.is_smooth_fano if scope == "smooth" else inv.is_reflexive
        ke_flag = inv.ke_candidate and (
            scope == "smooth" or len(inv.interior_lattice_points) == 1)
        row = {
            "id": e.equivalence_class_id,
            "label": e.polytope.label,
            "normals": [list(l) for l in e.polytope.normals],
            "degree": ex.fraction_str(inv.degree),
            "volume": ex.fraction_str(inv.volume),
            "barycenter": [ex.fraction_str(c) for c in inv.barycenter],
            "index": inv.fano_index,
            "smooth": inv.is_smooth_fano,
            "ke": bool(in_scope and ke_flag),
            "bounds_ok": inv.theorem_bound_ok,
            "bishop_ok": inv.bishop_ok,
        }
        rows.append(row)
        if not (in_scope and ke_flag):
            continue
        ke += 1
        checked.append(e)
        if not inv.theorem_bound_ok:
            violations.append(row)
        if inv.equality:
            equality.append(row)
    extremal = []
    if checked:
        top = max(e.invariants.degree for e in checked)
        extremal = [r for r in rows if r["ke"] and Fraction(r["degree"]) == top]
    return AuditReport(
        dimension=n, scope=scope,
        counts={"entries": len(entries), "reflexive": reflexive, "smooth": smooth,
                "ke": ke},
        violations=violations, equality_cases=equality, extremal_entries=extremal,
        rows=rows, caveat=caveat)


def audit_to_dict(report):
    return {
        "dimension": report.dimension, "scope": report.scope,
        "counts": report.counts, "violations": report.violations,
        "equality_cases": report.equality_cases,
        "extremal_entries": report.extremal_entries,
        "rows": report.rows, "caveat": report.caveat, "ok": report.ok,
    }


def audit_to_csv(report):
    """One row per class: id, degree, volume, barycenter, index, ke, bounds-ok."""
    lines = ["id,degree,volume,barycenter,index,ke,bounds_ok"]
    for r in report.rows:
        lines.append(",".join([
            str(r["id"]), r["degree"], r["volume"], " ".join(r["barycenter"]),
            "" if r["index"] is None else str(r["index"]),
            str(r["ke"]).lower(), str(r["bounds_ok"]).lower()]))
    return "\n".join(lines) + "\n"


def catalog_to_dict(cat):
    return {
        "dim": cat.dim, "box": cat.box, "complete": cat.complete,
        "candidates_examined": cat.candidates_examined, "caveat": cat.caveat,
        "entries": [{
            "id": e.equivalence_class_id,
            "polytope": polytope_to_dict(e.polytope),
            "invariants": invariants_to_dict(e.invariants),
            "ke": e.ke,
            "representatives_in_box": e.representatives_in_box,
        } for e in cat.entries],
    }


def catalog_from_dict(data):
    entries = []
    for item in data["entries"]:
        P = polytope_from_dict(item["polytope"])
        inv = degree_and_bounds(P)
        entries.append(CatalogEntry(P, inv, item["id"], inv.ke_candidate,
                                    item.get("representatives_in_box", 1)))
    return Catalog(data["dim"], data.get("box", 0), entries,
                   data.get("complete", False), data.get("candidates_examined", 0),
                   data.get("caveat", ""))
