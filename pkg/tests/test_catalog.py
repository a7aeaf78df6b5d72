import random
from fractions import Fraction

import pytest

from toricvol import are_equivalent, audit, build_polytope, enumerate_fano, standard_polytopes
from toricvol.catalog import KNOWN_REFLEXIVE_COUNTS, KNOWN_SMOOTH_COUNTS

STD = standard_polytopes()


@pytest.fixture(scope="module")
def cat2():
    return enumerate_fano(2, 3)


def test_dim1_catalog():
    cat = enumerate_fano(1)
    assert len(cat) == 1
    rep = audit(cat)
    assert rep.ok and [r["degree"] for r in rep.equality_cases] == ["2"]


def test_dim2_counts(cat2):
    assert cat2.complete
    assert len(cat2) == KNOWN_REFLEXIVE_COUNTS[2] == 16
    assert len(cat2.smooth) == KNOWN_SMOOTH_COUNTS[2] == 5


def test_dim2_smooth_classes_match_named(cat2):
    named = [STD[k] for k in ("P2", "P1xP1", "F1", "Bl2P2", "hexagon")]
    for P in named:
        assert sum(are_equivalent(P, e.polytope)[0] for e in cat2.smooth) == 1


def test_dim2_ke_filter(cat2):
    ke = sorted(int(e.invariants.degree) for e in cat2.smooth if e.ke)
    assert ke == [6, 8, 9]
    rep = audit(cat2)
    assert rep.ok and rep.counts["ke"] == 3
    assert [r["degree"] for r in rep.equality_cases] == ["9"]


def test_dual_subset_method_agrees(cat2):
    alt = enumerate_fano(2, 2, method="dual-subsets")
    assert len(alt) == len(cat2)
    for e in alt:
        assert sum(are_equivalent(e.polytope, f.polytope)[0] for f in cat2) == 1


def test_all_reflexive_scope(cat2):
    rep = audit(cat2, scope="all-reflexive")
    assert rep.ok
    assert all(Fraction(r["degree"]) <= 9 for r in rep.rows if r["ke"])


def test_are_equivalent_examples():
    P = STD["P2"]
    swapped = P.transform(((0, 1), (1, 0)))
    ok, U = are_equivalent(P, swapped)
    assert ok
    assert abs(U[0][0] * U[1][1] - U[0][1] * U[1][0]) == 1
    assert not are_equivalent(STD["P1xP1"], STD["hexagon"])[0]
    assert not are_equivalent(STD["F1"], STD["hexagon"])[0]


def test_equivalence_relation(cat2):
    polys = [e.polytope for e in cat2]
    rng = random.Random(3)
    twisted = []
    for P in polys:
        a = rng.randint(-2, 2)
        twisted.append(P.transform(((1, a), (0, 1))))
    for i, P in enumerate(polys):
        for j, Q in enumerate(twisted):
            assert are_equivalent(P, Q)[0] == (i == j)
            assert are_equivalent(Q, P)[0] == (i == j)


def test_audit_invariant_under_twist(cat2):
    from toricvol.catalog import Catalog, CatalogEntry
    from toricvol import degree_and_bounds

    U = ((2, 1), (1, 1))
    entries = []
    for e in cat2:
        T = e.polytope.transform(U)
        entries.append(CatalogEntry(T, degree_and_bounds(T), e.equivalence_class_id,
                                    e.ke))
    base = audit(cat2).rows
    twisted = audit(Catalog(2, 3, entries, True, 0)).rows
    keys = ("degree", "volume", "index", "smooth", "ke", "bounds_ok", "bishop_ok")
    assert [[r[k] for k in keys] for r in base] == [[r[k] for k in keys] for r in twisted]


@pytest.mark.slow
def test_p3_in_dim3_within_box():
    cat = enumerate_fano(3, 1, budget=20_000)
    degrees = [int(e.invariants.degree) for e in cat if e.invariants.is_smooth_fano and e.ke]
    assert 64 in degrees
    rep = audit(cat)
    assert rep.ok
