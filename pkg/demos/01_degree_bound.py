"""Enumerate the reflexive polygons and check the degree bound on the KE ones.

Run with ``python3 demos/01_degree_bound.py``.
"""
from toricvol import audit, degree_and_bounds, enumerate_fano, standard_polytopes

# Sixteen reflexive polygons up to lattice equivalence, five of them smooth.
cat = enumerate_fano(2, 3)
print(f"{len(cat)} reflexive classes, {len(cat.smooth)} smooth")

# Among the smooth ones the KE filter keeps exactly the barycenter-zero classes,
# and their degrees never exceed 9.
rep = audit(cat)
print(f"{'id':>3} {'degree':>6} {'index':>5} {'barycenter':>14} {'KE':>5}")
for row in rep.rows:
    if row["smooth"]:
        print(f"{row['id']:>3} {row['degree']:>6} {row['index']:>5} "
              f"{str(tuple(row['barycenter'])):>14} {str(row['ke']):>5}")
print("violations:", len(rep.violations), "| equality cases:",
      [r["degree"] for r in rep.equality_cases])

# The equality case is the projective plane; its Bishop bound is also sharp.
inv = degree_and_bounds(standard_polytopes()["P2"])
print(f"P2: volume {inv.volume}, degree {inv.degree}, index {inv.fano_index}, "
      f"Bishop bound {inv.bishop_bound}")

# The same audit over every barycenter-zero reflexive polygon (singular ones too).
wide = audit(cat, scope="all-reflexive")
print("all-reflexive scope: checked", wide.counts["ke"], "classes, violations",
      len(wide.violations))
