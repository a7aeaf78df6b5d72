"""Legendre geodesics, the energy functional and the Moser-Trudinger margin in one dimension.

Run with ``python3 demos/03_geodesics_and_mt.py``.
"""
import numpy as np

from toricvol import GeodesicPath, path_property_check, run_suite, solve_ke, standard_polytopes
from toricvol.mt_lab import (default_level, mt_functional, primal_path, random_convex,
                             regularize, resample_reference)

# Reference: the KE potential on [-1, 1], cut at a level R and shifted to vanish on {phi = R}.
phi, _ = solve_ke(standard_polytopes()["P1"], 513, 12.0)
# The affinity residual is a second-order discretization error: at 4001 nodes a
# few pairs sit just above the 1e-4 tolerance, at 8001 all of them clear it.
dom = resample_reference(phi, default_level(phi), resolution=8001)
V = dom.ma_mass
print(f"domain [{dom.axes[0][0]:.3f}, {dom.axes[0][-1]:.3f}], MA mass {V:.6f}, "
      f"C = G(u0) = {mt_functional(dom.reference, V):.6f}")

# Two random members of the class and the geodesic joining them.
rng = np.random.default_rng(0)
u0 = regularize(random_convex(dom, rng), dom)
u1 = regularize(random_convex(dom, rng), dom)
times = np.linspace(0, 1, 11)
geo = path_property_check(GeodesicPath(u0, u1, times), V)
line = path_property_check(primal_path(u0, u1, times), V)
print(" t    log int e^-u   energy (geodesic)   energy (straight line)")
for t, a, e, el in zip(times, geo.log_integral, geo.energy, line.energy):
    print(f"{t:.1f}   {a:11.6f}   {e:17.6f}   {el:21.6f}")
print("geodesic flags:", geo.flags)
print("straight-line flags:", line.flags)

# A short randomized suite: every geodesic passes, every straight line fails
# affinity, and the reference maximizes G.
rep = run_suite(dom, count=12, seed=7)
print(f"suite: {rep.geodesic_pass}/{rep.count} geodesics pass, control failures "
      f"{rep.control_failures}/{rep.control_pairs}, min margin {rep.min_margin:.4f}")
