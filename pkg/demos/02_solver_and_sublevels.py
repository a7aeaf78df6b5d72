"""Solve the real Monge-Ampere equation and watch sublevel masses approach the degree.

Run with ``python3 demos/02_solver_and_sublevels.py`` (about half a minute).
"""
import math

import numpy as np

from toricvol import solve_ke, standard_polytopes, sublevel_sweep
from toricvol.mt_lab import default_level

STD = standard_polytopes()

# Segment [-1, 1]: the solution is known in closed form.
phi, rep = solve_ke(STD["P1"], 513, 12.0)
exact = 2 * np.log(np.cosh(phi.axes[0] / 2)) + math.log(2)
print(f"P1: {rep.status}, sup error {np.abs(phi.values - exact).max():.1e}, "
      f"Ding value {rep.ding_value:.6f}")

# Triangle: compare with the Fubini-Study potential.
phi, rep = solve_ke(STD["P2"], 129, 12.0)
p, q = phi.mesh()
fs = 3 * np.logaddexp.reduce([np.zeros_like(p), p, q]) - (p + q) - math.log(9)
print(f"P2: {rep.status}, sup error {np.abs(phi.values - fs).max():.1e}")

# As the level grows the Monge-Ampere mass of {phi < R} times n! climbs to 9.
top = default_level(phi)
for row in sublevel_sweep(phi, [top - 8, top - 4, top - 2, top], order=4):
    print(f"  R = {row['R']:6.2f}   n! * mass = {row['degree_equivalent']:.5f}")

# A polygon with nonzero barycenter has no solution: the solver sees the
# functional decrease linearly along a translation and reports the direction.
_, rep = solve_ke(STD["F1"], 33)
print(f"F1: {rep.status}, drift direction {np.round(rep.drift_vector, 6)}")
