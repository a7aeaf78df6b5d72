"""Green functions of Reinhardt domains, the disc inequality and the volume threshold.

Run with ``python3 demos/04_green_and_contradiction.py``.
"""
import math

import numpy as np

from toricvol import (GreenGridFn, ReinhardtDomain, bm_disc_check, contradiction_probe,
                      divergence_probe, green_function)
from toricvol.green_bm import disc_green

# Green functions from the support-function formula against closed forms.
for dom, exact in ((ReinhardtDomain.polydisc(2), lambda p: p.max(axis=1)),
                   (ReinhardtDomain.ball(2), lambda p: np.logaddexp(p[:, 0], p[:, 1]))):
    g = green_function(dom, resolution=33)
    pts = g.grid.points()
    inside = np.isfinite(g.grid.values.ravel())
    err = np.abs(g.grid.values.ravel()[inside] - exact(pts[inside])).max()
    print(f"{dom.kind:8s} Green function error {err:.1e}, certificate {g.certificate()['convex']}")

# exp(-k g) is integrable near the pole exactly when k is below the dimension.
g = GreenGridFn(None, ReinhardtDomain.ball(2))
for k in (2.0, 1.6):
    tab = divergence_probe(g, exponent=k)
    print(f"exponent {k}: I(eps) = {np.round(tab.integrals, 3)} -> {tab.verdict}")

# The disc inequality: sharp for the logarithmic family, strict off it.
for m in (0.2, 0.5, 0.9):
    ext = bm_disc_check(lambda z: m * np.log(np.abs(z) ** 2), m)
    off = bm_disc_check(lambda z: m * disc_green(0.6j)(z), m, pole=0.6j)
    print(f"m = {m}: extremal ratio {ext.ratio:.12f}, pole at 0.6i ratio {off.ratio:.6f}")

# The product inequality carries the exponent (V (n+1))^(1/(n+1)); once it
# passes n+1 the Green function contradicts it. For n = 2 the switch is V = 9.
for V in (6.0, 8.0, 9.0, 9.5, 11.0):
    r = contradiction_probe(V, 2)
    print(f"V = {V:4.1f}: exponent {r['exponent']:.4f}, probe {r['probe']['verdict']:10s}, "
          f"contradiction {r['contradiction']}")
print("threshold (n+1)^n =", 3 ** 2, "| exponent at threshold", round(math.pow(27, 1 / 3), 12))
