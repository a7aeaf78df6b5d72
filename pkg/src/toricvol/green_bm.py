"""Pluricomplex Green functions of Reinhardt domains and Brezis-Merle checks.

A torus-invariant domain in C^n is described by its log-domain, the set of
``p = (log|z_1|^2, ..., log|z_n|^2)``. For a complete log-convex domain the
Green function with a pole at the origin is

    g(p) = sup over a in the unit simplex of <a, p> - h(a),

where ``h`` is the support function of the log-domain. The volume form of
C^n pulls back to ``pi^n exp(sum p) dp``; every integral below uses that
convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import DomainMismatchError, MassTooLargeError, SupportUnboundedError
from .grids import ConvexGridFn, ma_measure, uniform_axes


# ---------------------------------------------------------------------------
# domains

def _xlogx(a):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)


@dataclass
class ReinhardtDomain:
    """Log-domain of a torus-invariant domain together with its support function.

    ``support`` maps an array of weights of shape ``(..., dim)`` with
    nonnegative entries to ``sup_{q in domain} <a, q>``.
    """

    dim: int
    support: Callable
    kind: str = "custom"
    closed_form: Optional[Callable] = None
    upper: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.upper is None:
            self.upper = np.asarray(self.support(np.eye(self.dim)), dtype=float)
        if not np.all(np.isfinite(self.upper)):
            raise SupportUnboundedError("log-domain is unbounded above along a coordinate")

    @classmethod
    def polydisc(cls, dim, log_radii=None):
        """Product of discs ``|z_i|^2 < exp(b_i)`` (unit polydisc by default)."""
        b = np.zeros(dim) if log_radii is None else np.asarray(log_radii, dtype=float)

        def support(a):
            return np.asarray(a, dtype=float) @ b

        def exact(p):
            return np.max(np.asarray(p) - b, axis=-1)

        kind = "polydisc" if log_radii is None else "box"
        return cls(dim, support, kind, exact if np.allclose(b, b[0]) else None,
                   meta={"log_radii": b.tolist()})

    @classmethod
    def ball(cls, dim):
        """The unit ball ``sum |z_i|^2 < 1``."""

        def support(a):
            a = np.asarray(a, dtype=float)
            s = a.sum(axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                return _xlogx(a).sum(axis=-1) - _xlogx(s)

        def exact(p):
            return special.logsumexp(np.asarray(p), axis=-1)

        return cls(dim, support, "ball", exact)

    @classmethod
    def from_sublevel(cls, psi, R, disc_factors=0):
        """``{psi < R} x (-inf, 0)^k`` with ``psi`` a grid function.

        The support function is the maximum of ``<a, q>`` over the grid nodes
        in the sublevel set. The sublevel set must reach the low corner of
        the grid (so it contains the deep orthant) and must stay away from
        the high faces (so it is bounded above).
        """
        mask = np.isfinite(psi.values) & (psi.values < R)
        if not mask[(0,) * psi.dim]:
            raise DomainMismatchError("sublevel set does not contain the deep orthant corner")
        for k in range(psi.dim):
            if np.take(mask, -1, axis=k).any():
                raise SupportUnboundedError(
                    f"sublevel set reaches the upper grid face along axis {k}")
        nodes = psi.points()[mask.ravel()]
        n = psi.dim

        def support(a):
            a = np.asarray(a, dtype=float)
            flat = a.reshape(-1, a.shape[-1])[:, :n]
            out = np.empty(len(flat))
            for s in range(0, len(flat), 256):
                out[s:s + 256] = (flat[s:s + 256] @ nodes.T).max(axis=1)
            return out.reshape(a.shape[:-1])

        return cls(n + disc_factors, support, "sublevel",
                   meta={"level": float(R), "disc_factors": int(disc_factors)})


def chart_potential(dual, P, vertex=None):
    """The solver potential in the affine chart at a smooth vertex.

    With ``L`` the normals of the facets through the vertex, the function
    ``psi(q) = phi(-L^T q) + <L v, q>`` has gradient image in the positive
    orthant and stays bounded as ``q`` goes to minus infinity. Returns a
    vectorized callable.
    """
    verts = P.vertices
    vf = P.vertex_facets
    if vertex is None:
        vertex = next(i for i, fs in enumerate(vf) if len(fs) == P.dim)
    L = np.array([[float(c) for c in P.normals[f]] for f in vf[vertex]])
    if L.shape[0] != P.dim:
        raise DomainMismatchError("chart vertex is not simple")
    v = np.array([float(c) for c in verts[vertex]])
    shift = L @ v

    def psi(q):
        q = np.atleast_2d(q)
        return dual.transform(-q @ L)[0] + q @ shift

    return psi


# ---------------------------------------------------------------------------
# Green functions

def simplex_points(dim, per_edge):
    """Barycentric lattice ``{k / per_edge : sum k = per_edge}`` in the unit simplex."""
    if dim == 1:
        return np.ones((1, 1))
    pts = []
    for combo in combinations_with_replacement(range(dim), per_edge):
        pts.append(np.bincount(combo, minlength=dim))
    return np.array(pts, dtype=float) / per_edge


def _green_values(domain, points, per_edge=200, rounds=10, chunk=4096):
    """Concave maximization over the simplex: lattice search then local zoom."""
    n = domain.dim
    points = np.asarray(points, dtype=float)
    if n == 1:
        return points[:, 0] - domain.support(np.ones((1, 1)))[0]
    A = simplex_points(n, per_edge)
    hA = domain.support(A)
    out = np.empty(len(points))
    # local moves in the first n - 1 barycentric coordinates
    offs = np.stack(np.meshgrid(*([np.linspace(-1, 1, 9)] * (n - 1)), indexing="ij"),
                    axis=-1).reshape(-1, n - 1)
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk]
        vals = p @ A.T - hA
        k = np.argmax(vals, axis=1)
        best_a = A[k]
        best = vals[np.arange(len(p)), k]
        step = 1.0 / per_edge
        for _ in range(rounds):
            cand = best_a[:, None, :n - 1] + step * offs[None]
            last = 1.0 - cand.sum(axis=-1, keepdims=True)
            cand = np.concatenate([cand, last], axis=-1)
            ok = np.all(cand >= 0, axis=-1)
            cand = np.clip(cand, 0.0, 1.0)
            cv = np.einsum("mi,mki->mk", p, cand) - domain.support(cand)
            cv = np.where(ok, cv, -np.inf)
            j = np.argmax(cv, axis=1)
            cbest = cv[np.arange(len(p)), j]
            better = cbest > best
            best = np.where(better, cbest, best)
            best_a = np.where(better[:, None], cand[np.arange(len(p)), j], best_a)
            step /= 4.0
        out[s:s + chunk] = best
    return out


@dataclass
class GreenGridFn:
    """Green function sampled on a grid, with the pointwise evaluator attached."""

    grid: ConvexGridFn
    domain: ReinhardtDomain
    per_edge: int = 200

    @property
    def dim(self):
        return self.domain.dim

    def evaluate(self, points):
        points = np.atleast_2d(points)
        if self.domain.closed_form is not None:
            return self.domain.closed_form(points)
        return _green_values(self.domain, points, self.per_edge)

    def pole_band(self, depths=(5.0, 10.0, 20.0, 40.0)):
        """``g - max p`` along the diagonal ray ``-t (1, ..., 1)``."""
        pts = -np.outer(depths, np.ones(self.dim))
        return (self.evaluate(pts) - pts.max(axis=1)).tolist()

    def certificate(self, tol=1e-8):
        """Sign, convexity and pole-normalization checks on the grid."""
        vals = self.grid.values[np.isfinite(self.grid.values)]
        band = self.pole_band()
        return {
            "max_value": float(np.max(vals)),
            "nonpositive": bool(np.all(vals <= tol)),
            "convexity_defect": float(self.grid.convexity_defect()),
            "convex": bool(self.grid.convexity_defect() <= 1e-6),
            "pole_band": band,
            "pole_band_width": float(np.ptp(band)),
        }


def green_function(domain, resolution=129, depth=12.0, per_edge=200, box=None,
                   use_closed_form=False):
    """Green function with a pole at the origin, on a grid of the log-domain.

    The grid spans ``[-depth, upper_i]`` along each axis, where ``upper_i``
    bounds the log-domain; nodes outside the domain get ``+inf``. The values
    come from the simplex support formula even when the domain knows its
    closed form, unless ``use_closed_form`` is set.
    """
    n = domain.dim
    if box is None:
        box = [(-depth, float(u)) for u in domain.upper]
    axes = uniform_axes(box, resolution)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if use_closed_form and domain.closed_form is not None:
        vals = domain.closed_form(pts)
    else:
        vals = _green_values(domain, pts, per_edge)
    vals = vals.reshape(mesh[0].shape)
    vals = np.where(vals <= 1e-12, np.minimum(vals, 0.0), np.inf)
    grid = ConvexGridFn(axes, vals, meta={"kind": domain.kind})
    return GreenGridFn(grid, domain, per_edge)


def green_total_mass(g, samples=None):
    """Complex Monge-Ampere mass of ``g`` from its gradient image.

    The gradient image of the extension by zero is the convex hull of the
    origin and the gradients of ``g``; its Euclidean volume times ``n!``
    is the total mass, which equals 1 for a Green function. The interior
    discrete mass (away from the boundary) is returned alongside and should
    vanish.
    """
    from scipy.spatial import ConvexHull

    grid = g.grid
    n = grid.dim
    vals = grid.values
    grads = []
    inner = np.isfinite(vals)
    for k in range(n):
        inner &= np.isfinite(np.roll(vals, 1, axis=k)) & np.isfinite(np.roll(vals, -1, axis=k))
    grad = np.stack(np.gradient(np.where(np.isfinite(vals), vals, 0.0), *grid.axes), axis=-1)
    grads = grad[inner]
    pts = np.vstack([np.zeros(n), grads])
    if n == 1:
        vol = float(pts.max() - pts.min())
    else:
        vol = float(ConvexHull(pts).volume)
    masses, _ = ma_measure(grid, check=False)
    interior = float(masses[inner].sum()) * math.factorial(n)
    return {"total_mass": vol * math.factorial(n), "interior_mass": interior}


# ---------------------------------------------------------------------------
# divergence of exp(-k g)

@dataclass
class DivergenceTable:
    eps: list
    integrals: list
    exponent: float
    slope: float
    intercept: float
    decay_ratio: float
    verdict: str

    def to_dict(self):
        return dict(self.__dict__)


def divergence_probe(g, exponent=None, eps=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5),
                     cells_per_decade=92, tail=30.0, max_cells=4_000_000):
    """``I(eps) = int_{max p >= 2 log eps} exp(-k g) pi^n exp(sum p) dp``.

    ``g`` is a :class:`GreenGridFn` or a callable on ``(m, n)`` arrays with
    a ``dim`` attribute passed through ``exponent``'s default ``k = n``.
    The integration cells are aligned with every level ``2 log eps``, so
    each region is an exact union of cells; the midpoint rule is used on
    each cell. Points where ``g >= 0`` lie outside the domain and are
    skipped.

    The verdict is DIVERGENT when the increments between consecutive levels
    do not decay (geometric ratio at least 0.9) and the least-squares slope
    against ``log(1 / eps)`` is positive, CONVERGENT when the ratio is below
    0.9.
    """
    if isinstance(g, GreenGridFn):
        n = g.dim
        evaluate = g.evaluate
        upper = np.asarray(g.domain.upper, dtype=float)
    else:
        evaluate, n, upper = g
        upper = np.asarray(upper, dtype=float)
    k = float(n if exponent is None else exponent)
    eps = sorted(eps, reverse=True)
    levels = [2 * math.log(e) for e in eps]
    h = 2 * math.log(10.0) / cells_per_decade
    lo = levels[-1] - tail
    # grid lines pass through every level: offset from the first level
    base = levels[0]
    kmin = math.floor((lo - base) / h)
    kmax = [math.ceil((u - base) / h) for u in upper]
    while np.prod([km - kmin for km in kmax]) > max_cells:
        h *= 2
        kmin = math.floor((lo - base) / h)
        kmax = [math.ceil((u - base) / h) for u in upper]
    axes = [base + h * (np.arange(kmin, km) + 0.5) for km in kmax]
    totals = np.zeros(len(levels))
    # sweep slabs along the first axis to bound memory
    rest = np.meshgrid(*axes[1:], indexing="ij") if n > 1 else []
    rest = np.stack([r.ravel() for r in rest], axis=1) if n > 1 else np.zeros((1, 0))
    for x in axes[0]:
        pts = np.column_stack([np.full(len(rest), x), rest])
        gv = evaluate(pts)
        inside = gv < 0
        w = np.where(inside, np.exp(-k * gv + pts.sum(axis=1)), 0.0)
        mx = pts.max(axis=1)
        for j, t in enumerate(levels):
            totals[j] += w[mx >= t].sum()
    totals *= (math.pi * h) ** n
    logs = np.log(1.0 / np.asarray(eps))
    slope, intercept = np.polyfit(logs, totals, 1)
    inc = np.diff(totals)
    if len(inc) >= 2 and inc[0] > 0:
        ratio = float((max(inc[-1], 0.0) / inc[0]) ** (1.0 / (len(inc) - 1)))
    else:
        ratio = 0.0
    verdict = "DIVERGENT" if (ratio >= 0.9 and slope > 0) else "CONVERGENT"
    return DivergenceTable(list(eps), totals.tolist(), k, float(slope), float(intercept),
                           ratio, verdict)


# ---------------------------------------------------------------------------
# Brezis-Merle on the disc

@dataclass
class DiscBound:
    mass: float
    integral: float
    bound: float

    @property
    def ratio(self):
        return self.integral / self.bound

    @property
    def holds(self):
        return self.integral <= self.bound * (1 + 1e-9)

    def to_dict(self):
        return {"mass": self.mass, "integral": self.integral, "bound": self.bound,
                "ratio": self.ratio, "holds": self.holds}


def _disc_integral(v, mass, pole, radial, angular):
    """``int_D exp(-v) dA`` in polar coordinates about ``pole``.

    The radial rule is Gauss-Jacobi with weight ``r^(1 - 2 mass)``, exact
    for ``exp(-v) ~ |z - pole|^(-2 mass)`` times a polynomial in ``r``.
    """
    beta = 1.0 - 2.0 * mass
    x, w = special.roots_jacobi(radial, 0.0, beta)
    s = 0.5 * (x + 1.0)
    w = w * 0.5 ** (1.0 + beta)
    theta = 2 * math.pi * (np.arange(angular) + 0.5) / angular
    e = np.exp(1j * theta)
    # distance from the pole to the unit circle along each ray
    b = np.real(np.conj(pole) * e)
    rho = -b + np.sqrt(b * b + 1 - abs(pole) ** 2)
    r = rho[:, None] * s[None, :]
    z = pole + r * e[:, None]
    with np.errstate(divide="ignore"):
        f = np.exp(-np.asarray(v(z), dtype=float)) * r ** (2 * mass)
    inner = (f * w[None, :]).sum(axis=1) * rho ** (2 - 2 * mass)
    return float(inner.sum() * 2 * math.pi / angular)


def bm_disc_check(v, mass, pole=0j, radial=64, angular=256):
    """Compare ``int_D exp(-v) dA`` with ``pi / (1 - mass)``.

    ``v`` is a callable on complex arrays, nonpositive and zero on the unit
    circle, with Laplacian mass ``mass`` in the ``dd^c`` normalization
    (``dd^c log|z|^2`` is the unit point mass) sitting at ``pole``.
    """
    if mass >= 1:
        raise MassTooLargeError(f"mass {mass} is not below 1", mass=float(mass))
    val = _disc_integral(v, mass, complex(pole), radial, angular)
    return DiscBound(float(mass), val, math.pi / (1.0 - mass))


def radial_mass(w):
    """Mass of ``v(z) = w(log |z|^2)``; equals the slope of ``w`` at 0."""
    x, y = w.axes[0], w.values
    return float((3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * (x[1] - x[0])))


def bm_disc_radial(w, mass="auto"):
    """Disc check for a radial profile ``w`` on ``[s_min, 0]`` (``s = log|z|^2``).

    ``int_D exp(-v) dA = pi int exp(s - w(s)) ds``; below ``s_min`` the profile
    is continued linearly with its end slope.
    """
    m = radial_mass(w) if mass == "auto" else float(mass)
    if m >= 1:
        raise MassTooLargeError(f"mass {m} is not below 1", mass=m)
    s, y = w.axes[0], w.values
    # exact for the piecewise-linear interpolant of w, so linear profiles hit equality
    f = s - y
    df = np.diff(f)
    ds = np.diff(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        seg = np.where(np.abs(df) > 1e-12, np.expm1(df) / df, 1.0 + df / 2)
    body = float(np.sum(ds * np.exp(f[:-1]) * seg))
    slope = (y[1] - y[0]) / (s[1] - s[0])
    tail = math.exp(s[0] - y[0]) / (1.0 - slope) if slope < 1 else math.inf
    return DiscBound(m, float(math.pi * (body + tail)), math.pi / (1.0 - m))


def disc_green(pole):
    """``log |(z - a) / (1 - conj(a) z)|^2``: the disc Green function with pole ``a``."""
    a = complex(pole)

    def g(z):
        return np.log(np.abs((z - a) / (1 - np.conj(a) * z)) ** 2)

    return g


# ---------------------------------------------------------------------------
# product domain and the contradiction

@dataclass
class ProductReport:
    lhs: float
    slice_bound: float
    disc_mass: float
    bound: float
    constant: float
    energies: list

    @property
    def margin(self):
        return self.bound - self.lhs

    def to_dict(self):
        d = dict(self.__dict__)
        d["margin"] = self.margin
        d["empirical_A"] = self.lhs * (1 - self.disc_mass)
        return d


def bm_product_check(u, V, C):
    """Slicewise Brezis-Merle check on ``Omega x D``.

    ``u`` is a grid function of ``(p, s)`` whose last axis is
    ``s = log |t|^2`` on ``[s_min, 0]``. For each slice the Moser-Trudinger
    bound ``int exp(-u_s) dp <= exp(C - E(u_s) / (V (n + 1)))`` is applied,
    and the disc inequality is applied to ``w(s) = E(u_s) / (V (n + 1))``.
    Returns both sides; ``bound = exp(C) pi / (1 - disc_mass)``.
    """
    from .mt_lab import energy

    n = u.dim - 1
    s = u.axes[-1]
    p_axes = u.axes[:-1]
    vals = u.values
    lhs_s, en = [], []
    for j in range(len(s)):
        sl = ConvexGridFn(p_axes, vals[..., j])
        lhs_s.append(sl.integrate_exp_neg())
        en.append(energy(sl))
    lhs_s = np.array(lhs_s)
    w = np.array(en) / (V * (n + 1))
    tail = lhs_s[0] * math.exp(s[0])
    lhs = math.pi * (np.trapezoid(lhs_s * np.exp(s), s) + tail)
    profile = ConvexGridFn((s,), w)
    m = radial_mass(profile)
    if m >= 1:
        raise MassTooLargeError(f"disc mass {m} is not below 1", mass=float(m))
    slice_bound = math.exp(C) * bm_disc_radial(profile, m).integral
    bound = math.exp(C) * math.pi / (1 - m)
    return ProductReport(float(lhs), float(slice_bound), float(m), float(bound),
                         float(C), w.tolist())


def bm_exponent(V, n):
    """Exponent ``(V n')^(1/n')`` carried by the product inequality, ``n' = n + 1``."""
    npr = n + 1
    return (V * npr) ** (1.0 / npr)


def contradiction_probe(V, n, g=None, scale=None, eps=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5)):
    """Test the mass-one Green function against the product inequality.

    The inequality bounds ``int exp(-s k g)`` for every ``s < 1`` with
    ``k = (V n')^(1/n')``. When ``k > n'`` the choice ``s = n'/k`` reaches
    the critical exponent ``n'`` where the Green integral diverges, which
    contradicts the bound. Otherwise every allowed exponent is below ``n'``
    and the integral converges; the probe then uses ``s = 0.8`` unless
    ``scale`` is given.
    """
    npr = n + 1
    k = bm_exponent(V, n)
    if g is None:
        g = GreenGridFn(None, ReinhardtDomain.polydisc(npr))
    if scale is None:
        scale = npr / k if k > npr else 0.8
    table = divergence_probe(g, scale * k, eps)
    return {
        "volume": float(V), "dim": n, "exponent": k, "critical_exponent": npr,
        "ratio_to_critical": k / npr,
        "volume_ratio": V / (n + 1) ** n,
        "probe_scale": scale, "probe": table.to_dict(),
        "contradiction": bool(k > npr and table.verdict == "DIVERGENT"),
    }
