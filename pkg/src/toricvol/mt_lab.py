"""Legendre geodesics, the energy functional and the Moser-Trudinger check.

Everything lives on a bounded convex domain ``D = {phi < R}`` in p-space,
sampled on a uniform grid with ``+inf`` outside ``D``. Integrals are taken
against ``dp``. The reference potential is ``u0 = phi - R`` for a solution
``phi`` of ``det D^2 phi = exp(-phi)``; it vanishes on the boundary and
satisfies ``MA(u0) = V exp(-u0) / int exp(-u0)`` with ``V`` the total
Monge-Ampere mass of ``u0`` on ``D``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import DomainMismatchError
from .grids import ConvexGridFn, legendre_values, ma_measure, uniform_axes


# ---------------------------------------------------------------------------
# domains and reference potentials

@dataclass
class SublevelDomain:
    """The set ``{phi < R}`` on a grid together with the reference ``u0``."""

    axes: tuple
    mask: np.ndarray
    reference: ConvexGridFn
    level: float
    ma_mass: float

    @property
    def dim(self):
        return len(self.axes)

    def blank(self, values=0.0):
        vals = np.where(self.mask, values, np.inf)
        return ConvexGridFn(self.axes, vals)

    def restrict(self, values):
        """Grid function equal to ``values`` on the domain and ``+inf`` off it."""
        return ConvexGridFn(self.axes, np.where(self.mask, values, np.inf))

    @property
    def boundary(self):
        """Domain nodes with a neighbour outside the domain or on the grid edge."""
        m = self.mask
        edge = np.zeros_like(m)
        for k in range(m.ndim):
            pad = np.pad(m, [(1, 1) if j == k else (0, 0) for j in range(m.ndim)],
                         constant_values=False)
            lo = np.take(pad, range(0, m.shape[k]), axis=k)
            hi = np.take(pad, range(2, m.shape[k] + 2), axis=k)
            edge |= ~lo | ~hi
        return m & edge


def domain_from_grid(phi, R, order=2):
    """Sublevel domain ``{phi < R}`` on the grid of ``phi`` (``<=`` at the rim)."""
    mask = np.isfinite(phi.values) & (phi.values <= R)
    u0 = ConvexGridFn(phi.axes, np.where(mask, phi.values - R, np.inf))
    masses, _ = ma_measure(u0, order=order, check=False)
    return SublevelDomain(phi.axes, mask, u0, float(R), float(masses.sum()))


def ke_reference(dual, P, R=6.0, resolution=2001):
    """Reference domain from a solved dual potential (see ``ma_solver``).

    In one dimension the grid is fitted to the interval ``{phi < R}`` so both
    endpoints are nodes where ``u0 = 0`` exactly (up to root finding). In
    higher dimensions the grid covers the bounding box of the sublevel set.
    """
    n = P.dim

    def phi_at(pts):
        return dual.transform(np.atleast_2d(pts))[0]

    if n == 1:
        ends = []
        for sgn in (-1.0, 1.0):
            hi = 1.0
            while phi_at([[sgn * hi]])[0] < R:
                hi *= 2
            ends.append(optimize.brentq(lambda x: phi_at([[sgn * x]])[0] - R, 0.0, hi,
                                        xtol=1e-14))
        axes = (np.linspace(-ends[0], ends[1], resolution),)
        vals = phi_at(axes[0][:, None])
        vals[0] = vals[-1] = R
    else:
        # crude scan for the bounding box, then the working grid
        probe = 6.0
        while True:
            ax = np.linspace(-probe, probe, 65)
            pts = np.stack([m.ravel() for m in np.meshgrid(*([ax] * n), indexing="ij")], 1)
            inside = phi_at(pts) < R
            if not np.any(inside & (np.abs(pts).max(axis=1) >= probe - 1e-9)):
                break
            probe *= 1.5
        lo = pts[inside].min(axis=0) - 2 * (ax[1] - ax[0])
        hi = pts[inside].max(axis=0) + 2 * (ax[1] - ax[0])
        axes = uniform_axes(list(zip(lo, hi)), resolution)
        pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], 1)
        vals = np.concatenate([phi_at(pts[s:s + 20000]) for s in range(0, len(pts), 20000)])
        vals = vals.reshape((resolution,) * n)
    return domain_from_grid(ConvexGridFn(axes, vals, growth=P), R)


def default_level(phi, margin=1.0):
    """A level whose sublevel set stays ``margin`` below the grid boundary values."""
    v = phi.values
    edge = np.ones(v.shape, dtype=bool)
    edge[(slice(1, -1),) * v.ndim] = False
    return float(np.min(v[edge]) - margin)


def resample_reference(phi, R, resolution=8001):
    """Domain for a one-dimensional grid solution, refitted to ``{phi < R}``.

    The sublevel interval is located on a cubic spline through the samples
    and the spline is resampled on a grid whose end nodes are the interval
    endpoints.
    """
    from scipy.interpolate import CubicSpline

    if phi.dim != 1:
        raise DomainMismatchError("resampling is only implemented in one dimension")
    x, y = phi.axes[0], phi.values
    spline = CubicSpline(x, y)
    k = int(np.argmin(y))
    if y[0] <= R or y[-1] <= R:
        raise DomainMismatchError("sublevel set reaches the edge of the grid")
    lo = optimize.brentq(lambda t: spline(t) - R, x[0], x[k])
    hi = optimize.brentq(lambda t: spline(t) - R, x[k], x[-1])
    axis = np.linspace(lo, hi, resolution)
    vals = spline(axis)
    vals[0] = vals[-1] = R
    return domain_from_grid(ConvexGridFn((axis,), vals, growth=phi.growth), R)


# ---------------------------------------------------------------------------
# functionals

def _check_domain(u, dom):
    if u.values.shape != dom.mask.shape:
        raise DomainMismatchError("grid function and domain have different grids")


def log_integral(u):
    """``log int exp(-u) dp`` by the trapezoid rule (``+inf`` nodes count as 0)."""
    return math.log(u.integrate_exp_neg())


def energy(u, order=2):
    """``E(u) = sum u * (Monge-Ampere cell mass)`` over the finite nodes."""
    masses, _ = ma_measure(u, order=order, check=False)
    vals = np.where(np.isfinite(u.values), u.values, 0.0)
    return float((vals * masses).sum())


def mt_functional(u, V, order=2):
    """``G(u) = log int exp(-u) dp + E(u) / (V (n + 1))``."""
    return log_integral(u) + energy(u, order) / (V * (u.dim + 1))


def mt_inequality_check(u, dom, V=None):
    """Margin ``G(u0) - G(u)``; nonnegative when the inequality holds."""
    _check_domain(u, dom)
    V = dom.ma_mass if V is None else V
    return mt_functional(dom.reference, V) - mt_functional(u, V)


# ---------------------------------------------------------------------------
# geodesics

def _slope_range(u):
    lo, hi = [], []
    for k, h in enumerate(u.spacing):
        d = np.diff(u.values, axis=k) / h
        d = d[np.isfinite(d)]
        lo.append(d.min() if d.size else -1.0)
        hi.append(d.max() if d.size else 1.0)
    return np.array(lo), np.array(hi)


@dataclass
class GeodesicPath:
    """``u_t = ((1 - t) u0* + t u1*)*`` between two functions on one domain.

    The duals are sampled on a grid that covers every slope of both
    endpoints, so the back transform recovers the endpoints up to the grid
    resolution.
    """

    u0: ConvexGridFn
    u1: ConvexGridFn
    times: np.ndarray
    dual_resolution: Optional[int] = None
    dual_axes: tuple = field(init=False)
    duals: tuple = field(init=False)

    def __post_init__(self):
        if (self.u0.values.shape != self.u1.values.shape
                or not all(np.allclose(a, b) for a, b in zip(self.u0.axes, self.u1.axes))):
            raise DomainMismatchError("endpoints live on different grids")
        if not np.array_equal(np.isfinite(self.u0.values), np.isfinite(self.u1.values)):
            raise DomainMismatchError("endpoints have different domains")
        self.times = np.asarray(self.times, dtype=float)
        lo0, hi0 = _slope_range(self.u0)
        lo1, hi1 = _slope_range(self.u1)
        lo = np.minimum(lo0, lo1)
        hi = np.maximum(hi0, hi1)
        pad = 0.05 * (hi - lo) + 1e-3
        res = self.dual_resolution or 2 * max(self.u0.resolution)
        self.dual_axes = uniform_axes(list(zip(lo - pad, hi + pad)), res)
        self.duals = (legendre_values(self.u0.values, self.u0.axes, self.dual_axes),
                      legendre_values(self.u1.values, self.u1.axes, self.dual_axes))

    def at(self, t):
        w = (1.0 - t) * self.duals[0] + t * self.duals[1]
        back = legendre_values(w, self.dual_axes, self.u0.axes)
        return self.u0.with_values(np.where(np.isfinite(self.u0.values), back, np.inf))

    def __iter__(self):
        return (self.at(t) for t in self.times)


def geodesic_at(u0, u1, t, dual_resolution=None):
    """Legendre geodesic between ``u0`` and ``u1`` evaluated at time ``t``."""
    return GeodesicPath(u0, u1, [t], dual_resolution).at(t)


def primal_path(u0, u1, times):
    """The straight line ``(1 - t) u0 + t u1``; a non-geodesic control."""
    return [u0.with_values((1 - t) * u0.values + t * u1.values) for t in times]


@dataclass
class FunctionalTrace:
    times: list
    log_integral: list
    energy: list
    functional: list
    second_differences: dict
    scales: dict
    tolerance: float
    flags: dict
    worst: dict

    @property
    def ok(self):
        return all(self.flags.values())

    def to_dict(self):
        return {"times": self.times, "log_integral": self.log_integral,
                "energy": self.energy, "functional": self.functional,
                "second_differences": self.second_differences, "scales": self.scales,
                "tolerance": self.tolerance, "flags": self.flags, "worst": self.worst}


def _second_diff(x):
    x = np.asarray(x, dtype=float)
    return x[:-2] - 2 * x[1:-1] + x[2:]


def path_property_check(path, V, tol=1e-4):
    """Concavity of ``log int exp(-u_t)``, affinity of ``E(u_t)``, concavity of ``G``.

    ``path`` is a :class:`GeodesicPath` or a list of grid functions with
    ``times`` attribute absent (uniform times on [0, 1] are then assumed).
    Each second difference is compared with ``tol`` times the largest
    absolute value of its trace (at least 1).
    """
    if isinstance(path, GeodesicPath):
        times = list(map(float, path.times))
        members = list(path)
    else:
        members = list(path)
        times = list(np.linspace(0, 1, len(members)))
    li = [log_integral(u) for u in members]
    en = [energy(u) for u in members]
    n = members[0].dim
    G = [a + e / (V * (n + 1)) for a, e in zip(li, en)]
    d2 = {"log_integral": _second_diff(li), "energy": _second_diff(en),
          "functional": _second_diff(G)}
    scales = {"log_integral": max(1.0, max(map(abs, li))),
              "energy": max(1.0, max(map(abs, en))),
              "functional": max(1.0, max(map(abs, G)))}
    flags = {
        "log_integral_concave": bool(np.all(d2["log_integral"] <= tol * scales["log_integral"])),
        "energy_affine": bool(np.all(np.abs(d2["energy"]) <= tol * scales["energy"])),
        "functional_concave": bool(np.all(d2["functional"] <= tol * scales["functional"])),
    }
    worst = {}
    for key, arr in d2.items():
        vals = np.abs(arr) if key == "energy" else arr
        k = int(np.argmax(vals)) if len(arr) else 0
        worst[key] = {"t": times[k + 1] if len(arr) else None,
                      "value": float(arr[k]) if len(arr) else 0.0,
                      "relative": float(vals[k] / scales[key]) if len(arr) else 0.0}
    return FunctionalTrace(times, li, en, G, {k: v.tolist() for k, v in d2.items()},
                           scales, tol, flags, worst)


# ---------------------------------------------------------------------------
# randomised suite

def regularize(u, dom, eps=1e-6):
    """Add ``eps * scale * u0`` (strictly convex, zero on the boundary)."""
    scale = max(1.0, float(np.max(np.abs(u.values[dom.mask]))))
    return u.with_values(u.values + eps * scale * dom.reference.values)


def random_convex(dom, rng, pieces=None, smoothing=0.1):
    """Soft maximum of ``lam * u0`` and a few affine or quadratic pieces.

    The soft maximum is ``tau * log(sum exp(piece / tau))`` with
    ``tau = smoothing``; it is smooth, convex and lies within ``tau log k`` of
    the hard maximum. Every extra piece is shifted to sit at most
    ``-12 tau`` on the boundary, so the result vanishes there up to
    ``tau * exp(-12)`` per piece and is nonpositive inside up to the same
    amount. ``smoothing=0`` gives the hard maximum.
    """
    mesh = np.meshgrid(*dom.axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    bnd = dom.boundary
    n = dom.dim
    lam = float(rng.uniform(0.3, 2.5))
    layers = [lam * np.where(dom.mask, dom.reference.values, 0.0)]
    count = pieces if pieces is not None else int(rng.integers(1, 5))
    for _ in range(count):
        a = rng.normal(size=n) * rng.uniform(0.2, 2.0)
        c = rng.normal(size=n) * 0.5 * np.array([np.ptp(ax) for ax in dom.axes])
        piece = (pts - c) @ a
        if rng.uniform() < 0.5:
            B = rng.normal(size=(n, n))
            piece = piece + 0.5 * rng.uniform(0.05, 1.0) * np.einsum(
                "...i,ij,...j->...", pts - c, B @ B.T / n, pts - c)
        layers.append(piece - piece[bnd].max() - 12 * smoothing)
    stack = np.stack(layers)
    if smoothing > 0:
        u = smoothing * np.logaddexp.reduce(stack / smoothing, axis=0)
    else:
        u = stack.max(axis=0)
    return ConvexGridFn(dom.axes, np.where(dom.mask, u, np.inf))


def random_suite(dom, count=50, seed=7, eps=1e-6, smoothing=0.1):
    """``count`` regularized random members of the vanishing-boundary class."""
    rng = np.random.default_rng(seed)
    return [regularize(random_convex(dom, rng, smoothing=smoothing), dom, eps)
            for _ in range(count)]


@dataclass
class SuiteReport:
    count: int
    geodesic_pass: int
    concavity_failures: list
    affinity_failures: list
    control_pairs: int
    control_failures: int
    min_margin: float
    margins: list
    traces: list = field(default_factory=list, repr=False)

    @property
    def control_rate(self):
        return self.control_failures / max(1, self.control_pairs)

    def to_dict(self):
        return {"count": self.count, "geodesic_pass": self.geodesic_pass,
                "concavity_failures": self.concavity_failures,
                "affinity_failures": self.affinity_failures,
                "control_pairs": self.control_pairs,
                "control_failures": self.control_failures,
                "control_rate": self.control_rate,
                "min_margin": self.min_margin, "margins": self.margins}


def run_suite(dom, count=50, seed=7, samples=11, tol=1e-4, smoothing=0.1,
              dual_resolution=None, jobs=1):
    """Geodesics between consecutive suite members plus the inequality margins.

    Pair ``k`` joins member ``k`` to member ``k + 1`` (cyclically). The
    straight-line control is run on the same pairs. ``jobs > 1`` evaluates
    pairs in a thread pool; results are collected in pair order.
    """
    suite = random_suite(dom, count, seed, smoothing=smoothing)
    V = dom.ma_mass
    times = np.linspace(0, 1, samples)

    def pair(k):
        a, b = suite[k], suite[(k + 1) % count]
        tr = path_property_check(GeodesicPath(a, b, times, dual_resolution), V, tol)
        ctrl = path_property_check(primal_path(a, b, times), V, tol)
        return tr, ctrl

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(pair, range(count)))
    else:
        results = [pair(k) for k in range(count)]
    conc = [k for k, (tr, _) in enumerate(results) if not tr.flags["log_integral_concave"]]
    aff = [k for k, (tr, _) in enumerate(results) if not tr.flags["energy_affine"]]
    passed = sum(tr.flags["log_integral_concave"] and tr.flags["energy_affine"]
                 for tr, _ in results)
    control_fail = sum(not ctrl.flags["energy_affine"] for _, ctrl in results)
    margins = [mt_inequality_check(u, dom, V) for u in suite]
    return SuiteReport(count, int(passed), conc, aff, count, int(control_fail),
                       float(min(margins)), margins, [tr.to_dict() for tr, _ in results])
