"""Grid-sampled convex functions, discrete Legendre transforms and the
real Monge-Ampere measure.

Functions of the log-coordinates ``p`` live on uniform tensor grids
(:class:`ConvexGridFn`); their duals live on a grid over a polytope or a box
(:class:`LegendreGridFn`). Points outside the domain of a function are
stored as ``+inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NonconvexInputError


def uniform_axes(box, resolution):
    """Per-axis node arrays for ``box = [(lo, hi), ...]``."""
    if np.isscalar(resolution):
        resolution = [int(resolution)] * len(box)
    return tuple(np.linspace(lo, hi, int(r)) for (lo, hi), r in zip(box, resolution))


@dataclass
class ConvexGridFn:
    """A function sampled on a uniform rectangular grid in ``p``.

    Parameters
    ----------
    axes : tuple of 1-D arrays
        Uniformly spaced nodes per axis.
    values : ndarray
        Samples with shape ``tuple(len(a) for a in axes)``; ``+inf`` marks
        nodes outside the domain.
    growth : LatticePolytope, optional
        Polytope whose support function models the growth at infinity.
    """

    axes: tuple
    values: np.ndarray
    growth: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(len(a) for a in self.axes):
            raise ValueError(f"values shape {self.values.shape} does not match axes")

    @classmethod
    def from_callable(cls, func, box, resolution, growth=None):
        axes = uniform_axes(box, resolution)
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(axes, func(*mesh), growth=growth)

    @property
    def dim(self):
        return len(self.axes)

    @property
    def box(self):
        return [(float(a[0]), float(a[-1])) for a in self.axes]

    @property
    def resolution(self):
        return tuple(len(a) for a in self.axes)

    @property
    def spacing(self):
        return np.array([a[1] - a[0] for a in self.axes])

    @property
    def mask(self):
        return np.isfinite(self.values)

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def points(self):
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def with_values(self, values):
        return ConvexGridFn(self.axes, values, self.growth, dict(self.meta))

    def convexity_defect(self):
        """Most negative second difference along axes and diagonals.

        Differences are normalised by the squared step so the result has the
        units of a second derivative; only stencils with all three nodes
        finite are used. Returns 0 when there is nothing to test.
        """
        return _convexity_defect(self.values, self.spacing)

    def integrate_exp_neg(self):
        """Trapezoid value of the integral of ``exp(-f)`` over the grid."""
        w = np.where(self.mask, np.exp(-np.where(self.mask, self.values, 0.0)), 0.0)
        return _trapezoid(w, self.axes)


@dataclass
class LegendreGridFn:
    """A function on a grid covering a polytope (the momentum side).

    ``values`` is ``+inf`` off the ``mask``; ``domain`` keeps the polytope
    (or ``None`` for a plain box).
    """

    axes: tuple
    values: np.ndarray
    domain: object = None
    argmax: Optional[tuple] = None

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values, dtype=float)

    @property
    def dim(self):
        return len(self.axes)

    @property
    def mask(self):
        return np.isfinite(self.values)

    @property
    def spacing(self):
        return np.array([a[1] - a[0] for a in self.axes])

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def convexity_defect(self):
        return _convexity_defect(self.values, self.spacing)


def _trapezoid(values, axes):
    out = values
    for a in reversed(axes):
        out = np.trapezoid(out, a, axis=-1)
    return float(out)


def _stencil_directions(n):
    dirs = [tuple(1 if k == i else 0 for k in range(n)) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for s in (1, -1):
                d = [0] * n
                d[i], d[j] = 1, s
                dirs.append(tuple(d))
    return dirs


def _shifted(values, offset):
    """View of ``values`` shifted by an integer offset, trimmed to the core."""
    sl = tuple(slice(1 + o, values.shape[k] - 1 + o) for k, o in enumerate(offset))
    return values[sl]


def _convexity_defect(values, spacing):
    n = values.ndim
    if any(s < 3 for s in values.shape):
        return 0.0
    worst = 0.0
    center = _shifted(values, (0,) * n)
    for d in _stencil_directions(n):
        plus = _shifted(values, d)
        minus = _shifted(values, tuple(-x for x in d))
        ok = np.isfinite(plus) & np.isfinite(minus) & np.isfinite(center)
        if not ok.any():
            continue
        h2 = float(sum((x * s) ** 2 for x, s in zip(d, spacing)))
        dd = (plus[ok] - 2 * center[ok] + minus[ok]) / h2
        worst = min(worst, float(dd.min()))
    return worst


# ---------------------------------------------------------------------------
# discrete Legendre transform

def _lower_hull(x, f):
    """Indices of the lower convex hull of the points ``(x_k, f_k)`` (x sorted)."""
    xs = x.tolist()
    fs = f.tolist()
    out = []
    for k in range(len(xs)):
        while len(out) >= 2:
            i, j = out[-2], out[-1]
            # drop j when it lies on or above the chord from i to k
            if (fs[j] - fs[i]) * (xs[k] - xs[i]) >= (fs[k] - fs[i]) * (xs[j] - xs[i]):
                out.pop()
            else:
                break
        out.append(k)
    return np.array(out, dtype=np.int64)


def _conjugate_1d(f, x, y):
    """Conjugate along the last axis of ``f``: ``g[..., j] = max_k x_k y_j - f[..., k]``.

    Rows that are discretely convex go through a batched slope search
    (sorted slopes locate the maximiser directly); the rest are first
    replaced by their lower convex hull, which has the same conjugate. Returns ``(g, argmax)``.
    """
    lead = f.shape[:-1]
    F = f.reshape(-1, f.shape[-1])
    m, N = F.shape
    M = len(y)
    g = np.full((m, M), -np.inf)
    arg = np.zeros((m, M), dtype=np.int64)
    finite = np.isfinite(F)
    has = finite.any(axis=1)
    if N == 1:
        g[has] = x[0] * y[None, :] - F[has, :1]
        return g.reshape(lead + (M,)), arg.reshape(lead + (M,))

    h = x[1] - x[0]
    with np.errstate(invalid="ignore"):
        slopes = np.diff(F, axis=1) / h
    # outside the finite run the slopes act as -inf (left) and +inf (right)
    first = np.argmax(finite, axis=1)
    last = N - 1 - np.argmax(finite[:, ::-1], axis=1)
    idx = np.arange(N - 1)[None, :]
    left = idx < first[:, None]
    right = idx >= last[:, None]
    inner = ~(left | right)
    contiguous = finite.sum(axis=1) == (last - first + 1)
    s = np.where(inner, slopes, 0.0)
    mono = np.all(np.where(inner[:, 1:] & inner[:, :-1],
                           np.diff(s, axis=1) >= -1e-12 * (1 + np.abs(s[:, 1:])),
                           True), axis=1)
    fast = has & contiguous & mono
    if fast.any():
        lo, hi = float(y.min()), float(y.max())
        sf = np.where(left[fast], lo - 1.0, np.where(right[fast], hi + 1.0,
                                                    np.clip(s[fast], lo - 1.0, hi + 1.0)))
        sf = np.maximum.accumulate(sf, axis=1)
        width = hi - lo + 4.0
        rows = np.arange(sf.shape[0])[:, None] * width
        flat = (sf - lo + 2.0 + rows).ravel()
        queries = (y[None, :] - lo + 2.0 + rows)
        pos = np.searchsorted(flat, queries.ravel(), side="left").reshape(queries.shape)
        k = pos - np.arange(sf.shape[0])[:, None] * (N - 1)
        k = np.clip(k, 0, N - 1)
        Ff = F[fast]
        vals = x[k] * y[None, :] - np.take_along_axis(Ff, k, axis=1)
        g[fast] = vals
        arg[fast] = k
    for r in np.flatnonzero(has & ~fast):
        keep = np.flatnonzero(finite[r])
        hull = keep[_lower_hull(x[keep], F[r, keep])]
        if len(hull) == 1:
            k = np.full(M, hull[0])
        else:
            hs = np.diff(F[r, hull]) / np.diff(x[hull])
            k = hull[np.searchsorted(hs, y, side="left")]
        g[r] = x[k] * y - F[r, k]
        arg[r] = k
    return g.reshape(lead + (M,)), arg.reshape(lead + (M,))


def legendre_values(values, axes_in, axes_out, return_argmax=False):
    """Separable discrete Legendre transform.

    ``g(y) = max_p <p, y> - f(p)`` over the grid nodes ``p``, evaluated at
    every node of ``axes_out``. The maximisation is done one axis at a time:
    after eliminating the last axis the partial result ``F(p', y_last)``
    enters the next step as ``-F``.

    Returns ``g`` and, when asked, a tuple of integer index arrays giving the
    maximising input node for every output node.
    """
    n = len(axes_in)
    work = np.asarray(values, dtype=float)
    args = []
    # eliminate axes from last to first; after each step the new output axis
    # is appended at the end, so rotate it to the front to keep the order
    for step in range(n):
        g, a = _conjugate_1d(work, axes_in[n - 1 - step], axes_out[n - 1 - step])
        args.append(a)
        work = -np.moveaxis(g, -1, 0) if step < n - 1 else g
        if step < n - 1:
            args[-1] = np.moveaxis(a, -1, 0)
    # ``work`` now has the axes ordered (y_2, ..., y_n, y_1) after the final
    # step appended y_1 at the end; restore (y_1, ..., y_n)
    g = np.moveaxis(work, -1, 0) if n > 1 else work
    if not return_argmax:
        return g
    return g, _trace_argmax(args, n, [len(a) for a in axes_out])


def _trace_argmax(args, n, out_shape):
    """Recover the maximising input multi-index for each output node."""
    if n == 1:
        return (args[0],)
    grids = np.meshgrid(*[np.arange(m) for m in out_shape], indexing="ij")
    idx = [None] * n
    # the last step eliminated input axis 0; its argmax array is indexed by
    # (y_2, ..., y_n, y_1)
    final = args[n - 1]
    order = [grids[k] for k in range(1, n)] + [grids[0]]
    idx[0] = final[tuple(order)]
    # step s eliminated input axis n-1-s; its array is indexed by
    # (y_{n-s}, ..., y_n rotated to the front..., p_1..p_{n-1-s})
    for s in range(n - 2, -1, -1):
        ax = n - 1 - s
        a = args[s]
        # layout after moveaxis: (y_ax, y_{ax+1}, ..., y_n, p_1, ..., p_{ax-1})
        key = [grids[k] for k in range(ax, n)] + [idx[k] for k in range(ax)]
        idx[ax] = a[tuple(key)]
    return tuple(idx)


def legendre_bruteforce(values, axes_in, axes_out):
    """Direct maximum over all input nodes; quadratic cost, used as an oracle."""
    P = np.stack([m.ravel() for m in np.meshgrid(*axes_in, indexing="ij")], axis=1)
    Y = np.stack([m.ravel() for m in np.meshgrid(*axes_out, indexing="ij")], axis=1)
    f = np.asarray(values, dtype=float).ravel()
    keep = np.isfinite(f)
    P, f = P[keep], f[keep]
    out = np.empty(len(Y))
    for start in range(0, len(Y), 2048):
        block = Y[start:start + 2048]
        out[start:start + 2048] = np.max(block @ P.T - f[None, :], axis=1)
    return out.reshape(tuple(len(a) for a in axes_out))


def discrete_legendre(f, axes_out=None, domain=None, resolution=None):
    """Discrete Legendre transform of a grid function.

    Parameters
    ----------
    f : ConvexGridFn or LegendreGridFn
    axes_out : tuple of arrays, optional
        Output grid. When omitted and ``domain`` is a polytope, a grid over
        its bounding box with ``resolution`` nodes per axis is used (nodes
        outside the polytope are set to ``+inf``).
    domain : LatticePolytope, optional

    Returns
    -------
    LegendreGridFn if the input was a ConvexGridFn, otherwise ConvexGridFn.
    """
    if axes_out is None:
        if domain is None:
            raise ValueError("need axes_out or a domain polytope")
        res = resolution or max(len(a) for a in f.axes)
        axes_out = polytope_axes(domain, res)
    g, arg = legendre_values(f.values, f.axes, axes_out, return_argmax=True)
    if isinstance(f, ConvexGridFn):
        if domain is not None:
            g = np.where(polytope_mask(domain, axes_out), g, np.inf)
        return LegendreGridFn(axes_out, g, domain=domain, argmax=arg)
    return ConvexGridFn(axes_out, g, growth=getattr(f, "domain", None))


def polytope_axes(P, resolution):
    V = np.array([[float(x) for x in v] for v in P.vertices])
    return uniform_axes(list(zip(V.min(axis=0), V.max(axis=0))), resolution)


def polytope_mask(P, axes, strict=False):
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    L = np.array([[float(a) for a in l] for l in P.normals])
    b = np.array([float(x) for x in P.offsets])
    vals = pts @ L.T
    tol = 1e-12 * (1 + np.abs(b))
    inside = np.all(vals < b - tol, axis=1) if strict else np.all(vals <= b + tol, axis=1)
    return inside.reshape(mesh[0].shape)


# ---------------------------------------------------------------------------
# Monge-Ampere measure

def _second_differences(values, spacing, order):
    """Centered Hessian at interior nodes (trimmed by ``order // 2`` cells)."""
    n = values.ndim
    w = 1 if order == 2 else 2
    core = tuple(slice(w, s - w) for s in values.shape)

    def sh(offset):
        return values[tuple(slice(w + o, s - w + o) for o, s in zip(offset, values.shape))]

    def e(i, k=1):
        return tuple(k if j == i else 0 for j in range(n))

    def add(a, b):
        return tuple(x + y for x, y in zip(a, b))

    H = np.empty(values[core].shape + (n, n))
    c = values[core]
    for i in range(n):
        hi = spacing[i]
        if order == 2:
            H[..., i, i] = (sh(e(i)) - 2 * c + sh(e(i, -1))) / hi ** 2
        else:
            H[..., i, i] = (-sh(e(i, 2)) + 16 * sh(e(i)) - 30 * c + 16 * sh(e(i, -1))
                            - sh(e(i, -2))) / (12 * hi ** 2)
        for j in range(i + 1, n):
            hj = spacing[j]

            def mixed(k):
                return (sh(add(e(i, k), e(j, k))) - sh(add(e(i, k), e(j, -k)))
                        - sh(add(e(i, -k), e(j, k))) + sh(add(e(i, -k), e(j, -k))))

            if order == 2:
                m = mixed(1) / (4 * hi * hj)
            else:
                m = (16 * mixed(1) - mixed(2)) / (48 * hi * hj)
            H[..., i, j] = H[..., j, i] = m
    return H, w


def ma_measure(f, order=2, tol=1e-8, check=True):
    """Cell masses of the real Monge-Ampere measure of a grid function.

    The density is the determinant of the centered-difference Hessian,
    clamped to zero wherever that Hessian is not positive semidefinite; the
    cell mass is density times cell volume. Boundary nodes (one layer, two
    for ``order=4``) and nodes next to ``+inf`` get zero mass.

    Parameters
    ----------
    f : ConvexGridFn
    order : {2, 4}
        Accuracy order of the difference stencils.
    tol : float
        Allowed negative second difference, relative to the largest
        absolute second difference, before the input is rejected.

    Returns
    -------
    masses : ndarray, same shape as ``f.values``
    density : ndarray, same shape (zero where no mass is assigned)

    Raises
    ------
    NonconvexInputError
        When the convexity certificate fails beyond ``tol``.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    values = f.values
    spacing = f.spacing
    if check:
        defect = _convexity_defect(values, spacing)
        H2, _ = _second_differences(np.where(np.isfinite(values), values, np.nan),
                                    spacing, 2)
        diag = np.abs(np.diagonal(H2, axis1=-2, axis2=-1))
        scale = float(np.nanmax(diag)) if np.isfinite(diag).any() else 1.0
        if defect < -tol * max(scale, 1.0):
            raise NonconvexInputError(
                f"second difference {defect:.3e} below tolerance", defect=defect)
    finite_vals = np.where(np.isfinite(values), values, np.nan)
    H, w = _second_differences(finite_vals, spacing, order)
    n = values.ndim
    if n == 1:
        det = H[..., 0, 0]
        psd = det >= 0
    else:
        eig = np.linalg.eigvalsh(np.nan_to_num(H, nan=0.0))
        det = np.prod(eig, axis=-1)
        psd = eig[..., 0] >= 0
    ok = np.isfinite(H).all(axis=(-1, -2)) & psd
    dens_core = np.where(ok, det, 0.0)
    density = np.zeros(values.shape)
    density[tuple(slice(w, s - w) for s in values.shape)] = dens_core
    masses = density * float(np.prod(spacing))
    return masses, density
