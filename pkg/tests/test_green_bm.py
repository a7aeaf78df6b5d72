import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from toricvol import (ConvexGridFn, DomainMismatchError, GreenGridFn, MassTooLargeError,
                      ReinhardtDomain, SupportUnboundedError, bm_disc_check, bm_product_check,
                      contradiction_probe, divergence_probe, green_function)
from toricvol.green_bm import (bm_disc_radial, bm_exponent, disc_green, green_total_mass,
                               radial_mass)
from toricvol.mt_lab import domain_from_grid, mt_functional


@pytest.mark.parametrize("n", [1, 2, 3])
def test_polydisc_green_is_max(n):
    g = green_function(ReinhardtDomain.polydisc(n), resolution=17 if n == 3 else 33)
    pts = g.grid.points()
    assert np.max(np.abs(g.grid.values.ravel() - pts.max(axis=1))) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_ball_green_is_logsumexp(n):
    g = green_function(ReinhardtDomain.ball(n), resolution=9 if n == 3 else 25)
    pts = g.grid.points()
    vals = g.grid.values.ravel()
    inside = np.isfinite(vals)
    exact = special.logsumexp(pts, axis=1)
    assert np.array_equal(inside, exact <= 1e-12)
    assert np.max(np.abs(vals[inside] - exact[inside])) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2.0, 1.0), min_size=2, max_size=2))
def test_box_green_matches_shifted_max(log_radii):
    dom = ReinhardtDomain.polydisc(2, log_radii)
    g = GreenGridFn(None, dom)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-8, 0, size=(50, 2)) + np.asarray(log_radii)
    assert np.allclose(g.evaluate(pts), np.max(pts - np.asarray(log_radii), axis=1), atol=1e-9)


def test_green_certificate_and_mass():
    g = green_function(ReinhardtDomain.ball(2), resolution=65)
    cert = g.certificate()
    assert cert["nonpositive"] and cert["convex"]
    assert cert["pole_band_width"] < 1e-6
    assert abs(green_total_mass(g)["total_mass"] - 1) < 1e-3


def test_polydisc_pole_band_is_flat():
    g = GreenGridFn(None, ReinhardtDomain.polydisc(3))
    assert g.pole_band() == [0.0] * 4


def test_disc_divergence_is_exact_log():
    g = (lambda p: p[:, 0], 1, [0.0])
    tab = divergence_probe(g)
    exact = [2 * math.pi * math.log(1 / e) for e in tab.eps]
    assert np.allclose(tab.integrals, exact, rtol=1e-12)
    assert tab.verdict == "DIVERGENT" and math.isclose(tab.slope, 2 * math.pi, rel_tol=1e-9)
    assert divergence_probe(g, exponent=0.8).verdict == "CONVERGENT"


@pytest.mark.parametrize("domain", [ReinhardtDomain.polydisc(2), ReinhardtDomain.ball(2)])
def test_divergence_dichotomy(domain):
    g = GreenGridFn(None, domain)
    crit = divergence_probe(g, cells_per_decade=24)
    assert crit.verdict == "DIVERGENT" and crit.slope > 0
    sub = divergence_probe(g, exponent=1.6, cells_per_decade=24)
    assert sub.verdict == "CONVERGENT"


def test_bounded_function_converges():
    # a bounded convex function has no pole: every exponent converges
    g = (lambda p: np.logaddexp(p[:, 0], 0.0) - math.log(2), 1, [0.0])
    assert divergence_probe(g).verdict == "CONVERGENT"


@pytest.mark.parametrize("m", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_disc_extremal_family(m):
    res = bm_disc_check(lambda z: m * np.log(np.abs(z) ** 2), m)
    assert abs(res.integral - math.pi / (1 - m)) <= 1e-6 * math.pi / (1 - m)


@pytest.mark.parametrize("m", [0.3, 0.7])
@pytest.mark.parametrize("a", [0.2, 0.5 + 0.3j, -0.8j])
def test_disc_off_center_pole(m, a):
    res = bm_disc_check(lambda z: m * disc_green(a)(z), m, pole=a)
    assert res.holds and res.ratio <= 1 + 1e-9


def test_disc_smooth_potential():
    m = 0.6
    res = bm_disc_check(lambda z: m * (np.abs(z) ** 2 - 1), m)
    assert math.isclose(res.integral, math.pi * (math.exp(m) - 1) / m, rel_tol=1e-7)
    assert res.ratio < 1


def test_disc_mass_too_large():
    with pytest.raises(MassTooLargeError):
        bm_disc_check(lambda z: np.log(np.abs(z) ** 2), 1.0)
    s = np.linspace(-20, 0, 201)
    with pytest.raises(MassTooLargeError):
        bm_disc_radial(ConvexGridFn((s,), 1.2 * s))


def test_radial_profile_matches_closed_form():
    s = np.linspace(-40, 0, 4001)
    res = bm_disc_radial(ConvexGridFn((s,), 0.5 * s))
    assert abs(radial_mass(ConvexGridFn((s,), 0.5 * s)) - 0.5) < 1e-12
    assert math.isclose(res.integral, 2 * math.pi, rel_tol=1e-10)


def _corner_grid(fn, box=(-10.0, 2.0), res=49):
    return ConvexGridFn.from_callable(fn, [box, box], res)


def test_sublevel_domain_errors():
    psi = _corner_grid(lambda a, b: np.logaddexp(a, b))
    dom = ReinhardtDomain.from_sublevel(psi, 0.0)
    assert dom.dim == 2 and np.all(dom.upper <= 0.0 + 1e-12)
    with pytest.raises(SupportUnboundedError):
        ReinhardtDomain.from_sublevel(psi, 10.0)
    with pytest.raises(DomainMismatchError):
        ReinhardtDomain.from_sublevel(psi, -20.0)
    lifted = ReinhardtDomain.from_sublevel(psi, 0.0, disc_factors=1)
    assert lifted.dim == 3


def test_sublevel_green_close_to_ball():
    psi = _corner_grid(lambda a, b: np.logaddexp(a, b), box=(-12.0, 1.0), res=261)
    dom = ReinhardtDomain.from_sublevel(psi, 0.0)
    pts = np.array([[-1.0, -2.0], [-3.0, -0.5], [-4.0, -4.0]])
    got = GreenGridFn(None, dom).evaluate(pts)
    # the support is taken over grid nodes only, so agreement is to the grid step
    assert np.max(np.abs(got - special.logsumexp(pts, axis=1))) < 0.05


@pytest.mark.parametrize("lam", [0.5, 1.5])
def test_product_check(lam):
    x = 2 * math.acosh(math.sqrt(math.exp(4.0) / 2))
    # fine enough that the kink of max(u0, lam s) is resolved on every slice
    axis = np.linspace(-x, x, 2001)
    vals = 2 * np.log(np.cosh(axis / 2)) + math.log(2)
    vals[0] = vals[-1] = 4.0
    dom = domain_from_grid(ConvexGridFn((axis,), vals), 4.0)
    V = dom.ma_mass
    C = mt_functional(dom.reference, V)
    s = np.linspace(-30, 0, 301)
    u0 = dom.reference.values
    u = ConvexGridFn((axis, s), np.maximum(u0[:, None], lam * s[None, :]))
    rep = bm_product_check(u, V, C)
    # slice energies have slope lam / 2 at the rim
    assert abs(rep.disc_mass - lam / 2) < 1e-2
    assert rep.lhs <= rep.slice_bound * (1 + 1e-6)
    assert rep.slice_bound <= rep.bound * (1 + 1e-6)


def test_contradiction_threshold():
    assert bm_exponent(9.0, 2) == pytest.approx(3.0)
    below = contradiction_probe(8.0, 2)
    assert not below["contradiction"] and below["probe"]["verdict"] == "CONVERGENT"
    above = contradiction_probe(10.0, 2)
    assert above["contradiction"] and above["probe"]["verdict"] == "DIVERGENT"
