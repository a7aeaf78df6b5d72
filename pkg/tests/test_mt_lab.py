import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toricvol import (ConvexGridFn, DomainMismatchError, GeodesicPath, energy, geodesic_at,
                      mt_functional, mt_inequality_check, path_property_check, run_suite,
                      solve_ke, standard_polytopes)
from toricvol.mt_lab import (domain_from_grid, ke_reference, log_integral, primal_path,
                             random_convex, regularize, resample_reference)

LEVEL = 4.0


def segment_potential(p):
    return 2 * np.log(np.cosh(p / 2)) + math.log(2)


@pytest.fixture(scope="module")
def dom():
    # endpoints where the exact segment potential reaches LEVEL
    x = 2 * math.acosh(math.sqrt(math.exp(LEVEL) / 2))
    axis = np.linspace(-x, x, 801)
    vals = segment_potential(axis)
    vals[0] = vals[-1] = LEVEL
    return domain_from_grid(ConvexGridFn((axis,), vals), LEVEL)


def interval(m=2001):
    return (np.linspace(-1, 1, m),)


def test_reference_domain(dom):
    assert dom.reference.values[0] == 0 and dom.reference.values[-1] == 0
    h = dom.axes[0][1] - dom.axes[0][0]
    x = dom.axes[0][-1] - h / 2
    # interior cells carry phi'(x) - phi'(-x) with x half a step inside the rim
    assert abs(dom.ma_mass - 2 * math.tanh(x / 2)) < 1e-6
    assert dom.boundary.sum() == 2


def test_ke_reference_from_solver():
    _, rep = solve_ke(standard_polytopes()["P1"], 65, 8.0)
    ref = ke_reference(rep.dual, standard_polytopes()["P1"], R=LEVEL, resolution=801)
    x = 2 * math.acosh(math.sqrt(math.exp(LEVEL) / 2))
    assert abs(ref.axes[0][-1] - x) < 1e-8 and abs(ref.axes[0][0] + x) < 1e-8
    h = ref.axes[0][1] - ref.axes[0][0]
    assert abs(ref.ma_mass - 2 * math.tanh((x - h / 2) / 2)) < 1e-6


def test_resampled_reference():
    axis = np.linspace(-12, 12, 513)
    phi = ConvexGridFn((axis,), segment_potential(axis))
    ref = resample_reference(phi, LEVEL, resolution=801)
    x = 2 * math.acosh(math.sqrt(math.exp(LEVEL) / 2))
    assert abs(ref.axes[0][-1] - x) < 1e-4
    with pytest.raises(DomainMismatchError):
        resample_reference(phi, 20.0)


def test_energy_of_quadratic():
    x = interval()
    u = ConvexGridFn(x, (x[0] ** 2 - 1) / 2)
    assert abs(energy(u) - (-2 / 3)) < 1e-5


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0])
def test_energy_homogeneity(dom, c):
    u = dom.reference
    scaled = u.with_values(c * u.values)
    assert math.isclose(energy(scaled), c ** 2 * energy(u), rel_tol=1e-6)


def test_functional_of_zero_is_log_measure(dom):
    zero = dom.blank(0.0)
    length = dom.axes[0][-1] - dom.axes[0][0]
    assert math.isclose(mt_functional(zero, dom.ma_mass), math.log(length), rel_tol=1e-12)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_reference_beats_its_multiples(dom, c):
    u = dom.reference.with_values(c * dom.reference.values)
    assert mt_inequality_check(u, dom) > 0


def test_quadratic_geodesic_is_harmonic_interpolation():
    x = interval(801)
    a, b = 1.0, 2.0
    u0 = ConvexGridFn(x, a * (x[0] ** 2 - 1) / 2)
    u1 = ConvexGridFn(x, b * (x[0] ** 2 - 1) / 2)
    path = GeodesicPath(u0, u1, np.linspace(0, 1, 5), dual_resolution=4001)
    core = np.abs(x[0]) <= 0.5
    for t, ut in zip(path.times, path):
        at = 1 / ((1 - t) / a + t / b)
        exact = at * x[0] ** 2 / 2 - ((1 - t) * a + t * b) / 2
        assert np.max(np.abs(ut.values[core] - exact[core])) < 1e-5


def test_constant_path_has_flat_traces(dom):
    path = GeodesicPath(dom.reference, dom.reference, np.linspace(0, 1, 5))
    tr = path_property_check(path, dom.ma_mass)
    assert tr.ok
    assert max(map(abs, tr.second_differences["energy"])) < 1e-10
    assert np.ptp(tr.log_integral) < 1e-10


def test_geodesic_endpoints(dom):
    rng = np.random.default_rng(1)
    u0 = regularize(random_convex(dom, rng), dom)
    u1 = regularize(random_convex(dom, rng), dom)
    for t, u in ((0.0, u0), (1.0, u1)):
        # tangent lines at grid slopes undershoot; the gap shrinks with the dual step
        errs = []
        for res in (1600, 6400):
            gap = u.values - geodesic_at(u0, u1, t, dual_resolution=res).values
            assert gap.min() > -1e-12
            errs.append(gap.max())
        assert errs[1] < errs[0] / 3 and errs[1] < 1e-3


def test_primal_control_fails_on_scaled_pair(dom):
    u0 = dom.reference
    u1 = u0.with_values(2 * u0.values)
    times = np.linspace(0, 1, 11)
    assert path_property_check(GeodesicPath(u0, u1, times), dom.ma_mass).flags["energy_affine"]
    ctrl = path_property_check(primal_path(u0, u1, times), dom.ma_mass)
    assert not ctrl.flags["energy_affine"]


def test_domain_mismatch(dom):
    other = ConvexGridFn(interval(101), np.zeros(101))
    with pytest.raises(DomainMismatchError):
        GeodesicPath(dom.reference, other, [0.5])
    with pytest.raises(DomainMismatchError):
        mt_inequality_check(other, dom)
    holed = dom.reference.values.copy()
    holed[400] = np.inf
    with pytest.raises(DomainMismatchError):
        GeodesicPath(dom.reference, dom.reference.with_values(holed), [0.5])


def test_random_members_vanish_on_boundary(dom):
    rng = np.random.default_rng(5)
    for _ in range(10):
        u = random_convex(dom, rng)
        assert np.max(np.abs(u.values[dom.boundary])) < 1e-5
        assert u.values[dom.mask].max() < 1e-5
        assert u.convexity_defect() > -1e-8


def test_small_suite_and_thread_pool_agree(dom):
    a = run_suite(dom, count=6, seed=3, samples=7)
    b = run_suite(dom, count=6, seed=3, samples=7, jobs=2)
    assert a.geodesic_pass == 6 and a.min_margin >= -1e-6
    assert a.to_dict() == b.to_dict()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_geodesic_properties_hold_for_random_pairs(seed):
    x = 2 * math.acosh(math.sqrt(math.exp(LEVEL) / 2))
    axis = np.linspace(-x, x, 401)
    vals = segment_potential(axis)
    vals[0] = vals[-1] = LEVEL
    dom = domain_from_grid(ConvexGridFn((axis,), vals), LEVEL)
    rng = np.random.default_rng(seed)
    u0 = regularize(random_convex(dom, rng), dom)
    u1 = regularize(random_convex(dom, rng), dom)
    tr = path_property_check(GeodesicPath(u0, u1, np.linspace(0, 1, 7)), dom.ma_mass, tol=1e-3)
    assert tr.flags["log_integral_concave"] and tr.flags["energy_affine"]
    assert mt_inequality_check(u0, dom) >= -1e-6
