import math

import numpy as np
import pytest

from toricvol import (ConvexGridFn, LegendreGridFn, ding_functional, solve_ke,
                      standard_polytopes, sublevel_sweep, sublevel_volume, verify_solution)
from toricvol.grids import polytope_axes, polytope_mask

STD = standard_polytopes()


def segment_potential(p):
    """Exact solution on [-1, 1], checked by substitution: phi'' = exp(-phi)."""
    return 2 * np.log(np.cosh(p / 2)) + math.log(2)


def test_segment_oracle_satisfies_equation():
    p = np.linspace(-5, 5, 11)
    h = 1e-4
    second = (segment_potential(p + h) - 2 * segment_potential(p) + segment_potential(p - h)) / h ** 2
    assert np.allclose(second, np.exp(-segment_potential(p)), atol=1e-6)


@pytest.fixture(scope="module")
def segment_solution():
    return solve_ke(STD["P1"], 257, 10.0)


def test_segment_solution(segment_solution):
    phi, rep = segment_solution
    assert rep.converged
    assert np.max(np.abs(phi.values - segment_potential(phi.axes[0]))) < 1e-8
    assert rep.mass_defect < 1e-5
    assert abs(rep.ding_value - 1) < 1e-4
    assert rep.gradient_violation <= rep.tolerances["gradient"]


def test_product_square_solution():
    phi, rep = solve_ke(STD["P1xP1"], 41, 8.0)
    assert rep.converged
    P, Q = phi.mesh()
    assert np.max(np.abs(phi.values - segment_potential(P) - segment_potential(Q))) < 1e-6
    assert abs(rep.ding_value - 2) < 1e-4


@pytest.mark.slow
def test_nonzero_barycenter_is_not_solved():
    phi, rep = solve_ke(STD["F1"], 33)
    assert phi is None
    assert rep.status == "translation_divergence"
    d = np.array(rep.drift_vector)
    assert math.isclose(np.linalg.norm(d), 1.0, rel_tol=1e-9)
    assert d @ np.array([-1, -1]) / math.sqrt(2) > math.cos(math.radians(1))


def test_report_serialises(segment_solution):
    d = segment_solution[1].to_dict()
    assert d["status"] == "converged" and "dual" not in d


def test_verify_rejects_support_function():
    phi = ConvexGridFn.from_callable(np.abs, [(-8, 8)], 161, growth=STD["P1"])
    rep = verify_solution(phi, STD["P1"], tol_residual=1e-3, tol_mass=1e-3)
    assert not rep.converged
    assert rep.residual_sup > 0.5
    assert rep.gradient_violation < 1e-12


def test_verify_accepts_exact_solution():
    phi = ConvexGridFn.from_callable(segment_potential, [(-14, 14)], 1401, growth=STD["P1"])
    rep = verify_solution(phi, STD["P1"], tol_residual=1e-4, tol_mass=1e-5, tol_gradient=1e-6)
    assert rep.converged, rep


def _zero_dual(P, res):
    axes = polytope_axes(P, res)
    mask = polytope_mask(P, axes)
    return LegendreGridFn(axes, np.where(mask, 0.0, np.inf), domain=P)


def test_ding_functional_of_zero():
    # transform of 0 on P is the support function: int exp(-|p|) = 2, int exp(-|p|-|q|) = 4
    val, grad = ding_functional(_zero_dual(STD["P1"], 201), STD["P1"])
    assert abs(val - math.log(2)) < 1e-3
    assert abs(grad.sum()) < 1e-12
    val, _ = ding_functional(_zero_dual(STD["P1xP1"], 41), STD["P1xP1"], p_resolution=1201)
    assert abs(val - math.log(4)) < 1e-3


def test_ding_functional_translation_identity():
    P = STD["F1"]
    u = _zero_dual(P, 41)
    base, _ = ding_functional(u, P)
    a = np.array([0.7, -0.4])
    Y = u.mesh()
    shifted = LegendreGridFn(u.axes, u.values + a[0] * Y[0] + a[1] * Y[1], domain=P)
    val, _ = ding_functional(shifted, P)
    bary = np.array([y[u.mask].mean() for y in Y])
    assert abs((val - base) - (-a @ bary)) < 2e-3


def test_sublevel_volume_monotone(segment_solution):
    phi, _ = segment_solution
    rows = sublevel_sweep(phi, [1.0, 2.0, 4.0, 8.0])
    masses = [r["mass"] for r in rows]
    assert masses == sorted(masses)
    assert sublevel_volume(phi, float(phi.values.min()) - 1)[0] == 0.0
    mass, degree = sublevel_volume(phi, float(phi.values.max()) - 1e-9, order=4)
    assert abs(degree - 2) < 1e-3


def test_transform_far_out_on_sheared_polytope():
    from toricvol import build_polytope
    from toricvol.ma_solver import boundary_potential
    # sheared copy of the triangle with vertices (-1, 0), (-1, 3), (2, -3)
    P = STD["P2"]
    U = ((1, 0), (-1, 1))
    Q = P.transform(U)
    assert set(Q.normals) != set(P.normals)
    th = np.linspace(0, 2 * np.pi, 181)[:-1]
    pts = np.concatenate([r * np.stack([np.cos(th), np.sin(th)], 1) for r in (5, 60, 300)])
    # phi_Q(p) = phi_P(U^T p) for the boundary potentials
    phi_q, _ = boundary_potential(Q, 0).transform(pts)
    phi_p, _ = boundary_potential(P, 0).transform(pts @ np.array(U, dtype=float))
    assert np.all(np.isfinite(phi_q))
    assert np.allclose(phi_q, phi_p, rtol=1e-12, atol=1e-9)
