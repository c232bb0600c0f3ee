import numpy as np
import pytest

from anfem.domains import l_shape, unit_square
from anfem.mesh import uniform_refine
from anfem.problems import constant_load, get_solution, zero_load
from anfem.spaces import (SolverError, assemble_saddle, broken_div,
                          broken_grad_norm_sq, cr_gradients, cr_values,
                          galerkin_residual, max_element_divergence,
                          num_velocity_dofs, pressure_error_sq, solve,
                          solve_saddle, velocity_error_sq)
from anfem import quadrature as quad


@pytest.fixture(scope="module")
def smooth():
    return get_solution("smooth1")


def test_dof_count():
    mesh = unit_square(1)
    ni = len(mesh.interior_edges)
    assert num_velocity_dofs(mesh) == 2 * ni


def test_stiffness_spd():
    mesh = unit_square(2)
    A = assemble_saddle(mesh, zero_load(), 1.0).A.toarray()
    assert np.allclose(A, A.T)
    w = np.linalg.eigvalsh(A)
    assert w.min() > 0


def test_zero_load_zero_solution():
    sol = solve(unit_square(2), zero_load())
    assert np.abs(sol.u).max() < 1e-13
    assert np.abs(sol.p).max() < 1e-13


def test_divergence_free_and_galerkin(smooth):
    for rounds in (2, 3, 4):
        mesh = unit_square(rounds)
        system = assemble_saddle(mesh, smooth, 1.0)
        sol = solve_saddle(system)
        gn = np.sqrt(broken_grad_norm_sq(mesh, sol.u))
        assert max_element_divergence(sol) <= 1e-10 * (1.0 + gn)
        assert galerkin_residual(system, sol) <= 1e-10


def test_pressure_zero_mean(smooth):
    sol = solve(unit_square(3), smooth)
    assert abs(sol.mesh.area @ sol.p) < 1e-13


def test_constant_load_is_pressure_gradient():
    """A constant body force is the gradient of a linear pressure, so the
    exact velocity is zero; the discrete one converges to zero."""
    errs = []
    for rounds in (3, 5, 7):
        sol = solve(unit_square(rounds), constant_load(1.0, 2.0))
        errs.append(np.sqrt(broken_grad_norm_sq(sol.mesh, sol.u)))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 0.4 * errs[0]


def test_first_order_velocity_convergence(smooth):
    errs = []
    for rounds in (3, 5, 7):
        sol = solve(unit_square(rounds), smooth)
        errs.append(np.sqrt(velocity_error_sq(sol, smooth)))
    # h halves between entries
    assert 1.6 < errs[0] / errs[1] < 2.4
    assert 1.7 < errs[1] / errs[2] < 2.3


def test_pressure_convergence(smooth):
    errs = []
    for rounds in (3, 5, 7):
        sol = solve(unit_square(rounds), smooth)
        errs.append(np.sqrt(pressure_error_sq(sol, smooth)))
    assert errs[2] < errs[1] < errs[0]


def test_cr_values_edge_mean_property():
    """The CR basis reproduces coefficients as interior-edge means."""
    from anfem.mesh import barycentric
    from anfem.spaces import cr_element_coeffs
    mesh = unit_square(2)
    rng = np.random.default_rng(7)
    u = rng.normal(size=num_velocity_dofs(mesh))
    coeffs = cr_element_coeffs(mesh, u)
    s, w = quad.gauss_edge(4)
    vals = u.reshape(-1, 2)
    for idx, e in enumerate(mesh.interior_edges[:10]):
        k = mesh.edge_tris[e, 0]
        p0 = mesh.vertices[mesh.edges[e, 0]]
        p1 = mesh.vertices[mesh.edges[e, 1]]
        pts = np.outer(1 - s, p0) + np.outer(s, p1)
        acc = np.zeros(2)
        for wt, pt in zip(w, pts):
            lam = barycentric(mesh, k, pt)
            acc += wt * (1.0 - 2.0 * lam) @ coeffs[k]
        assert np.allclose(acc, vals[idx], atol=1e-12)


def test_broken_div_matches_gradient_trace():
    mesh = l_shape()
    rng = np.random.default_rng(3)
    u = rng.normal(size=num_velocity_dofs(mesh))
    G = cr_gradients(mesh, u)
    assert np.allclose(broken_div(mesh, u), G[:, 0, 0] + G[:, 1, 1])


def test_solver_determinism(smooth):
    mesh = unit_square(3)
    a = solve(mesh, smooth)
    b = solve(mesh, smooth)
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.p, b.p)


def test_singular_system_rejected():
    # a single triangle has no interior edges
    from anfem.mesh import build_initial
    tri = build_initial(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                        np.array([[0, 1, 2]]))
    with pytest.raises(SolverError):
        solve(tri, zero_load())


def test_residual_scaling_under_refinement(smooth):
    """Galerkin residual stays at solver precision as the mesh grows."""
    for mesh in (unit_square(3), uniform_refine(unit_square(3), 2)):
        system = assemble_saddle(mesh, smooth, 1.0)
        sol = solve_saddle(system)
        assert galerkin_residual(system, sol) < 1e-11
