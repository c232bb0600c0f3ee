import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anfem.domains import l_shape, unit_square
from anfem.estimator import (consistency_error, estimate, estimate_frozen,
                             eta_set, modified_eta, oscillation,
                             residual_functional, tangential_jumps)
from anfem.mesh import ancestor_map, bisect, uniform_refine
from anfem.problems import constant_load, get_solution, zero_load
from anfem.spaces import (DiscreteSolution, cr_gradients, num_velocity_dofs,
                          solve)
from anfem import quadrature as quad


@pytest.fixture(scope="module")
def smooth():
    return get_solution("smooth1")


@pytest.fixture(scope="module")
def smooth_solution(smooth):
    return solve(unit_square(4), smooth)


def test_zero_solution_zero_load():
    mesh = unit_square(2)
    sol = solve(mesh, zero_load())
    report = estimate(sol, zero_load())
    assert report.total_eta_sq == 0.0
    assert report.total_osc_sq == 0.0


def test_tangential_jump_oracle(smooth_solution, smooth):
    """Edge jumps against a brute-force two-sided evaluation."""
    mesh = smooth_solution.mesh
    grads = cr_gradients(mesh, smooth_solution.u)
    jumps = tangential_jumps(mesh, grads)
    for e in range(0, mesh.num_edges, 7):
        tau = mesh.edge_tangent[e]
        k0, k1 = mesh.edge_tris[e]
        gt0 = grads[k0] @ tau
        gt1 = np.zeros(2) if k1 < 0 else grads[k1] @ tau
        assert np.isclose(jumps[e], ((gt0 - gt1) ** 2).sum(), atol=1e-14)


def test_affine_field_no_interior_jumps():
    """Where a CR function locally equals one affine field, jumps vanish.

    Boundary edge means are fixed to zero, so only edges between two
    elements that both reproduce the affine field qualify.
    """
    mesh = uniform_refine(unit_square(2), 2)
    mids = mesh.edge_midpoints()[mesh.interior_edges]
    v = np.stack([mids[:, 1], mids[:, 0]], axis=-1).ravel()
    grads = cr_gradients(mesh, v)
    jumps = tangential_jumps(mesh, grads)
    target = np.array([[0.0, 1.0], [1.0, 0.0]])
    exact = np.array([np.allclose(g, target, atol=1e-12) for g in grads])
    for e in np.flatnonzero(~mesh.boundary_edge):
        k0, k1 = mesh.edge_tris[e]
        if exact[k0] and exact[k1]:
            assert jumps[e] < 1e-24


def test_estimator_additivity(smooth_solution, smooth):
    report = estimate(smooth_solution, smooth)
    nt = report.mesh.num_triangles
    rng = np.random.default_rng(11)
    part = rng.integers(0, 3, size=nt)
    pieces = sum(eta_set(report, np.flatnonzero(part == i)) for i in range(3))
    assert np.isclose(pieces, report.total_eta_sq, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 30))
def test_eta_set_subadditive_split(seed):
    mesh = unit_square(3)
    load = get_solution("smooth1")
    report = estimate(solve(mesh, load), load)
    rng = np.random.default_rng(seed)
    mask = rng.random(mesh.num_triangles) < 0.5
    a = eta_set(report, np.flatnonzero(mask))
    b = eta_set(report, np.flatnonzero(~mask))
    assert np.isclose(a + b, report.total_eta_sq, rtol=1e-12)


def test_oscillation_below_volume(smooth):
    mesh = unit_square(3)
    osc_total, osc_per = oscillation(smooth, mesh)
    report = estimate(solve(mesh, smooth), smooth)
    assert np.all(osc_per <= report.vol_sq + 1e-15)
    assert np.isclose(osc_total, report.total_osc_sq)


def test_oscillation_zero_for_constant_load():
    mesh = l_shape()
    total, per = oscillation(constant_load(3.0, -1.0), mesh)
    assert total < 1e-13


def test_modified_eta(smooth_solution, smooth):
    report = estimate(smooth_solution, smooth)
    assert np.isclose(modified_eta(report),
                      report.total_vol_sq + report.total_eta_sq)
    assert np.isclose(modified_eta(report, 2.0),
                      2.0 * report.total_vol_sq + report.total_eta_sq)
    with pytest.raises(ValueError):
        modified_eta(report, 0.0)


def test_frozen_estimator_identity(smooth_solution, smooth):
    """Frozen on the same mesh = plain estimator."""
    mesh = smooth_solution.mesh
    rep_a = estimate(smooth_solution, smooth)
    rep_b = estimate_frozen(smooth_solution, mesh, smooth,
                            np.arange(mesh.num_triangles))
    assert np.array_equal(rep_a.eta, rep_b.eta)


def test_frozen_estimator_reduction(smooth_solution, smooth):
    """One bisection round reduces the frozen estimator by the paper factor."""
    mesh = smooth_solution.mesh
    fine = bisect(mesh, np.arange(mesh.num_triangles))
    anc = ancestor_map(mesh, fine)
    coarse = estimate(smooth_solution, smooth)
    frozen = estimate_frozen(smooth_solution, fine, smooth, anc)
    rho = 1.0 - 2.0 ** -0.5
    assert frozen.total_eta_sq <= (coarse.total_eta_sq
                                   - rho * coarse.total_eta_sq) + 1e-9


def test_residual_vanishes_on_same_level(smooth_solution, smooth):
    mesh = smooth_solution.mesh
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(5):
        v = rng.normal(size=num_velocity_dofs(mesh))
        worst = max(worst, abs(residual_functional(
            smooth_solution, mesh, v, smooth,
            np.arange(mesh.num_triangles))))
    assert worst < 1e-12


def test_residual_nonzero_on_finer_level(smooth_solution, smooth):
    mesh = smooth_solution.mesh
    fine = bisect(mesh, np.arange(mesh.num_triangles))
    sol_fine = solve(fine, smooth)
    res = residual_functional(smooth_solution, fine, sol_fine.u, smooth)
    assert abs(res) > 1e-8


def test_consistency_error_decay(smooth):
    vals = []
    for rounds in (4, 6):
        mesh = unit_square(rounds)
        vals.append(consistency_error(smooth.stress(1.0), mesh, smooth))
    assert 1.6 < vals[0] / vals[1] < 2.4


def test_estimator_csv_schema(tmp_path, smooth_solution, smooth):
    report = estimate(smooth_solution, smooth)
    path = tmp_path / "est.csv"
    report.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "anfem-estimator-v1"
    assert lines[1].startswith("element,")
    assert len(lines) == 2 + smooth_solution.mesh.num_triangles
