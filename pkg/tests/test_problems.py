import numpy as np
import pytest

from anfem.problems import (LSHAPE_ALPHA, constant_load, get_solution,
                            lshape_singular, rotational_load, smooth1,
                            zero_load)


def test_smooth1_divergence_free():
    load = smooth1()
    x = np.linspace(0.1, 0.9, 7)
    y = np.linspace(0.2, 0.8, 7)
    X, Y = np.meshgrid(x, y)
    gu = load.grad_velocity(X, Y)
    assert np.abs(gu[..., 0, 0] + gu[..., 1, 1]).max() < 1e-12


def test_smooth1_no_slip():
    load = smooth1()
    s = np.linspace(0.0, 1.0, 11)
    for xb, yb in [(s, np.zeros_like(s)), (s, np.ones_like(s)),
                   (np.zeros_like(s), s), (np.ones_like(s), s)]:
        assert np.abs(load.velocity(xb, yb)).max() < 1e-14


def test_smooth1_momentum_residual():
    """g = -mu*Lap(u) - grad(p) checked by finite differences."""
    mu = 2.5
    load = smooth1(mu)
    x0, y0, h = 0.37, 0.61, 1e-5
    lap = (load.velocity(x0 + h, y0) + load.velocity(x0 - h, y0)
           + load.velocity(x0, y0 + h) + load.velocity(x0, y0 - h)
           - 4 * load.velocity(x0, y0)) / h ** 2
    gp = np.array([
        (load.pressure(x0 + h, y0) - load.pressure(x0 - h, y0)) / (2 * h),
        (load.pressure(x0, y0 + h) - load.pressure(x0, y0 - h)) / (2 * h)])
    got = load.g(np.array(x0), np.array(y0))
    assert np.allclose(got, -mu * lap - gp, atol=1e-5)


def test_lshape_alpha_eigenvalue():
    # sin(alpha * 3*pi/2) = alpha
    assert abs(np.sin(LSHAPE_ALPHA * 1.5 * np.pi) - LSHAPE_ALPHA) < 1e-13


def test_lshape_singular_boundary_and_divergence():
    load = lshape_singular()
    s = np.linspace(0.05, 0.95, 9)
    zero = np.zeros_like(s)
    assert np.abs(load.velocity(s, zero)).max() < 1e-12     # leg theta=0
    assert np.abs(load.velocity(zero, -s)).max() < 1e-12    # leg theta=3pi/2
    ones = np.ones_like(s)
    assert np.abs(load.velocity(-ones, 2 * s - 1)).max() < 1e-12
    assert np.abs(load.velocity(2 * s - 1, ones)).max() < 1e-12
    gu = load.grad_velocity(np.array([0.5, -0.3, 0.1, -0.7]),
                            np.array([0.3, 0.6, 0.1, -0.2]))
    assert np.abs(gu[..., 0, 0] + gu[..., 1, 1]).max() < 1e-12


def test_lshape_singular_corner_blowup():
    """|grad u| ~ r^(alpha-1) near the corner."""
    load = lshape_singular()
    r1, r2 = 1e-3, 1e-4
    g1 = np.linalg.norm(load.grad_velocity(-r1 / np.sqrt(2), r1 / np.sqrt(2)))
    g2 = np.linalg.norm(load.grad_velocity(-r2 / np.sqrt(2), r2 / np.sqrt(2)))
    ratio = g2 / g1
    expected = (r2 / r1) ** (LSHAPE_ALPHA - 1.0)
    assert abs(np.log(ratio) - np.log(expected)) < 0.05


def test_rotational_not_gradient():
    load = rotational_load()
    # curl g = d g2/dx - d g1/dy = -2
    h = 1e-6
    x0, y0 = 0.3, 0.1
    curl = ((load.g(x0 + h, y0)[..., 1] - load.g(x0 - h, y0)[..., 1]) / (2 * h)
            - (load.g(x0, y0 + h)[..., 0]
               - load.g(x0, y0 - h)[..., 0]) / (2 * h))
    assert abs(curl + 2.0) < 1e-6


def test_get_solution_names():
    for name in ("smooth1", "constant", "rotational", "zero",
                 "lshape_singular"):
        assert get_solution(name).g is not None
    with pytest.raises(ValueError):
        get_solution("nope")


def test_zero_load_values():
    g = zero_load().g(np.zeros(3), np.zeros(3))
    assert g.shape == (3, 2) and np.all(g == 0)


def test_constant_load_values():
    g = constant_load(2.0, -1.0).g(np.zeros((2, 2)), np.zeros((2, 2)))
    assert g.shape == (2, 2, 2)
    assert np.all(g[..., 0] == 2.0) and np.all(g[..., 1] == -1.0)
