"""Load functions and manufactured solutions.

Sign convention: the weak form is a(u,v) + b(v,p) + b(u,q) = (g,v) with
b(v,q) = (div v, q), so the strong form is -mu*Lap(u) - grad(p) = g.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp


@dataclass
class LoadFunction:
    g: Callable                     # (x, y) arrays -> (..., 2)
    velocity: Callable | None = None  # exact u, same signature
    grad_velocity: Callable | None = None  # (x, y) -> (..., 2, 2), d u_i / d x_j
    pressure: Callable | None = None
    name: str = ""

    @property
    def has_exact(self) -> bool:
        return self.velocity is not None

    def stress(self, mu: float) -> Callable:
        """sigma = mu*grad(u) + p*Id as a callable (x, y) -> (..., 2, 2)."""
        if not self.has_exact:
            raise ValueError("no exact solution available")

        def sigma(x, y):
            gu = self.grad_velocity(x, y)
            p = self.pressure(x, y)
            out = mu * gu
            out[..., 0, 0] += p
            out[..., 1, 1] += p
            return out

        return sigma


def _vectorize_pair(f1, f2):
    def g(x, y):
        x = np.asarray(x, dtype=float)
        a = np.broadcast_to(np.asarray(f1(x, y), dtype=float), x.shape)
        b = np.broadcast_to(np.asarray(f2(x, y), dtype=float), x.shape)
        return np.stack([a, b], axis=-1)
    return g


@lru_cache(maxsize=None)
def _smooth1_callables(mu: float):
    x, y = sp.symbols("x y", real=True)
    psi = (x * (1 - x) * y * (1 - y)) ** 2
    u1 = sp.diff(psi, y)
    u2 = -sp.diff(psi, x)
    p = x ** 3 - sp.Rational(1, 4)
    g1 = -mu * (sp.diff(u1, x, 2) + sp.diff(u1, y, 2)) - sp.diff(p, x)
    g2 = -mu * (sp.diff(u2, x, 2) + sp.diff(u2, y, 2)) - sp.diff(p, y)
    lam = lambda e: sp.lambdify((x, y), sp.expand(e), "numpy")
    grads = [[lam(sp.diff(u, var)) for var in (x, y)] for u in (u1, u2)]
    return (lam(g1), lam(g2), lam(u1), lam(u2), grads, lam(p))


def smooth1(mu: float = 1.0) -> LoadFunction:
    """Divergence-free polynomial flow on the unit square, cubic pressure."""
    g1, g2, u1, u2, grads, p = _smooth1_callables(float(mu))

    def grad_velocity(x, y):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (2, 2))
        for i in range(2):
            for j in range(2):
                out[..., i, j] = grads[i][j](x, y)
        return out

    def pressure(x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(p(x, y), dtype=float), x.shape).copy()

    return LoadFunction(g=_vectorize_pair(g1, g2),
                        velocity=_vectorize_pair(u1, u2),
                        grad_velocity=grad_velocity,
                        pressure=pressure,
                        name="smooth1")


def constant_load(gx: float = 1.0, gy: float = 0.0) -> LoadFunction:
    def g(x, y):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (2,))
        out[..., 0] = gx
        out[..., 1] = gy
        return out
    return LoadFunction(g=g, name="constant")


# corner exponent for the reentrant angle 3*pi/2: root of sin(a*w) = a
LSHAPE_ALPHA = 0.5444837367824645


@lru_cache(maxsize=None)
def _lshape_singular_callables(mu: float):
    """Singular corner flow: u = curl(B(x,y) r^(1+a) psi(theta)).

    psi is the Stokes corner eigenfunction for the angle w = 3*pi/2 and
    B = (1-x^2)^2 (1-y^2)^2 vanishes to second order on the outer boundary,
    so u is divergence-free, satisfies no-slip, behaves like the pure r^a
    singularity at the corner, and the load g stays bounded (the leading
    singular momentum terms cancel).
    """
    a = sp.Float(LSHAPE_ALPHA, 20)
    w = 3 * sp.pi / 2
    r, t = sp.symbols("r t", positive=True)
    psi = (sp.sin((1 + a) * t) * sp.cos(a * w) / (1 + a)
           - sp.cos((1 + a) * t)
           - sp.sin((1 - a) * t) * sp.cos(a * w) / (1 - a)
           + sp.cos((1 - a) * t))

    xc, yc = r * sp.cos(t), r * sp.sin(t)
    # the rational factor damps the smooth far-field part so the corner
    # singularity dominates the error on desk-scale meshes
    B = (1 - xc ** 2) ** 2 * (1 - yc ** 2) ** 2 / (1 + 8 * r ** 2)

    def dx(f):
        return sp.cos(t) * sp.diff(f, r) - sp.sin(t) / r * sp.diff(f, t)

    def dy(f):
        return sp.sin(t) * sp.diff(f, r) + sp.cos(t) / r * sp.diff(f, t)

    stream = B * r ** (1 + a) * psi
    u1, u2 = dy(stream), -dx(stream)
    p_std = -r ** (a - 1) * ((1 + a) ** 2 * sp.diff(psi, t)
                             + sp.diff(psi, t, 3)) / (1 - a)
    p = -mu * B * p_std
    g1 = -mu * (dx(dx(u1)) + dy(dy(u1))) - dx(p)
    g2 = -mu * (dx(dx(u2)) + dy(dy(u2))) - dy(p)
    lam = lambda e: sp.lambdify((r, t), e, "numpy", cse=True)
    grads = [[lam(dx(u1)), lam(dy(u1))], [lam(dx(u2)), lam(dy(u2))]]
    return lam(g1), lam(g2), lam(u1), lam(u2), grads, lam(p)


def _polar(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.maximum(np.hypot(x, y), 1e-300)
    t = np.arctan2(y, x)
    t = np.where(t < 0, t + 2.0 * np.pi, t)   # domain angle in (0, 3*pi/2)
    return r, t


def lshape_singular(mu: float = 1.0) -> LoadFunction:
    """Manufactured corner singularity on the L-shaped domain (u ~ r^0.544)."""
    g1, g2, u1, u2, grads, pfun = _lshape_singular_callables(float(mu))

    def wrap_pair(f1, f2):
        def h(x, y):
            r, t = _polar(x, y)
            A = np.broadcast_to(np.asarray(f1(r, t), dtype=float), r.shape)
            B = np.broadcast_to(np.asarray(f2(r, t), dtype=float), r.shape)
            return np.stack([A, B], axis=-1)
        return h

    def grad_velocity(x, y):
        r, t = _polar(x, y)
        out = np.empty(r.shape + (2, 2))
        for i in range(2):
            for j in range(2):
                out[..., i, j] = grads[i][j](r, t)
        return out

    pmean = _lshape_pressure_mean(pfun)

    def pressure(x, y):
        r, t = _polar(x, y)
        vals = np.broadcast_to(np.asarray(pfun(r, t), dtype=float), r.shape)
        return vals - pmean

    return LoadFunction(g=wrap_pair(g1, g2), velocity=wrap_pair(u1, u2),
                        grad_velocity=grad_velocity, pressure=pressure,
                        name="lshape_singular")


@lru_cache(maxsize=None)
def _lshape_pressure_mean(pfun) -> float:
    from . import quadrature as quad
    from .domains import l_shape
    from .mesh import uniform_refine
    mesh = uniform_refine(l_shape(), 10)

    def f(x, y):
        r, t = _polar(x, y)
        return np.broadcast_to(np.asarray(pfun(r, t), dtype=float), r.shape)

    return float(quad.integrate(mesh, f).sum() / mesh.area.sum())


def rotational_load(omega: float = 1.0) -> LoadFunction:
    """g = omega * (y, -x).  Not a gradient (curl = -2*omega), so it drives a
    nonzero velocity and excites corner singularities; a constant load is the
    gradient of a linear pressure and yields u = 0 exactly."""
    def g(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.stack([np.broadcast_to(omega * y, x.shape),
                         np.broadcast_to(-omega * x, x.shape)], axis=-1)
    return LoadFunction(g=g, name="rotational")


def zero_load() -> LoadFunction:
    def g(x, y):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (2,))
    return LoadFunction(g=g, name="zero")


def get_solution(name: str, mu: float = 1.0) -> LoadFunction:
    if name == "smooth1":
        return smooth1(mu)
    if name == "constant":
        return constant_load()
    if name == "rotational":
        return rotational_load()
    if name == "lshape_singular":
        return lshape_singular(mu)
    if name == "zero":
        return zero_load()
    raise ValueError(f"unknown solution/load '{name}'")
