"""Exact and manufactured solutions used to check the solver.

The radial profile ``c |x|^s`` with ``s = (gamma + 2)/(gamma + 1)`` is the
power left invariant by the natural scaling of the equation, so it solves the
problem with a constant right-hand side away from the origin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import ScalarField, write_field

__all__ = [
    "AnalyticField", "RadialOracle", "radial_exponent", "radial_oracle",
    "power_profile_1d", "manufactured", "numeric_operator", "operator_from_derivatives",
    "verify_radial_oracle", "rescale", "affine", "export_oracle",
]


@dataclass(frozen=True)
class AnalyticField:
    """A function of the coordinates, with optional closed-form derivatives.

    All callables take points of shape ``(..., n)``; ``grad`` returns
    ``(..., n)`` and ``hess`` returns ``(..., n, n)``.
    """

    value: object
    grad: object = None
    hess: object = None
    name: str = "analytic"

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def sample(self, grid, where=None):
        vals = self.value(grid.points())
        if where is not None:
            vals = np.where(where, vals, np.nan)
        return ScalarField(grid, vals, meta={"source": self.name})


def affine(slope, offset=0.0):
    q = np.asarray(slope, dtype=float)

    def value(x):
        return x @ q + offset

    def grad(x):
        return np.broadcast_to(q, x.shape).copy()

    def hess(x):
        return np.zeros(x.shape + (q.size,))

    return AnalyticField(value, grad, hess, name=f"affine{tuple(q.tolist())}")


def radial_exponent(gamma):
    if not gamma > -1:
        raise ValueError("gamma must exceed -1")
    return (gamma + 2.0) / (gamma + 1.0)


@dataclass(frozen=True)
class RadialOracle:
    c: float
    s: float
    f_const: float
    gamma: float
    p: float
    n: int

    def value(self, x):
        r = np.linalg.norm(x, axis=-1)
        return self.c * r**self.s

    def grad(self, x):
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = np.where(r > 0, self.c * self.s * r ** (self.s - 2.0), 0.0)
        return fac[..., None] * x

    def hess(self, x):
        r = np.linalg.norm(x, axis=-1)
        n = x.shape[-1]
        with np.errstate(invalid="ignore", divide="ignore"):
            xh = x / r[..., None]
            fac = self.c * self.s * r ** (self.s - 2.0)
        H = fac[..., None, None] * (np.eye(n) + (self.s - 2.0) * xh[..., :, None] * xh[..., None, :])
        return H

    def as_analytic(self):
        return AnalyticField(self.value, self.grad, self.hess,
                             name=f"radial(c={self.c},gamma={self.gamma},p={self.p},n={self.n})")

    def sample(self, grid, where=None):
        return self.as_analytic().sample(grid, where)

    def gradient_holder_exponent(self):
        return self.s - 1.0


def radial_oracle(c, gamma, p, n):
    """u = c|x|^s with the constant source it produces away from the origin."""
    if not c > 0:
        raise ValueError("amplitude c must be positive")
    if not p > 1:
        raise ValueError("p must exceed 1")
    s = radial_exponent(gamma)
    f = -((c * s) ** (gamma + 1.0)) * ((s + n - 2.0) + (p - 2.0) * (s - 1.0))
    return RadialOracle(float(c), s, f, float(gamma), float(p), int(n))


def power_profile_1d(beta, grid):
    """Field |x_1|^beta and the exact square integral of its second derivative on [-1, 1].

    Returns (field, info) with ``info = {"finite": bool, "value": float}``.
    """
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    x1 = grid.coords()[0]
    u = ScalarField(grid, np.abs(x1) ** beta, meta={"source": f"|x1|^{beta}"})
    if beta <= 1.5:
        return u, {"finite": False, "value": float("inf")}
    val = 2.0 * (beta * (beta - 1.0)) ** 2 / (2.0 * beta - 3.0)
    return u, {"finite": True, "value": val}


def operator_from_derivatives(g, H, gamma, p, epsilon=0.0):
    """-(|g|^2+eps^2)^(gamma/2) [tr H + (p-2) g.Hg/(|g|^2+eps^2)] pointwise.

    Points with g = 0 and eps = 0 follow the discrete operator: 0 for
    gamma > 0, direction average tr(H)/n in the normalised term for gamma = 0.
    """
    q = np.sum(g * g, axis=-1) + epsilon**2
    lap = np.trace(H, axis1=-2, axis2=-1)
    crit = q == 0
    if np.any(crit) and gamma < 0:
        raise ValueError("singular branch requires epsilon > 0 at critical points")
    qq = np.where(crit, 1.0, q)
    inf_lap = np.where(crit, lap / g.shape[-1], np.einsum("...i,...ij,...j->...", g, H, g) / qq)
    weight = np.where(crit, 0.0 if gamma > 0 else 1.0, qq ** (gamma / 2.0))
    return -weight * (lap + (p - 2.0) * inf_lap)


def _numeric_derivatives(value, x, delta):
    """Fourth-order central differences for gradient and Hessian at points x."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    eye = np.eye(n) * delta
    c1 = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))
    g = np.empty(x.shape)
    H = np.empty(x.shape + (n,))
    f0 = value(x)
    for i in range(n):
        g[..., i] = sum(w * value(x + k * eye[i]) for k, w in c1) / (12 * delta)
        H[..., i, i] = (-value(x + 2 * eye[i]) + 16 * value(x + eye[i]) - 30 * f0
                        + 16 * value(x - eye[i]) - value(x - 2 * eye[i])) / (12 * delta**2)
        for j in range(i + 1, n):
            acc = 0.0
            for ki, wi in c1:
                for kj, wj in c1:
                    acc = acc + wi * wj * value(x + ki * eye[i] + kj * eye[j])
            H[..., i, j] = H[..., j, i] = acc / (144 * delta**2)
    return g, H


def numeric_operator(value, x, gamma, p, epsilon=0.0, delta=1e-3):
    """Operator value at x using only point evaluations of ``value``."""
    g, H = _numeric_derivatives(value, x, delta)
    return operator_from_derivatives(g, H, gamma, p, epsilon)


def verify_radial_oracle(oracle, inner=0.25, outer=1.0, h=1.0 / 32, delta=1e-3, rtol=1e-6):
    """Compare f_const with a fourth-order numerical application on an annulus grid.

    Returns the maximal relative discrepancy; raises AssertionError above rtol.
    """
    from .field import GridSpec, annulus_mask

    grid = GridSpec.cube(oracle.n, -outer, outer, h)
    mask = annulus_mask(grid, inner=inner + 2 * delta, outer=outer)
    pts = grid.points()[mask.active]
    f_num = numeric_operator(oracle.value, pts, oracle.gamma, oracle.p, 0.0, delta)
    err = float(np.max(np.abs(f_num - oracle.f_const)) / abs(oracle.f_const))
    if not err <= rtol:
        raise AssertionError(f"radial oracle source {oracle.f_const} disagrees with numerics (rel. {err:.3e})")
    return err


def manufactured(u, params, grid, where=None, refine=4):
    """Sample u and the matching source term.

    Closed-form derivatives are used when ``u`` supplies them; otherwise the
    derivatives come from fourth-order differences with step h/refine.
    Returns (u_field, f_field, provenance).
    """
    pts = grid.points()
    if where is not None:
        pts = pts[where]
    if u.grad is not None and u.hess is not None:
        f = operator_from_derivatives(u.grad(pts), u.hess(pts), params.gamma, params.p, params.epsilon)
        prov = {"method": "closed-form", "source": u.name}
    else:
        delta = grid.h / refine
        f = numeric_operator(u.value, pts, params.gamma, params.p, params.epsilon, delta)
        prov = {"method": "fd4", "step": delta, "source": u.name}
    prov.update(gamma=params.gamma, p=params.p, epsilon=params.epsilon)
    if where is None:
        fvals = f
    else:
        fvals = np.full(grid.shape, np.nan)
        fvals[where] = f
    uf = u.sample(grid, where)
    return uf, ScalarField(grid, fvals, meta=prov), prov


def rescale(u, r, x0, gamma):
    """u_r(y) = r^(-s) u(x0 + r y), s = (gamma+2)/(gamma+1); maps solutions to solutions."""
    s = radial_exponent(gamma)
    x0 = np.asarray(x0, dtype=float)
    scale = r ** (-s)

    def value(y):
        return scale * u.value(x0 + r * y)

    grad = hess = None
    if u.grad is not None:
        def grad(y):
            return scale * r * u.grad(x0 + r * y)
    if u.hess is not None:
        def hess(y):
            return scale * r**2 * u.hess(x0 + r * y)
    return AnalyticField(value, grad, hess, name=f"rescaled({u.name},r={r},x0={x0.tolist()})")


def export_oracle(path, oracle, grid, where=None, provenance=None):
    """Write a sampled oracle as a field file with a provenance block."""
    fld = oracle.sample(grid, where)
    prov = {"oracle": "radial", "c": oracle.c, "s": oracle.s, "f_const": oracle.f_const,
            "gamma": oracle.gamma, "p": oracle.p, "n": oracle.n,
            "certified_at_origin": bool(oracle.s >= 2)}
    if provenance:
        prov.update(provenance)
    write_field(path, fld, provenance=prov)
    return fld
