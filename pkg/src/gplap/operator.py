"""The gamma-p operator, its epsilon-regularisation and frozen linearisation.

For ``eps > 0`` the operator applied to u is

    -(|Du|^2 + eps^2)^(gamma/2) * tr(A(Du) D^2u),
    A(eta) = I + (p - 2) eta (x) eta / (|eta|^2 + eps^2).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .field import (
    ScalarField,
    SymMatrixField,
    _shift,
    gradient_central,
    hessian_central,
)

__all__ = [
    "ProblemParams", "EllipticityPair", "coefficient_matrix", "coefficient_field",
    "apply_gamma_p", "frozen_linear_apply", "pucci_plus", "pucci_minus",
    "residual", "stencil_directions", "stencil_weights",
]


@dataclass(frozen=True)
class ProblemParams:
    gamma: float
    p: float
    epsilon: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.gamma > -1:
            raise ValueError(f"gamma must exceed -1, got {self.gamma}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.epsilon < 0 or self.lam < 0:
            raise ValueError("epsilon and lambda must be nonnegative")
        if self.gamma < 0 and self.epsilon == 0:
            raise ValueError("singular branch requires epsilon > 0")

    @property
    def singular(self):
        return self.gamma <= 0

    def with_epsilon(self, epsilon):
        return ProblemParams(self.gamma, self.p, epsilon, self.lam)


@dataclass(frozen=True)
class EllipticityPair:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not 0 < self.lambda1 <= self.lambda2:
            raise ValueError(f"need 0 < lambda1 <= lambda2, got {self.lambda1}, {self.lambda2}")

    @classmethod
    def for_p(cls, p):
        return cls(min(1.0, p - 1.0), max(1.0, p - 1.0))


def coefficient_matrix(eta, params):
    eta = np.asarray(eta, dtype=float).reshape(-1)
    q = eta @ eta + params.epsilon**2
    if q == 0:
        raise ValueError("coefficient matrix undefined for eta = 0 with epsilon = 0")
    return np.eye(eta.size) + (params.p - 2.0) * np.outer(eta, eta) / q


def coefficient_field(Du, params, where=None):
    """A(Du) at the nodes of ``where`` (default: nodes where Du is finite)."""
    g = Du.values
    n = Du.grid.dim
    where = np.all(np.isfinite(g), axis=-1) if where is None else np.asarray(where, dtype=bool)
    eta = g[where]
    q = np.sum(eta**2, axis=-1) + params.epsilon**2
    if np.any(q == 0):
        raise ValueError("coefficient matrix undefined where Du = 0 and epsilon = 0")
    A = np.full(Du.grid.shape + (n, n), np.nan)
    A[where] = np.eye(n) + (params.p - 2.0) * eta[:, :, None] * eta[:, None, :] / q[:, None, None]
    return SymMatrixField(Du.grid, A)


def stencil_directions(dim):
    """Integer stencil directions up to sign: axes first, then diagonals."""
    dirs = [d for d in itertools.product((-1, 0, 1), repeat=dim)
            if any(d) and next(c for c in d if c) > 0]
    dirs.sort(key=lambda d: (sum(abs(c) for c in d), [-c for c in d]))
    return np.array(dirs, dtype=int)


def stencil_weights(A, dim):
    """Nonnegative weights c_d with tr(A D^2u) ~ sum_d c_d (u(x+hd) - 2u + u(x-hd)) / h^2.

    ``A`` has shape (N, dim, dim).  Where A is diagonally dominant it is split
    exactly as sum_d c_d d d^T over axes and face diagonals (consistent, exact
    on quadratics).  Elsewhere A = l_min I + sum_k (l_k - l_min) v_k v_k^T and
    each rank-one part goes to the stencil direction nearest v_k.  Both
    splittings have c_d >= 0, so the resulting matrix is an M-matrix.

    Returns (dirs, weights, exact) with weights of shape (N, ndir) and
    ``exact`` flagging nodes that used the consistent split.
    """
    A = np.asarray(A, dtype=float)
    dirs = stencil_directions(dim)
    index = {tuple(d): k for k, d in enumerate(dirs)}
    N = A.shape[0]
    W = np.zeros((N, len(dirs)))
    offsum = np.sum(np.abs(A), axis=-1) - np.abs(np.diagonal(A, axis1=-2, axis2=-1))
    resid = np.diagonal(A, axis1=-2, axis2=-1) - offsum
    exact = np.all(resid >= 0, axis=-1)
    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        W[exact, index[tuple(e)]] = resid[exact, i]
        for j in range(i + 1, dim):
            aij = A[exact, i, j]
            d_plus = [0] * dim
            d_plus[i], d_plus[j] = 1, 1
            d_minus = list(d_plus)
            d_minus[j] = -1
            W[exact, index[tuple(d_plus)]] = np.where(aij > 0, aij, 0.0)
            W[exact, index[tuple(d_minus)]] = np.where(aij < 0, -aij, 0.0)
    rest = ~exact
    if rest.any():
        lam, vec = np.linalg.eigh(A[rest])
        if np.any(lam[:, 0] <= 0):
            raise ValueError("coefficient matrix is not positive definite")
        unit = dirs / np.linalg.norm(dirs, axis=1)[:, None]
        sub = np.zeros((int(rest.sum()), len(dirs)))
        sub[:, :dim] = lam[:, :1]
        rows = np.arange(sub.shape[0])
        for k in range(1, dim):
            v = vec[:, :, k]
            best = np.argmax(np.abs(v @ unit.T), axis=1)
            norm2 = np.sum(dirs[best] ** 2, axis=1)
            sub[rows, best] += (lam[:, k] - lam[:, 0]) / norm2
        W[rest] = sub
    return dirs, W, exact


def _check_pd(A, where):
    lam = np.linalg.eigvalsh(A[where])
    if lam.size and np.min(lam[:, 0]) <= 0:
        bad = np.argwhere(where)[np.argmin(lam[:, 0])]
        raise ValueError(f"coefficient matrix not positive definite at node {tuple(int(i) for i in bad)}")


def _trace_AD2(v, coeffs, mask, mode):
    """tr(A D^2 v) at interior nodes for the chosen discretisation."""
    grid = mask.grid
    inner = mask.interior
    A = coeffs.values
    if mode == "central":
        H = hessian_central(v, mask).values
        out = np.full(grid.shape, np.nan)
        out[inner] = np.einsum("kij,kij->k", A[inner], H[inner])
        return out
    if mode != "aligned":
        raise ValueError(f"unknown discretisation mode {mode!r}")
    dirs, W, _ = stencil_weights(A[inner], grid.dim)
    uw = np.where(mask.active, v.values, 0.0)
    acc = np.zeros(int(inner.sum()))
    for k, d in enumerate(dirs):
        d2 = (_shift(uw, d) - 2 * uw + _shift(uw, -d))[inner]
        acc += W[:, k] * d2
    out = np.full(grid.shape, np.nan)
    out[inner] = acc / grid.h**2
    return out


def frozen_linear_apply(v, coeffs, lam, mask, mode="central"):
    """-tr(A D^2 v) + lam * v at interior nodes."""
    inner = mask.interior
    out = -_trace_AD2(v, coeffs, mask, mode)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), mask.grid.shape)
    out[inner] += lam[inner] * v.values[inner]
    return ScalarField(mask.grid, out)


def apply_gamma_p(u, params, mask, mode="central"):
    """Regularised operator value at interior nodes.

    With eps = 0 and gamma > 0, nodes with Du = 0 return 0.  With eps = 0 and
    gamma = 0 the normalised term at such nodes uses the direction average
    tr(D^2u)/n.
    """
    if params.epsilon == 0 and params.gamma < 0:
        raise ValueError("singular branch requires epsilon > 0")
    grid = mask.grid
    inner = mask.interior
    g = gradient_central(u, mask).values[inner]
    q = np.sum(g**2, axis=-1) + params.epsilon**2
    crit = q == 0
    out = np.full(grid.shape, np.nan)
    if mode == "central":
        H = hessian_central(u, mask).values[inner]
        lap = np.trace(H, axis1=-2, axis2=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            inf_lap = np.einsum("ki,kij,kj->k", g, H, g) / q
        inf_lap[crit] = lap[crit] / grid.dim
        bracket = lap + (params.p - 2.0) * inf_lap
    else:
        eta = g.copy()
        n = grid.dim
        A = np.full(grid.shape + (n, n), np.nan)
        qq = np.where(crit, 1.0, q)
        Ai = np.eye(n) + (params.p - 2.0) * eta[:, :, None] * eta[:, None, :] / qq[:, None, None]
        Ai[crit] = np.eye(n) * (1.0 + (params.p - 2.0) / n)
        A[inner] = Ai
        bracket = _trace_AD2(u, SymMatrixField(grid, A), mask, mode)[inner]
    with np.errstate(divide="ignore"):
        weight = np.where(crit, 0.0 if params.gamma > 0 else 1.0, q ** (params.gamma / 2.0))
    out[inner] = -weight * bracket
    return ScalarField(grid, out)


def _eig_sym(X):
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise ValueError("expected a square matrix")
    if not np.allclose(X, np.swapaxes(X, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(X).max())):
        raise ValueError("Pucci operators need a symmetric matrix")
    return np.linalg.eigvalsh(X)


def pucci_plus(X, lambda1, lambda2):
    """sup of -tr(AX) over symmetric A with eigenvalues in [lambda1, lambda2]."""
    e = _eig_sym(X)
    return -lambda1 * np.sum(np.where(e > 0, e, 0.0), axis=-1) - lambda2 * np.sum(np.where(e < 0, e, 0.0), axis=-1)


def pucci_minus(X, lambda1, lambda2):
    """inf of -tr(AX) over symmetric A with eigenvalues in [lambda1, lambda2]."""
    e = _eig_sym(X)
    return -lambda2 * np.sum(np.where(e > 0, e, 0.0), axis=-1) - lambda1 * np.sum(np.where(e < 0, e, 0.0), axis=-1)


def residual(u, f, params, mask, u_ref=None, mode="central"):
    """Defect of the discrete regularised equation at interior nodes.

    gamma > 0:  apply_gamma_p(u) + lam*(u - u_ref) - f
    gamma <= 0: -tr(A(Du) D^2u) + lam*(u - u_ref) - f*(|Du|^2 + eps^2)^(-gamma/2)

    ``f`` and ``u_ref`` may be fields, arrays or scalars; ``u_ref`` defaults to 0.
    """
    grid = mask.grid
    inner = mask.interior
    fv = _values(f, grid)
    ref = np.zeros(grid.shape) if u_ref is None else _values(u_ref, grid)
    lam_term = params.lam * (u.values - ref)
    out = np.full(grid.shape, np.nan)
    if params.gamma > 0:
        op = apply_gamma_p(u, params, mask, mode).values
        out[inner] = (op + lam_term - fv)[inner]
        return ScalarField(grid, out)
    Du = gradient_central(u, mask)
    A = coefficient_field(Du, params, where=inner)
    tr = _trace_AD2(u, A, mask, mode)
    w = np.sum(Du.values[inner] ** 2, axis=-1) + params.epsilon**2
    out[inner] = -tr[inner] + lam_term[inner] - fv[inner] * w ** (-params.gamma / 2.0)
    return ScalarField(grid, out)


def _values(x, grid):
    if isinstance(x, ScalarField):
        return x.values
    return np.broadcast_to(np.asarray(x, dtype=float), grid.shape)
