"""Cordes-condition margins for coefficient matrices and fields.

A symmetric positive definite A satisfies the Cordes condition with margin
delta when ``|A|_F^2 <= (tr A)^2 / (n - 1 + delta)``; the largest such delta is
``(tr A)^2 / |A|_F^2 - (n - 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CordesReport", "cordes_delta_raw", "cordes_delta_matrix", "cordes_field",
    "max_p_for_cordes", "empirical_p_threshold", "family_delta",
]


@dataclass
class CordesReport:
    satisfied: bool
    delta: float
    delta_raw: float
    worst_node: tuple
    lambda1: float
    lambda2: float
    node_delta: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "satisfied": bool(self.satisfied),
            "delta": float(self.delta),
            "delta_raw": float(self.delta_raw),
            "worst_node": [int(i) for i in self.worst_node],
            "lambda1": float(self.lambda1),
            "lambda2": float(self.lambda2),
        }


def _as_batch(A):
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError("expected square matrices")
    return A


def cordes_delta_raw(A):
    """Largest Cordes margin without the cap at 1; works on stacks of matrices."""
    A = _as_batch(A)
    n = A.shape[-1]
    lam = np.linalg.eigvalsh(A)
    if np.any(lam[..., 0] <= 0):
        raise ValueError("Cordes margin needs a positive definite matrix")
    tr = np.trace(A, axis1=-2, axis2=-1)
    fro2 = np.sum(A * A, axis=(-2, -1))
    return tr**2 / fro2 - (n - 1)


def cordes_delta_matrix(A):
    """Cordes margin of one matrix, capped at 1."""
    return float(np.minimum(cordes_delta_raw(A), 1.0))


def cordes_field(coeffs, mask):
    """Minimum margin over interior nodes; ties go to the lowest node index."""
    inner = mask.interior
    A = coeffs.values[inner]
    if A.size == 0:
        raise ValueError("mask has no interior nodes")
    raw = cordes_delta_raw(A)
    k = int(np.argmin(raw))
    nodes = np.argwhere(inner)
    lam = np.linalg.eigvalsh(A)
    per_node = np.full(mask.grid.shape, np.nan)
    per_node[inner] = np.minimum(raw, 1.0)
    worst = float(raw[k])
    return CordesReport(
        satisfied=bool(worst > 0),
        delta=min(worst, 1.0),
        delta_raw=worst,
        worst_node=tuple(int(i) for i in nodes[k]),
        lambda1=float(lam[:, 0].min()),
        lambda2=float(lam[:, -1].max()),
        node_delta=per_node,
    )


def max_p_for_cordes(n):
    """Supremum of p for which every A(eta) = I + (p-2) eta(x)eta/(|eta|^2+eps^2) is Cordes."""
    if n <= 2:
        raise ValueError("n=2: Cordes equivalent to uniform ellipticity")
    return 3.0 + 2.0 / (n - 2)


def family_delta(p, s, n):
    """Raw margin of I + (p-2) s e(x)e, evaluated from the matrix."""
    A = np.eye(n)
    A[0, 0] += (p - 2.0) * s
    return float(cordes_delta_raw(A))


def empirical_p_threshold(n, epsilon=0.0, tol=1e-12, s_samples=201):
    """Bisection for the largest p with min over s of the family margin > 0.

    s = |eta|^2/(|eta|^2+eps^2) ranges over [0, 1) for eps > 0 and reaches 1
    only for eps = 0; the supremum over s is 1 either way, so s = 1 is always
    scanned and the threshold does not depend on epsilon.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    s_grid = np.linspace(0.0, 1.0, s_samples)

    def ok(p):
        return min(family_delta(p, s, n) for s in s_grid) > 0

    lo, hi = 2.0, 4.0
    while ok(hi):
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            return np.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
