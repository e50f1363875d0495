"""Empirical regularity diagnostics: plane fits, gradient Hölder fits and H2 sweeps.

Exponents are always reported as fits over a range of radii or grid sizes;
the regression is ordinary least squares in log-log coordinates.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .field import ScalarField, ball_nodes, discrete_norms

__all__ = [
    "FlatnessReport", "HolderFit", "W22Report", "best_plane", "flatness_sequence",
    "holder_fit_gradient", "w22_sweep", "theorem3_band_check", "band_margin",
    "loglog_fit", "power_profile_seminorm_sq", "power_profile_sweep",
]

log = logging.getLogger(__name__)

EXACT_PLANE = "exact-plane"
LIPSCHITZ = "Lipschitz-or-better"


def loglog_fit(x, y):
    """Slope, intercept and rms misfit of log y = a log x + b."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    M = np.column_stack([lx, np.ones_like(lx)])
    (a, b), *_ = np.linalg.lstsq(M, ly, rcond=None)
    res = float(np.sqrt(np.mean((M @ (a, b) - ly) ** 2)))
    return float(a), float(b), res


def _ball(u, center, radius, mask):
    sel = ball_nodes(mask, center, radius) & np.isfinite(u.values)
    pts = mask.grid.points()[sel]
    return pts, u.values[sel]


def best_plane(u, center, radius, mask):
    """Least-squares affine fit of u over the ball; returns (slope, osc).

    ``osc`` is max - min of u(x) - slope.x over the ball nodes.
    """
    c = np.asarray(center, dtype=float).reshape(-1)
    pts, vals = _ball(u, c, radius, mask)
    n = mask.grid.dim
    M = np.column_stack([np.ones(len(vals)), pts - c])
    if len(vals) < n + 1 or np.linalg.matrix_rank(M) < n + 1:
        raise ValueError(f"rank-deficient node set ({len(vals)} nodes) in ball of radius {radius} around {tuple(c)}")
    coef, *_ = np.linalg.lstsq(M, vals, rcond=None)
    q = coef[1:]
    dev = vals - pts @ q
    return q, float(dev.max() - dev.min())


@dataclass
class FlatnessReport:
    rho: float
    radii: list
    q_k: list
    osc_k: list
    q_steps: list
    alpha_hat: object
    counts: list = field(default_factory=list)
    truncated: bool = False

    def to_dict(self):
        return {
            "rho": self.rho,
            "radii": [float(r) for r in self.radii],
            "q_k": [[float(c) for c in q] for q in self.q_k],
            "osc_k": [float(o) for o in self.osc_k],
            "q_steps": [float(s) for s in self.q_steps],
            "alpha_hat": self.alpha_hat if isinstance(self.alpha_hat, str) else float(self.alpha_hat),
            "counts": [int(c) for c in self.counts],
            "truncated": self.truncated,
        }

    def decay_holds(self, factor=1.1):
        """osc_k <= osc_0 (r_k/r_0)^(1+alpha_hat) * factor for every level."""
        if isinstance(self.alpha_hat, str):
            return True
        r0, o0 = self.radii[0], self.osc_k[0]
        return all(o <= o0 * (r / r0) ** (1 + self.alpha_hat) * factor
                   for r, o in zip(self.radii, self.osc_k))


def flatness_sequence(u, center, rho, K, mask, radius0=1.0, min_nodes=8):
    """Plane fits over the balls of radius radius0 * rho**k, k = 0..K.

    The exponent is the log-log slope of osc_k against r_k, minus one.  If a
    ball holds fewer than ``min_nodes`` nodes the sequence stops at the
    previous level with a warning.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if K < 3:
        raise ValueError("need K >= 3")
    c = np.asarray(center, dtype=float).reshape(-1)
    grid = mask.grid
    near = np.linalg.norm(grid.points() - c, axis=-1) <= radius0 * (1 + 1e-12)
    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    if np.any(c - radius0 < lo - 1e-12) or np.any(c + radius0 > hi + 1e-12) or np.any(near & ~mask.active):
        raise ValueError(f"ball of radius {radius0} around {tuple(c)} leaves the mask")
    radii, qs, oscs, counts = [], [], [], []
    truncated = False
    for k in range(K + 1):
        r = radius0 * rho**k
        count = int((ball_nodes(mask, c, r) & np.isfinite(u.values)).sum())
        if count < min_nodes:
            warnings.warn(f"ball at level {k} holds {count} nodes; truncating at level {k - 1}",
                          RuntimeWarning, stacklevel=2)
            truncated = True
            break
        q, osc = best_plane(u, c, r, mask)
        radii.append(r)
        qs.append(q)
        oscs.append(osc)
        counts.append(count)
    steps = [float(np.linalg.norm(b - a)) for a, b in zip(qs, qs[1:])]
    scale = max(1.0, float(np.nanmax(np.abs(u.values[mask.active]))))
    if max(oscs) <= 1e-12 * scale:
        alpha = EXACT_PLANE
    elif len(oscs) < 2 or min(oscs) <= 0:
        alpha = float("nan")
    else:
        alpha = loglog_fit(radii, oscs)[0] - 1.0
    return FlatnessReport(rho=float(rho), radii=radii, q_k=qs, osc_k=oscs, q_steps=steps,
                          alpha_hat=alpha, counts=counts, truncated=truncated)


@dataclass
class HolderFit:
    alpha_hat: object
    c_hat: float
    r_range: tuple
    residual: float
    radii: list = field(default_factory=list)
    osc: list = field(default_factory=list)

    def to_dict(self):
        return {
            "alpha_hat": self.alpha_hat if isinstance(self.alpha_hat, str) else float(self.alpha_hat),
            "c_hat": float(self.c_hat),
            "r_range": [float(r) for r in self.r_range],
            "residual": float(self.residual),
            "radii": [float(r) for r in self.radii],
            "osc": [float(o) for o in self.osc],
        }


def holder_fit_gradient(Du, centers, radii, mask, min_ratio=8.0):
    """Fit osc(Du, B_r) ~ c r^alpha over the given radii.

    For each radius the oscillation is the largest over components and
    centers.  At least four radii with r_max / r_min >= ``min_ratio`` are
    required.
    """
    radii = sorted({float(r) for r in radii}, reverse=True)
    if len(radii) < 4 or radii[0] / radii[-1] < min_ratio * (1 - 1e-12):
        raise ValueError(f"need >= 4 radii spanning a factor {min_ratio}; got {radii}")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    g = Du.values
    ok = np.all(np.isfinite(g), axis=-1)
    osc = []
    for r in radii:
        worst = 0.0
        for c in centers:
            sel = ball_nodes(mask, c, r) & ok
            if sel.sum() < 2:
                raise ValueError(f"ball of radius {r} around {tuple(c)} holds fewer than 2 gradient nodes")
            vals = g[sel]
            worst = max(worst, float(np.max(vals.max(axis=0) - vals.min(axis=0))))
        osc.append(worst)
    scale = max(1.0, float(np.max(np.abs(g[ok]))))
    if max(osc) <= 1e-12 * scale:
        return HolderFit(LIPSCHITZ, 0.0, (radii[-1], radii[0]), 0.0, radii, osc)
    if min(osc) <= 0:
        raise ValueError("zero oscillation on some radii but not all; cannot fit")
    a, b, res = loglog_fit(radii, osc)
    return HolderFit(a, math.exp(b), (radii[-1], radii[0]), res, radii, osc)


@dataclass
class W22Report:
    seminorms: dict
    ratio: dict
    h_exponent: float
    smallest_eps: float
    eps_traces: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "seminorms": [{"h": h, "epsilon": e, "h2": v} for (h, e), v in sorted(self.seminorms.items())],
            "ratio": [{"h": h, "ratio": r} for h, r in sorted(self.ratio.items())],
            "h_exponent": self.h_exponent,
            "smallest_eps": self.smallest_eps,
            "eps_traces": [{"h": h, "trace": t} for h, t in sorted(self.eps_traces.items())],
        }

    @classmethod
    def combine(cls, reports):
        """Merge sweeps run separately over disjoint h values with one eps list."""
        semis, ratio, traces = {}, {}, {}
        for r in reports:
            semis.update(r.seminorms)
            ratio.update(r.ratio)
            traces.update(r.eps_traces)
        eps = reports[0].smallest_eps
        return cls(semis, ratio, _h_exponent(semis, sorted(ratio), eps), eps, traces)


def _h_exponent(semis, hs, eps):
    last = [semis[(h, eps)] for h in hs]
    if len(hs) >= 2 and min(last) > 0:
        return loglog_fit(hs, last)[0]
    return float("nan")


def _subdomain_selector(subdomain, mask):
    grid = mask.grid
    if callable(subdomain):
        sel = np.asarray(subdomain(grid.points()), dtype=bool)
    else:
        sel = np.asarray(subdomain, dtype=bool)
    sel = sel & mask.interior
    if not sel.any():
        raise ValueError("subdomain holds no interior nodes")
    dist = mask.distance_to_boundary()
    if np.min(dist[sel]) < 2 * grid.h - 1e-12 * grid.h:
        raise ValueError("subdomain must stay at distance >= 2h from the mask boundary")
    return sel


def w22_sweep(problem, h_list, eps_list, subdomain, config=None):
    """Interior H2 seminorms of the regularised solutions over an (h, eps) table.

    ``problem`` is a solver.Problem; each h runs one epsilon continuation
    through ``eps_list`` (sorted decreasing).  ``subdomain`` is a boolean
    function of points or a boolean array valid on every grid.
    """
    from .solver import SolverConfig, continuation_solve

    config = config or SolverConfig()
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    semis, ratio, traces = {}, {}, {}
    for h in h_list:
        h = float(h)
        dp = problem.discretize(h)
        sel = _subdomain_selector(subdomain, dp.mask)

        def record(eps, rep, h=h, sel=sel, mask=dp.mask):
            semis[(h, eps)] = discrete_norms(rep.solution, mask, subdomain=sel)["h2"]

        rep = continuation_solve(dp, config, schedule=eps_list, on_stage=record)
        vals = [semis[(h, e)] for e in eps_list]
        ratio[h] = float(max(vals) / min(vals)) if min(vals) > 0 else (1.0 if max(vals) == 0 else float("inf"))
        traces[h] = rep.eps_trace
    hs = sorted(float(h) for h in h_list)
    return W22Report(semis, ratio, _h_exponent(semis, hs, eps_list[-1]), eps_list[-1], traces)


def power_profile_seminorm_sq(beta, intervals, chunk=1 << 20):
    """Discrete squared H2 seminorm of |t|^beta on [-1, 1] with the given interval count.

    Second differences at the interior nodes, weight h.  The count must be
    even so that t = 0 is a node.
    """
    if intervals % 2:
        raise ValueError("interval count must be even")
    h = 2.0 / intervals
    half = intervals // 2
    total = 0.0
    # by symmetry: the node at 0 once, nodes j = 1..half-1 twice
    total += (2.0 * h**beta / h**2) ** 2
    for start in range(1, half, chunk):
        j = np.arange(start, min(start + chunk, half), dtype=float)
        d2 = ((j + 1) ** beta - 2 * j**beta + np.abs(j - 1) ** beta) * h ** (beta - 2.0)
        total += 2.0 * float(np.sum(d2 * d2))
    return h * total


def power_profile_sweep(beta, intervals_list):
    """Seminorm table for |t|^beta; fits the growth exponent in h."""
    hs, vals = [], []
    for m in intervals_list:
        hs.append(2.0 / m)
        vals.append(power_profile_seminorm_sq(beta, int(m)))
    out = {"beta": float(beta), "h": hs, "seminorm_sq": vals,
           "exponent": loglog_fit(hs, vals)[0] if len(hs) >= 2 else float("nan")}
    if beta > 1.5:
        out["limit"] = 2.0 * (beta * (beta - 1.0)) ** 2 / (2.0 * beta - 3.0)
    return out


def band_margin(gamma, p, beta, n=2):
    """1 - beta - sqrt(n)|p-2-gamma| - beta (p-2-gamma)^+."""
    d = p - 2.0 - gamma
    return 1.0 - beta - math.sqrt(n) * abs(d) - beta * max(d, 0.0)


def theorem3_band_check(gamma, p, beta, n=2):
    """True when 0 < gamma <= beta < 1 and the band margin is positive."""
    if not (0 < gamma <= beta < 1):
        return False
    return band_margin(gamma, p, beta, n) > 0
