"""Frozen-coefficient Picard solver for the regularised Dirichlet problems.

Singular branch (gamma <= 0), each step solves

    -tr(A(Dv_k) D^2v) + lam v = f (|Dv_k|^2+eps^2)^(-gamma/2) + lam u_ref

Degenerate branch (gamma > 0), each step solves

    -tr(A(Dv_k) D^2v) + lam w_k v = w_k (f + lam u_ref),  w_k = (|Dv_k|^2+eps^2)^(-gamma/2)

with Dirichlet data on the boundary nodes of the mask.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab

from .field import (
    GridSpec,
    ScalarField,
    SymMatrixField,
    annulus_mask,
    box_mask,
    disk_mask,
    gradient_central,
)
from .operator import ProblemParams, coefficient_field, residual, stencil_weights

__all__ = [
    "SolverConfig", "BoundaryData", "SolveReport", "FrozenSystem", "Domain", "Problem",
    "DiscreteProblem", "SolverError", "LinearSolveError", "DivergenceError",
    "assemble_frozen", "linear_solve", "harmonic_extension", "solve_singular",
    "solve_degenerate", "solve", "continuation_solve", "resolve_mode",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Numerical failure; ``report`` holds whatever was computed."""

    def __init__(self, message, report=None, history=None):
        super().__init__(message)
        self.report = report
        self.history = history


class LinearSolveError(SolverError):
    pass


class DivergenceError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    discretization: str = "auto"
    inner_tol: float = 1e-10
    inner_max_iter: int = 20000
    outer_tol: float = 1e-8
    outer_max_iter: int = 300
    damping: float = 1.0
    epsilon_schedule: tuple = (1e-2,)
    seed_field: object = None
    residual_stride: int = 10
    acceleration: str = "none"
    anderson_depth: int = 5

    def __post_init__(self):
        if self.discretization not in ("auto", "central", "aligned"):
            raise ValueError(f"unknown discretization {self.discretization!r}")
        if self.acceleration not in ("none", "anderson"):
            raise ValueError(f"unknown acceleration {self.acceleration!r}")
        if self.anderson_depth < 1:
            raise ValueError("anderson_depth must be at least 1")
        if self.inner_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        sched = tuple(float(e) for e in self.epsilon_schedule)
        if not sched or any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("epsilon schedule must be positive and strictly decreasing")
        object.__setattr__(self, "epsilon_schedule", sched)


def resolve_mode(config, p):
    if config.discretization != "auto":
        return config.discretization
    return "aligned" if abs(p - 2.0) >= 0.5 else "central"


@dataclass(frozen=True, eq=False)
class BoundaryData:
    mask: object
    values: np.ndarray
    provenance: str = "sampled"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.mask.grid.shape:
            raise ValueError("boundary value array does not match the grid")
        b = self.mask.boundary
        if not np.all(np.isfinite(v[b])):
            bad = tuple(int(i) for i in np.argwhere(b & ~np.isfinite(v))[0])
            raise ValueError(f"boundary value at node {bad} is not finite")
        out = np.full(v.shape, np.nan)
        out[b] = v[b]
        out.flags.writeable = False
        object.__setattr__(self, "values", out)

    @classmethod
    def from_function(cls, mask, g, provenance="exact-trace"):
        pts = mask.grid.points()
        vals = np.full(mask.grid.shape, np.nan)
        b = mask.boundary
        vals[b] = g(pts[b])
        return cls(mask, vals, provenance)

    @property
    def sup(self):
        b = self.mask.boundary
        return float(np.max(np.abs(self.values[b]))) if b.any() else 0.0


@dataclass
class SolveReport:
    solution: ScalarField
    converged: bool
    outer_iters: int
    inner_iters: list
    final_update_sup: float
    final_residual_sup: float
    mode: str
    epsilon: float
    update_history: list = field(default_factory=list)
    correction_history: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    comparison: dict = field(default_factory=dict)
    lipschitz_estimate: float = float("nan")
    eps_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "converged": bool(self.converged),
            "outer_iters": int(self.outer_iters),
            "inner_iters": [int(i) for i in self.inner_iters],
            "final_update_sup": float(self.final_update_sup),
            "final_residual_sup": float(self.final_residual_sup),
            "mode": self.mode,
            "epsilon": float(self.epsilon),
            "update_history": [float(u) for u in self.update_history],
            "correction_history": [float(u) for u in self.correction_history],
            "damping_history": [float(t) for t in self.damping_history],
            "comparison": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                           for k, v in self.comparison.items()},
            "lipschitz_estimate": float(self.lipschitz_estimate),
            "residual_bound": float(self.lipschitz_estimate * self.final_update_sup),
            "eps_trace": self.eps_trace,
        }


@dataclass(eq=False)
class FrozenSystem:
    """Interior unknowns; ``coupling`` maps boundary values into the right side."""

    matrix: sp.csr_matrix
    coupling: sp.csr_matrix
    mask: object
    interior_index: np.ndarray
    boundary_index: np.ndarray

    def rhs(self, F, bc):
        """F at interior nodes minus the Dirichlet contributions."""
        Fv = F.values if isinstance(F, ScalarField) else np.broadcast_to(np.asarray(F, dtype=float), self.mask.grid.shape)
        g = bc.values if isinstance(bc, BoundaryData) else np.asarray(bc, dtype=float)
        b = Fv[self.mask.interior].astype(float)
        if self.coupling.shape[1]:
            b = b - self.coupling @ g[self.mask.boundary]
        return b

    def scatter(self, x, bc):
        """Full nodal array with x on interior nodes and bc on boundary nodes."""
        out = np.full(self.mask.grid.shape, np.nan)
        out[self.mask.interior] = x
        g = bc.values if isinstance(bc, BoundaryData) else np.asarray(bc, dtype=float)
        out[self.mask.boundary] = g[self.mask.boundary]
        return out

    def lipschitz(self):
        """Max absolute row sum (interior plus boundary columns)."""
        rows = abs(self.matrix).sum(axis=1).A1
        if self.coupling.shape[1]:
            rows = rows + abs(self.coupling).sum(axis=1).A1
        return float(rows.max()) if rows.size else 0.0


def assemble_frozen(coeffs, lam, mask, mode="central"):
    """Sparse rows of -sum a_ij D_i D_j + lam at interior nodes."""
    grid = mask.grid
    n, h = grid.dim, grid.h
    inner, bnd = mask.interior, mask.boundary
    iidx = np.full(grid.shape, -1, dtype=np.int64)
    iidx[inner] = np.arange(int(inner.sum()))
    bidx = np.full(grid.shape, -1, dtype=np.int64)
    bidx[bnd] = np.arange(int(bnd.sum()))
    A = coeffs.values[inner]
    lam_vec = np.broadcast_to(np.asarray(lam, dtype=float), grid.shape)[inner]
    if np.any(~np.isfinite(A)):
        raise ValueError("coefficient field is undefined at an interior node")
    lmin = np.linalg.eigvalsh(A)[:, 0]
    if np.any(lmin <= 0):
        bad = np.argwhere(inner)[int(np.argmin(lmin))]
        raise ValueError(f"coefficient matrix not positive definite at node {tuple(int(i) for i in bad)}")

    nodes = np.argwhere(inner)
    rows = iidx[inner]
    stencil = {}  # offset -> weight per interior node (coefficient of u(x + h*offset))

    def add(off, w):
        off = tuple(int(o) for o in off)
        stencil[off] = stencil.get(off, 0.0) + w

    center = lam_vec.copy()
    if mode == "central":
        eye = np.eye(n, dtype=int)
        for i in range(n):
            center = center + 2 * A[:, i, i] / h**2
            add(eye[i], -A[:, i, i] / h**2)
            add(-eye[i], -A[:, i, i] / h**2)
            for j in range(i + 1, n):
                w = A[:, i, j] / (2 * h**2)
                add(eye[i] + eye[j], -w)
                add(-eye[i] - eye[j], -w)
                add(eye[i] - eye[j], w)
                add(-eye[i] + eye[j], w)
    elif mode == "aligned":
        dirs, W, _ = stencil_weights(A, n)
        for k, d in enumerate(dirs):
            center = center + 2 * W[:, k] / h**2
            add(d, -W[:, k] / h**2)
            add(-d, -W[:, k] / h**2)
    else:
        raise ValueError(f"unknown discretisation mode {mode!r}")

    ri, ci, vi = [rows], [rows], [center]
    rb, cb, vb = [], [], []
    for off, w in stencil.items():
        nb = tuple((nodes + np.array(off)).T)
        col_i = iidx[nb]
        col_b = bidx[nb]
        is_i = col_i >= 0
        ri.append(rows[is_i]); ci.append(col_i[is_i]); vi.append(w[is_i])
        is_b = col_b >= 0
        rb.append(rows[is_b]); cb.append(col_b[is_b]); vb.append(w[is_b])
        if np.any(~is_i & ~is_b):
            raise ValueError("stencil of an interior node reaches an exterior node")
    Ni, Nb = int(inner.sum()), int(bnd.sum())
    M = sp.csr_matrix((np.concatenate(vi), (np.concatenate(ri), np.concatenate(ci))), shape=(Ni, Ni))
    if rb:
        B = sp.csr_matrix((np.concatenate(vb), (np.concatenate(rb), np.concatenate(cb))), shape=(Ni, Nb))
    else:
        B = sp.csr_matrix((Ni, Nb))
    M.sum_duplicates()
    B.sum_duplicates()
    return FrozenSystem(M, B, mask, iidx, bidx)


def linear_solve(system, rhs, config=None, x0=None):
    """Jacobi-preconditioned BiCGStab.  Returns (x, info).

    ``info`` has the iteration count and a residual history sampled every
    ``config.residual_stride`` iterations.  Raises LinearSolveError on
    breakdown or when the iteration cap is hit.
    """
    config = config or SolverConfig()
    M = system.matrix if isinstance(system, FrozenSystem) else sp.csr_matrix(system)
    b = np.asarray(rhs, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0:
        return np.zeros_like(b), {"iterations": 0, "residuals": [0.0]}
    d = M.diagonal()
    if np.any(d == 0):
        raise LinearSolveError("zero on the matrix diagonal; Jacobi preconditioner undefined")
    dinv = 1.0 / d
    prec = LinearOperator(M.shape, matvec=lambda r: dinv * r, dtype=float)
    x0 = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()
    history = [float(np.linalg.norm(b - M @ x0)) / bnorm]
    count = [0]
    stride = max(1, int(config.residual_stride))

    def monitor(xk):
        count[0] += 1
        if count[0] % stride == 0:
            history.append(float(np.linalg.norm(b - M @ xk)) / bnorm)

    if history[0] <= config.inner_tol:
        return x0, {"iterations": 0, "residuals": history}
    x, flag = bicgstab(M, b, x0=x0, rtol=config.inner_tol, atol=0.0,
                       maxiter=config.inner_max_iter, M=prec, callback=monitor)
    final = float(np.linalg.norm(b - M @ x)) / bnorm
    history.append(final)
    if flag != 0 or not np.isfinite(final) or final > 10 * config.inner_tol:
        kind = "breakdown" if flag < 0 else "iteration limit" if flag > 0 else "inaccurate result"
        raise LinearSolveError(f"BiCGStab {kind} after {count[0]} iterations, relative residual {final:.3e}",
                               history=history)
    return x, {"iterations": count[0], "residuals": history}


def harmonic_extension(bc, config=None):
    """Discrete harmonic function with the given boundary values."""
    mask = bc.mask
    n = mask.grid.dim
    sysI = assemble_frozen(SymMatrixField.constant(mask.grid, np.eye(n)), 0.0, mask, "central")
    x, _ = linear_solve(sysI, sysI.rhs(0.0, bc), config)
    return sysI.scatter(x, bc)


def _as_array(x, grid):
    if x is None:
        return np.zeros(grid.shape)
    if isinstance(x, ScalarField):
        return x.values
    return np.broadcast_to(np.asarray(x, dtype=float), grid.shape)


def _picard(f, u_ref, bc, params, config, singular):
    mask = bc.mask
    grid = mask.grid
    inner = mask.interior
    mode = resolve_mode(config, params.p)
    fv = _as_array(f, grid)
    ref = _as_array(u_ref, grid)
    if params.epsilon <= 0:
        raise ValueError("the regularised solver needs epsilon > 0")
    if params.lam < 0:
        raise ValueError("lambda must be nonnegative")

    if config.seed_field is not None:
        v = np.array(_as_array(config.seed_field, grid), dtype=float)
        v[mask.boundary] = bc.values[mask.boundary]
        v[~mask.active] = np.nan
    else:
        v = harmonic_extension(bc, config)

    theta = config.damping
    updates, corrections, thetas, inner_iters = [], [], [], []
    growth = shrink = 0
    anderson = config.acceleration == "anderson"
    dX, dR = [], []
    hist_x = hist_r = None
    last_F = None
    system = None
    converged = False
    k = 0
    for k in range(1, config.outer_max_iter + 1):
        Du = gradient_central(ScalarField(grid, v), mask)
        A = coefficient_field(Du, params, where=inner)
        w = np.sum(Du.values[inner] ** 2, axis=-1) + params.epsilon**2
        lam_vec = np.zeros(grid.shape)
        F = np.zeros(grid.shape)
        if singular:
            lam_vec[inner] = params.lam
            F[inner] = fv[inner] * w ** (-params.gamma / 2.0) + params.lam * ref[inner]
        else:
            scale = w ** (-params.gamma / 2.0)
            lam_vec[inner] = params.lam * scale
            F[inner] = scale * (fv[inner] + params.lam * ref[inner])
        system = assemble_frozen(A, lam_vec, mask, mode)

        def snapshot(ok):
            return _report(v, grid, ok, k, inner_iters, updates, corrections, thetas, mode, params,
                           f, u_ref, mask, bc, last_F, lam_vec, system)

        try:
            x, info = linear_solve(system, system.rhs(F, bc), config, x0=v[inner])
        except LinearSolveError as exc:
            exc.report = snapshot(False)
            raise
        inner_iters.append(info["iterations"])
        xk = v[inner]
        r = x - xk
        corr = float(np.max(np.abs(r))) if inner.any() else 0.0
        corrections.append(corr)
        thetas.append(theta)
        last_F = F
        if not np.isfinite(corr):
            updates.append(float("nan"))
            raise DivergenceError("non-finite Picard update", report=snapshot(False))
        # the undamped correction bounds the fixed-point defect; a small damped
        # step alone does not
        if corr <= config.outer_tol:
            # return the frozen solve itself so the discrete comparison holds exactly
            new = v.copy()
            new[inner] = x
            updates.append(corr)
            v = new
            converged = True
            break
        if anderson:
            if hist_x is not None:
                dX.append(xk - hist_x)
                dR.append(r - hist_r)
                del dX[:-config.anderson_depth], dR[:-config.anderson_depth]
            hist_x, hist_r = xk, r
            step = theta * r
            if dR:
                R = np.stack(dR, axis=1)
                coef = np.linalg.lstsq(R, r, rcond=None)[0]
                step = step - (np.stack(dX, axis=1) + theta * R) @ coef
        else:
            step = theta * r
        new = v.copy()
        new[inner] = xk + step
        updates.append(float(np.max(np.abs(step))))
        v = new
        if len(corrections) > 1 and corr > corrections[-2]:
            growth += 1
            shrink = 0
            if not anderson:
                theta = max(theta / 2.0, config.damping / 64)
            if growth >= 10:
                raise DivergenceError(
                    f"Picard correction grew for {growth} consecutive steps (last {corr:.3e})",
                    report=snapshot(False))
        else:
            growth = 0
            shrink += 1
            if shrink >= 3 and theta < config.damping:
                theta = min(2.0 * theta, config.damping)
                shrink = 0
    rep = _report(v, grid, converged, k, inner_iters, updates, corrections, thetas, mode, params,
                  f, u_ref, mask, bc, last_F, lam_vec, system)
    if not converged:
        raise SolverError(f"Picard iteration did not reach outer_tol={config.outer_tol} in "
                          f"{config.outer_max_iter} steps (last correction {corrections[-1]:.3e})", report=rep)
    return rep


def _report(v, grid, converged, k, inner_iters, updates, corrections, thetas, mode, params, f, u_ref,
            mask, bc, last_F, lam_vec, system):
    sol = ScalarField(grid, v)
    inner = mask.interior
    try:
        res = residual(sol, _as_array(f, grid), params, mask, u_ref=_as_array(u_ref, grid), mode=mode)
        res_sup = float(np.nanmax(np.abs(res.values[inner]))) if inner.any() else 0.0
    except ValueError:
        res_sup = float("nan")
    comparison = {}
    if last_F is not None and params.lam > 0 and inner.any():
        lam_i = lam_vec[inner]
        eff = float(np.max(np.abs(last_F[inner] / lam_i)))
        sup_v = float(np.max(np.abs(v[mask.active])))
        bound = bc.sup + eff
        comparison = {"sup_v": sup_v, "sup_bc": bc.sup, "sup_rhs_over_lambda": eff,
                      "bound": bound, "holds": bool(sup_v <= bound * (1 + 1e-9))}
    return SolveReport(
        solution=sol, converged=converged, outer_iters=k, inner_iters=list(inner_iters),
        final_update_sup=updates[-1] if updates else 0.0, final_residual_sup=res_sup,
        mode=mode, epsilon=params.epsilon, update_history=list(updates),
        correction_history=list(corrections),
        damping_history=list(thetas), comparison=comparison,
        lipschitz_estimate=system.lipschitz() if system is not None else float("nan"),
    )


def solve_singular(f, u_ref, bc, params, config=None):
    """Regularised problem for gamma in (-1, 0]; see module docstring."""
    config = config or SolverConfig()
    if params.gamma > 0:
        raise ValueError("solve_singular needs gamma <= 0")
    return _picard(f, u_ref, bc, params, config, singular=True)


def solve_degenerate(f, u_ref, bc, params, config=None):
    """Regularised problem for gamma > 0; see module docstring."""
    config = config or SolverConfig()
    if params.gamma <= 0:
        raise ValueError("solve_degenerate needs gamma > 0")
    return _picard(f, u_ref, bc, params, config, singular=False)


def solve(f, u_ref, bc, params, config=None):
    if params.gamma <= 0:
        return solve_singular(f, u_ref, bc, params, config)
    return solve_degenerate(f, u_ref, bc, params, config)


@dataclass(frozen=True)
class Domain:
    """Box, disk or annulus; disks and annuli sit on their bounding box."""

    kind: str = "box"
    lo: float = -1.0
    hi: float = 1.0
    center: tuple = None
    radius: float = 1.0
    inner_radius: float = 0.25

    def build(self, dim, h):
        c = np.zeros(dim) if self.center is None else np.asarray(self.center, dtype=float)
        if self.kind == "box":
            grid = GridSpec.cube(dim, self.lo, self.hi, h)
            return grid, box_mask(grid)
        grid = GridSpec.box(c - self.radius, c + self.radius, h)
        if self.kind == "disk":
            return grid, disk_mask(grid, c, self.radius)
        if self.kind == "annulus":
            return grid, annulus_mask(grid, c, self.inner_radius, self.radius)
        raise ValueError(f"unknown domain kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    grid: GridSpec
    mask: object
    f: ScalarField
    u_ref: ScalarField
    bc: BoundaryData
    gamma: float
    p: float
    lam: float
    exact: ScalarField = None

    def params(self, epsilon):
        return ProblemParams(self.gamma, self.p, epsilon, self.lam)


@dataclass(frozen=True)
class Problem:
    """Continuous problem data; callables take points of shape (..., dim).

    ``u_ref`` defaults to the boundary function, matching the zero-order
    term lam*u of the regularised problems.
    """

    gamma: float
    p: float
    bc: object
    f: object = 0.0
    dim: int = 2
    lam: float = 1.0
    domain: Domain = Domain()
    u_ref: object = None
    exact: object = None

    def discretize(self, h):
        grid, mask = self.domain.build(self.dim, h)
        pts = grid.points()
        act = mask.active

        def sample(fn):
            vals = np.full(grid.shape, np.nan)
            if callable(fn):
                vals[act] = fn(pts[act])
            else:
                vals[act] = float(fn)
            return ScalarField(grid, vals)

        ref = self.bc if self.u_ref is None else self.u_ref
        return DiscreteProblem(
            grid=grid, mask=mask, f=sample(self.f), u_ref=sample(ref),
            bc=BoundaryData.from_function(mask, self.bc),
            gamma=self.gamma, p=self.p, lam=self.lam,
            exact=sample(self.exact) if self.exact is not None else None,
        )


def continuation_solve(problem, config=None, schedule=None, on_stage=None):
    """Solve along a decreasing epsilon schedule, seeding each stage with the last.

    ``problem`` is a DiscreteProblem.  The returned report is the final stage's,
    with ``eps_trace`` holding per-stage diagnostics and the sup distance to the
    previous stage's solution.  ``on_stage(eps, report)`` is called after each
    stage.
    """
    config = config or SolverConfig()
    schedule = tuple(schedule) if schedule is not None else config.epsilon_schedule
    config = replace(config, epsilon_schedule=schedule)
    trace = []
    prev = None
    rep = None
    inner = problem.mask.interior
    for eps in schedule:
        cfg = config if prev is None else replace(config, seed_field=prev)
        rep = solve(problem.f, problem.u_ref, problem.bc, problem.params(eps), cfg)
        entry = {"epsilon": float(eps), "outer_iters": rep.outer_iters,
                 "inner_iters": int(sum(rep.inner_iters)),
                 "final_update_sup": float(rep.final_update_sup),
                 "final_residual_sup": float(rep.final_residual_sup)}
        if prev is not None:
            entry["sup_diff_prev"] = float(np.max(np.abs(rep.solution.values[inner] - prev.values[inner])))
        trace.append(entry)
        log.info("epsilon=%g: %d outer iterations", eps, rep.outer_iters)
        if on_stage is not None:
            on_stage(float(eps), rep)
        prev = rep.solution
    rep.eps_trace = trace
    return rep
