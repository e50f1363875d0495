"""Config-driven experiment runner.

    gplap {solve,cordes,oracle,regularity,convergence} --config PATH [--out DIR]
          [--jobs N] [--seed N] [--single-thread]

Configs are YAML (or JSON) validated against ``data/run_config.schema.json``.
Exit codes: 0 success, 1 usage or config error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import copy
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import __version__
from .cordes import cordes_delta_raw, cordes_field, empirical_p_threshold, max_p_for_cordes
from .field import (
    INTERIOR,
    DomainMask,
    GridSpec,
    ScalarField,
    SymMatrixField,
    box_mask,
    discrete_norms,
    gradient_central,
    read_field,
    write_field,
)
from .oracle import affine, export_oracle, radial_oracle, verify_radial_oracle
from .regularity import (
    W22Report,
    band_margin,
    flatness_sequence,
    holder_fit_gradient,
    loglog_fit,
    power_profile_sweep,
    theorem3_band_check,
    w22_sweep,
)
from .solver import Domain, Problem, SolverConfig, SolverError, continuation_solve
from .svg import line_chart

log = logging.getLogger("gplap")

SOLVER_KEYS = ("discretization", "inner_tol", "inner_max_iter", "outer_tol", "outer_max_iter", "damping",
               "epsilon_schedule", "residual_stride", "acceleration", "anderson_depth")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- config

def bundled_configs():
    """Names of the configs shipped with the package."""
    root = resources.files("gplap") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _schema():
    text = (resources.files("gplap") / "data" / "run_config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_config(path):
    """Read and validate a config; bundled names such as ``radial-gamma1`` are accepted."""
    p = Path(path)
    if p.exists():
        text = p.read_text(encoding="utf-8")
    else:
        res = resources.files("gplap") / "configs" / f"{path}.yaml"
        if not res.is_file():
            raise ConfigError(f"config {path!r} not found (bundled: {', '.join(bundled_configs())})")
        text = res.read_text(encoding="utf-8")
    try:
        cfg = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping at the top level")
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(e.absolute_path), list(e.schema_path)))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "/".join(str(k) for k in err.absolute_path) or "<root>"
        schema_path = "/".join(str(k) for k in err.schema_path)
        raise ConfigError(f"config error at {where}: {err.message} (schema path: {schema_path})")


def resolve_config(cfg, seed=None):
    """Config with defaults filled in; this is what every report embeds."""
    out = copy.deepcopy(cfg)
    out.pop("output", None)
    if seed is not None:
        out["seed"] = int(seed)
    out.setdefault("seed", 0)
    if "problem" in out:
        pb = out["problem"]
        pb.setdefault("dim", 2)
        pb.setdefault("lam", 1.0)
        pb.setdefault("f", 0.0)
        dom = pb.setdefault("domain", {})
        dom.setdefault("kind", "box")
        for f in fields(Domain):
            if f.name not in dom and f.default is not None:
                dom[f.name] = f.default
    sv = out.setdefault("solver", {})
    defaults = SolverConfig()
    for k in SOLVER_KEYS:
        v = getattr(defaults, k)
        sv.setdefault(k, list(v) if isinstance(v, tuple) else v)
    sv.setdefault("h", 1.0 / 64)
    return out


def solver_config(cfg):
    sv = {k: v for k, v in cfg["solver"].items() if k in SOLVER_KEYS}
    sv["epsilon_schedule"] = tuple(sv["epsilon_schedule"])
    try:
        return SolverConfig(**sv)
    except ValueError as exc:
        raise ConfigError(f"config error at solver: {exc}") from exc


def _fn(spec, pb, seed, role):
    """Callable (or constant) described by a function spec."""
    if spec is None:
        return None
    if isinstance(spec, (int, float)):
        return float(spec)
    kind = spec["kind"]
    n = pb.get("dim", 2)
    if kind == "constant":
        return float(spec.get("value", 0.0))
    if kind == "affine":
        slope = spec.get("slope", [0.0] * n)
        if len(slope) != n:
            raise ConfigError(f"config error at problem/{role}/slope: need {n} entries")
        return affine(slope, spec.get("offset", 0.0)).value
    if kind == "quadratic":
        Q = np.asarray(spec.get("matrix", np.zeros((n, n))), dtype=float)
        q = np.asarray(spec.get("slope", np.zeros(n)), dtype=float)
        c = float(spec.get("offset", 0.0))
        if Q.shape != (n, n) or q.shape != (n,):
            raise ConfigError(f"config error at problem/{role}: quadratic needs an {n}x{n} matrix and {n} slopes")
        return lambda x: c + x @ q + np.einsum("...i,ij,...j->...", x, Q, x)
    if kind == "radial-oracle":
        o = radial_oracle(spec.get("c", 1.0), pb["gamma"], pb["p"], n)
        return o.f_const if role == "f" else o.value
    if kind == "power-profile":
        beta = spec["beta"]
        return lambda x: np.abs(x[..., 0]) ** beta
    if kind == "random-trig":
        rng = np.random.default_rng([int(seed), sum(map(ord, role))])
        m = spec.get("modes", 3)
        amp = spec.get("amplitude", 1.0)
        k = rng.integers(1, 4, size=(m, n))
        ph = rng.uniform(0, 2 * np.pi, size=m)
        a = rng.uniform(-1, 1, size=m) * amp / m
        return lambda x: np.sum(a * np.cos(np.pi * (x @ k.T) / 2 + ph), axis=-1)
    raise ConfigError(f"config error at problem/{role}: unknown kind {kind!r}")


def build_problem(cfg):
    if "problem" not in cfg:
        raise ConfigError("config error at <root>: 'problem' block required")
    pb = cfg["problem"]
    seed = cfg["seed"]
    dom = pb["domain"]
    center = tuple(dom["center"]) if dom.get("center") is not None else None
    domain = Domain(kind=dom["kind"], lo=dom["lo"], hi=dom["hi"], center=center,
                    radius=dom["radius"], inner_radius=dom["inner_radius"])
    return Problem(
        gamma=pb["gamma"], p=pb["p"], bc=_fn(pb["bc"], pb, seed, "bc"), f=_fn(pb["f"], pb, seed, "f"),
        dim=pb["dim"], lam=pb["lam"], domain=domain, u_ref=_fn(pb.get("u_ref"), pb, seed, "u_ref"),
        exact=_fn(pb.get("exact"), pb, seed, "exact"),
    )


def _bc_callable(problem):
    bc = problem.bc
    if callable(bc):
        return bc
    return lambda x: np.full(x.shape[:-1], float(bc))


def _problem(cfg):
    prob = build_problem(cfg)
    if not callable(prob.bc):
        prob = replace(prob, bc=_bc_callable(prob))
    return prob


# ---------------------------------------------------------------- output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _write_json(path, command, cfg, result):
    doc = {"artifact": {"package": "gplap", "version": __version__}, "command": command,
           "config": cfg, "result": result}
    Path(path).write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _write_svg(path, *args, **kw):
    Path(path).write_text(line_chart(*args, **kw), encoding="utf-8")


# ---------------------------------------------------------------- commands

def _solve_at(cfg, h):
    """Discretize and run the continuation; returns (discrete problem, report)."""
    prob = _problem(cfg)
    dp = prob.discretize(h)
    rep = continuation_solve(dp, solver_config(cfg))
    return dp, rep


def _errors(dp, sol):
    act = dp.mask.active
    diff = np.where(act, sol.values - dp.exact.values, np.nan)
    nrm = discrete_norms(ScalarField(dp.grid, diff), dp.mask)
    return nrm["sup"], nrm["l2"]


def cmd_solve(cfg, out, jobs=1):
    h = cfg["solver"]["h"]
    prob = _problem(cfg)
    dp = prob.discretize(h)
    status = 0
    try:
        rep = continuation_solve(dp, solver_config(cfg))
    except SolverError as exc:
        if exc.report is None:
            raise
        rep = exc.report
        status = 2
        print(f"solver failure: {exc}", file=sys.stderr)
    result = rep.to_dict()
    result["h"] = h
    if dp.exact is not None:
        sup, l2 = _errors(dp, rep.solution)
        result["error_vs_exact"] = {"sup": sup, "l2": l2}
        print(f"sup error vs exact: {sup:.6e}  L2 error: {l2:.6e}")
    print(f"converged={rep.converged} outer_iters={rep.outer_iters} mode={rep.mode}")
    write_field(out / "solution.field", rep.solution, provenance={"command": "solve", "h": h})
    _write_json(out / "solve_report.json", "solve", cfg, result)
    rows = [(k + 1, u, c, t, i) for k, (u, c, t, i) in
            enumerate(zip(rep.update_history, rep.correction_history, rep.damping_history, rep.inner_iters))]
    _write_csv(out / "residual.csv", ["outer_iter", "update_sup", "correction_sup", "damping", "inner_iters"], rows)
    return status


def _cordes_field(spec):
    if "field" in spec:
        fld, _ = read_field(spec["field"])
        if fld.kind != "symmatrix":
            raise ConfigError(f"config error at cordes/field: expected a symmatrix field, got {fld.kind}")
        inner = np.all(np.isfinite(fld.values), axis=(-2, -1))
        tags = np.where(inner, INTERIOR, 0).astype(np.int8)
        return fld, DomainMask(fld.grid, tags)
    if "identity" in spec:
        n = spec["identity"].get("n", 2)
        h = spec["identity"].get("h", 0.25)
        grid = GridSpec.cube(n, -1.0, 1.0, h)
        return SymMatrixField.constant(grid, np.eye(n)), box_mask(grid)
    if "family" in spec:
        fam = spec["family"]
        n, p = fam["n"], fam["p"]
        eps = fam.get("epsilon", 0.0)
        h = fam.get("h", 0.25)
        # grid offset by h/2 so that eta = x never vanishes
        grid = GridSpec.cube(n, h / 2, 1.0 + h / 2, h)
        eta = grid.points()
        q = np.sum(eta**2, axis=-1) + eps**2
        A = np.eye(n) + (p - 2.0) * eta[..., :, None] * eta[..., None, :] / q[..., None, None]
        return SymMatrixField(grid, A), box_mask(grid)
    if "matrix" in spec:
        A = np.asarray(spec["matrix"], dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigError("config error at cordes/matrix: matrix must be square")
        grid = GridSpec.cube(n, -1.0, 1.0, 1.0)
        return SymMatrixField.constant(grid, A), box_mask(grid)
    raise ConfigError("config error at cordes: give one of field, identity, family, matrix")


def cmd_cordes(cfg, out, jobs=1):
    spec = cfg.get("cordes")
    if spec is None:
        raise ConfigError("config error at <root>: 'cordes' block required")
    result = {}
    if "threshold" in spec:
        rows = []
        for n in spec["threshold"]:
            emp = empirical_p_threshold(n)
            rows.append((n, max_p_for_cordes(n), emp))
        result["threshold"] = [{"n": n, "closed_form": a, "empirical": b} for n, a, b in rows]
        _write_csv(out / "cordes_threshold.csv", ["n", "closed_form", "empirical"], rows)
    if any(k in spec for k in ("field", "identity", "family", "matrix")):
        coeffs, mask = _cordes_field(spec)
        try:
            rep = cordes_field(coeffs, mask)
        except ValueError as exc:
            raise ConfigError(f"config error at cordes: {exc}") from exc
        result["report"] = rep.to_dict()
        state = "satisfied" if rep.satisfied else "not satisfied"
        print(f"Cordes condition {state}: delta={rep.delta:.12g} (raw {rep.delta_raw:.12g}) "
              f"worst node {rep.worst_node}")
        nodes = np.argwhere(mask.interior)
        raw = cordes_delta_raw(coeffs.values[mask.interior])
        rows = [tuple(int(i) for i in nd) + (float(min(d, 1.0)), float(d)) for nd, d in zip(nodes, raw)]
        idx = [f"i{k}" for k in range(coeffs.grid.dim)]
        _write_csv(out / "cordes_nodes.csv", idx + ["delta", "delta_raw"], rows)
    _write_json(out / "cordes_report.json", "cordes", cfg, result)
    return 0


def cmd_oracle(cfg, out, jobs=1):
    spec = cfg.get("oracle")
    if spec is None:
        raise ConfigError("config error at <root>: 'oracle' block required")
    n = spec.get("n", 2)
    o = radial_oracle(spec.get("c", 1.0), spec.get("gamma", 1.0), spec.get("p", 2.0), n)
    result = {"c": o.c, "s": o.s, "f_const": o.f_const, "gamma": o.gamma, "p": o.p, "n": o.n,
              "gradient_holder_exponent": o.gradient_holder_exponent()}
    if spec.get("verify", True):
        try:
            result["verification_rel_error"] = verify_radial_oracle(o)
        except AssertionError as exc:
            print(f"oracle verification failed: {exc}", file=sys.stderr)
            _write_json(out / "oracle_report.json", "oracle", cfg, result)
            return 2
    dom = spec.get("domain", {"kind": "box"})
    center = tuple(dom["center"]) if dom.get("center") else None
    domain = Domain(kind=dom.get("kind", "box"), lo=dom.get("lo", -1.0), hi=dom.get("hi", 1.0), center=center,
                    radius=dom.get("radius", 1.0), inner_radius=dom.get("inner_radius", 0.25))
    grid, mask = domain.build(n, spec.get("h", 1.0 / 32))
    export_oracle(out / "oracle.field", o, grid, mask.active)
    print(f"s={o.s:.12g} f_const={o.f_const:.12g}")
    _write_json(out / "oracle_report.json", "oracle", cfg, result)
    return 0


def _convergence_job(args):
    cfg, h = args
    dp, rep = _solve_at(cfg, h)
    sup, l2 = _errors(dp, rep.solution)
    return {"h": h, "sup_error": sup, "l2_error": l2, "outer_iters": rep.outer_iters,
            "inner_iters": int(sum(rep.inner_iters)), "mode": rep.mode, "eps_trace": rep.eps_trace,
            "comparison": rep.comparison}


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _orders(hs, errs):
    pair = [None] + [math.log(e0 / e1) / math.log(h0 / h1) if e0 > 0 and e1 > 0 else None
                     for h0, h1, e0, e1 in zip(hs, hs[1:], errs, errs[1:])]
    fit = loglog_fit(hs, errs)[0] if len(hs) >= 2 and min(errs) > 0 else float("nan")
    return pair, fit


def cmd_convergence(cfg, out, jobs=1):
    pb = cfg.get("problem", {})
    if pb.get("exact") is None:
        raise ConfigError("config error at problem/exact: convergence needs an oracle reference")
    hs = sorted((cfg.get("analysis", {}).get("h_list") or [cfg["solver"]["h"]]), reverse=True)
    try:
        runs = _map(_convergence_job, [(cfg, h) for h in hs], jobs)
    except SolverError as exc:
        _write_json(out / "convergence.json", "convergence", cfg, {"failure": str(exc)})
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    sup = [r["sup_error"] for r in runs]
    l2 = [r["l2_error"] for r in runs]
    sup_pair, sup_fit = _orders(hs, sup)
    l2_pair, l2_fit = _orders(hs, l2)
    rows = [(r["h"], r["sup_error"], r["l2_error"], "" if a is None else a, "" if b is None else b)
            for r, a, b in zip(runs, sup_pair, l2_pair)]
    _write_csv(out / "convergence.csv", ["h", "sup_error", "l2_error", "sup_order", "l2_order"], rows)
    for r, a in zip(runs, sup_pair):
        tail = "" if a is None else f"  order {a:.3f}"
        print(f"h={r['h']:.6g}  sup error {r['sup_error']:.6e}  L2 error {r['l2_error']:.6e}{tail}")
    print(f"fitted sup-error order {sup_fit:.4f}; L2 order {l2_fit:.4f}")
    result = {"runs": runs, "sup_order_fit": sup_fit, "l2_order_fit": l2_fit,
              "finest_sup_error": sup[-1]}
    _write_json(out / "convergence.json", "convergence", cfg, result)
    _write_svg(out / "convergence.svg", [("sup error", hs, sup), ("L2 error", hs, l2)],
               title="error against grid spacing", xlabel="h", ylabel="error")
    return 0


def _w22_job(args):
    cfg, h = args
    w = cfg["analysis"]["w22"]
    sub = w["subdomain"]
    c = np.asarray(sub.get("center", [0.0] * cfg["problem"]["dim"]), dtype=float)
    r = sub["radius"]

    def inside(x):
        return np.linalg.norm(x - c, axis=-1) <= r * (1 + 1e-12)

    return w22_sweep(_problem(cfg), [h], w["eps_list"], inside, solver_config(cfg))


def cmd_regularity(cfg, out, jobs=1):
    an = cfg.get("analysis")
    if not an:
        raise ConfigError("config error at analysis: regularity needs an 'analysis' block")
    result = {}
    if "flatness" in an or "holder" in an:
        h = cfg["solver"]["h"]
        if an.get("source", "solve") == "exact":
            prob = _problem(cfg)
            if prob.exact is None:
                raise ConfigError("config error at problem/exact: source 'exact' needs an exact field")
            dp = prob.discretize(h)
            u, mask = dp.exact, dp.mask
            result["field"] = {"source": "exact", "h": h}
        else:
            try:
                dp, rep = _solve_at(cfg, h)
            except SolverError as exc:
                _write_json(out / "regularity.json", "regularity", cfg, {"failure": str(exc)})
                print(f"solver failure: {exc}", file=sys.stderr)
                return 2
            u, mask = rep.solution, dp.mask
            result["field"] = {"source": "solve", "h": h, "outer_iters": rep.outer_iters,
                               "eps_trace": rep.eps_trace}
        dim = mask.grid.dim
        if "flatness" in an:
            fs = an["flatness"]
            fr = flatness_sequence(u, fs.get("center", [0.0] * dim), fs.get("rho", 0.5), fs.get("K", 4), mask,
                                   radius0=fs.get("radius0", 1.0))
            d = fr.to_dict()
            d["decay_holds_1.1"] = fr.decay_holds(1.1)
            result["flatness"] = d
            _write_json(out / "flatness.json", "regularity", cfg, d)
            rows = [(k, r, o, *q) for k, (r, o, q) in enumerate(zip(fr.radii, fr.osc_k, fr.q_k))]
            _write_csv(out / "flatness.csv", ["k", "radius", "osc"] + [f"q{i}" for i in range(dim)], rows)
            _write_svg(out / "flatness.svg", [("osc_k", fr.radii, fr.osc_k)],
                       title=f"plane-fit oscillation, alpha_hat={d['alpha_hat']}", xlabel="r_k", ylabel="osc")
            print(f"flatness alpha_hat: {d['alpha_hat']}")
        if "holder" in an:
            hs = an["holder"]
            r0 = an.get("flatness", {}).get("radius0", 0.5)
            radii = hs.get("radii", [r0 * 0.5**k for k in range(4)])
            centers = hs.get("centers", [[0.0] * dim])
            hf = holder_fit_gradient(gradient_central(u, mask), centers, radii, mask)
            d = hf.to_dict()
            result["holder"] = d
            _write_json(out / "holder.json", "regularity", cfg, d)
            _write_csv(out / "holder.csv", ["radius", "gradient_osc"], list(zip(hf.radii, hf.osc)))
            _write_svg(out / "holder.svg", [("osc Du", hf.radii, hf.osc)],
                       title=f"gradient oscillation, alpha_hat={d['alpha_hat']}", xlabel="r", ylabel="osc")
            print(f"gradient Hölder alpha_hat: {d['alpha_hat']}")
    if "w22" in an:
        hs = sorted(an["w22"]["h_list"], reverse=True)
        try:
            parts = _map(_w22_job, [(cfg, h) for h in hs], jobs)
        except SolverError as exc:
            _write_json(out / "w22.json", "regularity", cfg, {"failure": str(exc)})
            print(f"solver failure: {exc}", file=sys.stderr)
            return 2
        w = W22Report.combine(parts)
        d = w.to_dict()
        result["w22"] = d
        _write_json(out / "w22.json", "regularity", cfg, d)
        _write_csv(out / "w22.csv", ["h", "epsilon", "h2_seminorm"],
                   [(h, e, v) for (h, e), v in sorted(w.seminorms.items())])
        series = [(f"h={h:.4g}", [e for (hh, e) in sorted(w.seminorms) if hh == h],
                   [v for (hh, e), v in sorted(w.seminorms.items()) if hh == h]) for h in sorted(w.ratio)]
        _write_svg(out / "w22.svg", series, title="interior H2 seminorm against epsilon",
                   xlabel="epsilon", ylabel="seminorm", logy=False)
        for h, r in sorted(w.ratio.items()):
            print(f"h={h:.6g}: H2 seminorm max/min ratio across epsilon {r:.6f}")
    if "counterexample" in an:
        ce = an["counterexample"]
        sw = power_profile_sweep(ce["beta"], ce["intervals"])
        result["counterexample"] = sw
        _write_json(out / "counterexample.json", "regularity", cfg, sw)
        _write_csv(out / "counterexample.csv", ["h", "seminorm_sq"], list(zip(sw["h"], sw["seminorm_sq"])))
        _write_svg(out / "counterexample.svg", [(f"beta={ce['beta']}", sw["h"], sw["seminorm_sq"])],
                   title="squared H2 seminorm of |t|^beta", xlabel="h", ylabel="seminorm^2")
        print(f"counterexample beta={ce['beta']}: growth exponent {sw['exponent']:.4f}")
    if "band" in an:
        rows = []
        for pt in an["band"]:
            n = pt.get("n", 2)
            ok = theorem3_band_check(pt["gamma"], pt["p"], pt["beta"], n)
            rows.append((pt["gamma"], pt["p"], pt["beta"], n, band_margin(pt["gamma"], pt["p"], pt["beta"], n), ok))
        result["band"] = [dict(zip(("gamma", "p", "beta", "n", "margin", "inside"), r)) for r in rows]
        _write_csv(out / "band.csv", ["gamma", "p", "beta", "n", "margin", "inside"], rows)
    _write_json(out / "regularity.json", "regularity", cfg, result)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "cordes": cmd_cordes,
    "oracle": cmd_oracle,
    "regularity": cmd_regularity,
    "convergence": cmd_convergence,
}


# ---------------------------------------------------------------- entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="gplap", description="Run gamma-p Laplacian experiments from a config file.")
    parser.add_argument("--version", action="version", version=f"gplap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "cordes",
                       help="YAML/JSON config path or bundled config name")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--single-thread", action="store_true",
                       help="one worker and one BLAS thread; bit-reproducible")
        if name == "cordes":
            p.add_argument("--field", default=None, help="symmatrix field file to check")
    return parser


def _threads(single):
    if not single:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=1)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return 1
    try:
        if args.config is not None:
            raw = load_config(args.config)
        else:
            raw = {}
        if getattr(args, "field", None):
            raw.setdefault("cordes", {})["field"] = args.field
            validate_config(raw)
        if args.command == "cordes" and "cordes" not in raw:
            raise ConfigError("config error at <root>: 'cordes' block or --field required")
        out = Path(args.out or raw.get("output") or f"gplap-{args.command}")
        cfg = resolve_config(raw, args.seed)
        out.mkdir(parents=True, exist_ok=True)
        jobs = 1 if args.single_thread else args.jobs
        with _threads(args.single_thread):
            return COMMANDS[args.command](cfg, out, jobs)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
