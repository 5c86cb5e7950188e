"""Command-line front end: ``eig``, ``verify``, ``branch`` and ``sweep``.

Every command reads one JSON config, writes into ``--out`` and is fully
deterministic for a given config and ``--seed``.  Exit codes: 0 success,
1 a check failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import eigen
from .basis import DomainSpec, constant, grid_function
from .continuation import (
    classify_alternative,
    launch_direction_check,
    positivity_scan,
    refine_at_amplitude,
    residual_audit,
    trace_branch,
)
from .convergence import (
    branch_distance,
    epsilon_sweep,
    vanishing_ratio_diagnostic,
    weight_limit_diagnostic,
)
from .errors import ConfigError
from .gram import gram_x
from .nonlinear import NonlinearityKind, ResidualSystem, decay_order

FLOAT_FMT = ".10g"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "enum": [1, 2, 3]},
                "modes": {"type": "integer", "minimum": 1},
                "lengths": {"type": ["array", "null"], "items": _pos, "minItems": 1},
                "quad_order": {"type": ["integer", "null"], "minimum": 2},
            },
        },
        "weight": {
            "type": "object",
            "additionalProperties": False,
            "required": ["preset"],
            "properties": {
                "preset": {"enum": ["constant", "one_plus_sin_over_n", "polynomial"]},
                "value": _num,
                "n": _pos,
                "coeffs": {"type": "array", "items": _num, "minItems": 1},
                "axis": {"type": "integer", "minimum": 0},
            },
        },
        "eps_grid": {
            "oneOf": [
                {"type": "array", "items": _nonneg, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["points"],
                    "properties": {
                        "points": {"type": "integer", "minimum": 1},
                        "upper": {"oneOf": [{"const": "s_star"}, _nonneg]},
                    },
                },
            ]
        },
        "eigen": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "delta_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                "exceptional_rtol": _pos,
                "aux_count": {"type": "integer", "minimum": 1},
                "bound_tol": _pos,
                "kappa_rtol": _pos,
            },
        },
        "nonlinearity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["multiplicative", "additive_regularized"]},
                "eps": _nonneg,
                "eps2": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "continuation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ds": _pos,
                "R": _pos,
                "max_steps": {"type": "integer", "minimum": 1},
                "tol": _pos,
                "max_halvings": {"type": "integer", "minimum": 0},
                "sign": {"enum": ["+", "-", "both"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps_list": {"type": "array", "items": _nonneg, "minItems": 1},
                "distance_mode": {"enum": ["vertex", "polyline"]},
                "measure_floor": {"type": "boolean"},
                "tail_amplitudes": {"type": "array", "items": _pos},
                "tail_eps2": _pos,
                "mask_rel": _pos,
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "jacobian_points": {"type": "integer", "minimum": 1},
                "fd_step": _pos,
                "fd_rtol": _pos,
                "max_normX": _pos,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "domain": {"dim": 1, "modes": 16, "lengths": None, "quad_order": None},
    "weight": {"preset": "constant", "value": 1.0, "n": 1.0, "coeffs": [1.0], "axis": 0},
    "eps_grid": {"points": 5, "upper": "s_star"},
    "eigen": {"delta": None, "delta_fraction": 0.25, "exceptional_rtol": 1e-10, "aux_count": 6,
              "bound_tol": 1e-9, "kappa_rtol": 1e-8},
    "nonlinearity": {"kind": "multiplicative", "eps": 0.0, "eps2": None},
    "continuation": {"ds": 5e-3, "R": 0.5, "max_steps": 2000, "tol": 1e-10, "max_halvings": 6,
                     "sign": "both"},
    "sweep": {"eps_list": [1e-1, 1e-2, 1e-3, 1e-4, 0.0], "distance_mode": "vertex",
              "measure_floor": True, "tail_amplitudes": [0.1, 0.05, 0.01], "tail_eps2": 0.1,
              "mask_rel": 1e-8},
    "verify": {"jacobian_points": 10, "fd_step": 1e-5, "fd_rtol": 1e-6, "max_normX": 0.1},
    "output": {"dir": "out"},
    "seed": 0,
}


# ---------------------------------------------------------------------------
# configuration

def load_config(path) -> dict:
    """Read, validate and complete a config file; raises :class:`ConfigError`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    return validate_config(raw, str(path), text)


def _key_line(text, path) -> int:
    """1-based line of the deepest named key of ``path`` in ``text`` (1 if not found)."""
    line, pos = 1, 0
    for part in path:
        if not isinstance(part, str):
            continue
        hit = text.find(json.dumps(part), pos)
        if hit < 0:
            break
        pos = hit
        line = text.count("\n", 0, hit) + 1
    return line


def validate_config(raw, source="<config>", text=None) -> dict:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        e = errors[0]
        path = list(e.absolute_path)
        if e.validator == "additionalProperties" and isinstance(e.instance, dict):
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            path += extra[:1]
        key = "/".join(str(p) for p in path) or "<root>"
        where = f"{source}:{_key_line(text, path)}" if text is not None else source
        raise ConfigError(f"{where}: key '{key}': {e.message}")
    cfg = {}
    for name, default in DEFAULTS.items():
        value = raw.get(name, default)
        cfg[name] = {**default, **value} if isinstance(value, dict) else value
    return cfg


def build_domain(cfg) -> DomainSpec:
    d = cfg["domain"]
    try:
        return DomainSpec(d["dim"], d["modes"], tuple(d["lengths"]) if d["lengths"] else None,
                          d["quad_order"])
    except ValueError as exc:
        raise ConfigError(f"key 'domain': {exc}") from None


def build_weight(cfg, domain):
    w = cfg["weight"]
    preset = w["preset"]
    if preset == "constant":
        return constant(domain, w["value"]), f"constant({w['value']:g})"
    if preset == "one_plus_sin_over_n":
        n = float(w["n"])

        def fn(*xs):
            out = np.ones_like(xs[0])
            for x, L in zip(xs, domain.lengths):
                out = out * np.sin(np.pi * x / L)
            return 1.0 + out / n

        return grid_function(domain, fn), f"one_plus_sin_over_n({n:g})"
    axis = int(w["axis"])
    if axis >= domain.dim:
        raise ConfigError(f"key 'weight/axis': {axis} >= dim {domain.dim}")
    coeffs = [float(v) for v in w["coeffs"]]
    return (grid_function(domain, lambda *xs: np.polynomial.polynomial.polyval(xs[axis], coeffs)),
            f"polynomial({','.join(f'{v:g}' for v in coeffs)})")


def build_eps_grid(cfg, window):
    entry = cfg["eps_grid"]
    if isinstance(entry, list):
        grid = sorted(float(v) for v in entry)
        if 0.0 not in grid:
            grid = [0.0] + grid
        return np.array(grid)
    upper = window.s_star if entry.get("upper", "s_star") == "s_star" else float(entry["upper"])
    return np.linspace(0.0, upper, int(entry["points"]))


def build_system(cfg, domain, eps=None, eps2=None):
    nl = cfg["nonlinearity"]
    eps = nl["eps"] if eps is None else eps
    if nl["kind"] == "additive_regularized":
        kind = NonlinearityKind.additive_regularized(nl["eps2"] if eps2 is None else eps2)
    else:
        kind = NonlinearityKind.multiplicative()
    try:
        return ResidualSystem(domain, kind, eps)
    except ValueError as exc:
        raise ConfigError(f"key 'nonlinearity': {exc}") from None


# ---------------------------------------------------------------------------
# formatting

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, FLOAT_FMT)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return float(format(x, FLOAT_FMT))
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2) + "\n", encoding="utf-8")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------------------
# commands

def cmd_eig(cfg, out: Path) -> int:
    domain = build_domain(cfg)
    g, wid = build_weight(cfg, domain)
    e = cfg["eigen"]
    try:
        window = eigen.stability_window(domain, g, e["delta"], e["delta_fraction"])
    except ValueError as exc:
        raise ConfigError(f"key 'eigen': {exc}") from None
    grid = build_eps_grid(cfg, window)
    if grid[-1] > window.s_star * (1 + 1e-12):
        raise ConfigError(f"key 'eps_grid': largest eps {grid[-1]:g} exceeds s_star {window.s_star:.10g}")
    curve = eigen.perturbed_curve(domain, g, grid, wid)
    aux = eigen.aux_spectrum(domain, g, min(e["aux_count"], domain.size), e["exceptional_rtol"])
    decomps = [eigen.decompose(p, curve.principal, domain, g, aux.exceptional) for _, p in curve.pairs]
    report = eigen.verify_bounds(curve, decomps, window, tol=e["bound_tol"], kappa_rtol=e["kappa_rtol"])
    header = ["eps", "lambda", "kappa_eps", "alpha", "beta", "eta_normX", *eigen.BOUND_NAMES, "bounds_pass"]
    rows = []
    for row, d in zip(report.rows, decomps):
        flags = [row["checks"][n][0] for n in eigen.BOUND_NAMES]
        rows.append([row["eps"], row["lam"], d.kappa_eps, d.alpha, d.beta, d.eta_normX, *flags, all(flags)])
    write_csv(out / "curve.csv", header, rows)
    write_json(out / "aux_spectrum.json", {
        "weight": wid,
        "lambdas": aux.lambdas,
        "kappa0": aux.kappa0,
        "bracket_index": aux.bracket_index,
        "exceptional": aux.exceptional,
        "exceptional_index": aux.exceptional_index,
        "window": {"delta": window.delta, "s_star": window.s_star, "lambda0": window.lambda0,
                   "lambda2": window.lambda2},
    })
    return 0 if report.passed else 1


def _check(name, passed, value, **extra):
    return {"name": name, "passed": bool(passed), "value": value, **extra}


def cmd_verify(cfg, out: Path, seed: int) -> int:
    domain = build_domain(cfg)
    g, wid = build_weight(cfg, domain)
    e = cfg["eigen"]
    checks = []
    window = eigen.stability_window(domain, g, e["delta"], e["delta_fraction"])
    grid = build_eps_grid(cfg, window)
    grid = grid[grid <= window.s_star * (1 + 1e-12)]
    curve = eigen.perturbed_curve(domain, g, grid, wid)
    aux = eigen.aux_spectrum(domain, g, 1, e["exceptional_rtol"])
    decomps = [eigen.decompose(p, curve.principal, domain, g, aux.exceptional) for _, p in curve.pairs]
    report = eigen.verify_bounds(curve, decomps, window, tol=e["bound_tol"], kappa_rtol=e["kappa_rtol"])
    for name in eigen.BOUND_NAMES:
        checks.append(_check(f"eigen.{name}", all(report.flags(name)), report.min_slack(name),
                             measure="min slack"))
    checks.append(_check("eigen.monotone_curve", curve.monotone, float(np.min(np.diff(curve.lambdas)))
                         if len(curve.pairs) > 1 else 0.0))
    res = max(p.residual for _, p in curve.pairs)
    checks.append(_check("eigen.eigenvector_residual", res <= 1e-10, res))
    simp = eigen.simplicity_check(domain, g, float(grid[-1]))
    checks.append(_check("eigen.simplicity", simp.simple, simp.gap))

    rng = np.random.default_rng(seed)
    v = cfg["verify"]
    sys_ = build_system(cfg, domain)
    gx = gram_x(domain)
    worst, h = 0.0, v["fd_step"]
    for _ in range(v["jacobian_points"]):
        c = rng.standard_normal(domain.size) / np.sqrt(gx.diag)
        c *= rng.uniform(0.0, v["max_normX"]) / gx.norm(c)
        lam = rng.uniform(0.5, 2.0) * domain.dirichlet_lambda0
        J = sys_.jacobian(lam, c)
        F = np.column_stack([(sys_.residual(lam, c + h * col) - sys_.residual(lam, c - h * col)) / (2 * h)
                             for col in np.eye(domain.size)])
        worst = max(worst, float(np.linalg.norm(F - J) / np.linalg.norm(J)))
    checks.append(_check("nonlinear.jacobian_fd", worst <= v["fd_rtol"], worst))
    trivial = float(np.linalg.norm(sys_.residual(1.7, np.zeros(domain.size))))
    checks.append(_check("nonlinear.trivial_line", trivial == 0.0, trivial))
    c = rng.standard_normal(domain.size) / np.sqrt(gx.diag)
    odd = float(np.linalg.norm(sys_.residual(1.3, c) + sys_.residual(1.3, -c)))
    checks.append(_check("nonlinear.odd_residual", odd <= 1e-12 * (1 + np.linalg.norm(sys_.residual(1.3, c))), odd))
    order = decay_order(sys_, c / gx.norm(c) * 0.1)
    checks.append(_check("nonlinear.decay_order", order > 1, order))

    co = cfg["continuation"]
    br = trace_branch(sys_, "+", co["ds"], co["R"], co["max_steps"], co["tol"],
                      max_halvings=co["max_halvings"])
    checks.append(_check("continuation.termination", br.termination in ("exited_ball", "max_steps"),
                         br.termination))
    audit = residual_audit(sys_, br)
    checks.append(_check("continuation.residual_audit", audit <= co["tol"], audit))
    pos = positivity_scan(br)
    checks.append(_check("continuation.positivity", pos is None, pos))
    launch = launch_direction_check(sys_, br)
    checks.append(_check("continuation.launch_direction", launch > 0, launch))
    alt, lam_star = classify_alternative(br)
    checks.append(_check("continuation.alternative", True, alt, lambda_star=lam_star))
    neg = trace_branch(sys_, "-", co["ds"], co["R"], co["max_steps"], co["tol"],
                       max_halvings=co["max_halvings"])
    diff = branch_distance(br.negated(), neg, domain) if len(br) == len(neg) else math.inf
    checks.append(_check("continuation.oddness", diff <= 1e-8, diff))

    passed = all(ch["passed"] for ch in checks)
    write_json(out / "report.json", {"weight": wid, "seed": seed, "passed": passed, "checks": checks})
    return 0 if passed else 1


def _branches(cfg, domain):
    co = cfg["continuation"]
    sys_ = build_system(cfg, domain)
    signs = ["+", "-"] if co["sign"] == "both" else [co["sign"]]
    return sys_, [trace_branch(sys_, s, co["ds"], co["R"], co["max_steps"], co["tol"],
                               max_halvings=co["max_halvings"]) for s in signs]


def cmd_branch(cfg, out: Path) -> int:
    domain = build_domain(cfg)
    sys_, branches = _branches(cfg, domain)
    rows = []
    for br in branches:
        sign = "+" if br.sign > 0 else "-"
        for i, p in enumerate(br.points):
            extreme = p.min_on_grid if br.sign > 0 else p.max_on_grid
            term = br.termination if i == len(br.points) - 1 else ""
            rows.append([p.step, sign, p.lam, p.normX, extreme, term])
    write_csv(out / "branch.csv", ["step", "sign", "lambda", "normX", "min_on_grid", "termination"], rows)
    write_diagram(out / "diagram.svg", branches)
    failed = any(br.termination in ("corrector_failure", "refused") for br in branches)
    return 1 if failed else 0


def write_diagram(path, branches):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "galerkin-branches"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for br in branches:
        colour, label = ("tab:red", "positive branch") if br.sign > 0 else ("tab:blue", "negative branch")
        ax.plot(br.lambdas, br.sign * br.norms, color=colour, lw=1.2, label=label)
    ax.set_xlabel("lambda")
    ax.set_ylabel("sign * |u|_X")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_sweep(cfg, out: Path) -> int:
    domain = build_domain(cfg)
    co, sw = cfg["continuation"], cfg["sweep"]
    nl = cfg["nonlinearity"]
    sign = "-" if co["sign"] == "-" else "+"
    kind = build_system(cfg, domain).kind
    rep = epsilon_sweep(domain, sw["eps_list"], kind, sign, co["ds"], co["R"], co["max_steps"],
                        co["tol"], sw["distance_mode"], sw["measure_floor"])
    eps = rep.eps_list
    write_csv(out / "distances.csv", ["eps_a", "eps_b", "distance"],
              [[eps[i], eps[j], rep.distances[i, j]] for i in range(len(eps)) for j in range(len(eps))])

    limit_rows = []
    diagnostics = {}
    if rep.limit_branch is not None:
        lim_sys = ResidualSystem(domain, kind, 0.0)
        lim = trace_branch(lim_sys, sign, co["ds"], max(co["R"], 1.0), co["max_steps"], co["tol"])
        pts = [refine_at_amplitude(lim_sys, lim, a if sign == "+" else -a) for a in sw["tail_amplitudes"]]
        wl = weight_limit_diagnostic(pts, domain)
        for r, p in zip(wl["rows"], sorted(pts, key=lambda q: -q.normX)):
            limit_rows.append(["weight_limit", p.c[0], r["normX"], r["lambda"], "distance", r["distance"]])
        add_sys = ResidualSystem(domain, NonlinearityKind.additive_regularized(sw["tail_eps2"]), 0.0)
        add = trace_branch(add_sys, sign, co["ds"], max(co["R"], 1.0), co["max_steps"], co["tol"])
        apts = [refine_at_amplitude(add_sys, add, a if sign == "+" else -a) for a in sw["tail_amplitudes"]]
        vr = vanishing_ratio_diagnostic(apts, add_sys, sw["mask_rel"])
        for r in vr["rows"]:
            limit_rows.append(["vanishing_ratio", r["amplitude"], r["normX"], r["lambda"], "sup_det_ratio",
                               r["sup_det_ratio"]])
            limit_rows.append(["vanishing_ratio", r["amplitude"], r["normX"], r["lambda"], "sup_eig_ratio",
                               r["sup_eig_ratio"]])
        diagnostics = {"weight_limit_decreasing": wl["decreasing"],
                       "det_ratio_reduction": vr["det_ratio_reduction"],
                       "eig_ratio_decreasing": vr["eig_ratio_decreasing"]}
    write_csv(out / "limit_diagnostics.csv",
              ["diagnostic", "amplitude", "normX", "lambda", "metric", "value"], limit_rows)
    write_json(out / "sweep.json", {
        "kind": nl["kind"],
        "sign": sign,
        "R": rep.R,
        "distance_mode": rep.mode,
        "eps_list": eps,
        "branch_points": [len(rep.branches[e]) if e in rep.branches else 0 for e in eps],
        "terminations": [rep.branches[e].termination if e in rep.branches else "failed" for e in eps],
        "failures": {fmt(k): v for k, v in rep.failures.items()},
        "distances": rep.distances,
        "distance_to_limit": rep.to_limit,
        "consecutive": rep.consecutive,
        "strictly_decreasing": rep.strictly_decreasing,
        "refinement_floor": rep.floor,
        "liminf_witness": rep.liminf_witness,
        "witness_ok": rep.witness_ok,
        "limit_diagnostics": diagnostics,
    })
    return 1 if len(rep.failures) == len(eps) else 0


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="galerkin-branches", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("eig", "perturbed eigenpair curve and bounds"),
                        ("verify", "run the invariant suite"),
                        ("branch", "trace the positive and negative branches"),
                        ("sweep", "compare branches across an eps sequence")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="seed for randomized checks (overrides seed)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = cfg["seed"] if args.seed is None else args.seed
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"--seed {seed} outside the unsigned 64-bit range")
        out = Path(args.out or cfg["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "eig":
            return cmd_eig(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out, seed)
        if args.command == "branch":
            return cmd_branch(cfg, out)
        return cmd_sweep(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
