"""Command line entry point and scenario runner.

Config files are INI style (read with :mod:`configparser`).  Keys may sit
under their section or, for short configs, before any section header::

    young = power:3
    s = 0.5
    grid = 1d:256
    domain = ball:1
    rhs = const:1

    [audit]
    audits = mp, amp, symmetry

See README.md for the full key table.
"""
from __future__ import annotations

import argparse
import configparser
import json
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import qualitative as Q
from .fields import (algebraic_decay, ball_grid, bump, check_tail_membership, constant, gaussian,
                     load_field, parse_exterior, radial_poly, sample_to_grid, save_field, GridField,
                     UnboundedTail)
from .operator import KernelModel, OperatorParams, eval_fracg_detail, eval_on_grid
from .solver import (Diverged, SolverConfig, StalledStep, ball_problem, parse_rhs, solve_dirichlet,
                     write_history)
from .young import certify_all, estimate_indices, parse_young_spec


class ParseError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


class ValidationError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


AUDITS = ("mp", "amp", "symmetry", "liouville", "boundary")

# section -> key -> default (None: required, "auto": resolved at run time)
SCHEMA = {
    "problem": {"young": None, "s": None, "kernel": "fractional", "domain": "ball:1",
                "rhs": "const:1", "field": ""},
    "grid": {"grid": "1d:256", "margin": 0.125, "quad_near": 16, "quad_far": 16,
             "delta_near": "auto", "R_far": "auto", "angular": "auto"},
    "solver": {"tol": "auto", "max_iter": 400, "tau0": "auto", "scheme": "implicit",
               "grow": "auto", "shrink": 0.5, "init": "zero"},
    "audit": {"audits": "mp,amp,symmetry", "audit_tol": 1e-5, "axis": -1, "n_lambda": 40,
              "amp_lambdas": 20, "young_samples": 10000, "boundary_jmax": 8,
              "liouville_radii": "auto"},
    "output": {"field_body": "bin"},
    "run": {"seed": 0, "threads": 1},
}
KEY_SECTION = {k: sec for sec, keys in SCHEMA.items() for k in keys}
_ROOT = "__root__"


@dataclass
class RunConfig:
    young: str
    s: float
    kernel: str
    domain: str
    rhs: str
    field: str
    grid: str
    n: int
    cells: int
    radius: float
    margin: float
    quad_near: int
    quad_far: int
    delta_near: float | None
    R_far: float | None
    angular: int | None
    tol: float | None
    max_iter: int
    tau0: float | None
    scheme: str
    grow: float | None
    shrink: float
    init: str
    audits: list
    audit_tol: float
    axis: int
    n_lambda: int
    amp_lambdas: int
    young_samples: int
    boundary_jmax: int
    liouville_radii: list | None
    field_body: str
    seed: int
    threads: int
    defaulted: list = dc_field(default_factory=list)

    def params(self) -> OperatorParams:
        return OperatorParams(self.s, delta_near=self.delta_near, R_far=self.R_far,
                              quad_near=self.quad_near, quad_far=self.quad_far, angular=self.angular)

    def kernel_model(self) -> KernelModel:
        return parse_kernel(self.kernel, self.s)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(tol=self.tol, max_iter=self.max_iter, tau0=self.tau0,
                            scheme=self.scheme, grow=self.grow, shrink=self.shrink)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["defaulted"] = sorted(self.defaulted)
        return d


def parse_kernel(text: str, s: float) -> KernelModel:
    kind, _, rest = text.strip().partition(":")
    vals = [float(v) for v in rest.split(",")] if rest else []
    if kind == "fractional" and not vals:
        return KernelModel.fractional(s)
    if kind == "scaled" and len(vals) == 1:
        return KernelModel.scaled(s, vals[0])
    if kind == "oscillating" and len(vals) == 2:
        return KernelModel.oscillating(s, *vals)
    raise ValueError(f"unknown kernel {text!r} (fractional, scaled:c, oscillating:c1,c2)")


def parse_grid_spec(text: str):
    m = re.fullmatch(r"\s*([123])d:(\d+)\s*", text)
    if not m:
        raise ValueError(f"grid must look like 1d:256, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def parse_domain(text: str) -> float:
    kind, _, rest = text.strip().partition(":")
    if kind != "ball":
        raise ValueError(f"unsupported domain {text!r} (ball:R)")
    R = float(rest)
    if not R > 0:
        raise ValueError("ball radius must be positive")
    return R


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, for diagnostics."""
    out, sec = {}, _ROOT
    for i, line in enumerate(text.splitlines(), 1):
        t = line.strip()
        m = re.fullmatch(r"\[(.+)\]", t)
        if m:
            sec = m.group(1).strip()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", t)
        if m and not t.startswith(("#", ";")):
            out.setdefault((sec, m.group(1).strip()), i)
    return out


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__defaults_unused__")
    cp.optionxform = str
    try:
        cp.read_string(f"[{_ROOT}]\n" + text)
    except configparser.ParsingError as exc:
        ln = exc.errors[0][0] - 1 if exc.errors else None
        raise ParseError(f"malformed line {exc.errors[0][1].strip()!r}" if exc.errors else str(exc), ln) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", (exc.lineno or 1) - 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", (exc.lineno or 1) - 1) from None
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None
    lines = _key_lines(text)
    raw, where = {}, {}
    for sec in cp.sections():
        if sec != _ROOT and sec not in SCHEMA:
            ln = next((i for i, l in enumerate(text.splitlines(), 1) if l.strip() == f"[{sec}]"), None)
            raise ValidationError(f"unknown section [{sec}]", ln)
        for key, val in cp.items(sec):
            ln = lines.get((sec, key))
            if key not in KEY_SECTION:
                raise ValidationError(f"unknown key {key!r}", ln)
            if sec != _ROOT and KEY_SECTION[key] != sec:
                raise ValidationError(f"key {key!r} belongs in [{KEY_SECTION[key]}]", ln)
            if key in raw:
                raise ValidationError(f"key {key!r} given twice", ln)
            raw[key], where[key] = val.strip(), ln
    return _validate(raw, where)


def _validate(raw: dict, where: dict) -> RunConfig:
    defaulted = []

    def get(key):
        if key in raw:
            return raw[key]
        d = SCHEMA[KEY_SECTION[key]][key]
        if d is None:
            raise ValidationError(f"missing required key {key!r}")
        defaulted.append(key)
        return str(d)

    def conv(key, fn, auto_ok=False):
        v = get(key)
        if auto_ok and v == "auto":
            return None
        try:
            return fn(v)
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"{key}: {exc}", where.get(key)) from None

    young = get("young")
    try:
        parse_young_spec(young)
    except ValueError as exc:
        raise ValidationError(f"young: {exc}", where.get("young")) from None
    s = conv("s", float)
    if not 0 < s < 1:
        raise ValidationError("s must lie in (0,1)", where.get("s"))
    kernel = get("kernel")
    try:
        parse_kernel(kernel, s).validate()
    except ValueError as exc:
        raise ValidationError(f"kernel: {exc}", where.get("kernel")) from None
    radius = conv("domain", parse_domain)
    rhs = get("rhs")
    try:
        parse_rhs(rhs)
    except ValueError as exc:
        raise ValidationError(f"rhs: {exc}", where.get("rhs")) from None
    n, cells = conv("grid", parse_grid_spec)
    if n > 2:
        raise ValidationError("grid solves support n <= 2", where.get("grid"))
    if cells < 16:
        raise ValidationError("grid needs at least 16 cells", where.get("grid"))
    audits = [a.strip() for a in get("audits").split(",") if a.strip()]
    for a in audits:
        if a not in AUDITS:
            raise ValidationError(f"unknown audit {a!r} (one of {', '.join(AUDITS)})", where.get("audits"))
    radii = conv("liouville_radii", lambda v: [float(x) for x in v.split(",")], auto_ok=True)
    scheme = get("scheme")
    if scheme not in ("explicit", "implicit"):
        raise ValidationError("scheme must be explicit or implicit", where.get("scheme"))
    init = get("init")
    if not (init == "zero" or re.fullmatch(r"asym:[-+0-9.eE]+", init)):
        raise ValidationError("init must be zero or asym:amplitude", where.get("init"))
    body = get("field_body")
    if body not in ("bin", "csv"):
        raise ValidationError("field_body must be bin or csv", where.get("field_body"))
    cfg = RunConfig(
        young=young, s=s, kernel=kernel, domain=get("domain"), rhs=rhs, field=get("field"),
        grid=get("grid"), n=n, cells=cells, radius=radius, margin=conv("margin", float),
        quad_near=conv("quad_near", int), quad_far=conv("quad_far", int),
        delta_near=conv("delta_near", float, True), R_far=conv("R_far", float, True),
        angular=conv("angular", int, True), tol=conv("tol", float, True),
        max_iter=conv("max_iter", int), tau0=conv("tau0", float, True), scheme=scheme,
        grow=conv("grow", float, True), shrink=conv("shrink", float), init=init, audits=audits,
        audit_tol=conv("audit_tol", float), axis=conv("axis", int),
        n_lambda=conv("n_lambda", int), amp_lambdas=conv("amp_lambdas", int),
        young_samples=conv("young_samples", int), boundary_jmax=conv("boundary_jmax", int),
        liouville_radii=radii, field_body=body, seed=conv("seed", int),
        threads=conv("threads", int), defaulted=defaulted)
    try:
        cfg.params()
        cfg.solver_config()
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return cfg


# ---------------------------------------------------------------------------
# scenario runner


def _dump(obj, path=None) -> str:
    text = json.dumps(Q._jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _asym_init(problem, amp: float, axis: int):
    x = problem.grid.nodes()
    r2 = (x ** 2).sum(axis=-1) / problem.radius ** 2
    u = amp * np.clip(1 - r2, 0, None) * (1 + 0.8 * x[..., axis] / problem.radius)
    return np.where(problem.mask, u, 0.0)


def _lambda_values(grid, axis, R, count):
    lams = [Q.node_compatible(grid, axis, l) for l in np.linspace(-0.95 * R, 0.0, count)]
    return sorted(set(lams))


def run_audit(name: str, Y, grid: GridField, cfg: RunConfig, solver_tol: float, op_values=None,
              lambda0: float = 0.0):
    """One audit on a grid field; returns (passed, report dict)."""
    params, kernel = cfg.params(), cfg.kernel_model()
    axis = cfg.axis % grid.n
    mask = Q.domain_mask(grid)
    scale = float(np.abs(grid.values).max()) or 1.0
    if name == "mp":
        r = Q.check_max_principle(Y, grid, mask, params, tol=10 * solver_tol, op_values=op_values,
                                  kernel=kernel, strict=False)
        return r.verdict == "pass", r.to_dict()
    if name == "amp":
        out, ok = [], True
        R = Q._domain_radius(grid)
        for lam in _lambda_values(grid, axis, R, cfg.amp_lambdas):
            r = Q.check_antisymmetric_mp(Y, grid, Q.ReflectionFrame(axis, lam), mask, params,
                                         tol=cfg.audit_tol * scale, op_values=op_values,
                                         kernel=kernel, strict=False)
            ok &= r.verdict == "pass"
            out.append(r.to_dict())
        return ok, {"kind": "AntisymmetricSweep", "verdict": "pass" if ok else "fail", "reports": out}
    if name == "symmetry":
        r = Q.moving_planes_audit(Y, grid, axis, None, params, tol=cfg.audit_tol,
                                  n_lambda=cfg.n_lambda)
        return r.verdict == "pass", r.to_dict()
    if name == "liouville":
        R = Q._domain_radius(grid)
        radii = cfg.liouville_radii or [0.5 * R, R]
        r = Q.liouville_probe(Y, grid, radii, params, tol=cfg.audit_tol * scale, kernel=kernel)
        return r.verdict != "fail", r.to_dict()
    if name == "boundary":
        r = Q.boundary_estimate_probe(Y, grid, axis, lambda0, cfg.boundary_jmax, params, kernel,
                                      mask=mask, op_values=op_values)
        return r.verdict != "inconsistent", r.to_dict()
    raise ValueError(f"unknown audit {name!r}")


def run_scenario(config, out_dir=".", log=None) -> int:
    """young report -> solve (or import) -> audits.  Writes sol.field,
    history.csv and report.json into out_dir; returns 0 iff every stage
    passes."""
    cfg = config if isinstance(config, RunConfig) else parse_config(str(config))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"config": cfg.to_dict(), "stages": [], "artifacts": []}
    failed = []

    def stage(name, ok, data):
        report["stages"].append({"name": name, "passed": bool(ok), "result": data})
        if not ok:
            failed.append(name)

    Y = parse_young_spec(cfg.young)
    pm, pp = estimate_indices(Y)
    reps = certify_all(Y, cfg.young_samples, cfg.seed)
    stage("young-report", all(r.passed for r in reps),
          {"p_minus": pm, "p_plus": pp, "certificates": [r.to_dict() for r in reps]})

    params, kernel = cfg.params(), cfg.kernel_model()
    op_values = None
    solver_tol = cfg.tol if cfg.tol is not None else 1e-6
    history = out / "history.csv"
    if cfg.field:
        grid = load_field(cfg.field)
        stage("import", True, {"field": Path(cfg.field).name, "shape": list(grid.shape)})
        history.write_text("iter,tau,sup_residual,accepted\n")
    else:
        problem = ball_problem(Y, params, cfg.n, cfg.cells + 1, parse_rhs(cfg.rhs), cfg.radius,
                               kernel, cfg.margin)
        init = None
        if cfg.init.startswith("asym:"):
            init = _asym_init(problem, float(cfg.init.split(":")[1]), cfg.axis % cfg.n)
        scfg = cfg.solver_config()
        report["solver_config_resolved"] = scfg.resolved(problem).to_dict()
        try:
            sol = solve_dirichlet(problem, scfg, init)
        except (Diverged, StalledStep) as exc:
            sol = exc.solution
            stage("solve", False, {"error": str(exc)})
        else:
            stage("solve", sol.converged, sol.summary())
        report["problem"] = problem.describe()
        grid = sol.field
        solver_tol = sol.tol
        write_history(sol, history)
        if sol.converged:
            op_values = eval_on_grid(Y, grid, problem.mask, params, kernel, cfg.threads)
    save_field(grid, out / "sol.field", cfg.field_body)
    report["artifacts"] = ["sol.field", f"sol.field.{cfg.field_body}", "history.csv", "report.json"]

    lambda0 = 0.0
    if not failed or failed == ["young-report"]:
        for name in cfg.audits:
            try:
                ok, data = run_audit(name, Y, grid, cfg, solver_tol, op_values, lambda0)
            except (Q.HypothesisViolated, Q.NotPositive, Q.EmptyMask, UnboundedTail, ValueError) as exc:
                ok, data = False, {"error": f"{type(exc).__name__}: {exc}"}
            if name == "symmetry" and "lambda0_est" in data:
                lambda0 = data["lambda0_est"] or 0.0
                rep = Q.SymmetryReport(**{k: v for k, v in data.items() if k != "kind"})
                rep.write_lambda_csv(out / "lambdas.csv")
                report["artifacts"].append("lambdas.csv")
            stage(name, ok, data)
    report["passed"] = not failed
    report["failed_stages"] = failed
    _dump(report, out / "report.json")
    if failed:
        print("failed stage(s): " + ", ".join(failed), file=log or sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# command line


def _young_report(args):
    if args.young:
        Y = parse_young_spec(args.young)
    elif args.family:
        Y = parse_young_spec(f"{args.family}:{args.exponents or ''}")
    else:
        raise ValueError("give --young family:exponents or --family/--exponents")
    pm, pp = estimate_indices(Y)
    reps = certify_all(Y, args.samples, args.seed)
    data = {"young": Y.label, "p_minus": pm, "p_plus": pp,
            "certificates": [r.to_dict() for r in reps]}
    for r in reps:
        print(f"{r.lemma_id:>14}  violations={r.n_violations:<4d} worst_margin={r.worst_margin:.3e}")
    print(f"indices: p- = {pm:.6g}, p+ = {pp:.6g}")
    if args.out:
        _dump(data, args.out)
    return data, 0 if all(r.passed for r in reps) else 1


FIELD_KINDS = {
    "gaussian": lambda n, a: gaussian(n, a.center, a.width, a.amplitude),
    "bump": lambda n, a: bump(n, a.center, a.width, a.amplitude),
    "radial_poly": lambda n, a: radial_poly(n, a.width),
    "algebraic": lambda n, a: algebraic_decay(n, a.center, a.power),
    "constant": lambda n, a: constant(n, a.amplitude),
}


def _center(args, n):
    if args.center is None:
        return None
    c = [float(v) for v in args.center.split(",")]
    if len(c) != n:
        raise SystemExit(f"--center needs {n} comma-separated values")
    return c


def _field_make(args):
    n, cells = parse_grid_spec(args.grid)
    args.center = _center(args, n)
    like = ball_grid(n, cells + 1, args.radius)
    f = sample_to_grid(FIELD_KINDS[args.kind](n, args), like, parse_exterior(args.exterior))
    save_field(f, args.out, args.body)
    print(f"wrote {args.out} ({f!r})")
    return {"field": str(args.out), "shape": list(f.shape), "h": f.h}, 0


def _field_import(args):
    vals = np.loadtxt(args.csv, delimiter=",", ndmin=1)
    origin = [float(v) for v in args.origin.split(",")]
    meta = {"domain": args.domain} if args.domain else {}
    f = GridField(origin, args.h, vals, parse_exterior(args.exterior), meta)
    save_field(f, args.out, args.body)
    print(f"wrote {args.out} ({f!r})")
    return {"field": str(args.out), "shape": list(f.shape)}, 0


def _field_probe(args):
    f = load_field(args.field)
    data = {"shape": list(f.shape), "h": f.h, "exterior": f.exterior.spec(),
            "min": float(f.values.min()), "max": float(f.values.max()), "meta": f.meta}
    if args.young:
        Y = parse_young_spec(args.young)
        try:
            data["tail"] = check_tail_membership(f, Y, args.s).to_dict()
        except UnboundedTail as exc:
            data["tail"] = {"error": str(exc)}
    print(json.dumps(Q._jsonable(data), indent=2, sort_keys=True))
    return data, 0


def _params(args):
    return OperatorParams(args.s, quad_near=args.quad_near, quad_far=args.quad_far,
                          delta_near=args.delta_near, R_far=args.R_far)


def _op_eval(args):
    Y = parse_young_spec(args.young)
    f = load_field(args.field)
    params = _params(args)
    kernel = parse_kernel(args.kernel, args.s)
    pts = [np.array([float(v) for v in x.split(",")]) for x in args.x]
    with ThreadPoolExecutor(max(1, args.threads)) as ex:
        vals = list(ex.map(lambda pt: eval_fracg_detail(Y, f, pt, params, kernel), pts))
    rows = []
    for x, pt, v in zip(args.x, pts, vals):
        rows.append({"x": pt.tolist(), **v.to_dict()})
        print(f"x={x}  value={v.value:.12g}  tail_bound={v.tail_bound:.3e}")
    return {"values": rows, "params": params.to_dict()}, 0


def _solve(args):
    Y = parse_young_spec(args.young)
    n, cells = parse_grid_spec(args.grid if ":" in args.grid else f"1d:{args.grid}")
    params = _params(args)
    problem = ball_problem(Y, params, n, cells + 1, parse_rhs(args.rhs), parse_domain(args.domain),
                           parse_kernel(args.kernel, args.s))
    cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter, scheme=args.scheme)
    try:
        sol = solve_dirichlet(problem, cfg)
        code = 0 if sol.converged else 1
    except (Diverged, StalledStep) as exc:
        sol, code = exc.solution, 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_field(sol.field, out)
    write_history(sol, args.log or out.with_name("history.csv"))
    print(json.dumps(Q._jsonable(sol.summary()), sort_keys=True))
    return {"solution": sol.summary(), "problem": problem.describe(),
            "solver": cfg.resolved(problem).to_dict()}, code


def _verify(args):
    Y = parse_young_spec(args.young)
    grid = load_field(args.sol)
    text = f"young = {args.young}\ns = {args.s}\naudit_tol = {args.tol}\naxis = {args.axis}\n" \
           f"quad_near = {args.quad_near}\nquad_far = {args.quad_far}\nkernel = {args.kernel}\n"
    cfg = parse_config(text)
    ok, data = run_audit(args.audit, Y, grid, cfg, args.solver_tol, None, args.lambda0)
    print(f"{args.audit}: {data.get('verdict')}")
    if args.csv and "per_lambda" in data:
        Q.SymmetryReport(**{k: v for k, v in data.items() if k != "kind"}).write_lambda_csv(args.csv)
    return data, 0 if ok else 1


def _run(args):
    try:
        cfg = parse_config(Path(args.config).read_text())
    except (ParseError, ValidationError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return None, 2
    # command-line flags win over the file when given explicitly
    if args.threads != 1:
        cfg.threads = args.threads
    if args.seed != 0:
        cfg.seed = args.seed
    code = run_scenario(cfg, args.out)
    print(f"report: {Path(args.out) / 'report.json'} (exit {code})")
    return None, code


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(add_help=False)
    top.add_argument("--seed", type=int, default=0)
    top.add_argument("--threads", type=int, default=1)
    top.add_argument("--json", nargs="?", const="-", default=None,
                     help="write the result as JSON to this path (stdout without a path)")
    # repeated on subcommands so the flags work in either position; SUPPRESS
    # keeps a subcommand from resetting a value given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--json", nargs="?", const="-", default=argparse.SUPPRESS)

    op = argparse.ArgumentParser(add_help=False)
    op.add_argument("--young", required=True)
    op.add_argument("--s", type=float, required=True)
    op.add_argument("--kernel", default="fractional")
    op.add_argument("--quad-near", dest="quad_near", type=int, default=16)
    op.add_argument("--quad-far", dest="quad_far", type=int, default=16)
    op.add_argument("--delta-near", "--delta", dest="delta_near", type=float, default=None)
    op.add_argument("--R-far", "--rfar", dest="R_far", type=float, default=None)

    p = argparse.ArgumentParser(prog="fracg", parents=[top])
    sub = p.add_subparsers(dest="cmd", required=True)

    y = sub.add_parser("young", parents=[common]).add_subparsers(dest="action", required=True)
    yr = y.add_parser("report", parents=[common])
    yr.add_argument("--young", default=None, help="family:exponents, e.g. power:3")
    yr.add_argument("--family", default=None)
    yr.add_argument("--exponents", default=None)
    yr.add_argument("--samples", type=int, default=100_000)
    yr.add_argument("--out", default=None)
    yr.set_defaults(func=_young_report)

    fd = sub.add_parser("field", parents=[common]).add_subparsers(dest="action", required=True)
    fm = fd.add_parser("make", parents=[common])
    fm.add_argument("--kind", choices=sorted(FIELD_KINDS), required=True)
    fm.add_argument("--grid", default="1d:256")
    fm.add_argument("--radius", type=float, default=1.0)
    fm.add_argument("--center", default=None)
    fm.add_argument("--width", type=float, default=1.0)
    fm.add_argument("--amplitude", type=float, default=1.0)
    fm.add_argument("--power", type=float, default=2.0)
    fm.add_argument("--exterior", default="zero")
    fm.add_argument("--body", choices=("bin", "csv"), default="bin")
    fm.add_argument("--out", required=True)
    fm.set_defaults(func=_field_make)
    fi = fd.add_parser("import", parents=[common])
    fi.add_argument("--csv", required=True)
    fi.add_argument("--origin", required=True)
    fi.add_argument("--h", type=float, required=True)
    fi.add_argument("--domain", default=None)
    fi.add_argument("--exterior", default="zero")
    fi.add_argument("--body", choices=("bin", "csv"), default="bin")
    fi.add_argument("--out", required=True)
    fi.set_defaults(func=_field_import)
    fp = fd.add_parser("probe", parents=[common])
    fp.add_argument("--field", required=True)
    fp.add_argument("--young", default=None)
    fp.add_argument("--s", type=float, default=0.5)
    fp.set_defaults(func=_field_probe)

    oe = sub.add_parser("op", parents=[common]).add_subparsers(dest="action", required=True)
    ev = oe.add_parser("eval", parents=[common, op])
    ev.add_argument("--field", required=True)
    ev.add_argument("--at", "--x", dest="x", action="append", required=True,
                    help="comma-separated point; repeatable")
    ev.set_defaults(func=_op_eval)

    so = sub.add_parser("solve", parents=[common, op])
    so.add_argument("--grid", default="1d:256", help="cells per axis: 256 or 2d:64")
    so.add_argument("--domain", default="ball:1")
    so.add_argument("--rhs", default="const:1")
    so.add_argument("--tol", type=float, default=None)
    so.add_argument("--max-iter", dest="max_iter", type=int, default=400)
    so.add_argument("--scheme", choices=("implicit", "explicit"), default="implicit")
    so.add_argument("--out", default="sol.field")
    so.add_argument("--log", default=None, help="history CSV (default: next to --out)")
    so.set_defaults(func=_solve)

    ve = sub.add_parser("verify", parents=[common, op])
    ve.add_argument("audit", choices=AUDITS)
    ve.add_argument("--sol", required=True)
    ve.add_argument("--tol", type=float, default=1e-5)
    ve.add_argument("--solver-tol", dest="solver_tol", type=float, default=1e-6)
    ve.add_argument("--axis", type=int, default=-1)
    ve.add_argument("--lambda0", type=float, default=0.0)
    ve.add_argument("--csv", default=None, help="per-lambda side file (symmetry)")
    ve.set_defaults(func=_verify)

    ru = sub.add_parser("run", parents=[common])
    ru.add_argument("config")
    ru.add_argument("--out", default=".")
    ru.set_defaults(func=_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data, code = args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json and data is not None:
        if args.json == "-":
            sys.stdout.write(_dump(data))
        else:
            _dump(data, args.json)
    return code


if __name__ == "__main__":
    sys.exit(main())
