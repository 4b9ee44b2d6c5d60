"""Numerical audits of qualitative properties: maximum principles, the
antisymmetric maximum principle for reflections, moving planes, the
boundary estimate along lambda_j -> lambda_0, Liouville and whole-space
symmetry probes.

Every audit evaluates the conclusions on a concrete field and returns a
report.  Nothing here proves anything about the continuum; the verdicts are
statements about the probe set at the given tolerance.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field as dc_field
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .fields import (GridField, ScalarField, Zero, PowerDecay, as_points,
                     ball_grid, reflect_points, sample_to_grid)
from .operator import (GridOperator, NotC11At, OperatorParams, eval_fracg)


class HypothesisViolated(ValueError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class NotPositive(ValueError):
    pass


class EmptyMask(ValueError):
    pass


# ---------------------------------------------------------------------------
# reflections


class HalfSpace(str, Enum):
    BELOW = "below"
    ABOVE = "above"


@dataclass(frozen=True)
class ReflectionFrame:
    """The plane T = {x_axis = lam} and the half space Sigma on one side."""
    axis: int
    lam: float
    half_space: HalfSpace = HalfSpace.BELOW

    def __post_init__(self):
        if self.axis < 0:
            raise ValueError("axis must be non-negative")
        object.__setattr__(self, "half_space", HalfSpace(self.half_space))

    def check(self, n: int):
        if self.axis >= n:
            raise ValueError(f"axis {self.axis} out of range for n = {n}")

    def reflect(self, x):
        return reflect_points(x, self.lam, self.axis)

    def inside(self, x, closed: bool = False):
        t = np.asarray(x)[..., self.axis]
        if self.half_space is HalfSpace.BELOW:
            return t <= self.lam if closed else t < self.lam
        return t >= self.lam if closed else t > self.lam

    def distance(self, x):
        return np.abs(np.asarray(x)[..., self.axis] - self.lam)


class AntisymmetricField(ScalarField):
    """w(x) = u(x^lam) - u(x)."""

    def __init__(self, base: ScalarField, frame: ReflectionFrame):
        frame.check(base.n)
        self.base, self.frame, self.n = base, frame, base.n

    def pair(self, x):
        """(w(x), w(x^lam)) from the same two samples, so they cancel exactly."""
        x = as_points(x, self.n)
        a = self.base.sample(self.frame.reflect(x))
        b = self.base.sample(x)
        return a - b, b - a

    def sample(self, x):
        return self.pair(x)[0]

    def gradient(self, x):
        x = as_points(x, self.n)
        g = self.base.gradient(self.frame.reflect(x))
        g[..., self.frame.axis] *= -1
        return g - self.base.gradient(x)

    def decay(self):
        return self.base.decay()


# ---------------------------------------------------------------------------
# reports


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(v, Enum):
        return v.value
    return v


@dataclass
class Report:
    verdict: str
    worst_location: list | None
    worst_value: float
    tolerance_used: float
    context: dict = dc_field(default_factory=dict)
    hypotheses: dict = dc_field(default_factory=dict)
    warnings: list = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "consistent")

    def to_dict(self) -> dict:
        d = _jsonable(asdict(self))
        d["kind"] = type(self).__name__
        return d


@dataclass
class MPReport(Report):
    pass


@dataclass
class SymmetryReport(Report):
    lambda0_est: float = math.nan
    lambda_step: float = math.nan
    per_lambda: list = dc_field(default_factory=list)
    mirrored_deviation: float = math.nan
    monotone_violation: float = math.nan
    center: list | None = None
    shells: list = dc_field(default_factory=list)

    def write_lambda_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep", "lambda", "min_w", "argmin"])
            for row in self.per_lambda:
                loc = " ".join(repr(float(t)) for t in row["argmin"]) if row["argmin"] else ""
                w.writerow([row["sweep"], repr(float(row["lambda"])), repr(float(row["min_w"])), loc])


@dataclass
class LiouvilleReport(Report):
    per_radius: list = dc_field(default_factory=list)
    detected_sites: list = dc_field(default_factory=list)


@dataclass
class BoundaryProbeReport(Report):
    lambda0: float = math.nan
    lambdas: list = dc_field(default_factory=list)
    points: list = dc_field(default_factory=list)
    deltas: list = dc_field(default_factory=list)
    q: list = dc_field(default_factory=list)
    skipped: list = dc_field(default_factory=list)
    eps0: float = math.nan


# ---------------------------------------------------------------------------
# shared helpers


def domain_mask(grid: GridField) -> np.ndarray:
    """Interior mask recorded in the grid metadata (``domain = ball:R``), or
    every non-boundary node."""
    inner = ~grid.boundary_nodes()
    dom = str(grid.meta.get("domain", "")) if grid.meta else ""
    if dom.startswith("ball:"):
        R = float(dom.split(":", 1)[1])
        return inner & (np.linalg.norm(grid.nodes(), axis=-1) < R * (1 - 1e-12))
    return inner


def _domain_radius(grid: GridField) -> float:
    dom = str(grid.meta.get("domain", "")) if grid.meta else ""
    if dom.startswith("ball:"):
        return float(dom.split(":", 1)[1])
    return 0.5 * (grid.shape[0] - 1) * grid.h


def _as_grid(solution) -> GridField:
    f = getattr(solution, "field", solution)
    if not isinstance(f, GridField):
        raise TypeError("expected a grid field or a solution")
    return f


def sobol_points(n: int, count: int, radius: float, seed: int = 0, center=None) -> np.ndarray:
    """Scrambled Sobol points in the cube [-radius, radius]^n."""
    m = max(1, int(math.ceil(math.log2(max(count, 2)))))
    pts = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(m)[:count]
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return c + radius * (2 * pts - 1)


def _mask_fn(mask, n):
    if mask is None:
        return lambda x: np.linalg.norm(x, axis=-1) < 1.0
    if callable(mask):
        return mask
    raise TypeError("analytic fields need a callable mask")


def _op_full(Y, grid, mask, params, kernel, op_values):
    """Operator values on the mask as a full-shape array (NaN elsewhere)."""
    if op_values is not None:
        ov = np.asarray(op_values, dtype=float)
        if ov.shape == grid.shape:
            return ov
        full = np.full(grid.shape, np.nan)
        full[mask] = ov
        return full
    full = np.full(grid.shape, np.nan)
    if mask.any():
        full[mask] = GridOperator(Y, grid, mask, params, kernel).apply(grid)
    return full


def _op_at_node(Y, grid, idx, params, kernel, op_full):
    v = op_full[tuple(idx)]
    if np.isfinite(v):
        return float(v)
    try:
        return eval_fracg(Y, grid, grid.origin + grid.h * np.asarray(idx), params, kernel)
    except NotC11At:
        return math.nan


def _loc(x):
    return None if x is None else [float(t) for t in np.atleast_1d(x)]


def _rigidity(values_inside, probe_values, tol):
    """Warning for the 'then u vanishes identically' clauses."""
    if values_inside.size and values_inside.min() <= tol:
        vanish = bool(np.abs(probe_values).max() <= tol)
        return [f"interior zero within tol: rigidity clause predicts identical vanishing; "
                f"sup|.| <= tol on probes: {vanish} (a discrete field cannot certify this)"]
    return []


# ---------------------------------------------------------------------------
# maximum principle


def check_max_principle(Y, field: ScalarField, mask=None, params: OperatorParams | None = None,
                        tol: float = 1e-6, op_values=None, kernel=None, strict: bool = True,
                        n_probes: int = 4096, n_op_probes: int = 256, probe_radius: float = 2.0,
                        seed: int = 0) -> MPReport:
    """Nonnegative operator in the mask and nonnegative data outside imply a
    nonnegative field.  Both hypotheses are checked on the probe set."""
    params = params or OperatorParams(0.5)
    hyp = {}
    if isinstance(field, GridField):
        mask = domain_mask(field) if mask is None else np.asarray(mask, dtype=bool)
        nodes = field.nodes()
        inside_v, inside_x = field.values[mask], nodes[mask]
        out_v, out_x = field.values[~mask], nodes[~mask]
        ext = field.exterior
        ext_ok = isinstance(ext, Zero) or (isinstance(ext, PowerDecay) and ext.c >= -tol)
        op = _op_full(Y, field, mask, params, kernel, op_values)[mask]
        op_x = inside_x
        all_v = field.values.ravel()
        hyp["exterior_model_nonnegative"] = ext_ok
    else:
        inside_fn = _mask_fn(mask, field.n)
        pts = sobol_points(field.n, n_probes, probe_radius, seed)
        vals = np.asarray(field.sample(pts), dtype=float)
        m = np.asarray(inside_fn(pts), dtype=bool)
        inside_v, inside_x, out_v, out_x = vals[m], pts[m], vals[~m], pts[~m]
        op_x = inside_x[:n_op_probes]
        op = np.array([eval_fracg(Y, field, x, params, kernel) for x in op_x])
        all_v = vals
        ext_ok = True
    if inside_v.size == 0:
        raise EmptyMask("no probe points inside the mask")
    out_min = float(out_v.min()) if out_v.size else math.inf
    op_min = float(np.nanmin(op)) if op.size else math.inf
    hyp["outside_min"] = out_min
    hyp["operator_min"] = op_min
    hyp["outside_nonnegative"] = bool(out_min >= -tol and ext_ok)
    hyp["operator_nonnegative"] = bool(op_min >= -tol)
    k = int(np.argmin(inside_v))
    worst = float(inside_v[k])
    ctx = {"probes_inside": int(inside_v.size), "probes_outside": int(out_v.size),
           "operator_probes": int(op.size), "s": params.s, "young": getattr(Y, "label", str(Y))}
    rep = MPReport("pass" if worst >= -tol else "fail", _loc(inside_x[k]), worst, tol, ctx, hyp,
                   _rigidity(inside_v, all_v, tol))
    if not (hyp["outside_nonnegative"] and hyp["operator_nonnegative"]):
        failed = [name for name in ("outside_nonnegative", "operator_nonnegative") if not hyp[name]]
        rep.verdict = "hypotheses not met"
        if not hyp["operator_nonnegative"]:
            j = int(np.nanargmin(op))
            rep.context["operator_worst_location"] = _loc(op_x[j])
        if strict:
            raise HypothesisViolated("hypotheses violated: " + ", ".join(failed), rep)
    return rep


# ---------------------------------------------------------------------------
# antisymmetric maximum principle


def node_compatible(grid: GridField, axis: int, lam: float) -> float:
    """Snap lam to the nearest plane that maps grid nodes onto grid nodes."""
    half = grid.h / 2
    return float(grid.origin[axis] + round((lam - grid.origin[axis]) / half) * half)


def _w_on_grid(grid: GridField, frame: ReflectionFrame):
    """w at every node and the index of each node's mirror image (or -1)."""
    a = frame.axis
    mu = 2 * (frame.lam - grid.origin[a]) / grid.h
    nodes = grid.nodes()
    if abs(mu - round(mu)) < 1e-9:
        mu = int(round(mu))
        i = np.arange(grid.shape[a])
        j = mu - i
        ok = (j >= 0) & (j < grid.shape[a])
        shape = [1] * grid.n
        shape[a] = -1
        jj = np.where(ok, j, 0).reshape(shape)
        refl = np.take_along_axis(grid.values, np.broadcast_to(jj, grid.shape), axis=a)
        okb = np.broadcast_to(ok.reshape(shape), grid.shape)
        if not okb.all():
            refl = refl.copy()
            refl[~okb] = grid.sample(frame.reflect(nodes[~okb]))
        mirror = np.broadcast_to(np.where(ok, j, -1).reshape(shape), grid.shape)
        return refl - grid.values, mirror
    refl = grid.sample(frame.reflect(nodes)).reshape(grid.shape)
    return refl - grid.values, None


def operator_difference(Y, field: ScalarField, frame: ReflectionFrame, x, params: OperatorParams,
                        kernel=None) -> float:
    """A(u o refl)(x) - A(u)(x), with the reflected field built explicitly."""
    if isinstance(field, GridField) and isinstance(field.exterior, Zero):
        refl = field.reflected(frame.lam, frame.axis)
    else:
        from .fields import reflect
        refl = reflect(field, frame.lam, frame.axis)
    return eval_fracg(Y, refl, x, params, kernel) - eval_fracg(Y, field, x, params, kernel)


def check_antisymmetric_mp(Y, field: ScalarField, frame: ReflectionFrame, mask=None,
                           params: OperatorParams | None = None, tol: float = 1e-6,
                           op_values=None, kernel=None, strict: bool = True,
                           n_probes: int = 4096, n_op_probes: int = 128,
                           probe_radius: float = 2.0, seed: int = 0) -> MPReport:
    """Audit w = u(x^lam) - u(x) >= 0 on Sigma given the two hypotheses:
    w >= 0 on Sigma outside the mask and A(u)(x^lam) - A(u)(x) >= 0 on the
    mask part of Sigma."""
    params = params or OperatorParams(0.5)
    frame.check(field.n)
    hyp = {"w_bounded_on_sigma": "assumed (unbounded half space is truncated)"}
    unknown = 0
    if isinstance(field, GridField):
        mask = domain_mask(field) if mask is None else np.asarray(mask, dtype=bool)
        nodes = field.nodes()
        W, mirror = _w_on_grid(field, frame)
        sig = frame.inside(nodes)
        om = sig & mask
        rest = sig & ~mask
        sig_v, sig_x = W[sig], nodes[sig]
        out_v = W[rest]
        opd = []
        op_x = nodes[om]
        if om.any():
            if mirror is None:
                raise ValueError("lambda is not node compatible; snap it with node_compatible()")
            full = _op_full(Y, field, mask, params, kernel, op_values)
            a = frame.axis
            for idx in np.argwhere(om):
                ridx = idx.copy()
                ridx[a] = mirror[tuple(idx)]
                if ridx[a] < 0:
                    opd.append(math.nan)
                    continue
                opd.append(_op_at_node(Y, field, ridx, params, kernel, full) - full[tuple(idx)])
        opd = np.asarray(opd, dtype=float)
        inside_w = W[om]
    else:
        inside_fn = _mask_fn(mask, field.n)
        pts = sobol_points(field.n, n_probes, probe_radius, seed)
        pts = pts[frame.inside(pts)]
        aw = AntisymmetricField(field, frame)
        sig_v, sig_x = aw.sample(pts), pts
        m = np.asarray(inside_fn(pts), dtype=bool)
        out_v = sig_v[~m]
        op_x = pts[m][:n_op_probes]
        opd = np.array([operator_difference(Y, field, frame, x, params, kernel) for x in op_x])
        inside_w = sig_v[m]
    if sig_v.size == 0:
        raise EmptyMask("half space contains no probe points")
    unknown = int(np.isnan(opd).sum()) if opd.size else 0
    out_min = float(out_v.min()) if out_v.size else math.inf
    opd_min = float(np.nanmin(opd)) if np.isfinite(opd).any() else math.inf
    hyp["w_outside_min"] = out_min
    hyp["operator_difference_min"] = opd_min
    hyp["operator_difference_unverified"] = unknown
    hyp["w_outside_nonnegative"] = bool(out_min >= -tol)
    hyp["operator_difference_nonnegative"] = bool(opd_min >= -tol)
    k = int(np.argmin(sig_v))
    worst = float(sig_v[k])
    ctx = {"axis": frame.axis, "lambda": frame.lam, "half_space": frame.half_space.value,
           "probes": int(sig_v.size), "operator_probes": int(opd.size), "s": params.s}
    rep = MPReport("pass" if worst >= -tol else "fail", _loc(sig_x[k]), worst, tol, ctx, hyp,
                   _rigidity(inside_w, sig_v, tol))
    if unknown:
        rep.warnings.append(f"{unknown} operator differences could not be evaluated")
    if not (hyp["w_outside_nonnegative"] and hyp["operator_difference_nonnegative"]):
        failed = [k_ for k_ in ("w_outside_nonnegative", "operator_difference_nonnegative") if not hyp[k_]]
        rep.verdict = "hypotheses not met"
        if strict:
            raise HypothesisViolated("hypotheses violated: " + ", ".join(failed), rep)
    return rep


# ---------------------------------------------------------------------------
# moving planes


def _prepare_grid(solution, radius=None, N=None) -> GridField:
    if isinstance(solution, ScalarField) and not isinstance(solution, GridField):
        R = 1.0 if radius is None else radius
        n = solution.n
        like = ball_grid(n, N or (257 if n == 1 else 65), R)
        return sample_to_grid(solution, like)
    return _as_grid(solution)


def _sweep(grid, axis, lams, side, mask, tol):
    rows, lam0, done = [], None, True
    nodes = grid.nodes()
    for lam in lams:
        frame = ReflectionFrame(axis, lam, side)
        W, _ = _w_on_grid(grid, frame)
        sel = frame.inside(nodes) & mask
        if sel.any():
            k = int(np.argmin(W[sel]))
            mn, loc = float(W[sel][k]), _loc(nodes[sel][k])
        else:
            mn, loc = math.inf, None
        rows.append({"sweep": side.value, "lambda": float(lam), "min_w": mn, "argmin": loc})
        if done and mn >= -tol:
            lam0 = lam
        else:
            done = False
    return rows, lam0, done


def moving_planes_audit(Y, solution, axis: int = -1, lambda_grid=None,
                        params: OperatorParams | None = None, tol: float = 1e-5,
                        relative: bool = True, mask=None, radius: float | None = None,
                        n_lambda: int = 40) -> SymmetryReport:
    """Sweep the plane {x_axis = lam} from -0.95 R up to the center (and
    mirror-wise from above) and record where w_lam >= 0 first fails.

    lambda0_est is signed: negative when the sweep from below stops early,
    positive when the sweep from above does, 0 when both reach the center.
    """
    grid = _prepare_grid(solution, radius)
    n = grid.n
    axis = axis % n
    mask = domain_mask(grid) if mask is None else np.asarray(mask, dtype=bool)
    vals = grid.values[mask]
    if vals.size == 0:
        raise EmptyMask("empty domain mask")
    if vals.min() <= 0:
        k = int(np.argmin(vals))
        raise NotPositive(f"solution is not positive in the domain (min {vals[k]:.3e} "
                          f"at {_loc(grid.nodes()[mask][k])})")
    R = radius or _domain_radius(grid)
    c = float(grid.origin[axis] + 0.5 * (grid.shape[axis] - 1) * grid.h)
    if lambda_grid is None:
        lambda_grid = np.linspace(c - 0.95 * R, c, n_lambda)
    raw = np.sort(np.asarray(lambda_grid, dtype=float))
    below = np.unique([node_compatible(grid, axis, l) for l in raw])
    above = np.unique([node_compatible(grid, axis, 2 * c - l) for l in raw])[::-1]
    step = float(np.diff(raw).max()) if raw.size > 1 else grid.h
    scale = float(np.abs(vals).max()) if relative else 1.0
    tol_abs = tol * scale

    rows_b, l0_b, done_b = _sweep(grid, axis, below, HalfSpace.BELOW, mask, tol_abs)
    rows_a, l0_a, done_a = _sweep(grid, axis, above, HalfSpace.ABOVE, mask, tol_abs)
    warnings = []
    if done_b and done_a:
        lam0 = 0.0
    elif not done_b:
        lam0 = (l0_b - c) if l0_b is not None else (below[0] - step - c)
        if not done_a:
            warnings.append("both sweeps stopped before the center")
    else:
        lam0 = (l0_a - c) if l0_a is not None else (above[0] + step - c)

    # mirrored node pairs across the central plane
    flipped = np.flip(grid.values, axis=axis)
    mm = mask | np.flip(mask, axis=axis)
    dev = np.abs(grid.values - flipped)[mm]
    nodes = grid.nodes()
    kd = int(np.argmax(dev))
    mirrored = float(dev[kd])

    # monotone toward the center along the axis
    d = np.diff(grid.values, axis=axis)                    # u[i+1] - u[i]
    lo = np.take(nodes[..., axis], np.arange(grid.shape[axis] - 1), axis=axis)
    hi = np.take(nodes[..., axis], np.arange(1, grid.shape[axis]), axis=axis)
    m_lo = np.take(mask, np.arange(grid.shape[axis] - 1), axis=axis)
    m_hi = np.take(mask, np.arange(1, grid.shape[axis]), axis=axis)
    both = m_lo & m_hi
    viol = np.where(hi <= c + 1e-12, -d, 0.0) + np.where(lo >= c - 1e-12, d, 0.0)
    viol = np.where(both, viol, -np.inf)
    mono = float(max(viol.max(), 0.0))

    rows = rows_b + rows_a
    wmins = np.array([r["min_w"] for r in rows])
    kw = int(np.argmin(wmins))
    cands = [(-wmins[kw], rows[kw]["argmin"]),
             (mirrored, _loc(nodes[mm][kd])),
             (mono, None)]
    worst, loc = max(cands, key=lambda t: t[0])
    verdict = "pass" if worst <= tol_abs else "fail"
    ctx = {"axis": axis, "center": c, "radius": R, "n_lambda": int(raw.size),
           "relative": relative, "scale": scale, "lambda0_below": l0_b, "lambda0_above": l0_a,
           "s": None if params is None else params.s}
    return SymmetryReport(verdict, loc, float(worst), tol_abs, ctx, {"positive_in_domain": True},
                          warnings, lambda0_est=float(lam0), lambda_step=step, per_lambda=rows,
                          mirrored_deviation=mirrored, monotone_violation=mono)


# ---------------------------------------------------------------------------
# boundary estimate


def boundary_estimate_probe(Y, solution, axis: int, lambda0: float, j_max: int = 8,
                            params: OperatorParams | None = None, kernel=None, mask=None,
                            op_values=None, tol: float = 0.0, snap: bool = True,
                            base_step: float = 0.1) -> BoundaryProbeReport:
    """Along lambda_j = lambda0 + 2^-j base_step, locate the minimum x_j of
    w_{lambda_j} over the closed half space and record
    q_j = (A(u)(x_j^lambda_j) - A(u)(x_j)) / dist(x_j, T_{lambda_j})."""
    params = params or OperatorParams(0.5)
    grid = _prepare_grid(solution)
    n = grid.n
    axis = axis % n
    mask = domain_mask(grid) if mask is None else np.asarray(mask, dtype=bool)
    nodes = grid.nodes()
    full = None
    lams, pts, deltas, qs, skipped, mins, used = [], [], [], [], [], [], []
    seen = set()
    any_nonempty = False
    for j in range(1, j_max + 1):
        lam = lambda0 + 2.0 ** (-j) * base_step
        if snap:
            lam = node_compatible(grid, axis, lam)
        if lam in seen or lam <= lambda0:
            skipped.append({"j": j, "lambda": lam, "reason": "duplicate after snapping"})
            continue
        seen.add(lam)
        frame = ReflectionFrame(axis, lam, HalfSpace.BELOW)
        W, mirror = _w_on_grid(grid, frame)
        closed = frame.inside(nodes, closed=True) & mask
        if not closed.any():
            skipped.append({"j": j, "lambda": lam, "reason": "empty half space"})
            continue
        any_nonempty = True
        opn = frame.inside(nodes) & mask
        mins.append(float(W[opn].min()) if opn.any() else math.inf)
        k = int(np.argmin(W[closed]))
        idx = np.argwhere(closed)[k]
        x = nodes[tuple(idx)]
        dlt = float(frame.distance(x))
        if dlt <= 1e-12 * grid.h:
            skipped.append({"j": j, "lambda": lam, "reason": "minimizer on the plane (zero distance)"})
            continue
        if mirror is None:
            skipped.append({"j": j, "lambda": lam, "reason": "lambda not node compatible"})
            continue
        if full is None:
            full = _op_full(Y, grid, mask, params, kernel, op_values)
        ridx = idx.copy()
        ridx[axis] = mirror[tuple(idx)]
        if ridx[axis] < 0:
            skipped.append({"j": j, "lambda": lam, "reason": "mirror image off the grid"})
            continue
        diff = _op_at_node(Y, grid, ridx, params, kernel, full) - full[tuple(idx)]
        lams.append(lam)
        pts.append(_loc(x))
        deltas.append(dlt)
        qs.append(diff / dlt)
        used.append(j)
    if not any_nonempty:
        raise EmptyMask("no half space meets the mask")

    # hypotheses
    base = ReflectionFrame(axis, node_compatible(grid, axis, lambda0) if snap else lambda0)
    W0, _ = _w_on_grid(grid, base)
    sel0 = base.inside(nodes) & mask
    w0_min = float(W0[sel0].min()) if sel0.any() else math.inf
    dists0 = [abs(p[axis] - lambda0) for p in pts]
    approach = bool(len(dists0) >= 2 and (dists0[-1] <= 0.5 * dists0[0] or dists0[-1] <= 2 * grid.h))
    hyp = {"w_lambda0_positive": bool(w0_min > tol), "w_lambda0_min": w0_min,
           "minima_nonpositive": bool(len(mins) > 0 and max(mins) <= tol),
           "minima": mins, "x_j_approaches_plane": approach, "distances_to_T_lambda0": dists0}
    ok = hyp["w_lambda0_positive"] and hyp["minima_nonpositive"] and approach
    qa = np.asarray(qs, dtype=float)
    eps0 = math.nan
    worst_loc, worst = None, math.nan
    if qa.size:
        tail = qa[len(qa) // 2:]
        eps0 = float(-np.nanmax(tail))
        kk = len(qa) // 2 + int(np.nanargmax(tail))
        worst_loc, worst = pts[kk], float(qa[kk])
    if not ok:
        verdict = "hypotheses not met"
    elif qa.size == 0 or not math.isfinite(eps0):
        verdict = "hypotheses not met"
    else:
        verdict = "consistent" if eps0 > 0 else "inconsistent"
    ctx = {"axis": axis, "j_max": j_max, "base_step": base_step, "used_j": used, "s": params.s,
           "running_max_tail": (np.maximum.accumulate(qa).tolist() if qa.size else [])}
    return BoundaryProbeReport(verdict, worst_loc, worst, 0.0, ctx, hyp, [], lambda0=float(lambda0),
                               lambdas=lams, points=pts, deltas=deltas, q=qs, skipped=skipped,
                               eps0=eps0)


# ---------------------------------------------------------------------------
# Liouville


def liouville_probe(Y, field: ScalarField, box_radii=(1.0, 2.0), params: OperatorParams | None = None,
                    tol: float = 1e-8, kernel=None, n_probes: int = 4096, n_op_probes: int = 64,
                    seed: int = 0) -> LiouvilleReport:
    """sup |A(u)| and osc(u) over probes in growing balls.  Bounded and
    g-harmonic should mean constant; the check only fires when the probed
    operator actually vanishes."""
    params = params or OperatorParams(0.5)
    radii = sorted(float(r) for r in box_radii)
    per, sites = [], []
    if isinstance(field, GridField):
        nodes = field.nodes()
        inner = ~field.boundary_nodes()
        rr = np.linalg.norm(nodes, axis=-1)
        sel = inner & (rr < radii[-1])
        op = np.full(field.shape, np.nan)
        if sel.any():
            op[sel] = GridOperator(Y, field, sel, params, kernel).apply(field)
        ext = field.exterior
        const_ok = isinstance(ext, Zero) or (isinstance(ext, PowerDecay) and ext.beta == 0)
        ext_val = 0.0 if isinstance(ext, Zero) else (ext.c if const_ok else None)
        for R in radii:
            m = inner & (rr < R)
            v = field.values[rr < R]
            if const_ok:
                v = np.append(v, ext_val)
            o = np.abs(op[m])
            per.append({"R": R, "sup_op": float(o.max()) if o.size else 0.0,
                        "osc": float(v.max() - v.min()) if v.size else 0.0, "probes": int(m.sum())})
        bad = np.argwhere(np.abs(np.nan_to_num(op)) > tol)
        for idx in bad:
            sites.append({"x": _loc(nodes[tuple(idx)]), "op": float(op[tuple(idx)])})
        truncated = True
    else:
        const_ok = True
        truncated = False
        for i, R in enumerate(radii):
            pts = sobol_points(field.n, n_probes, R, seed + i)
            pts = pts[np.linalg.norm(pts, axis=-1) < R]
            v = np.asarray(field.sample(pts), dtype=float)
            ox = pts[:n_op_probes]
            o = np.array([eval_fracg(Y, field, x, params, kernel) for x in ox])
            per.append({"R": R, "sup_op": float(np.abs(o).max()) if o.size else 0.0,
                        "osc": float(v.max() - v.min()) if v.size else 0.0, "probes": int(v.size)})
            for x, val in zip(ox, o):
                if abs(val) > tol:
                    sites.append({"x": _loc(x), "op": float(val)})
    sup_op = max(p["sup_op"] for p in per)
    osc = max(p["osc"] for p in per)
    harmonic = sup_op <= tol
    if harmonic and const_ok:
        verdict = "pass" if osc <= tol else "fail"
        worst, worst_loc = osc, None
    else:
        verdict = "inconclusive (truncated domain)"
        worst = sup_op
        worst_loc = max(sites, key=lambda s_: abs(s_["op"]))["x"] if sites else None
    ctx = {"radii": radii, "truncated": truncated, "exterior_constant_compatible": const_ok,
           "s": params.s}
    hyp = {"bounded": bool(np.isfinite(osc)), "operator_vanishes_on_probes": bool(harmonic)}
    return LiouvilleReport(verdict, worst_loc, float(worst), tol, ctx, hyp, [], per_radius=per,
                           detected_sites=sites)


# ---------------------------------------------------------------------------
# whole-space symmetry


def _shell_dirs(n: int, m: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        t = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    k = np.arange(m) + 0.5
    z = 1 - 2 * k / m
    phi = np.pi * (1 + 5 ** 0.5) * k
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def find_center(field: ScalarField, radius: float = 4.0, n_probes: int = 4096, seed: int = 0) -> np.ndarray:
    """Location of the maximum: quasi-random search then Nelder-Mead."""
    if isinstance(field, GridField):
        k = np.unravel_index(int(np.argmax(field.values)), field.shape)
        x0 = field.origin + field.h * np.asarray(k)
    else:
        pts = sobol_points(field.n, n_probes, radius, seed)
        x0 = pts[int(np.argmax(field.sample(pts)))]
    res = minimize(lambda x: -float(field.sample(x.reshape(1, -1))[0]), x0, method="Nelder-Mead",
                   options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000})
    return np.asarray(res.x if res.fun <= -float(field.sample(x0.reshape(1, -1))[0]) else x0)


def whole_space_symmetry_probe(Y, field: ScalarField, decay_model=None,
                               params: OperatorParams | None = None, tol: float = 1e-6,
                               center=None, n_shells: int = 12, n_angles: int = 64,
                               r_max: float | None = None, relative: bool = True,
                               seed: int = 0) -> SymmetryReport:
    """Radiality about a center and monotone decay of shell averages.
    A truncated-domain approximation of whole-space symmetry."""
    d = decay_model if decay_model is not None else field.decay()
    if r_max is None:
        r_max = float(max(getattr(d, "radius", 0.0) or 0.0, 2.0))
        if isinstance(field, GridField):
            r_max = min(r_max, 0.9 * field.box_radius)
    c = find_center(field, max(r_max, 1.0), seed=seed) if center is None else \
        np.asarray(center, dtype=float).reshape(field.n)
    dirs = _shell_dirs(field.n, n_angles)
    radii = np.linspace(r_max / n_shells, r_max, n_shells)
    peak = float(field.sample(c.reshape(1, -1))[0])
    scale = abs(peak) if relative and peak != 0 else 1.0
    tol_abs = tol * scale
    shells, worst, worst_loc = [], 0.0, None
    prev = peak
    mono = 0.0
    minval = peak
    for r in radii:
        pts = c + r * dirs
        v = np.asarray(field.sample(pts), dtype=float)
        dev = float(v.max() - v.min())
        mean = float(v.mean())
        minval = min(minval, float(v.min()))
        mono = max(mono, mean - prev)
        prev = mean
        shells.append({"r": float(r), "mean": mean, "deviation": dev})
        if dev > worst:
            worst, worst_loc = dev, _loc(pts[int(np.argmax(np.abs(v - mean)))])
    beta = getattr(d, "beta", 0.0)
    if isinstance(d, Zero):
        decays = True
    else:
        decays = bool(beta > 0) or (getattr(d, "c", 1.0) == 0)
    hyp = {"decays_at_infinity": decays, "positive_on_probes": bool(minval > 0)}
    worst_all = max(worst, mono)
    if mono > worst:
        worst_loc = None
    verdict = "pass" if worst_all <= tol_abs else "fail"
    warnings = ["truncated-domain approximation"]
    if not decays:
        warnings.append("decay hypothesis not established by the decay model")
    ctx = {"label": "truncated-domain approximation", "r_max": r_max, "n_shells": n_shells,
           "n_angles": int(dirs.shape[0]), "relative": relative, "scale": scale,
           "monotone_violation": mono, "s": None if params is None else params.s}
    return SymmetryReport(verdict, worst_loc, float(worst_all), tol_abs, ctx, hyp, warnings,
                          center=_loc(c), shells=shells, monotone_violation=mono)
