"""Pointwise and gridwise evaluation of the fractional g-Laplacian

    (-Delta_g)^s u(x) = p.v. int g((u(x) - u(y)) / k(|x-y|)) dy / (k(|x-y|) |x-y|^n)

with k(t) = t^s by default.  The integral is split at radius ``delta``:
inside, each direction is paired with its antipode and the linear part
g(grad u(x).(x-y)/k) is subtracted (it integrates to zero by oddness);
outside, the integrand is integrated directly up to ``R_far``.  The piece
beyond ``R_far`` is bounded analytically and reported, never added.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .fields import (
    AnalyticField,
    CombinedField,
    GridField,
    ScalarField,
    STENCIL,
    PAD,
    Zero,
    as_points,
    bump,
    directions,
    gauss_panels,
    power_tail_integral,
    sphere_area,
    stencil_weights,
)


__all__ = [
    "TailMode",
    "OperatorParams",
    "KernelModel",
    "OperatorValue",
    "TailUnbounded",
    "NotC11At",
    "CoincidentPoints",
    "KernelBoundsViolated",
    "holder_quotient",
    "eval_fracg",
    "eval_fracg_detail",
    "eval_on_grid",
    "GridOperator",
    "QuadraturePlan",
    "build_plan",
    "tail_bound",
    "perturbation_gap",
    "perturbation_study",
    "PerturbationReport",
]


class TailUnbounded(ValueError):
    pass


class NotC11At(ValueError):
    def __init__(self, x, msg=None):
        self.x = np.asarray(x, dtype=float)
        super().__init__(msg or f"no C^1,1 surrogate at {self.x.tolist()} (grid boundary)")


class CoincidentPoints(ValueError):
    pass


class KernelBoundsViolated(ValueError):
    pass


class TailMode(str, Enum):
    BOUND = "analytic_bound"   # a finite bound is required
    REPORT = "report"          # bound reported, possibly infinite


@dataclass(frozen=True)
class OperatorParams:
    """Quadrature settings.  ``None`` radii are resolved per field.

    quad_near / quad_far are Gauss-Legendre orders per radial panel.  The
    angular rule has ``angular`` directions (default 4 * quad_near) in 2-D.
    """

    s: float
    delta_near: float | None = None
    R_far: float | None = None
    quad_near: int = 16
    quad_far: int = 16
    tail_mode: TailMode = TailMode.REPORT
    angular: int | None = None
    grading: float = 0.25
    near_floor: float = 1e-13
    lin_panel: float = 0.25

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0,1)")
        if self.quad_near < 8 or self.quad_far < 8:
            raise ValueError("quadrature counts must be >= 8")
        if self.delta_near is not None and self.delta_near <= 0:
            raise ValueError("delta_near must be positive")
        if self.delta_near is not None and self.R_far is not None and not self.delta_near < self.R_far:
            raise ValueError("need delta_near < R_far")
        if not 0 < self.grading < 1:
            raise ValueError("grading must lie in (0,1)")
        object.__setattr__(self, "tail_mode", TailMode(self.tail_mode))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tail_mode"] = self.tail_mode.value
        return d


@dataclass(frozen=True)
class KernelModel:
    """k with c1 t^s <= k(t) <= c2 t^s."""

    k: Callable
    s: float
    c1: float = 1.0
    c2: float = 1.0
    label: str = "fractional"

    def __call__(self, t):
        return self.k(np.asarray(t, dtype=float))

    @property
    def is_default(self) -> bool:
        return self.label == "fractional"

    @classmethod
    def fractional(cls, s: float) -> "KernelModel":
        return cls(lambda t: t**s, s, 1.0, 1.0, "fractional")

    @classmethod
    def scaled(cls, s: float, c: float) -> "KernelModel":
        if c <= 0:
            raise ValueError("kernel scale must be positive")
        return cls(lambda t: c * t**s, s, c, c, f"scaled({c!r})")

    @classmethod
    def oscillating(cls, s: float, c1: float, c2: float) -> "KernelModel":
        """t^s (a + b sin(log t)), which sweeps the whole band [c1, c2]."""
        if not 0 < c1 <= c2:
            raise ValueError("need 0 < c1 <= c2")
        a, b = (c1 + c2) / 2, (c2 - c1) / 2
        return cls(lambda t: t**s * (a + b * np.sin(np.log(np.maximum(t, 1e-300)))), s, c1, c2,
                   f"oscillating({c1!r},{c2!r})")

    def validate(self, t_min=1e-8, t_max=1e8, n_pts=2001):
        t = np.geomspace(t_min, t_max, n_pts)
        ratio = self(t) / t**self.s
        lo, hi = float(ratio.min()), float(ratio.max())
        tol = 1e-12 * max(1.0, self.c2)
        if lo < self.c1 - tol or hi > self.c2 + tol or not np.all(np.isfinite(ratio)):
            raise KernelBoundsViolated(
                f"k(t)/t^s ranges over [{lo:.6g}, {hi:.6g}], declared [{self.c1}, {self.c2}]")
        return lo, hi


def _kernel(kernel, s):
    if kernel is None:
        return KernelModel.fractional(s)
    if abs(kernel.s - s) > 0:
        raise ValueError("kernel order differs from params.s")
    return kernel


def holder_quotient(field: ScalarField, x, y, s: float):
    """(u(x) - u(y)) / |x - y|^s."""
    x, y = as_points(x, field.n), as_points(y, field.n)
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0):
        raise CoincidentPoints("holder_quotient needs x != y")
    return (field.sample(x) - field.sample(y)) / r**s


# ---------------------------------------------------------------------------
# quadrature plan


@dataclass
class QuadraturePlan:
    dirs: np.ndarray        # (M, n); dirs[M//2:] == -dirs[:M//2]
    wdir: np.ndarray        # (M,)
    near_r: np.ndarray
    near_w: np.ndarray      # includes the kernel factor 1/(k(r) r)
    near_k: np.ndarray
    far_r: np.ndarray
    far_w: np.ndarray
    far_k: np.ndarray
    delta: float
    R_far: float
    lattice: float          # radius up to which panels follow the grid

    @property
    def n_points(self) -> int:
        return (self.near_r.size + self.far_r.size) * self.dirs.shape[0]


def _geometric_breaks(lo, hi, ratio):
    b = [hi]
    while b[-1] * ratio > lo:
        b.append(b[-1] * ratio)
    b.append(lo)
    return np.asarray(b[::-1])


def _subdivide(b, max_len):
    out = [b[0]]
    for lo, hi in zip(b[:-1], b[1:]):
        k = max(1, math.ceil((hi - lo) / max_len - 1e-9))
        out.extend(lo + (hi - lo) * np.arange(1, k + 1) / k)
    return np.asarray(out)


def _doubling_breaks(lo, hi):
    b = [lo]
    while b[-1] < hi:
        b.append(min(2 * b[-1], hi))
    return np.asarray(b)


GRID_R_FAR = 1e12


def resolve_radii(Y, field: ScalarField, params: OperatorParams, x_norm: float = 0.0):
    """Effective (delta, lattice radius, R_far) for a field."""
    s = params.s
    if isinstance(field, GridField):
        h = field.h
        delta = params.delta_near or min(1.0, field.box_radius / 4)
        delta = max(1, round(delta / h)) * h
        lat = math.ceil(2 * field.box_radius / h) * h
    else:
        delta = params.delta_near or 1.0
        lat = x_norm + max(field.decay().radius, 4.0)
        lat = max(lat, 2 * delta)
    if params.R_far is not None:
        R_far = float(params.R_far)
    elif isinstance(field, GridField):
        # outside the box only the exterior model is sampled, which is cheap
        R_far = max(GRID_R_FAR, 2 * lat)
    else:
        R_far = max(delta * 10 ** (6 / (s * Y.p_minus)), 2 * lat)
    if R_far <= delta:
        raise ValueError("R_far must exceed delta_near")
    return delta, min(lat, R_far), R_far


def build_plan(Y, field: ScalarField, params: OperatorParams, kernel=None,
               x_norm: float = 0.0) -> QuadraturePlan:
    kernel = _kernel(kernel, params.s)
    delta, lat, R_far = resolve_radii(Y, field, params, x_norm)
    sig = params.grading
    if isinstance(field, GridField):
        h = field.h
        first = min(h, delta)
        near_b = np.concatenate([_geometric_breaks(params.near_floor * delta, first, sig),
                                 np.arange(2, round(delta / h) + 1) * h])
        far_b = np.arange(round(delta / h), round(lat / h) + 1) * h
    else:
        near_b = _subdivide(_geometric_breaks(params.near_floor * delta, delta, sig),
                            params.lin_panel)
        npan = max(1, math.ceil((lat - delta) / min(params.lin_panel, delta)))
        far_b = np.linspace(delta, lat, npan + 1)
    if R_far > far_b[-1]:
        far_b = np.concatenate([far_b, _doubling_breaks(far_b[-1], R_far)[1:]])
    far_b = far_b[far_b <= R_far + 1e-12 * R_far]
    nr, nw = gauss_panels(near_b, params.quad_near)
    fr, fw = gauss_panels(far_b, params.quad_far)
    nk, fk = kernel(nr), kernel(fr)
    dirs, wd = directions(field.n, params.angular or 4 * params.quad_near)
    return QuadraturePlan(dirs, wd, nr, nw / (nk * nr), nk, fr, fw / (fk * fr), fk,
                          float(delta), float(R_far), float(lat))


# ---------------------------------------------------------------------------
# tail bound


def tail_bound(Y, field: ScalarField, x, ux: float, R: float, s: float, kernel=None) -> float:
    """Bound for the integral over |y - x| > R of |g(D)| dy / (k r^n)."""
    kernel = _kernel(kernel, s)
    n = field.n
    xn = float(np.linalg.norm(x))
    S = sphere_area(n) / kernel.c1
    base = R ** (-s) * power_tail_integral(Y, abs(ux) / (kernel.c1 * R**s), -s, s)
    dec = field.decay()
    if dec.c == 0:
        return S * base
    if not math.isfinite(dec.c) or R - xn < dec.radius or R < 2 * xn:
        return math.inf
    cprime = dec.c * 2.0 ** abs(dec.beta)
    gam = dec.beta + s
    ext = R ** (-s) * power_tail_integral(Y, cprime * R ** (-gam) / kernel.c1, -gam, s)
    return S * 2.0 ** (Y.p_plus - 1) * (base + ext)


# ---------------------------------------------------------------------------
# pointwise evaluation


@dataclass
class OperatorValue:
    value: float
    near: float
    far: float
    tail_bound: float
    delta: float
    R_far: float
    n_points: int
    tail_added: bool = False
    notes: list = field(default_factory=list)

    @property
    def tail_ratio(self) -> float:
        mag = abs(self.near) + abs(self.far)
        return self.tail_bound / mag if mag > 0 else (0.0 if self.tail_bound == 0 else math.inf)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tail_ratio"] = self.tail_ratio
        return d


def _check_c11(field, x):
    if isinstance(field, GridField):
        t = (x - field.origin) / field.h
        eps = 1e-9
        if np.any(t < 1 - eps) or np.any(t > np.asarray(field.shape) - 2 + eps):
            raise NotC11At(x)


def eval_fracg_detail(Y, field: ScalarField, x, params: OperatorParams, kernel=None,
                      plan: QuadraturePlan | None = None) -> OperatorValue:
    kernel = _kernel(kernel, params.s)
    x = as_points(x, field.n).reshape(field.n)
    _check_c11(field, x)
    if plan is None:
        plan = build_plan(Y, field, params, kernel, float(np.linalg.norm(x)))
    ux = float(field.sample(x))
    grad = field.gradient(x).reshape(field.n)
    M2 = plan.dirs.shape[0] // 2
    half = plan.dirs[:M2]
    wd = plan.wdir[:M2]
    node = field.node_index(x) if isinstance(field, GridField) else None

    def diffs(off):
        # u(x + off) - u(x), shape off.shape[:-1]
        if node is not None:
            d, _ = field.offset_differences(node, off.reshape(-1, field.n))
            return d.reshape(off.shape[:-1])
        return field.sample(x + off) - ux

    # near field, paired: y = x + r e and 2x - y = x - r e; the linear part
    # lin = grad u . (y - x)/k is subtracted from each member of the pair
    r = plan.near_r
    off = r[:, None, None] * half[None, :, :]
    k = plan.near_k[:, None]
    lin = (r[:, None] * (half @ grad)[None, :]) / k
    Dp = -diffs(off) / k
    Dm = -diffs(-off) / k
    pair = (Y.g(Dp) - Y.g(-lin)) + (Y.g(Dm) - Y.g(lin))
    near = float(np.sum(pair * plan.near_w[:, None] * wd[None, :]))

    r = plan.far_r
    D = -diffs(r[:, None, None] * plan.dirs[None, :, :]) / plan.far_k[:, None]
    far = float(np.sum(Y.g(D) * plan.far_w[:, None] * plan.wdir[None, :]))

    R = plan.R_far
    tb = tail_bound(Y, field, x, ux, R, params.s, kernel)
    if params.R_far is None:
        # auto mode: push R_far out until the tail is negligible
        xg, wg = np.polynomial.legendre.leggauss(params.quad_far)
        while tb > 1e-6 * (abs(near) + abs(far)) and R < 1e15:
            rr = R * (1.5 + 0.5 * xg)
            kk = kernel(rr)
            ww = (0.5 * R * wg) / (kk * rr)
            pts = x + rr[:, None, None] * plan.dirs[None, :, :]
            D = (ux - field.sample(pts)) / kk[:, None]
            far += float(np.sum(Y.g(D) * ww[:, None] * plan.wdir[None, :]))
            R *= 2
            tb = tail_bound(Y, field, x, ux, R, params.s, kernel)
    notes = []
    if not math.isfinite(tb):
        if params.tail_mode is TailMode.BOUND:
            raise TailUnbounded(f"no finite tail bound beyond R_far = {plan.R_far:g}")
        notes.append("tail bound unavailable")
    elif tb > 1e-6 * (abs(near) + abs(far)):
        notes.append("tail bound exceeds 1e-6 of the computed magnitude")
    extra = int(round(math.log2(R / plan.R_far))) * params.quad_far * plan.dirs.shape[0]
    return OperatorValue(near + far, near, far, tb, plan.delta, R, plan.n_points + extra,
                         notes=notes)


def eval_fracg(Y, field: ScalarField, x, params: OperatorParams, kernel=None) -> float:
    return eval_fracg_detail(Y, field, x, params, kernel).value


# ---------------------------------------------------------------------------
# grid operator


def _rowdot(A, w):
    # BLAS matvec rounding depends on the block shape; a plain row reduction
    # keeps each node's value independent of how rows are batched
    return (A * w[None, :]).sum(axis=1)


class GridOperator:
    """The discrete operator at the nodes of a grid mask, as a function of
    the node values.

    Quadrature offsets o_q = r_q e_q are the same for every node, so the
    point x_i + o_q always sits at the same fractional position inside a
    cell shifted by floor(o_q / h).  The interpolation weights are computed
    once per offset and evaluation reduces to a gather.
    """

    CHUNK = 2_000_000

    def __init__(self, Y, grid: GridField, mask, params: OperatorParams, kernel=None):
        self.Y, self.grid, self.params = Y, grid, params
        self.kernel = _kernel(kernel, params.s)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ValueError("mask shape differs from grid shape")
        bad = mask & grid.boundary_nodes()
        if bad.any():
            raise NotC11At(grid.nodes()[bad][0])
        self.mask = mask
        self.idx = np.argwhere(mask)                      # (m, n)
        self.m = len(self.idx)
        self.plan = build_plan(Y, grid, params, self.kernel, 0.0)
        self.col = -np.ones(grid.shape, dtype=np.int64)
        self.col[mask] = np.arange(self.m)
        p = self.plan
        n = grid.n
        M2 = p.dirs.shape[0] // 2
        # near: first half of directions only, antipodes handled in pairs
        self.near_off = (p.near_r[:, None, None] * p.dirs[None, :M2, :]).reshape(-1, n)
        self.near_W = (p.near_w[:, None] * p.wdir[None, :M2]).reshape(-1)
        self.near_k = np.repeat(p.near_k, M2)
        self.near_lin = (p.near_r[:, None] * np.ones((1, M2))).reshape(-1)
        self.near_dir = np.tile(p.dirs[:M2], (p.near_r.size, 1))
        lat = p.far_r <= p.lattice
        self.far_off = (p.far_r[lat, None, None] * p.dirs[None, :, :]).reshape(-1, n)
        self.far_W = (p.far_w[lat, None] * p.wdir[None, :]).reshape(-1)
        self.far_k = np.repeat(p.far_k[lat], p.dirs.shape[0])
        # beyond the lattice radius every point lies outside the box and sees
        # only the exterior model: no gather needed
        self.R_far = p.R_far
        orr, oww, ok_ = p.far_r[~lat], p.far_w[~lat], p.far_k[~lat]
        self.out_off = (orr[:, None, None] * p.dirs[None, :, :]).reshape(-1, n)
        self.out_W = (oww[:, None] * p.wdir[None, :]).reshape(-1)
        self.out_k = np.repeat(ok_, p.dirs.shape[0])

    # -- interpolation at shifted points -------------------------------

    def _stencil(self, off):
        t = off / self.grid.h
        b = np.floor(t).astype(np.int64)
        W = [stencil_weights(t[:, a] - b[:, a]) for a in range(self.grid.n)]
        return b, W

    def _values_at(self, P, off, rows):
        """u(x_i + o_q) for nodes ``rows`` (index array) and offsets ``off``.

        Returns the values and, for Jacobian assembly, the stencil data."""
        grid = self.grid
        n = grid.n
        b, W = self._stencil(off)
        cell = rows[:, None, :] + b[None, :, :]                   # (r, q, n)
        frac_pos = cell + np.stack([(off[:, a] / grid.h - b[:, a]) for a in range(n)], -1)[None]
        inside = np.all((frac_pos >= 0) & (frac_pos <= np.asarray(grid.shape) - 1), axis=-1)
        out = np.zeros(inside.shape)
        if n == 1:
            idx = np.clip(cell[..., 0, None] + STENCIL + PAD, 0, P.shape[0] - 1)
            vals = np.einsum("qk,rqk->rq", W[0], P[idx])
        else:
            i0 = np.clip(cell[..., 0, None, None] + STENCIL[:, None] + PAD, 0, P.shape[0] - 1)
            i1 = np.clip(cell[..., 1, None, None] + STENCIL[None, :] + PAD, 0, P.shape[1] - 1)
            vals = np.einsum("qk,ql,rqkl->rq", W[0], W[1], P[i0, i1])
        out[inside] = vals[inside]
        if not inside.all() and not isinstance(grid.exterior, Zero):
            xs = self._coords(rows, off)
            out[~inside] = grid.exterior.value(xs[~inside])
        return out, inside, cell, W

    def _coords(self, rows, off):
        return self.grid.origin + self.grid.h * rows[:, None, :] + off[None, :, :]

    def _outer_values(self, rows):
        if isinstance(self.grid.exterior, Zero):
            return np.zeros((len(rows), self.out_off.shape[0]))
        return self.grid.exterior.value(self._coords(rows, self.out_off))

    def _row_blocks(self, total, q_count):
        per = max(1, self.CHUNK // max(1, q_count * 6 ** self.grid.n))
        return [np.arange(i, min(i + per, total)) for i in range(0, total, per)]

    def _field(self, U):
        if isinstance(U, GridField):
            return U
        U = np.asarray(U, dtype=float)
        if U.shape == (self.m,):
            full = np.zeros(self.grid.shape)
            full[self.mask] = U
            U = full
        return self.grid.with_values(U)

    def apply(self, U, rows=None) -> np.ndarray:
        """Operator values at mask nodes (all, or the given mask positions)."""
        F = self._field(U)
        G = F.node_gradient()
        g = self.Y.g
        sel = np.arange(self.m) if rows is None else np.asarray(rows, dtype=np.int64)
        out = np.empty(sel.size)
        for blk in self._row_blocks(sel.size, self.near_off.shape[0] + self.far_off.shape[0]):
            nodes = self.idx[sel[blk]]
            ux = F.values[tuple(nodes.T)][:, None]
            dp, _ = F.offset_differences(nodes, self.near_off)
            dm, _ = F.offset_differences(nodes, -self.near_off)
            gr = G[tuple(nodes.T)]                                   # (r, n)
            proj = sum(gr[:, d, None] * self.near_dir[None, :, d] for d in range(gr.shape[1]))
            lin = self.near_lin[None, :] * proj / self.near_k[None, :]
            pair = (g(-dp / self.near_k) - g(-lin)) + (g(-dm / self.near_k) - g(lin))
            near = _rowdot(pair, self.near_W)
            df, _ = F.offset_differences(nodes, self.far_off)
            far = _rowdot(g(-df / self.far_k), self.far_W)
            uo = self._outer_values(nodes)
            outer = _rowdot(g((ux - uo) / self.out_k), self.out_W)
            out[blk] = near + (far + outer)
        return out

    def jacobian(self, U) -> np.ndarray:
        """Dense derivative of :meth:`apply` with respect to the mask values.

        The linear compensator cancels between antipodal pairs (g' is even),
        so only the g(D) terms contribute."""
        F = self._field(U)
        P = F.padded
        gp = self.Y.gprime
        n, m = self.grid.n, self.m
        flat = np.zeros(m * m)
        offs = np.concatenate([self.near_off, -self.near_off, self.far_off])
        Ws = np.concatenate([self.near_W, self.near_W, self.far_W])
        ks = np.concatenate([self.near_k, self.near_k, self.far_k])
        shape = self.grid.shape
        for blk in self._row_blocks(m, offs.shape[0]):
            nodes = self.idx[blk]
            ux = F.values[tuple(nodes.T)][:, None]
            uy, inside, cell, W = self._values_at(P, offs, nodes)
            a = gp((ux - uy) / ks) * (Ws / ks)                       # (r, q)
            uo = self._outer_values(nodes)
            diag = a.sum(axis=1) + (gp((ux - uo) / self.out_k) * (self.out_W / self.out_k)).sum(axis=1)
            flat[blk * m + blk] += diag
            a = np.where(inside, a, 0.0)
            rowbase = (blk * m)[:, None]
            if n == 1:
                combos = [((k,), (sk,)) for k, sk in enumerate(STENCIL)]
            else:
                combos = [((k, l), (sk, sl)) for k, sk in enumerate(STENCIL)
                          for l, sl in enumerate(STENCIL)]
            for ks_, shifts in combos:
                jj = [cell[..., d] + shifts[d] for d in range(n)]
                ok = np.ones(a.shape, dtype=bool)
                for d in range(n):
                    ok &= (jj[d] >= 0) & (jj[d] < shape[d])
                c = self.col[tuple(np.clip(jj[d], 0, shape[d] - 1) for d in range(n))]
                use = ok & (c >= 0) & inside
                w = W[0][:, ks_[0]] if n == 1 else W[0][:, ks_[0]] * W[1][:, ks_[1]]
                vals = (a * w[None, :])[use]
                flat -= np.bincount((rowbase + c)[use], weights=vals, minlength=m * m)
        return flat.reshape(m, m)


def eval_on_grid(Y, field: ScalarField, mask, params: OperatorParams, kernel=None,
                 threads: int = 1, grid: GridField | None = None) -> np.ndarray:
    """Operator values at masked nodes, NaN elsewhere.

    For analytic fields ``grid`` supplies the node layout.  Each node is
    computed independently, so results do not depend on ``threads``."""
    like = field if isinstance(field, GridField) else grid
    if like is None:
        raise ValueError("analytic fields need a grid for node positions")
    mask = np.asarray(mask, dtype=bool)
    out = np.full(like.shape, np.nan)
    pos = np.argwhere(mask)
    if isinstance(field, GridField):
        op = GridOperator(Y, field, mask, params, kernel)
        chunks = np.array_split(np.arange(op.m), max(1, threads))
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                parts = list(ex.map(lambda c: op.apply(field, rows=c), chunks))
        else:
            parts = [op.apply(field, rows=c) for c in chunks]
        out[mask] = np.concatenate(parts)
        return out
    nodes = like.nodes()[mask]

    def one(i):
        return eval_fracg(Y, field, nodes[i], params, kernel)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            vals = list(ex.map(one, range(len(nodes))))
    else:
        vals = [one(i) for i in range(len(nodes))]
    out[tuple(pos.T)] = vals
    return out


# ---------------------------------------------------------------------------
# perturbation stability


@dataclass
class PerturbationReport:
    eps: list
    gaps: list
    C_delta: float
    omega: float
    bounds: list
    rel_residuals: list
    monotone: bool
    delta: float
    near_gaps: list
    far_gaps: list

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_linear(eps, gaps):
    """Weighted least squares gap ~ C eps + omega with weights 1/gap."""
    eps, gaps = np.asarray(eps, float), np.asarray(gaps, float)
    w = 1.0 / np.where(gaps > 0, gaps, 1.0)
    A = np.stack([eps, np.ones_like(eps)], axis=1) * w[:, None]
    (C, om), *_ = np.linalg.lstsq(A, gaps * w, rcond=None)
    return float(C), float(om)


def perturbation_study(Y, field: ScalarField, bump_center, eps_list, delta: float,
                       params: OperatorParams, kernel=None, x=None,
                       bump_radius: float = 1.0) -> PerturbationReport:
    """Gap |A(u + eps psi)(x) - A(u)(x)| for a radial bump psi, split at delta."""
    n = field.n
    c = np.asarray(bump_center, float).reshape(n)
    x = c if x is None else as_points(x, n).reshape(n)
    psi = bump(n, c, bump_radius)
    p = replace(params, delta_near=delta)
    base = eval_fracg_detail(Y, field, x, p, kernel)
    gaps, ng, fg = [], [], []
    for e in eps_list:
        v = eval_fracg_detail(Y, CombinedField([field, psi], [1.0, e]), x, p, kernel,
                              plan=_plan_for(Y, field, p, kernel, x))
        gaps.append(abs(v.value - base.value))
        ng.append(abs(v.near - base.near))
        fg.append(abs(v.far - base.far))
    nz = [(e, gp) for e, gp in zip(eps_list, gaps) if e != 0]
    if len(nz) >= 2:
        C, om = _fit_linear(*zip(*nz))
    elif len(nz) == 1:
        C, om = nz[0][1] / nz[0][0], 0.0
    else:
        C, om = 0.0, 0.0
    bounds = [C * e + om if e != 0 else 0.0 for e in eps_list]
    rel = [abs(b - gp) / gp if gp > 0 else 0.0 for b, gp in zip(bounds, gaps)]
    order = np.argsort(eps_list)
    sg = np.asarray(gaps)[order]
    mono = bool(np.all(np.diff(sg) >= -1e-14 * max(1.0, sg.max(initial=0.0))))
    return PerturbationReport(list(map(float, eps_list)), gaps, C, om, bounds, rel, mono,
                              base.delta, ng, fg)


def _plan_for(Y, field, params, kernel, x):
    return build_plan(Y, field, params, kernel, float(np.linalg.norm(x)))


def perturbation_gap(Y, field: ScalarField, bump_center, eps: float, delta: float,
                     params: OperatorParams, kernel=None, x=None, bump_radius: float = 1.0):
    """(gap, bound) at a single eps.  The bound C eps + omega is fitted over
    eps * (0.01, 0.1, 1)."""
    if eps == 0:
        return 0.0, 0.0
    rep = perturbation_study(Y, field, bump_center, [eps / 100, eps / 10, eps], delta, params,
                             kernel, x, bump_radius)
    return rep.gaps[-1], rep.bounds[-1]
