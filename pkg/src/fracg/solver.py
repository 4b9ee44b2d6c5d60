"""Dirichlet problems (-Delta_g)^s u = f(u) in a grid domain, u = 0 outside.

Unknowns are the node values on the mask; every other node stays exactly
zero.  Two pseudo-time schemes share the same step control (a step that
raises the sup residual is rejected and tau halved, an accepted step grows
tau):

* ``explicit``:  u <- u - tau R(u)
* ``implicit``:  u <- u - tau (I + tau J)^-1 R(u)   (J = dR/du, dense)

The implicit form is pseudo-transient continuation; as tau grows it turns
into Newton's method.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .fields import GridField, ScalarField, Zero, ball_grid
from .operator import GridOperator, KernelModel, OperatorParams

__all__ = [
    "Nonlinearity",
    "NonLipschitz",
    "Problem",
    "SolverConfig",
    "Solution",
    "Diverged",
    "StalledStep",
    "ConvergenceReport",
    "ball_problem",
    "parse_rhs",
    "residual",
    "solve_dirichlet",
    "refine_study",
    "write_history",
]


class NonLipschitz(ValueError):
    pass


class Diverged(RuntimeError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class StalledStep(RuntimeError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class Nonlinearity:
    """f with derivative fprime; properties are checked by sampling."""

    def __init__(self, f: Callable, fprime: Callable, label: str = "f",
                 sample_range=(-10.0, 10.0), n_samples: int = 4001):
        self.f, self.fprime, self.label = f, fprime, label
        t = np.linspace(*sample_range, n_samples)
        fp = np.asarray(fprime(t), dtype=float) * np.ones_like(t)
        fv = np.asarray(f(t), dtype=float) * np.ones_like(t)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fv))):
            raise NonLipschitz(f"{label}: non-finite samples")
        slopes = np.abs(np.diff(fv) / np.diff(t))
        L = float(max(np.abs(fp).max(), slopes.max()))
        if L > 1e8:
            raise NonLipschitz(f"{label}: sampled Lipschitz constant {L:.3g}")
        self.lipschitz_const = L
        self.fprime_nondecreasing = bool(np.all(np.diff(fp) >= -1e-12 * max(1.0, L)))
        self.fprime_nonpos_below_1 = bool(np.all(fp[t <= 1] <= 0))
        self.sample_range = tuple(sample_range)

    def __call__(self, u):
        return np.asarray(self.f(u), dtype=float) * np.ones_like(u, dtype=float)

    def derivative(self, u):
        return np.asarray(self.fprime(u), dtype=float) * np.ones_like(u, dtype=float)

    def growth_constant(self, Y, n_samples: int = 2000) -> float:
        """Smallest C with g'(t) <= C f'(t) on the sampled (0, 1); inf if none."""
        t = np.geomspace(1e-6, 1 - 1e-6, n_samples)
        gp, fp = Y.gprime(t), self.derivative(t)
        if np.any((fp <= 0) & (gp > 0)):
            return math.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(gp > 0, gp / fp, 0.0)
        return float(q.max())

    def flags(self) -> dict:
        return {
            "label": self.label,
            "lipschitz_const": self.lipschitz_const,
            "fprime_nondecreasing": self.fprime_nondecreasing,
            "fprime_nonpos_below_1": self.fprime_nonpos_below_1,
        }

    @classmethod
    def constant(cls, c: float) -> "Nonlinearity":
        return cls(lambda u: np.full_like(np.asarray(u, float), c), lambda u: np.zeros_like(np.asarray(u, float)),
                   f"const:{c!r}")

    @classmethod
    def linear(cls, a: float, b: float = 0.0) -> "Nonlinearity":
        """f(u) = a u + b."""
        return cls(lambda u: a * np.asarray(u, float) + b,
                   lambda u: np.full_like(np.asarray(u, float), a), f"linear:{a!r},{b!r}")

    @classmethod
    def logistic(cls, lam: float) -> "Nonlinearity":
        """f(u) = lam * u (1 - u), Lipschitz on bounded sets."""
        return cls(lambda u: lam * np.asarray(u, float) * (1 - np.asarray(u, float)),
                   lambda u: lam * (1 - 2 * np.asarray(u, float)), f"logistic:{lam!r}",
                   sample_range=(-2.0, 2.0))


def parse_rhs(text: str) -> Nonlinearity:
    kind, _, rest = text.strip().partition(":")
    vals = [float(v) for v in rest.split(",")] if rest else []
    if kind == "zero" and not vals:
        return Nonlinearity.constant(0.0)
    if kind == "const" and len(vals) == 1:
        return Nonlinearity.constant(vals[0])
    if kind == "linear" and len(vals) in (1, 2):
        return Nonlinearity.linear(*vals)
    if kind == "logistic" and len(vals) == 1:
        return Nonlinearity.logistic(vals[0])
    raise ValueError(f"unknown rhs {text!r} (const:c, zero, linear:a[,b], logistic:lam)")


@dataclass
class Problem:
    Y: object
    params: OperatorParams
    grid: GridField
    mask: np.ndarray
    nonlinearity: Nonlinearity
    kernel: KernelModel | None = None
    domain: str = "box"
    radius: float | None = None
    margin_frac: float = 0.125

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.grid.shape:
            raise ValueError("mask shape differs from grid")
        if (self.mask & self.grid.boundary_nodes()).any():
            raise ValueError("mask must be strictly interior to the grid")
        if not isinstance(self.grid.exterior, Zero):
            raise ValueError("Dirichlet problems use zero exterior data")
        if self.kernel is None:
            self.kernel = KernelModel.fractional(self.params.s)
        self._op = None

    @property
    def operator(self) -> GridOperator:
        if self._op is None:
            self._op = GridOperator(self.Y, self.grid, self.mask, self.params, self.kernel)
        return self._op

    @property
    def N(self) -> int:
        return self.grid.shape[0]

    def refined(self) -> "Problem":
        """Same problem on the nested grid N -> 2(N-1)+1."""
        if self.radius is None:
            raise ValueError("only ball problems can be refined")
        return ball_problem(self.Y, self.params, self.grid.n, 2 * (self.N - 1) + 1, self.nonlinearity,
                            self.radius, self.kernel, self.margin_frac)

    def describe(self) -> dict:
        return {
            "young": self.Y.label,
            "domain": self.domain,
            "n": self.grid.n,
            "N": self.N,
            "h": self.grid.h,
            "mask_nodes": int(self.mask.sum()),
            "nonlinearity": self.nonlinearity.flags(),
            "kernel": self.kernel.label,
            "params": self.params.to_dict(),
            "R_far_effective": self.operator.R_far,
            "delta_effective": self.operator.plan.delta,
        }


def ball_problem(Y, params: OperatorParams, n: int, N: int, nonlinearity: Nonlinearity,
                 radius: float = 1.0, kernel=None, margin_frac: float = 0.125) -> Problem:
    grid = ball_grid(n, N, radius, margin_frac)
    mask = np.linalg.norm(grid.nodes(), axis=-1) < radius * (1 - 1e-12)
    return Problem(Y, params, grid, mask, nonlinearity, kernel, f"ball:{radius!r}", radius, margin_frac)


@dataclass(frozen=True)
class SolverConfig:
    tol: float | None = None           # default 1e-6 (1 + |f(0)|)
    max_iter: int = 400                # residual evaluations
    tau0: float | None = None          # default 0.1 / g'(1 + |f(0)|)
    damping: float = 1.0               # multiplies every update
    scheme: str = "implicit"
    grow: float | None = None          # default 1.1 explicit, 2.0 implicit
    shrink: float = 0.5
    tau_min: float = 1e-14
    diverge_factor: float = 10.0
    diverge_patience: int = 8

    def __post_init__(self):
        if self.scheme not in ("explicit", "implicit"):
            raise ValueError("scheme must be 'explicit' or 'implicit'")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def resolved(self, problem: Problem) -> "SolverConfig":
        f0 = float(abs(problem.nonlinearity(np.zeros(1))[0]))
        tol = self.tol if self.tol is not None else 1e-6 * (1 + f0)
        tau0 = self.tau0 if self.tau0 is not None else 0.1 / float(problem.Y.gprime(1 + f0))
        grow = self.grow if self.grow is not None else (1.1 if self.scheme == "explicit" else 2.0)
        return replace(self, tol=tol, tau0=tau0, grow=grow)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Solution:
    field: GridField
    residual_history: list
    iterations: int
    converged: bool
    final_residual: float
    tau_history: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def tol(self) -> float:
        return self.config.get("tol", math.nan)

    def summary(self) -> dict:
        v = self.field.values
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "max": float(v.max()),
            "min": float(v.min()),
        }


def residual(problem: Problem, candidate):
    """(residual array with NaN off the mask, sup norm over the mask)."""
    U = candidate.values if isinstance(candidate, GridField) else np.asarray(candidate, float)
    if U.shape != problem.grid.shape:
        raise ValueError("candidate must live on the problem grid")
    if np.any(U[~problem.mask] != 0):
        raise ValueError("candidate must vanish outside the mask")
    Um = U[problem.mask]
    r = problem.operator.apply(Um) - problem.nonlinearity(Um)
    out = np.full(problem.grid.shape, np.nan)
    out[problem.mask] = r
    return out, float(np.abs(r).max()) if r.size else 0.0


def _initial(problem: Problem, init) -> np.ndarray:
    if init is None:
        return np.zeros(int(problem.mask.sum()))
    if isinstance(init, ScalarField):
        return np.asarray(init.sample(problem.grid.nodes()[problem.mask]), float)
    U = np.asarray(init, float)
    if U.shape == problem.grid.shape:
        return U[problem.mask].copy()
    return U.reshape(-1).copy()


def solve_dirichlet(problem: Problem, config: SolverConfig | None = None, init=None) -> Solution:
    cfg = (config or SolverConfig()).resolved(problem)
    op = problem.operator
    f = problem.nonlinearity
    U = _initial(problem, init)

    def R_of(V):
        return op.apply(V) - f(V)

    def pack(V, hist, taus, acc, conv, res):
        full = np.zeros(problem.grid.shape)
        full[problem.mask] = V
        meta = dict(problem.grid.meta)
        meta.update({"young": problem.Y.label, "s": repr(problem.params.s)})
        return Solution(problem.grid.with_values(full, meta), hist, len(hist), conv, res,
                        taus, acc, cfg.to_dict())

    R = R_of(U)
    r = float(np.abs(R).max()) if R.size else 0.0
    hist, taus, acc = [r], [0.0], [True]
    if not math.isfinite(r):
        raise Diverged("non-finite residual at the initial guess", pack(U, hist, taus, acc, False, r))
    best = r
    tau = cfg.tau0
    bad = 0
    m = U.size
    while r > cfg.tol and len(hist) < cfg.max_iter:
        if cfg.scheme == "explicit":
            step = R
        else:
            J = op.jacobian(U)
            J[np.diag_indices(m)] -= f.derivative(U)
            A = tau * J
            A[np.diag_indices(m)] += 1.0
            step = np.linalg.solve(A, R)
        V = U - cfg.damping * tau * step
        Rn = R_of(V)
        rn = float(np.abs(Rn).max())
        hist.append(rn)
        taus.append(tau)
        if not math.isfinite(rn):
            acc.append(False)
            raise Diverged("non-finite residual", pack(U, hist, taus, acc, False, r))
        if rn <= r:
            acc.append(True)
            U, R, r = V, Rn, rn
            best = min(best, r)
            tau *= cfg.grow
            bad = 0
        else:
            acc.append(False)
            tau *= cfg.shrink
            bad = bad + 1 if rn > cfg.diverge_factor * best else 0
            if bad >= cfg.diverge_patience:
                raise Diverged(f"residual above {cfg.diverge_factor:g}x best for {bad} trials",
                               pack(U, hist, taus, acc, False, r))
            if tau < cfg.tau_min:
                raise StalledStep(f"tau fell below {cfg.tau_min:g}", pack(U, hist, taus, acc, False, r))
    return pack(U, hist, taus, acc, r <= cfg.tol, r)


def write_history(sol: Solution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "tau", "sup_residual", "accepted"])
        for i, (t, r, a) in enumerate(zip(sol.tau_history, sol.residual_history, sol.accepted)):
            w.writerow([i, repr(float(t)), repr(float(r)), int(a)])


@dataclass
class ConvergenceReport:
    N: list
    h: list
    differences: list            # sup over common nodes between successive levels
    orders: list                 # log2 of successive difference ratios
    monotone: bool
    center_values: list
    converged: list
    iterations: list

    @property
    def empirical_order(self) -> float:
        return min(self.orders) if self.orders else math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d["empirical_order"] = self.empirical_order
        return d


def refine_study(problem: Problem, levels: int = 3, config: SolverConfig | None = None,
                 solutions: dict | None = None) -> ConvergenceReport:
    """Solve on nested grids N, 2(N-1)+1, ... and compare on common nodes.

    ``solutions`` may pre-seed solved levels keyed by N."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    sols, probs = [], []
    p = problem
    for _ in range(levels):
        probs.append(p)
        if solutions and p.N in solutions:
            sols.append(solutions[p.N])
        else:
            sols.append(solve_dirichlet(p, config))
        p = p.refined() if len(probs) < levels else p
    diffs = []
    for a, b in zip(sols[:-1], sols[1:]):
        coarse = a.field.values
        fine = b.field.values[(slice(None, None, 2),) * coarse.ndim]
        diffs.append(float(np.abs(fine - coarse).max()))
    orders = []
    for d0, d1 in zip(diffs[:-1], diffs[1:]):
        orders.append(math.log2(d0 / d1) if d0 > 0 and d1 > 0 else (math.inf if d1 == 0 else math.nan))
    mono = all(d1 < d0 or (d0 == 0 and d1 == 0) for d0, d1 in zip(diffs[:-1], diffs[1:]))
    center = []
    for s in sols:
        idx = s.field.node_index(np.zeros(s.field.n))
        center.append(float(s.field.values[tuple(idx)]) if idx is not None else math.nan)
    return ConvergenceReport([q.N for q in probs], [q.grid.h for q in probs], diffs, orders, mono,
                             center, [s.converged for s in sols], [s.iterations for s in sols])
