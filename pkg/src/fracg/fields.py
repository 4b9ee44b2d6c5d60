"""Scalar fields on R^n: uniform-grid samples with cubic interpolation and an
exterior model, analytic callbacks, and lazy reflections/combinations.

Point arrays carry the coordinate on the last axis, ``(..., n)``.  For
``n == 1`` plain arrays of shape ``(m,)`` are accepted as ``m`` points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "Zero",
    "PowerDecay",
    "Decay",
    "ScalarField",
    "GridField",
    "AnalyticField",
    "ReflectedField",
    "CombinedField",
    "TailReport",
    "UnboundedTail",
    "FieldFormatError",
    "as_points",
    "sphere_area",
    "reflect",
    "reflect_points",
    "ball_grid",
    "sample_to_grid",
    "constant",
    "gaussian",
    "bump",
    "radial_poly",
    "algebraic_decay",
    "check_tail_membership",
    "save_field",
    "load_field",
    "parse_exterior",
]


EPS = np.finfo(float).eps


class UnboundedTail(ValueError):
    pass


class FieldFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exterior models and decay descriptors


@dataclass(frozen=True)
class Zero:
    def value(self, x):
        return np.zeros(x.shape[:-1])

    def grad(self, x):
        return np.zeros(x.shape)

    def spec(self) -> str:
        return "zero"


@dataclass(frozen=True)
class PowerDecay:
    """u(x) = c |x|^-beta outside the grid box (beta < 0 means growth)."""

    c: float
    beta: float

    def value(self, x):
        r = np.maximum(np.linalg.norm(x, axis=-1), 1e-300)
        if self.beta == 0:
            return np.full(x.shape[:-1], float(self.c))
        return self.c * r ** (-self.beta)

    def grad(self, x):
        if self.beta == 0:
            return np.zeros(x.shape)
        r = np.maximum(np.linalg.norm(x, axis=-1), 1e-300)
        return (-self.beta * self.c * r ** (-self.beta - 2))[..., None] * x

    def spec(self) -> str:
        return f"power_decay:{self.c!r},{self.beta!r}"


def parse_exterior(text: str):
    text = text.strip()
    if text == "zero":
        return Zero()
    kind, _, rest = text.partition(":")
    if kind == "power_decay":
        c, beta = (float(v) for v in rest.split(","))
        return PowerDecay(c, beta)
    raise FieldFormatError(f"unknown exterior model {text!r}")


@dataclass(frozen=True)
class Decay:
    """|u(x)| <= c |x|^-beta whenever |x| >= radius."""

    radius: float
    c: float
    beta: float

    @property
    def bounded(self) -> bool:
        return self.beta >= 0


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def as_points(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != n:
        raise ValueError(f"expected points with last axis {n}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# field hierarchy


class ScalarField:
    n: int

    def sample(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def decay(self) -> Decay:
        raise NotImplementedError

    def __call__(self, x):
        return self.sample(x)


# 1-D C^1 cubic Hermite interpolation with fourth-order central-difference
# slopes, written as a 6-point stencil on nodes j-2 .. j+3 for a point in
# cell [j, j+1] at fractional offset f.
STENCIL = np.arange(-2, 4)
_FD4 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}


def _hermite_basis(f):
    f2, f3 = f * f, f * f * f
    return (2 * f3 - 3 * f2 + 1, f3 - 2 * f2 + f, -2 * f3 + 3 * f2, f3 - f2)


def _hermite_dbasis(f):
    f2 = f * f
    return (6 * f2 - 6 * f, 3 * f2 - 4 * f + 1, -6 * f2 + 6 * f, 3 * f2 - 2 * f)


def _assemble(h00, h10, h01, h11):
    shape = np.shape(h00)
    out = np.zeros(shape + (6,))
    out[..., 2] += h00
    out[..., 3] += h01
    for m, d in _FD4.items():
        out[..., m + 2] += h10 * d        # slope at node j
        out[..., m + 3] += h11 * d        # slope at node j+1
    return out


def stencil_weights(f):
    """Weights on nodes j-2 .. j+3 giving the interpolant at offset f."""
    return _assemble(*_hermite_basis(np.asarray(f, dtype=float)))


def stencil_delta(f):
    """stencil_weights(f) minus the unit weight on node j, without the
    cancellation that plain subtraction suffers for tiny f."""
    f = np.asarray(f, dtype=float)
    f2 = f * f
    return _assemble(f2 * (2 * f - 3), f * (f - 1) ** 2, f2 * (3 - 2 * f), f2 * (f - 1))


def stencil_dweights(f):
    """Weights giving d/df of the interpolant (divide by h for d/dx)."""
    return _assemble(*_hermite_dbasis(np.asarray(f, dtype=float)))


PAD = 3


class GridField(ScalarField):
    """Samples on a uniform grid with spacing ``h`` in every direction.

    Off-node values use tensor-product cubic Hermite interpolation with
    fourth-order finite-difference slopes.  The interpolant is C^1 with a
    bounded, piecewise-continuous second derivative, reproduces cubics and
    is O(h^4) accurate.  Three layers of ghost nodes outside the box carry
    the exterior model, so the stencil is the same everywhere inside the
    box; outside the box the exterior model is evaluated directly.
    """

    def __init__(self, origin, h, values, exterior=None, meta=None):
        values = np.asarray(values, dtype=float)
        if values.ndim not in (1, 2):
            raise ValueError("grid fields are 1-D or 2-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid samples must be finite")
        if min(values.shape) < 4:
            raise ValueError("need at least 4 nodes per axis")
        self.n = values.ndim
        self.origin = np.atleast_1d(np.asarray(origin, dtype=float))
        if self.origin.shape != (self.n,):
            raise ValueError("origin must have one entry per axis")
        self.h = float(h)
        self.values = values
        self.values.setflags(write=False)
        self.shape = values.shape
        self.exterior = exterior if exterior is not None else Zero()
        self.meta = dict(meta or {})
        self._padded = self._pad(values, self.exterior.value)

    # geometry -------------------------------------------------------------

    @property
    def upper(self) -> np.ndarray:
        return self.origin + (np.asarray(self.shape) - 1) * self.h

    @property
    def box_radius(self) -> float:
        corners = np.stack(np.meshgrid(*[[lo, hi] for lo, hi in zip(self.origin, self.upper)],
                                       indexing="ij"), axis=-1)
        return float(np.linalg.norm(corners.reshape(-1, self.n), axis=-1).max())

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h * np.arange(self.shape[axis])

    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*[self.axis_coords(a) for a in range(self.n)], indexing="ij")
        return np.stack(grids, axis=-1)

    def boundary_nodes(self) -> np.ndarray:
        b = np.zeros(self.shape, dtype=bool)
        for a in range(self.n):
            sl = [slice(None)] * self.n
            sl[a] = 0
            b[tuple(sl)] = True
            sl[a] = -1
            b[tuple(sl)] = True
        return b

    def with_values(self, values, meta=None) -> "GridField":
        return GridField(self.origin, self.h, values, self.exterior,
                         self.meta if meta is None else meta)

    def _pad(self, arr, ext_fn):
        padded_shape = tuple(s + 2 * PAD for s in self.shape)
        idx = np.meshgrid(*[np.arange(-PAD, s + PAD) for s in self.shape], indexing="ij")
        coords = np.stack([self.origin[a] + self.h * idx[a] for a in range(self.n)], axis=-1)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = ext_fn(coords)       # interior entries are overwritten below
        if out.shape != padded_shape + (() if arr.ndim == self.n else arr.shape[self.n:]):
            out = out.reshape(padded_shape + arr.shape[self.n:])
        inner = tuple(slice(PAD, PAD + s) for s in self.shape)
        out = np.array(out, dtype=float)
        out[inner] = arr
        return out

    @property
    def padded(self) -> np.ndarray:
        """Samples with ``PAD`` ghost layers holding the exterior model."""
        return self._padded

    def node_gradient(self) -> np.ndarray:
        """Fourth-order central differences at every node, shape (..., n).

        These are exactly the slopes of the Hermite interpolant at nodes."""
        P = self._padded
        grads = []
        for a in range(self.n):
            def sh(k):
                sl = [slice(PAD, PAD + s) for s in self.shape]
                sl[a] = slice(PAD + k, PAD + k + self.shape[a])
                return P[tuple(sl)]
            grads.append(sum(d * sh(m) for m, d in _FD4.items()) / self.h)
        return np.stack(grads, axis=-1)

    # evaluation -----------------------------------------------------------

    def _locate(self, x):
        t = (x - self.origin) / self.h
        # points that are nodes up to the rounding of origin + i h land exactly
        r = np.rint(t)
        t = np.where(np.abs(t - r) <= 64 * EPS * np.maximum(1.0, np.abs(t)), r, t)
        upper = np.asarray(self.shape) - 1
        inside = np.all((t >= 0) & (t <= upper), axis=-1)
        j = np.floor(t).astype(np.int64)
        return t, j, t - j, inside

    def _interp(self, x, deriv=None):
        _, j, f, inside = self._locate(x)
        out = np.zeros(x.shape[:-1])
        if not inside.any():
            return out, inside
        ji, fi = j[inside], f[inside]
        W = [stencil_dweights(fi[:, a]) / self.h if deriv == a else stencil_weights(fi[:, a])
             for a in range(self.n)]
        P = self._padded
        if self.n == 1:
            idx = ji[:, 0, None] + STENCIL + PAD
            acc = np.sum(W[0] * P[idx], axis=-1)
        else:
            i0 = (ji[:, 0, None] + STENCIL + PAD)[:, :, None]
            i1 = (ji[:, 1, None] + STENCIL + PAD)[:, None, :]
            acc = np.einsum("mk,ml,mkl->m", W[0], W[1], P[i0, i1])
        out[inside] = acc
        return out, inside

    def sample(self, x):
        x = as_points(x, self.n)
        val, inside = self._interp(x)
        if not inside.all():
            val[~inside] = self.exterior.value(x[~inside])
        return val

    def gradient(self, x):
        """Gradient of the interpolant (exterior model outside the box)."""
        x = as_points(x, self.n)
        out = np.empty(x.shape)
        for a in range(self.n):
            d, inside = self._interp(x, deriv=a)
            out[..., a] = d
        if not inside.all():
            out[~inside] = self.exterior.grad(x[~inside])
        return out

    def offset_differences(self, rows, off):
        """u(x_i + o_q) - u(x_i) for nodes ``rows`` (r, n) and offsets (q, n).

        Each axis is mirrored by the sign of the offset so that a point in a
        cell touching x_i uses weights measured from x_i itself; the
        difference is then formed from small weights and stays accurate for
        offsets far below the grid spacing."""
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.n)
        off = np.asarray(off, dtype=float).reshape(-1, self.n)
        sgn = np.where(off < 0, -1, 1)
        gpos = np.abs(off) / self.h
        b = np.floor(gpos).astype(np.int64)
        f = gpos - b
        near = np.all(b == 0, axis=1)
        P = self._padded
        upper = np.asarray(self.shape) - 1
        pos = rows[:, None, :] + (sgn * gpos)[None]
        inside = np.all((pos >= 0) & (pos <= upper), axis=-1)
        ux = P[tuple((rows + PAD).T)]
        if self.n == 1:
            W = np.where(near[:, None], stencil_delta(f[:, 0]), stencil_weights(f[:, 0]))
            idx = rows[:, None, None, 0] + (sgn[:, 0, None] * (b[:, 0, None] + STENCIL))[None] + PAD
            idx = np.clip(idx, 0, P.shape[0] - 1)
            acc = np.einsum("qk,rqk->rq", W, P[idx])
        else:
            c0, c1 = stencil_weights(f[:, 0]), stencil_weights(f[:, 1])
            d0, d1 = stencil_delta(f[:, 0]), stencil_delta(f[:, 1])
            e = np.zeros(6)
            e[2] = 1.0
            W = np.einsum("qk,ql->qkl", c0, c1)
            Wd = (np.einsum("qk,ql->qkl", d0, d1) + np.einsum("qk,l->qkl", d0, e)
                  + np.einsum("k,ql->qkl", e, d1))
            W = np.where(near[:, None, None], Wd, W)
            i0 = rows[:, None, None, None, 0] + (sgn[:, 0, None] * (b[:, 0, None] + STENCIL))[None, :, :, None]
            i1 = rows[:, None, None, None, 1] + (sgn[:, 1, None] * (b[:, 1, None] + STENCIL))[None, :, None, :]
            i0 = np.clip(i0 + PAD, 0, P.shape[0] - 1)
            i1 = np.clip(i1 + PAD, 0, P.shape[1] - 1)
            acc = np.einsum("qkl,rqkl->rq", W, P[i0, i1])
        out = np.where(near[None, :], acc, acc - ux[:, None])
        if not inside.all():
            xs = self.origin + self.h * rows[:, None, :] + off[None, :, :]
            out[~inside] = (self.exterior.value(xs[~inside])
                            - np.broadcast_to(ux[:, None], inside.shape)[~inside])
        return out, inside

    def reflected(self, lam: float, axis: int) -> "GridField":
        """The field x -> u(x^lam) as a grid field on the mirrored box.

        Exact when the exterior model is Zero (the Hermite interpolant is
        mirror-equivariant); otherwise use :func:`reflect`."""
        if not isinstance(self.exterior, Zero):
            raise ValueError("eager reflection needs a zero exterior")
        origin = self.origin.copy()
        origin[axis] = 2 * lam - self.upper[axis]
        vals = np.flip(self.values, axis=axis)
        return GridField(origin, self.h, vals, self.exterior, self.meta)

    def node_index(self, x, tol: float = 1e-9):
        """Index tuple of the node at x, or None when x is not a node."""
        t = (np.asarray(x, dtype=float).reshape(self.n) - self.origin) / self.h
        j = np.rint(t)
        if np.all(np.abs(t - j) <= tol) and np.all(j >= 0) and np.all(j <= np.asarray(self.shape) - 1):
            return j.astype(np.int64)
        return None

    def decay(self) -> Decay:
        R0 = self.box_radius
        if isinstance(self.exterior, Zero):
            return Decay(R0, 0.0, 0.0)
        return Decay(R0, abs(self.exterior.c), self.exterior.beta)

    def sup_abs(self) -> float:
        return float(np.abs(self.values).max())

    def __repr__(self):
        return (f"GridField(n={self.n}, shape={self.shape}, h={self.h:.4g}, "
                f"exterior={self.exterior.spec()})")


class AnalyticField(ScalarField):
    """u given by a vectorized callback ``func(points) -> values``.

    ``decay`` declares |u(x)| <= c |x|^-beta for |x| >= radius; a compactly
    supported field declares ``Decay(support_radius, 0, 0)``.
    """

    FD_STEP = 1e-3

    def __init__(self, n: int, func: Callable, grad: Callable | None = None,
                 decay: Decay | None = None, label: str = "analytic"):
        if not 1 <= n <= 3:
            raise ValueError("analytic fields need n <= 3")
        self.n = n
        self.func = func
        self.grad = grad
        self._decay = decay if decay is not None else Decay(0.0, math.inf, 0.0)
        self.label = label

    def sample(self, x):
        x = as_points(x, self.n)
        return np.asarray(self.func(x), dtype=float) * np.ones(x.shape[:-1])

    def gradient(self, x):
        x = as_points(x, self.n)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float) * np.ones(x.shape)
        h = self.FD_STEP
        out = np.empty(x.shape)
        for a in range(self.n):
            e = np.zeros(self.n)
            e[a] = h
            out[..., a] = (-self.func(x + 2 * e) + 8 * self.func(x + e)
                           - 8 * self.func(x - e) + self.func(x - 2 * e)) / (12 * h)
        return out

    def decay(self) -> Decay:
        return self._decay

    def __repr__(self):
        return f"AnalyticField(n={self.n}, {self.label})"


def reflect_points(x, lam: float, axis: int):
    x = np.array(x, dtype=float, copy=True)
    x[..., axis] = 2 * lam - x[..., axis]
    return x


class ReflectedField(ScalarField):
    """x -> u(x^lam), the reflection across {x_axis = lam}, evaluated lazily."""

    def __init__(self, base: ScalarField, lam: float, axis: int):
        if not 0 <= axis < base.n:
            raise ValueError(f"axis {axis} out of range for n = {base.n}")
        self.base, self.lam, self.axis, self.n = base, float(lam), int(axis), base.n

    def sample(self, x):
        x = as_points(x, self.n)
        return self.base.sample(reflect_points(x, self.lam, self.axis))

    def gradient(self, x):
        x = as_points(x, self.n)
        g = self.base.gradient(reflect_points(x, self.lam, self.axis))
        g[..., self.axis] *= -1
        return g

    def decay(self) -> Decay:
        d = self.base.decay()
        shift = 2 * abs(self.lam)
        if shift == 0:
            return d
        # |x^lam| >= |x| - 2|lam| >= |x|/2 once |x| >= 4|lam|
        return Decay(max(d.radius + shift, 2 * shift), d.c * 2.0 ** abs(d.beta), d.beta)


def reflect(field: ScalarField, lam: float, axis: int) -> ReflectedField:
    return ReflectedField(field, lam, axis)


class CombinedField(ScalarField):
    """sum_k coef_k * field_k."""

    def __init__(self, fields, coefs):
        fields, coefs = list(fields), [float(c) for c in coefs]
        if len({f.n for f in fields}) != 1 or len(fields) != len(coefs):
            raise ValueError("fields must share a dimension, one coefficient each")
        self.fields, self.coefs, self.n = fields, coefs, fields[0].n

    def sample(self, x):
        x = as_points(x, self.n)
        return sum(c * f.sample(x) for f, c in zip(self.fields, self.coefs))

    def gradient(self, x):
        x = as_points(x, self.n)
        return sum(c * f.gradient(x) for f, c in zip(self.fields, self.coefs))

    def decay(self) -> Decay:
        ds = [f.decay() for f, c in zip(self.fields, self.coefs) if c != 0 and f.decay().c != 0]
        radius = max([f.decay().radius for f in self.fields])
        if not ds:
            return Decay(radius, 0.0, 0.0)
        beta = min(d.beta for d in ds)
        # c_k |x|^-beta_k <= c_k R^(beta - beta_k) |x|^-beta for |x| >= R >= 1
        R = max(radius, 1.0)
        c = sum(abs(cf) * f.decay().c * R ** (beta - f.decay().beta)
                for f, cf in zip(self.fields, self.coefs) if cf != 0 and f.decay().c != 0)
        return Decay(R, c, beta)


# ---------------------------------------------------------------------------
# constructors


def constant(n: int, c: float) -> AnalyticField:
    return AnalyticField(n, lambda x: np.full(x.shape[:-1], float(c)),
                         lambda x: np.zeros(x.shape), Decay(0.0, abs(c), 0.0), f"const({c})")


def gaussian(n: int, center=None, width: float = 1.0, amplitude: float = 1.0,
             scales=None) -> AnalyticField:
    """amplitude * exp(-sum_i ((x_i - c_i)/(width*scale_i))^2)."""
    c = np.zeros(n) if center is None else np.asarray(center, float).reshape(n)
    sc = width * (np.ones(n) if scales is None else np.asarray(scales, float).reshape(n))

    def f(x):
        return amplitude * np.exp(-np.sum(((x - c) / sc) ** 2, axis=-1))

    def df(x):
        return f(x)[..., None] * (-2 * (x - c) / sc**2)

    # exp(-r^2) r^4 <= 4 e^-2 < 0.55 (unit width); shifted by |c| and scaled
    rad = float(np.linalg.norm(c))
    smax = float(sc.max())
    return AnalyticField(n, f, df, Decay(2 * rad, amplitude * 0.55 * (2 * smax) ** 4, 4.0),
                         f"gaussian(c={c.tolist()}, w={sc.tolist()})")


def bump(n: int, center=None, radius: float = 1.0, amplitude: float = 1.0) -> AnalyticField:
    """Smooth radial decreasing cutoff, amplitude * exp(1 - 1/(1 - |x-c|^2/r^2))."""
    c = np.zeros(n) if center is None else np.asarray(center, float).reshape(n)

    def f(x):
        q = np.sum((x - c) ** 2, axis=-1) / radius**2
        out = np.zeros_like(q)
        m = q < 1
        out[m] = amplitude * np.exp(1.0 - 1.0 / (1.0 - q[m]))
        return out

    def df(x):
        q = np.sum((x - c) ** 2, axis=-1) / radius**2
        out = np.zeros(x.shape)
        m = q < 1
        val = amplitude * np.exp(1.0 - 1.0 / (1.0 - q[m]))
        dq = 2 * (x[m] - c) / radius**2
        out[m] = (-val / (1.0 - q[m]) ** 2)[:, None] * dq
        return out

    return AnalyticField(n, f, df, Decay(float(np.linalg.norm(c)) + radius, 0.0, 0.0),
                         f"bump(c={c.tolist()}, r={radius})")


def radial_poly(n: int, radius: float = 1.0) -> AnalyticField:
    """(1 - |x|^2/R^2)_+^2."""

    def f(x):
        q = 1.0 - np.sum(x**2, axis=-1) / radius**2
        return np.where(q > 0, q, 0.0) ** 2

    def df(x):
        q = 1.0 - np.sum(x**2, axis=-1) / radius**2
        return (np.where(q > 0, -4 * q / radius**2, 0.0))[..., None] * x

    return AnalyticField(n, f, df, Decay(radius, 0.0, 0.0), f"radial_poly(R={radius})")


def algebraic_decay(n: int, center=None, power: float = 2.0) -> AnalyticField:
    """(1 + |x - c|^2)^-power; decays like |x|^-2 power."""
    c = np.zeros(n) if center is None else np.asarray(center, float).reshape(n)

    def f(x):
        return (1.0 + np.sum((x - c) ** 2, axis=-1)) ** (-power)

    def df(x):
        q = 1.0 + np.sum((x - c) ** 2, axis=-1)
        return (-2 * power * q ** (-power - 1))[..., None] * (x - c)

    rad = float(np.linalg.norm(c))
    # |x - c| >= |x|/2 for |x| >= 2|c|
    return AnalyticField(n, f, df, Decay(2 * rad, 4.0**power, 2 * power),
                         f"algebraic_decay(c={c.tolist()}, power={power})")


# ---------------------------------------------------------------------------
# grids


def ball_grid(n: int, N: int, radius: float = 1.0, margin_frac: float = 0.125,
              exterior=None) -> GridField:
    """Zero grid field on a box around the ball B_radius.

    The spacing is chosen so that +-radius fall on nodes along each axis and
    ``margin`` nodes lie between the sphere and the box edge.  Refining
    with ``N -> 2(N-1)+1`` nests the grids exactly.
    """
    if N < 8:
        raise ValueError("need N >= 8")
    m = max(3, int(round(margin_frac * (N - 1))))
    inner = N - 1 - 2 * m
    if inner < 2:
        raise ValueError("grid too small for the requested margin")
    h = 2.0 * radius / inner
    origin = np.full(n, -radius - m * h)
    meta = {"domain": f"ball:{radius!r}", "margin": m}
    return GridField(origin, h, np.zeros((N,) * n), exterior or Zero(), meta)


def sample_to_grid(field: ScalarField, like: GridField, exterior=None) -> GridField:
    vals = field.sample(like.nodes())
    return GridField(like.origin, like.h, vals, exterior or like.exterior, like.meta)


# ---------------------------------------------------------------------------
# tail space


@dataclass
class TailReport:
    integral_estimate: float
    in_L_g: bool
    in_L_gprime: bool
    truncation_radius: float
    truncation_bound: float
    gprime_integral_estimate: float = math.nan
    gprime_truncation_bound: float = math.nan
    s: float = math.nan
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def power_tail_integral(Y, a: float, e: float, w: float) -> float:
    """Upper bound for int_1^inf g(a rho^e) rho^(-w-1) d rho, a >= 0.

    Uses g(alpha t) <= alpha^(p- - 1) g(t) for alpha <= 1 and
    g(alpha t) <= alpha^(p+ - 1) g(t) for alpha >= 1.
    """
    if a == 0:
        return 0.0
    ex = Y.p_minus - 1 if e <= 0 else Y.p_plus - 1
    rate = w - e * ex
    if rate <= 0:
        return math.inf
    return float(Y.g(a)) / rate


def _radial_breaks(R: float, fine: float) -> np.ndarray:
    lin = np.arange(0.0, min(R, 4.0) + 1e-12, fine)
    b = list(lin)
    r = b[-1]
    while r < R:
        r = min(2 * r, R)
        b.append(r)
    return np.unique(np.asarray(b))


def directions(n: int, m: int):
    """Unit directions with weights summing to |S^{n-1}|, antipodally paired:
    the second half of the array is the negation of the first half."""
    if n == 1:
        d = np.array([[1.0], [-1.0]])
        return d, np.ones(2)
    if n == 2:
        M = 2 * max(2, m // 2)
        th = 2 * np.pi * np.arange(M // 2) / M
        half = np.stack([np.cos(th), np.sin(th)], axis=-1)
        w = np.full(M, 2 * np.pi / M)
        return np.concatenate([half, -half]), w
    # n = 3: Gauss-Legendre in cos(polar) x trapezoid in azimuth
    k = max(2, m // 2)
    z, wz = np.polynomial.legendre.leggauss(2 * k)
    M = 4 * k
    ph = 2 * np.pi * np.arange(M) / M
    Z, P = np.meshgrid(z, ph, indexing="ij")
    WZ = np.broadcast_to(wz[:, None], Z.shape)
    rho = np.sqrt(1 - Z**2)
    pts = np.stack([rho * np.cos(P), rho * np.sin(P), Z], axis=-1).reshape(-1, 3)
    w = (WZ * (2 * np.pi / M)).reshape(-1)
    # keep one of each antipodal pair (z > 0 half), then append negations
    keep = pts[:, 2] > 0
    half, wh = pts[keep], w[keep]
    return np.concatenate([half, -half]), np.concatenate([wh, wh])


def gauss_panels(breaks, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = np.asarray(breaks[:-1]), np.asarray(breaks[1:])
    mid, half = (a + b) / 2, (b - a) / 2
    r = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    wr = (half[:, None] * w[None, :]).reshape(-1)
    return r, wr


def check_tail_membership(field: ScalarField, Y, s: float, R_max: float = 50.0,
                          quad_pts: int = 16) -> TailReport:
    """Integrate the L_g integrand g(|u|/(1+|x|^s)) / (1+|x|^(n+s)) over
    |x| <= R and bound the rest from the field's declared decay."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    n = field.n
    dec = field.decay()
    R = max(float(R_max), dec.radius, 1.0)
    notes = []
    if R > R_max:
        notes.append(f"truncation radius raised to {R:g} to reach the decay region")
    fine = 0.125
    if isinstance(field, GridField):
        fine = min(fine, 2 * field.h)
    r, wr = gauss_panels(_radial_breaks(R, fine), max(quad_pts, 4))
    dirs, wd = directions(n, 4 * quad_pts)
    pts = r[:, None, None] * dirs[None, :, :]
    u = np.abs(field.sample(pts))
    arg = u / (1 + r[:, None] ** s)
    jac = (wr * r ** (n - 1) / (1 + r ** (n + s)))[:, None] * wd[None, :]
    I_g = float(np.sum(Y.g(arg) * jac))
    I_gp = float(np.sum(Y.gprime(arg) * jac))

    S = sphere_area(n)
    gamma = dec.beta + s
    if dec.c == 0:
        rem = 0.0
    else:
        rem = S * R ** (-s) * power_tail_integral(Y, dec.c * R ** (-gamma), -gamma, s)
    if not math.isfinite(rem):
        raise UnboundedTail(
            f"exterior growth |x|^{-dec.beta:g} defeats the L_g bound for p+ = {Y.p_plus:g}, s = {s:g}")
    # inclusion argument: g'(t) <= g'(1) on t <= 1, <= (p+ - 1) g(t) on t > 1
    rem_p = 0.0 if dec.c == 0 else S * float(Y.gprime(1.0)) * R ** (-s) / s + (Y.p_plus - 1) * rem
    ok = math.isfinite(I_g)
    return TailReport(
        integral_estimate=I_g + rem,
        in_L_g=ok,
        in_L_gprime=ok and math.isfinite(I_gp) and math.isfinite(rem_p),
        truncation_radius=R,
        truncation_bound=rem,
        gprime_integral_estimate=I_gp + rem_p,
        gprime_truncation_bound=rem_p,
        s=s,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# serialization: text header + flat body (binary float64 LE or CSV)

MAGIC = "fracg-field 1"


def save_field(field: GridField, path, body: str = "bin") -> Path:
    path = Path(path)
    if body not in ("bin", "csv"):
        raise ValueError("body must be 'bin' or 'csv'")
    body_path = path.with_name(path.name + "." + body)
    lines = [
        f"format = {MAGIC}",
        f"n = {field.n}",
        "origin = " + ",".join(repr(float(o)) for o in field.origin),
        f"h = {field.h!r}",
        "shape = " + ",".join(str(s) for s in field.shape),
        f"exterior = {field.exterior.spec()}",
        f"body = {body_path.name}",
        f"encoding = {'float64-le' if body == 'bin' else 'csv'}",
    ]
    for k in sorted(field.meta):
        lines.append(f"meta.{k} = {field.meta[k]}")
    path.write_text("\n".join(lines) + "\n")
    if body == "bin":
        body_path.write_bytes(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    else:
        vals = field.values.reshape(field.shape[0], -1)
        body_path.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in vals) + "\n")
    return path


def _parse_header(text: str) -> dict:
    hdr = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FieldFormatError(f"line {lineno}: expected 'key = value'")
        k, v = (p.strip() for p in line.split("=", 1))
        hdr[k] = v
    return hdr


def load_field(path) -> GridField:
    path = Path(path)
    hdr = _parse_header(path.read_text())
    if hdr.get("format") != MAGIC:
        raise FieldFormatError(f"{path}: not a field header")
    try:
        n = int(hdr["n"])
        origin = [float(v) for v in hdr["origin"].split(",")]
        h = float(hdr["h"])
        shape = tuple(int(v) for v in hdr["shape"].split(","))
        exterior = parse_exterior(hdr["exterior"])
        body_path = path.with_name(hdr["body"])
        enc = hdr.get("encoding", "float64-le")
    except KeyError as exc:
        raise FieldFormatError(f"{path}: missing header key {exc}") from exc
    if len(shape) != n:
        raise FieldFormatError(f"{path}: shape does not match n")
    if enc == "float64-le":
        vals = np.frombuffer(body_path.read_bytes(), dtype="<f8")
    else:
        vals = np.loadtxt(body_path, delimiter=",", ndmin=1).reshape(-1)
    if vals.size != math.prod(shape):
        raise FieldFormatError(f"{body_path}: expected {math.prod(shape)} samples, got {vals.size}")
    meta = {k[5:]: v for k, v in hdr.items() if k.startswith("meta.")}
    return GridField(origin, h, vals.reshape(shape).astype(float), exterior, meta)
