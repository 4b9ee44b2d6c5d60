"""Young functions G with g = G' extended oddly, index estimation and
randomized certification of the elementary inequalities they satisfy.

All callables are vectorized over numpy arrays.  The index bounds
``p_minus``/``p_plus`` are the constants in

    p_minus - 1 <= t g'(t) / g(t) <= p_plus - 1,   t > 0,

and every certification constant below is assembled from them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Family",
    "YoungFunction",
    "InequalityReport",
    "InvalidExponents",
    "IndexOutOfRange",
    "NonFiniteRatio",
    "make_builtin",
    "parse_young_spec",
    "estimate_indices",
    "lemma22_constant",
    "desig_constant",
    "delta2_constant",
    "lemma22_slack",
    "lemita_slack",
    "recover_xi",
    "certify_lemma22",
    "certify_lemita",
    "certify_desig",
    "certify_scaling",
    "certify_delta2",
    "certify_all",
]

# Slack is lhs - rhs + ROUNDOFF * (sum of term magnitudes); covers the
# floating-point error of evaluating both sides, nothing more.
ROUNDOFF = 64 * np.finfo(float).eps

ESTIMATE_PAD = 1.01


class InvalidExponents(ValueError):
    pass


class IndexOutOfRange(ValueError):
    pass


class NonFiniteRatio(ValueError):
    pass


class Family(str, enum.Enum):
    power = "power"
    double_phase = "double_phase"
    power_log = "power_log"


Array = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class YoungFunction:
    """A Young function together with its index bounds.

    ``G_pos``, ``g_pos`` and ``gprime_pos`` are only ever called on
    nonnegative arguments; the public methods take care of the odd (for
    ``g``) and even (for ``G`` and ``gprime``) extensions.
    """

    G_pos: Array
    g_pos: Array
    gprime_pos: Array
    p_minus: float
    p_plus: float
    label: str

    def G(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return self.G_pos(t)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        # sign * g(|t|) makes g(-t) == -g(t) bit for bit
        return np.sign(t) * self.g_pos(np.abs(t))

    def gprime(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return self.gprime_pos(t)

    @property
    def delta2(self) -> float:
        """Constant C1 with g(a + b) <= C1 (g(a) + g(b)) for a, b >= 0."""
        return delta2_constant(self)

    def describe(self) -> dict:
        return {"label": self.label, "p_minus": self.p_minus, "p_plus": self.p_plus}


# ---------------------------------------------------------------------------
# construction


def _power(p: float):
    def G(t):
        return t**p

    def g(t):
        return p * t ** (p - 1)

    def gp(t):
        return p * (p - 1) * t ** (p - 2)

    return G, g, gp


def _double_phase(p: float, q: float):
    def G(t):
        return t**p + t**q

    def g(t):
        return p * t ** (p - 1) + q * t ** (q - 1)

    def gp(t):
        return p * (p - 1) * t ** (p - 2) + q * (q - 1) * t ** (q - 2)

    return G, g, gp


def _power_log(p: float):
    # G = t^p log(1+t); derivatives by the product rule.
    def G(t):
        return t**p * np.log1p(t)

    def g(t):
        return p * t ** (p - 1) * np.log1p(t) + t**p / (1.0 + t)

    def gp(t):
        return (
            p * (p - 1) * t ** (p - 2) * np.log1p(t)
            + 2.0 * p * t ** (p - 1) / (1.0 + t)
            - t**p / (1.0 + t) ** 2
        )

    return G, g, gp


# Range over which power_log indices are estimated.  It has to contain every
# argument the certifications evaluate g at (products alpha*t reach 1e12).
POWER_LOG_RANGE = (1e-14, 1e14)


def make_builtin(family, exponents) -> YoungFunction:
    """Build one of the built-in Young functions.

    >>> Y = make_builtin("power", [3])
    >>> float(Y.g(2.0)), Y.p_minus, Y.p_plus
    (12.0, 3.0, 3.0)
    """
    family = Family(family)
    exps = [float(e) for e in exponents]
    if not all(math.isfinite(e) for e in exps):
        raise InvalidExponents(f"non-finite exponent in {exponents!r}")

    if family is Family.power:
        if len(exps) != 1:
            raise InvalidExponents("power takes exactly one exponent")
        (p,) = exps
        if not p > 2:
            raise InvalidExponents(f"power needs p > 2, got {p}")
        G, g, gp = _power(p)
        return YoungFunction(G, g, gp, p, p, f"power({_fmt(p)})")

    if family is Family.double_phase:
        if len(exps) != 2:
            raise InvalidExponents("double_phase takes exactly two exponents")
        p, q = exps
        if not (2 < p < q):
            raise InvalidExponents(f"double_phase needs 2 < p < q, got {p}, {q}")
        G, g, gp = _double_phase(p, q)
        return YoungFunction(G, g, gp, p, q, f"double_phase({_fmt(p)},{_fmt(q)})")

    if len(exps) != 1:
        raise InvalidExponents("power_log takes exactly one exponent")
    (p,) = exps
    if not p >= 2:
        raise InvalidExponents(f"power_log needs p >= 2, got {p}")
    G, g, gp = _power_log(p)
    shape = _Shape(g, gp)
    pm, pp = estimate_indices(shape, *POWER_LOG_RANGE, n_pts=4000)
    if pm <= 2:
        raise IndexOutOfRange(f"estimated p_minus = {pm:.6g} <= 2 for power_log({_fmt(p)})")
    return YoungFunction(G, g, gp, pm, pp, f"power_log({_fmt(p)})")


def parse_young_spec(text: str) -> YoungFunction:
    """Parse ``family:e1[,e2]`` as used on the command line."""
    try:
        fam, _, rest = text.partition(":")
        exps = [float(x) for x in rest.split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidExponents(f"cannot parse Young spec {text!r}") from exc
    try:
        family = Family(fam.strip())
    except ValueError as exc:
        raise InvalidExponents(f"unknown Young family {fam!r}") from exc
    return make_builtin(family, exps)


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(x)


@dataclass(frozen=True)
class _Shape:
    g: Array
    gprime: Array


def estimate_indices(Y, t_min: float = 1e-6, t_max: float = 1e6, n_pts: int = 2000):
    """Estimate (p_minus, p_plus) from t g'(t)/g(t) on a log-uniform sample.

    The sampled extremes are rounded outward by 1.01 times the largest jump
    between the extremal sample and its neighbours, which bounds how far the
    true extremum on the sampled interval can sit from the sampled one.
    Constant ratios (pure powers) therefore come back unpadded.
    """
    if not (0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    if n_pts < 100:
        raise ValueError("need n_pts >= 100")
    t = np.geomspace(t_min, t_max, n_pts)
    gv = np.asarray(Y.g(t), dtype=float)
    gp = np.asarray(Y.gprime(t), dtype=float)
    if np.any(gv == 0) or not np.all(np.isfinite(gv)) or not np.all(np.isfinite(gp)):
        bad = t[(gv == 0) | ~np.isfinite(gv) | ~np.isfinite(gp)][0]
        raise NonFiniteRatio(f"t g'(t)/g(t) not finite at t = {bad:.3g}")
    ratio = t * gp / gv

    def pad(i):
        nb = [j for j in (i - 1, i + 1) if 0 <= j < len(ratio)]
        return ESTIMATE_PAD * max(abs(ratio[i] - ratio[j]) for j in nb)

    i_lo, i_hi = int(np.argmin(ratio)), int(np.argmax(ratio))
    return 1.0 + ratio[i_lo] - pad(i_lo), 1.0 + ratio[i_hi] + pad(i_hi)


# ---------------------------------------------------------------------------
# constants mined from the proofs


def lemma22_constant(Y) -> float:
    """C in g(b) - g(a) >= C g(b - a), b >= a.

    Minimum over the three proof cases: the mean-value branch
    2^(2-p+)(p- - 1), the a < b/2 branch 1 - 2^(1-p+), and the
    opposite-sign case 1/C1 = 2^(1-p+) from the doubling bound.
    """
    pm, pp = Y.p_minus, Y.p_plus
    return min(2.0 ** (2 - pp) * (pm - 1), 1 - 2.0 ** (1 - pp), 2.0 ** (1 - pp))


def desig_constant(Y) -> float:
    """C0 in |xi| >= C0 max(|a|, |b|) where g(b) - g(a) = g'(xi)(b - a).

    Both proof cases end in a bound g'(|xi|) >= c * g(|b|)/|b|.  Combining
    g'(t) <= (p+ - 1) g(t)/t with g(theta t) <= theta^(p- - 1) g(t) for
    theta <= 1 turns that into theta^(p- - 2) >= c / (p+ - 1):

      opposite signs, |a| >= |b|/2 : c = (p- - 1) / (2 (p+ - 1))
      |a| <= |b|/2                 : c = (1 - 2^(1 - p-)) / 2
    """
    pm, pp = Y.p_minus, Y.p_plus
    e = 1.0 / (pm - 2)
    c_opp = ((pm - 1) / (2 * (pp - 1) ** 2)) ** e
    c_far = ((1 - 2.0 ** (1 - pm)) / (2 * (pp - 1))) ** e
    return min(1.0, c_opp, c_far)


def delta2_constant(Y) -> float:
    return 2.0 ** (Y.p_plus - 1)


# ---------------------------------------------------------------------------
# pointwise slacks (>= 0 means the inequality holds)


def _slack(lhs, rhs, mag):
    return lhs - rhs + ROUNDOFF * mag


def lemma22_slack(Y, a, b, C=None):
    """Slack of g(b) - g(a) >= C g(b - a); requires b >= a."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    C = lemma22_constant(Y) if C is None else C
    gb, ga, gd = Y.g(b), Y.g(a), Y.g(b - a)
    return _slack(gb - ga, C * gd, np.abs(gb) + np.abs(ga) + C * np.abs(gd) * Y.p_plus)


def lemita_slack(Y, a, b):
    """Slack of |b| g'(|a| + |b|) >= |g(a + b) - g(a)|."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    gab, ga = Y.g(a + b), Y.g(a)
    rhs = np.abs(b) * Y.gprime(np.abs(a) + np.abs(b))
    return _slack(rhs, np.abs(gab - ga), (np.abs(gab) + np.abs(ga)) * Y.p_plus + rhs)


def recover_xi(Y, a, b, iters: int = 80):
    """|xi| with g(b) - g(a) = g'(xi)(b - a), by bisection on g'.

    g' is even and nondecreasing on [0, inf), so the level set is an
    interval; the smallest point is returned.  Returns ``(xi, ok)`` where
    ``ok`` is False when the level is not bracketed by [0, 10 max(|a|,|b|)].
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    q = (Y.g(b) - Y.g(a)) / (b - a)
    lo = np.zeros_like(q)
    hi = 10.0 * np.maximum(np.abs(a), np.abs(b))
    ok = (Y.gprime(hi) >= q) & np.isfinite(q) & (q > Y.gprime(lo))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = Y.gprime(mid) >= q
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return hi, ok


# ---------------------------------------------------------------------------
# reports


@dataclass
class InequalityReport:
    lemma_id: str
    n_samples: int
    n_violations: int
    worst_margin: float
    constant_used: float
    constant_tag: str
    sample_domain: str
    young: str
    seed: int
    worst_sample: tuple = ()
    worst_relative: float = 0.0
    n_failures: int = 0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_sample"] = [float(v) for v in self.worst_sample]
        d["passed"] = self.passed
        return d


LINEAR_RANGE = 1e3
LOG_RANGE = (1e-6, 1e6)
DEFAULT_DOMAIN = "half linear U(-1e3, 1e3), half +/- log-uniform magnitudes in [1e-6, 1e6]"


def _reals(rng: np.random.Generator, n: int, lin=LINEAR_RANGE, logr=LOG_RANGE):
    n_lin = (n + 1) // 2
    lin_part = rng.uniform(-lin, lin, n_lin)
    mags = np.exp(rng.uniform(np.log(logr[0]), np.log(logr[1]), n - n_lin))
    signs = rng.choice([-1.0, 1.0], n - n_lin)
    return np.concatenate([lin_part, signs * mags])


def _report(lemma_id, Y, slack, mag, samples, C, tag, domain, seed, n_fail=0, notes=None):
    slack = np.asarray(slack, float)
    rel = slack / np.maximum(mag, np.finfo(float).tiny)
    n = slack.size
    if n == 0:
        raise ValueError("no samples")
    i = int(np.argmin(slack))
    return InequalityReport(
        lemma_id=lemma_id,
        n_samples=int(n),
        n_violations=int(np.count_nonzero(slack < 0)),
        worst_margin=float(slack[i]),
        constant_used=float(C),
        constant_tag=tag,
        sample_domain=domain,
        young=Y.label,
        seed=int(seed),
        worst_sample=tuple(float(s[i]) for s in samples),
        worst_relative=float(rel.min()),
        n_failures=int(n_fail),
        notes=list(notes or []),
    )


def certify_lemma22(Y, n_samples: int = 100_000, seed: int = 0, range_=None) -> InequalityReport:
    rng = np.random.default_rng(seed)
    lin = range_ or LINEAR_RANGE
    x, y = _reals(rng, n_samples, lin), _reals(rng, n_samples, lin)
    a, b = np.minimum(x, y), np.maximum(x, y)
    C = lemma22_constant(Y)
    s = lemma22_slack(Y, a, b, C)
    mag = np.abs(Y.g(b)) + np.abs(Y.g(a)) + C * np.abs(Y.g(b - a))
    return _report("Lem22", Y, s, mag, (a, b), C,
                   "min{2^(2-p+)(p- - 1), 1 - 2^(1-p+), 2^(1-p+)}", DEFAULT_DOMAIN, seed)


def certify_lemita(Y, n_samples: int = 100_000, seed: int = 0, range_=None) -> InequalityReport:
    rng = np.random.default_rng(seed)
    lin = range_ or LINEAR_RANGE
    a, b = _reals(rng, n_samples, lin), _reals(rng, n_samples, lin)
    s = lemita_slack(Y, a, b)
    mag = np.abs(b) * Y.gprime(np.abs(a) + np.abs(b)) + np.abs(Y.g(a + b) - Y.g(a))
    return _report("Lemita", Y, s, mag, (a, b), 1.0, "constant 1 (no constant)", DEFAULT_DOMAIN, seed)


def certify_desig(Y, n_samples: int = 100_000, seed: int = 0, range_=None) -> InequalityReport:
    rng = np.random.default_rng(seed)
    lin = range_ or LINEAR_RANGE
    a, b = _reals(rng, n_samples, lin), _reals(rng, n_samples, lin)
    same = a == b
    while np.any(same):
        b[same] = _reals(rng, int(same.sum()), lin)
        same = a == b
    C0 = desig_constant(Y)
    xi, ok = recover_xi(Y, a, b)
    m = np.maximum(np.abs(a), np.abs(b))
    slack = np.where(ok, _slack(xi, C0 * m, xi + C0 * m), 0.0)
    notes = []
    if not ok.all():
        notes.append("bisection failed to bracket g' level on some samples; excluded")
    return _report("Desig", Y, slack, xi + C0 * m, (a, b), C0,
                   "min{1, ((p- - 1)/(2(p+ - 1)^2))^(1/(p- - 2)), "
                   "((1 - 2^(1-p-))/(2(p+ - 1)))^(1/(p- - 2))}",
                   DEFAULT_DOMAIN, seed, n_fail=int((~ok).sum()), notes=notes)


def certify_scaling(Y, n_samples: int = 100_000, seed: int = 0):
    """Returns the (MinMax_g, MinMax_G) pair of reports."""
    rng = np.random.default_rng(seed)
    lo, hi = np.log(LOG_RANGE[0]), np.log(LOG_RANGE[1])
    alpha = np.exp(rng.uniform(lo, hi, n_samples))
    t = np.exp(rng.uniform(lo, hi, n_samples))
    pm, pp = Y.p_minus, Y.p_plus
    dom = "alpha, t log-uniform in [1e-6, 1e6]"

    mn = np.minimum(alpha ** (pm - 1), alpha ** (pp - 1))
    mx = np.maximum(alpha ** (pm - 1), alpha ** (pp - 1))
    g_t, g_at = Y.g(t), Y.g(alpha * t)
    mag = g_at + mx * g_t
    s = np.minimum(_slack(g_at, mn * g_t, mag), _slack(mx * g_t, g_at, mag))
    rep_g = _report("MinMax_g", Y, s, mag, (alpha, t), 1.0,
                    "min/max{alpha^(p- - 1), alpha^(p+ - 1)}", dom, seed)

    mn = np.minimum(alpha**pm, alpha**pp) / pp
    mx = np.maximum(alpha**pm, alpha**pp) * pp
    G_t, G_at = Y.G(t), Y.G(alpha * t)
    mag = G_at + mx * G_t
    s = np.minimum(_slack(G_at, mn * G_t, mag), _slack(mx * G_t, G_at, mag))
    rep_G = _report("MinMax_G", Y, s, mag, (alpha, t), pp,
                    "min{alpha^p-, alpha^p+}/p+ and p+ max{alpha^p-, alpha^p+}", dom, seed)
    return rep_g, rep_G


def certify_delta2(Y, n_samples: int = 100_000, seed: int = 0, range_=None) -> InequalityReport:
    rng = np.random.default_rng(seed)
    lin = range_ or LINEAR_RANGE
    a, b = np.abs(_reals(rng, n_samples, lin)), np.abs(_reals(rng, n_samples, lin))
    C1 = delta2_constant(Y)
    lhs = C1 * (Y.g(a) + Y.g(b))
    rhs = Y.g(a + b)
    s = _slack(lhs, rhs, lhs + rhs * Y.p_plus)
    return _report("Delta2Sum", Y, s, lhs + rhs, (a, b), C1, "C1 = 2^(p+ - 1)", DEFAULT_DOMAIN, seed)


def certify_all(Y, n_samples: int = 100_000, seed: int = 0) -> list[InequalityReport]:
    """Every certification for one Young function, in a fixed order."""
    reps = [
        certify_lemma22(Y, n_samples, seed),
        certify_lemita(Y, n_samples, seed),
        certify_desig(Y, n_samples, seed),
    ]
    reps.extend(certify_scaling(Y, n_samples, seed))
    reps.append(certify_delta2(Y, n_samples, seed))
    return reps
