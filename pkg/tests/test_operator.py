import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fracg.fields import (AnalyticField, Decay, GridField, PowerDecay, ball_grid, bump, constant, gaussian,
                          radial_poly, sample_to_grid)
from fracg.operator import (CoincidentPoints, GridOperator, KernelBoundsViolated, KernelModel,
                            NotC11At, OperatorParams, TailMode, TailUnbounded, eval_fracg,
                            eval_fracg_detail, eval_on_grid, holder_quotient, perturbation_gap,
                            perturbation_study)
from fracg.young import make_builtin

Y3 = make_builtin("power", [3])
FAST = OperatorParams(0.5, quad_near=8, quad_far=8)
BUILTINS = [("power", [3]), ("power", [4]), ("power", [2.5]), ("double_phase", [3, 4]),
            ("power_log", [3])]

# recorded regression value for exp(-x^2), n = 1, power(3), s = 1/2, x = 0,
# default quadrature; the quad oracle below agrees to about 1e-7
V0 = 4.614779766318053


def quad_oracle(Y, x, s=0.5):
    """Brute-force adaptive 1-D quadrature of the operator for exp(-x^2).

    Pairs y = x + r and y = x - r, so the integrand is absolutely integrable
    without a compensator."""
    ux = np.exp(-x * x)

    def f(r):
        a = (ux - np.exp(-(x + r) ** 2)) / r**s
        b = (ux - np.exp(-(x - r) ** 2)) / r**s
        return (float(Y.g(a)) + float(Y.g(b))) / r ** (1 + s)

    return sum(quad(f, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
               for lo, hi in [(0, 0.25), (0.25, 1), (1, 5), (5, np.inf)])


# -- holder quotient ---------------------------------------------------------


def test_holder_quotient_examples():
    assert holder_quotient(constant(2, 4.0), [0.0, 0.0], [1.0, 2.0], 0.5) == 0.0
    u = AnalyticField(1, lambda x: np.abs(x[..., 0]))
    assert holder_quotient(u, [0.0], [1.0], 0.5) == -1.0
    with pytest.raises(CoincidentPoints):
        holder_quotient(u, [0.3], [0.3], 0.5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), s=st.floats(0.05, 0.95))
def test_holder_quotient_antisymmetric(seed, s):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-2, 2, (2, 20, 2))
    u = gaussian(2, center=[0.2, -0.1])
    assert np.array_equal(holder_quotient(u, x, y, s), -holder_quotient(u, y, x, s))


# -- pointwise evaluation -------------------------------------------------------


@pytest.mark.parametrize("young", BUILTINS, ids=lambda p: f"{p[0]}{p[1]}")
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("n", [1, 2])
def test_vanishes_on_constants(young, s, n):
    Y = make_builtin(*young)
    p = OperatorParams(s, quad_near=8, quad_far=8)
    v = eval_fracg(Y, constant(n, 2.7), np.full(n, 0.4), p)
    assert abs(v) <= 1e-10 * (1 + float(Y.gprime(1.0)))


def test_constant_grid_field_vanishes():
    # a constant exterior model keeps the field constant on the whole space
    g = GridField([-1.0, -1.0], 0.125, np.full((17, 17), 1.5), PowerDecay(1.5, 0.0))
    v = eval_fracg(Y3, g, np.zeros(2), FAST)
    assert abs(v) <= 1e-10 * (1 + float(Y3.gprime(1.0)))


@pytest.mark.parametrize("n", [1, 2])
def test_sign_at_extrema(n):
    u = bump(n, np.zeros(n), 1.0)
    assert eval_fracg(Y3, u, np.zeros(n), FAST) > 0
    neg = AnalyticField(n, lambda x: -u.sample(x))
    assert eval_fracg(Y3, neg, np.zeros(n), FAST) < 0


@pytest.mark.parametrize("x", [0.0, 0.3, 0.7, 1.2, 2.0])
def test_gaussian_matches_quad_oracle(x):
    v = eval_fracg(Y3, gaussian(1), np.array([x]), OperatorParams(0.5))
    ref = quad_oracle(Y3, x)
    assert v == pytest.approx(ref, rel=1e-4)


def test_gaussian_regression_value():
    v = eval_fracg(Y3, gaussian(1), np.zeros(1), OperatorParams(0.5))
    assert v == pytest.approx(V0, rel=1e-12)


def test_detail_components_add_up():
    d = eval_fracg_detail(Y3, gaussian(2), np.array([0.2, 0.1]), FAST)
    assert d.value == pytest.approx(d.near + d.far, rel=1e-14)
    assert not d.tail_added and d.tail_bound >= 0
    assert d.delta < d.R_far and d.n_points > 0


def test_quadrature_convergence():
    u = gaussian(2, center=[0.1, -0.2], scales=[1.0, 0.7])
    x = np.array([0.3, 0.1])
    vals = [eval_fracg(Y3, u, x, OperatorParams(0.5, quad_near=q, quad_far=q))
            for q in (8, 16, 32)]
    d = np.abs(np.diff(vals))
    assert d[1] * 2 <= d[0]


def test_rotation_invariance():
    u = gaussian(2, center=[0.1, -0.2], scales=[1.0, 0.7])
    p = OperatorParams(0.5, quad_near=16, quad_far=16)
    rng = np.random.default_rng(0)
    for _ in range(10):
        th = rng.uniform(0, 2 * np.pi)
        Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        x = rng.uniform(-1, 1, 2)
        uq = AnalyticField(2, lambda z, Q=Q: u.sample(z @ Q.T))
        a, b = eval_fracg(Y3, uq, x, p), eval_fracg(Y3, u, Q @ x, p)
        assert a == pytest.approx(b, rel=1e-4)


def test_radial_output_for_radial_bump():
    u = bump(2, [0.0, 0.0], 1.0)
    p = OperatorParams(0.5, quad_near=16, quad_far=16)
    r = 0.45
    vals = [eval_fracg(Y3, u, r * np.array([np.cos(a), np.sin(a)]), p)
            for a in np.linspace(0, 2 * np.pi, 7, endpoint=False)]
    assert np.ptp(vals) <= 1e-4 * np.abs(vals).max()


def test_kernel_sandwich():
    s, c1, c2 = 0.5, 0.5, 2.0
    u = bump(2, [0.0, 0.0], 1.0)
    x = np.zeros(2)
    v_osc = eval_fracg(Y3, u, x, FAST, KernelModel.oscillating(s, c1, c2))
    v_lo = eval_fracg(Y3, u, x, FAST, KernelModel.scaled(s, c2))
    v_hi = eval_fracg(Y3, u, x, FAST, KernelModel.scaled(s, c1))
    assert 0 < v_lo <= v_osc <= v_hi


def test_kernel_validation():
    assert KernelModel.oscillating(0.5, 0.5, 2.0).validate() is not None
    bad = KernelModel(lambda t: 3 * t**0.5, 0.5, 1.0, 2.0, "bad")
    with pytest.raises(KernelBoundsViolated):
        bad.validate()
    with pytest.raises(ValueError):
        KernelModel.oscillating(0.5, 2.0, 1.0)
    with pytest.raises(ValueError):
        eval_fracg(Y3, gaussian(1), np.zeros(1), FAST, KernelModel.fractional(0.3))


@pytest.mark.parametrize("kw", [dict(s=1.0), dict(s=0.0), dict(s=0.5, quad_near=4),
                                dict(s=0.5, quad_far=7), dict(s=0.5, delta_near=2.0, R_far=1.0),
                                dict(s=0.5, delta_near=-1.0)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        OperatorParams(**kw)


def test_params_message():
    with pytest.raises(ValueError, match=r"s must lie in \(0,1\)"):
        OperatorParams(1.5)


def test_not_c11_at_grid_boundary():
    g = sample_to_grid(gaussian(1), ball_grid(1, 33))
    with pytest.raises(NotC11At):
        eval_fracg(Y3, g, g.origin, FAST)


def test_tail_unbounded_in_bound_mode():
    grow = AnalyticField(1, lambda x: 1 + np.abs(x[..., 0]) ** 5, decay=Decay(1.0, 2.0, -5.0))
    p = OperatorParams(0.5, quad_near=8, quad_far=8, R_far=20.0, tail_mode=TailMode.BOUND)
    with pytest.raises(TailUnbounded):
        eval_fracg(Y3, grow, np.zeros(1), p)


# -- grid evaluation ------------------------------------------------------------


def interior(g):
    return ~g.boundary_nodes() & (np.linalg.norm(g.nodes(), axis=-1) < 0.9)


def test_eval_on_grid_constant_is_zero():
    g = GridField([-1.0, -1.0], 0.125, np.full((17, 17), 2.0), PowerDecay(2.0, 0.0))
    out = eval_on_grid(Y3, g, interior(g), FAST)
    m = interior(g)
    assert np.all(np.abs(out[m]) <= 1e-10 * (1 + float(Y3.gprime(1.0))))
    assert np.all(np.isnan(out[~m]))


def test_eval_on_grid_single_node_matches_pointwise():
    g = sample_to_grid(bump(1, [0.1], 0.8), ball_grid(1, 65))
    mask = np.zeros(g.shape, dtype=bool)
    mask[40] = True
    out = eval_on_grid(Y3, g, mask, FAST)
    ref = eval_fracg(Y3, g, g.nodes()[40], FAST)
    assert out[40] == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_eval_on_grid_analytic_needs_grid():
    with pytest.raises(ValueError):
        eval_on_grid(Y3, gaussian(1), np.ones(5, bool), FAST)
    g = ball_grid(1, 17)
    m = interior(g)
    out = eval_on_grid(Y3, gaussian(1), m, FAST, grid=g)
    assert out[8] == pytest.approx(eval_fracg(Y3, gaussian(1), np.zeros(1), FAST))


@pytest.mark.parametrize("n,N", [(1, 129), (2, 33)])
def test_eval_on_grid_mirror_symmetric(n, N):
    g = sample_to_grid(radial_poly(n), ball_grid(n, N))
    m = interior(g)
    out = eval_on_grid(Y3, g, m, FAST)
    for ax in range(n):
        flipped = np.flip(out, axis=ax)
        ok = m & np.flip(m, axis=ax)
        assert np.allclose(out[ok], flipped[ok], rtol=1e-8, atol=1e-12)


def test_eval_on_grid_thread_independent():
    g = sample_to_grid(gaussian(2, center=[0.2, 0.0]), ball_grid(2, 17))
    m = interior(g)
    a = eval_on_grid(Y3, g, m, FAST, threads=1)
    b = eval_on_grid(Y3, g, m, FAST, threads=3)
    assert np.array_equal(a, b, equal_nan=True)


def test_grid_operator_rejects_boundary_mask():
    g = ball_grid(1, 17)
    with pytest.raises(NotC11At):
        GridOperator(Y3, g, np.ones(g.shape, dtype=bool), FAST)


def test_jacobian_matches_finite_differences():
    g = sample_to_grid(bump(1, [0.0], 0.9), ball_grid(1, 33))
    m = interior(g)
    op = GridOperator(Y3, g, m, FAST)
    U = g.values[m]
    J = op.jacobian(U)
    e = 1e-6
    fd = np.empty_like(J)
    for j in range(op.m):
        d = np.zeros(op.m)
        d[j] = e
        fd[:, j] = (op.apply(U + d) - op.apply(U - d)) / (2 * e)
    assert np.abs(J - fd).max() <= 1e-5 * np.abs(J).max()


# -- perturbation -----------------------------------------------------------------


def test_perturbation_zero_eps():
    assert perturbation_gap(Y3, gaussian(1), [0.5], 0.0, 0.5, OperatorParams(0.5)) == (0.0, 0.0)


def test_perturbation_monotone_and_linear():
    p = OperatorParams(0.5)
    gaps = [perturbation_gap(Y3, gaussian(1), [0.5], e, 0.5, p)[0] for e in (1e-3, 1e-2, 1e-1)]
    assert gaps[0] <= gaps[1] <= gaps[2]
    rep = perturbation_study(Y3, gaussian(1), [0.5], [0.025, 0.05, 0.1], 0.5, p)
    assert rep.monotone
    g = np.array(rep.gaps) - rep.omega
    for ratio in g[:-1] / g[1:]:
        assert 0.4 <= ratio <= 0.6


def test_perturbation_bound_fits():
    gap, bound = perturbation_gap(Y3, gaussian(1), [0.5], 1e-2, 0.5, OperatorParams(0.5))
    assert gap > 0 and gap <= bound * 1.05
