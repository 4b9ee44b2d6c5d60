import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracg.fields import (AnalyticField, Decay, FieldFormatError, GridField, PowerDecay,
                          UnboundedTail, Zero, algebraic_decay, ball_grid, bump, check_tail_membership,
                          constant, gaussian, load_field, parse_exterior, radial_poly, reflect,
                          sample_to_grid, save_field, stencil_delta, stencil_weights)
from fracg.young import make_builtin

Y3 = make_builtin("power", [3])


def gauss_grid(n, h, R=7.0, ext=None):
    N = int(round(2 * R / h)) + 1
    g = GridField(np.full(n, -R), h, np.zeros((N,) * n), ext)
    return sample_to_grid(gaussian(n), g)


def test_nodes_reproduced_exactly():
    rng = np.random.default_rng(0)
    g = GridField([-1.0, -2.0], 0.1, rng.standard_normal((21, 41)))
    assert np.array_equal(g.sample(g.nodes()), g.values)


def test_constant_grid_and_zero_exterior():
    g = ball_grid(2, 33).with_values(np.ones((33, 33)))
    pts = np.random.default_rng(1).uniform(-1, 1, (50, 2))
    assert np.allclose(g.sample(pts), 1.0, atol=1e-14)
    assert np.all(g.sample(np.array([[5.0, 5.0], [-9.0, 0.0]])) == 0.0)


def test_analytic_sample():
    f = AnalyticField(2, lambda x: np.exp(-np.sum(x**2, axis=-1)))
    assert float(f.sample(np.zeros(2))) == 1.0
    assert f.sample(np.zeros((3, 2))).shape == (3,)


@pytest.mark.parametrize("n", [1, 2])
def test_interpolation_fourth_order(n):
    errs = []
    for h in (0.2, 0.1, 0.05):
        g = gauss_grid(n, h)
        # cell midpoints in the central region
        t = np.arange(-2, 2, h) + h / 2
        if n == 1:
            pts = t[:, None]
        else:
            pts = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
        exact = np.exp(-np.sum(pts**2, axis=-1))
        errs.append(np.abs(g.sample(pts) - exact).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() >= 3.5


def test_gradient_is_derivative_of_interpolant():
    g = gauss_grid(1, 0.1)
    x = np.linspace(-2, 2, 37)[:, None] + 0.013
    e = 1e-6
    fd = (g.sample(x + e) - g.sample(x - e)) / (2 * e)
    assert np.allclose(g.gradient(x)[:, 0], fd, atol=1e-7)


def test_interpolant_is_c1_across_nodes():
    rng = np.random.default_rng(4)
    g = GridField([0.0], 1.0, rng.standard_normal(20))
    for k in range(3, 16):
        lo, hi = g.gradient(np.array([[k - 1e-9]])), g.gradient(np.array([[k + 1e-9]]))
        assert abs(lo[0, 0] - hi[0, 0]) < 1e-6


def test_stencil_delta_matches_weights():
    f = np.linspace(0, 1, 11)
    w = stencil_weights(f)
    d = stencil_delta(f)
    base = np.zeros_like(w)
    base[:, 2] = 1.0               # the node j itself
    assert np.allclose(d, w - base, atol=1e-15)


def test_offset_differences_small_offsets():
    g = gauss_grid(1, 0.1)
    rows = np.array([[70]])
    off = np.array([[1e-13], [-3e-12], [0.25], [5.0]])
    d, _ = g.offset_differences(rows, off)
    x0 = g.origin + g.h * rows[0]
    ref = g.sample(x0 + off) - g.sample(x0)
    assert np.allclose(d[0, 2:], ref[2:], atol=1e-15)
    grad = g.gradient(x0[None])[0, 0]
    assert d[0, 0] == pytest.approx(grad * 1e-13, rel=1e-6, abs=1e-25)


def test_reflect_examples():
    u = AnalyticField(2, lambda x: x[..., 1])
    assert reflect(u, 0.0, 1).sample(np.array([[0.3, 0.7]]))[0] == -0.7
    assert reflect(u, 1.0, 1).sample(np.array([[0.0, 0.5]]))[0] == 1.5
    even = gaussian(2)
    pts = np.random.default_rng(2).uniform(-2, 2, (100, 2))
    assert np.allclose(reflect(even, 0.0, 1).sample(pts), even.sample(pts), rtol=0, atol=0)
    with pytest.raises(ValueError):
        reflect(u, 0.0, 2)


@settings(max_examples=50, deadline=None)
@given(lam=st.floats(-3, 3), axis=st.integers(0, 1))
def test_reflect_involution(lam, axis):
    u = gaussian(2, center=[0.3, -0.2], scales=[1.0, 0.7])
    pts = np.random.default_rng(3).uniform(-3, 3, (1000, 2))
    rr = reflect(reflect(u, lam, axis), lam, axis)
    assert np.abs(rr.sample(pts) - u.sample(pts)).max() <= 1e-12


def test_grid_reflected_matches_lazy():
    g = sample_to_grid(bump(1, [0.2], 0.6), ball_grid(1, 65))
    lam = g.origin[0] + 37 * g.h / 2
    eager = g.reflected(lam, 0)
    pts = np.linspace(-1.2, 1.2, 301)[:, None]
    assert np.allclose(eager.sample(pts), reflect(g, lam, 0).sample(pts), atol=1e-14)


def test_exterior_models():
    assert parse_exterior("zero").spec() == "zero"
    pd = parse_exterior("power_decay:2,1.5")
    assert isinstance(pd, PowerDecay)
    assert pd.value(np.array([[4.0]]))[0] == pytest.approx(2 * 4**-1.5)
    g = GridField([-1.0], 0.5, np.zeros(5), pd)
    assert g.sample(np.array([[4.0]]))[0] == pytest.approx(2 * 4**-1.5)
    assert isinstance(GridField([-1.0], 0.5, np.zeros(5)).exterior, Zero)


def test_tail_compact_bump():
    r = check_tail_membership(bump(1, [0.0], 0.5), Y3, 0.5)
    assert r.in_L_g and r.in_L_gprime and r.truncation_bound == 0.0


def test_tail_bounded_power_decay():
    g = GridField([-1.0], 0.25, np.full(9, 2.0), PowerDecay(2.0, 0.0))
    r = check_tail_membership(g, Y3, 0.5)
    assert r.in_L_g and r.in_L_gprime
    assert np.isfinite(r.truncation_bound) and r.truncation_bound > 0


def test_tail_unbounded():
    grow = AnalyticField(1, lambda x: 1 + np.abs(x[..., 0]) ** 5, decay=Decay(1.0, 2.0, -5.0))
    with pytest.raises(UnboundedTail):
        check_tail_membership(grow, Y3, 0.5)


@pytest.mark.parametrize("young", [("power", [3]), ("double_phase", [3, 4]), ("power_log", [3])])
@pytest.mark.parametrize("field", [gaussian(1), algebraic_decay(2), constant(1, 3.0)],
                         ids=["gauss", "algebraic", "const"])
def test_inclusion_g_implies_gprime(young, field):
    r = check_tail_membership(field, make_builtin(*young), 0.5)
    if r.in_L_g:
        assert r.in_L_gprime


@pytest.mark.parametrize("body", ["bin", "csv"])
def test_save_load_roundtrip(tmp_path, body):
    g = sample_to_grid(radial_poly(2), ball_grid(2, 17), PowerDecay(0.5, 2.0))
    p = save_field(g, tmp_path / "u.field", body)
    h = load_field(p)
    assert np.array_equal(h.values, g.values)
    assert np.array_equal(h.origin, g.origin) and h.h == g.h
    assert h.exterior.spec() == g.exterior.spec()
    assert h.meta["domain"] == "ball:1.0"


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "x.field"
    p.write_text("format = something else\n")
    with pytest.raises(FieldFormatError):
        load_field(p)
    g = ball_grid(1, 17)
    save_field(g, p)
    (tmp_path / "x.field.bin").write_bytes(b"\0" * 8)
    with pytest.raises(FieldFormatError):
        load_field(p)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridField([0.0], 0.1, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        GridField([0.0], 0.1, np.array([1.0, np.nan, 2.0, 3.0, 4.0]))
    with pytest.raises(ValueError):
        AnalyticField(4, lambda x: x[..., 0])
