import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracg.fields import (AnalyticField, CombinedField, algebraic_decay, ball_grid, bump, constant,
                          radial_poly, sample_to_grid)
from fracg.operator import OperatorParams, eval_fracg
from fracg.qualitative import (AntisymmetricField, EmptyMask, HalfSpace, HypothesisViolated,
                               NotPositive, ReflectionFrame, boundary_estimate_probe,
                               check_antisymmetric_mp, check_max_principle, liouville_probe,
                               moving_planes_audit, node_compatible, operator_difference,
                               whole_space_symmetry_probe)
from fracg.solver import Nonlinearity, ball_problem, solve_dirichlet
from fracg.young import make_builtin

Y3 = make_builtin("power", [3])
FAST = OperatorParams(0.5, quad_near=8, quad_far=8)


@pytest.fixture(scope="module")
def ball():
    """Solved f = 1 ball problem with its operator values on the mask."""
    pr = ball_problem(Y3, FAST, 1, 129, Nonlinearity.constant(1.0))
    sol = solve_dirichlet(pr)
    return pr, sol, pr.operator.apply(sol.field)


# -- frames and antisymmetric fields ------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(-1.5, 1.5), axis=st.integers(0, 1), seed=st.integers(0, 2**31))
def test_antisymmetry_exact(lam, axis, seed):
    u = bump(2, [0.3, -0.2], 1.2)
    w = AntisymmetricField(u, ReflectionFrame(axis, lam))
    x = np.random.default_rng(seed).uniform(-2, 2, (200, 2))
    a, b = w.pair(x)
    assert np.all(a + b == 0.0)


def test_w_vanishes_on_plane():
    u = AnalyticField(2, lambda x: np.exp(-x[..., 0] ** 2 - 2 * x[..., 1] ** 2) + x[..., 1])
    fr = ReflectionFrame(1, 0.4)
    pts = np.stack([np.linspace(-2, 2, 50), np.full(50, 0.4)], -1)
    assert np.all(AntisymmetricField(u, fr).sample(pts) == 0.0)


def test_frame_basics():
    fr = ReflectionFrame(0, 0.5, "above")
    assert fr.half_space is HalfSpace.ABOVE
    assert fr.reflect(np.array([[0.2]]))[0, 0] == pytest.approx(0.8)
    assert fr.inside(np.array([[0.6], [0.5]])).tolist() == [True, False]
    assert fr.inside(np.array([[0.5]]), closed=True).tolist() == [True]
    with pytest.raises(ValueError):
        AntisymmetricField(bump(1, [0.0], 1.0), ReflectionFrame(1, 0.0))


def test_node_compatible_maps_nodes_to_nodes():
    g = ball_grid(1, 65)
    lam = node_compatible(g, 0, -0.337)
    mu = 2 * (lam - g.origin[0]) / g.h
    assert abs(mu - round(mu)) < 1e-9 and abs(lam + 0.337) <= g.h / 4


# -- maximum principle -----------------------------------------------------------------


def test_mp_constant_passes():
    r = check_max_principle(Y3, constant(2, 1.0), None, FAST, n_op_probes=32)
    assert r.verdict == "pass" and r.worst_value == 1.0
    assert r.hypotheses["operator_nonnegative"]


def test_mp_solved_ball_passes(ball):
    pr, sol, ov = ball
    r = check_max_principle(Y3, sol.field, pr.mask, FAST, tol=10 * sol.tol, op_values=ov)
    assert r.verdict == "pass" and r.worst_value >= -10 * sol.tol


def test_mp_negative_bump_flagged():
    u = CombinedField([bump(1, [0.0], 0.5)], [-1.0])
    with pytest.raises(HypothesisViolated) as ei:
        check_max_principle(Y3, u, None, FAST, n_op_probes=64)
    rep = ei.value.report
    assert rep.verdict == "hypotheses not met"
    assert abs(rep.worst_location[0]) < 0.01


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-0.5, 0.5), a=st.floats(0.01, 10.0), r=st.floats(0.15, 0.4))
def test_mp_never_passes_with_interior_minimum(c, a, r):
    g = ball_grid(1, 65)
    u = sample_to_grid(CombinedField([bump(1, [c], r)], [-a]), g)
    rep = check_max_principle(Y3, u, None, FAST, strict=False)
    assert rep.verdict != "pass"


def test_mp_empty_mask():
    g = ball_grid(1, 17)
    with pytest.raises(EmptyMask):
        check_max_principle(Y3, g, np.zeros(g.shape, dtype=bool), FAST)


# -- antisymmetric maximum principle -----------------------------------------------------


def test_amp_even_field():
    fr = ReflectionFrame(1, 0.0)
    r = check_antisymmetric_mp(Y3, radial_poly(2), fr, None, FAST, n_op_probes=8)
    assert r.verdict == "pass" and r.worst_value == 0.0
    assert "assumed" in r.hypotheses["w_bounded_on_sigma"]


def test_amp_reflection_dominates():
    fr = ReflectionFrame(1, 0.0, HalfSpace.BELOW)
    mask = lambda x: np.linalg.norm(x - np.array([0.0, -0.5]), axis=-1) < 0.3
    r = check_antisymmetric_mp(Y3, bump(2, [0.0, 0.5], 0.5), fr, mask, FAST, n_op_probes=16)
    assert r.verdict == "pass" and r.worst_value >= 0


def test_amp_solved_ball_twenty_planes(ball):
    pr, sol, ov = ball
    tol = 1e-5 * float(sol.field.values.max())
    for lam in np.linspace(-0.95, -0.05, 20):
        fr = ReflectionFrame(0, node_compatible(sol.field, 0, lam))
        r = check_antisymmetric_mp(Y3, sol.field, fr, pr.mask, FAST, tol=tol, op_values=ov)
        assert r.verdict == "pass", (lam, r.worst_value, r.hypotheses)


def test_amp_rejects_incompatible_plane(ball):
    pr, sol, ov = ball
    lam = node_compatible(sol.field, 0, -0.3) + sol.field.h / 5
    with pytest.raises(ValueError):
        check_antisymmetric_mp(Y3, sol.field, ReflectionFrame(0, lam), pr.mask, FAST, op_values=ov)


def test_reflection_operator_compatibility_grid(ball):
    """The node-based operator difference (mirror node minus node) against
    an explicit evaluation on the reflected field."""
    pr, sol, ov = ball
    g = sol.field
    lam = node_compatible(g, 0, -0.3)
    fr = ReflectionFrame(0, lam)
    full = np.full(g.shape, np.nan)
    full[pr.mask] = ov
    mu = int(round(2 * (lam - g.origin[0]) / g.h))
    for i in (20, 30, 40):
        x = g.nodes()[i]
        node_diff = full[mu - i] - full[i]
        direct = operator_difference(Y3, g, fr, x, FAST)
        assert direct == pytest.approx(node_diff, rel=1e-6, abs=1e-9)


def test_reflection_operator_compatibility_analytic():
    """Reflection invariance of the operator gives an independent route:
    A(u o refl)(x) = A(u)(x^lam)."""
    u = bump(2, [0.2, 0.3], 1.0)
    p = OperatorParams(0.5, quad_near=16, quad_far=16)
    fr = ReflectionFrame(1, -0.1)
    for x in ([0.1, -0.4], [-0.3, -0.2]):
        x = np.array(x)
        d = operator_difference(Y3, u, fr, x, p)
        ref = eval_fracg(Y3, u, fr.reflect(x), p) - eval_fracg(Y3, u, x, p)
        assert d == pytest.approx(ref, rel=1e-6, abs=1e-9)


# -- moving planes -------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
def test_moving_planes_radial(n):
    r = moving_planes_audit(Y3, radial_poly(n), n - 1, params=FAST)
    assert r.verdict == "pass" and r.lambda0_est == 0.0


def test_moving_planes_solved_ball(ball, tmp_path):
    pr, sol, ov = ball
    r = moving_planes_audit(Y3, sol, 0, params=FAST, tol=1e-5, relative=True)
    assert r.verdict == "pass" and r.lambda0_est == 0.0
    assert r.mirrored_deviation <= 1e-5 * sol.field.values.max()
    p = tmp_path / "lambdas.csv"
    r.write_lambda_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["sweep", "lambda", "min_w", "argmin"]
    assert len(rows) == len(r.per_lambda) + 1
    assert {row[0] for row in rows[1:]} == {"below", "above"}
    json.dumps(r.to_dict(), allow_nan=False)


@pytest.mark.parametrize("n", [1, 2])
def test_moving_planes_shifted_bump_fails(n):
    up = bump(n, [0.0] * (n - 1) + [0.3], 1.5)
    down = bump(n, [0.0] * (n - 1) + [-0.3], 1.5)
    ru = moving_planes_audit(Y3, up, n - 1, params=FAST)
    rd = moving_planes_audit(Y3, down, n - 1, params=FAST)
    assert ru.verdict == "fail" and rd.verdict == "fail"
    assert ru.lambda0_est != 0.0
    # mirroring the field flips the sign of the estimate
    assert rd.lambda0_est == pytest.approx(-ru.lambda0_est, abs=ru.lambda_step)


def test_moving_planes_mirrored_grid_field():
    g = sample_to_grid(CombinedField([bump(1, [0.0], 1.0), bump(1, [0.35], 0.3)], [1.0, 0.3]),
                       ball_grid(1, 129))
    m = g.with_values(g.values[::-1])
    a, b = moving_planes_audit(Y3, g, 0, params=FAST), moving_planes_audit(Y3, m, 0, params=FAST)
    assert a.verdict == b.verdict == "fail"
    assert b.lambda0_est == pytest.approx(-a.lambda0_est, abs=a.lambda_step)


def test_moving_planes_not_positive():
    with pytest.raises(NotPositive):
        moving_planes_audit(Y3, CombinedField([radial_poly(1)], [-1.0]), 0, params=FAST)


# -- boundary estimate probe ------------------------------------------------------------


def test_boundary_probe_symmetric_solution(ball):
    pr, sol, ov = ball
    r = boundary_estimate_probe(Y3, sol, 0, 0.0, params=FAST, op_values=ov)
    assert r.verdict == "hypotheses not met"
    assert r.hypotheses["w_lambda0_positive"] is False


def test_boundary_probe_zero_distance_skipped(ball):
    pr, sol, ov = ball
    r = boundary_estimate_probe(Y3, sol, 0, -0.5, params=FAST, op_values=ov)
    assert any("zero distance" in s["reason"] for s in r.skipped)
    assert all(d > 0 for d in r.deltas)


def test_boundary_probe_asymmetric_field_reports_q():
    g = sample_to_grid(CombinedField([bump(1, [0.0], 1.0), bump(1, [0.35], 0.3)], [1.0, 0.3]),
                       ball_grid(1, 129))
    lam0 = moving_planes_audit(Y3, g, 0, params=FAST).lambda0_est
    r = boundary_estimate_probe(Y3, g, 0, lam0, params=FAST)
    assert len(r.q) == len(r.lambdas) == len(r.deltas) > 0
    assert np.all(np.isfinite(r.q))
    assert r.verdict in ("consistent", "inconsistent", "hypotheses not met")


# -- Liouville and whole-space probes ----------------------------------------------------------


def test_liouville_constant():
    r = liouville_probe(Y3, constant(1, 5.0), [1, 2], FAST)
    assert r.verdict == "pass"
    assert all(p["osc"] == 0.0 and p["sup_op"] == 0.0 for p in r.per_radius)


def test_liouville_bump_not_harmonic():
    r = liouville_probe(Y3, bump(1, [0.0], 1.0), [1, 2], FAST, n_op_probes=16)
    assert r.verdict.startswith("inconclusive") and r.worst_value > r.tolerance_used


def test_liouville_perturbation_sites_detected():
    g = ball_grid(1, 129)
    rng = np.random.default_rng(0)
    u = g.with_values(1 + 1e-3 * rng.standard_normal(g.shape))
    r = liouville_probe(Y3, u, [0.5, 1.0], FAST)
    assert r.verdict.startswith("inconclusive") and len(r.detected_sites) > 0


def test_whole_space_radial():
    r = whole_space_symmetry_probe(Y3, algebraic_decay(2))
    assert r.verdict == "pass" and np.linalg.norm(r.center) < 1e-6
    assert "truncated" in str(r.context).lower() or any("truncated" in w for w in r.warnings)


def test_whole_space_translated():
    r = whole_space_symmetry_probe(Y3, algebraic_decay(2, [0.4, -0.7]))
    assert r.verdict == "pass"
    assert np.allclose(r.center, [0.4, -0.7], atol=1e-6)


def test_whole_space_radial_plus_bump_fails():
    u = CombinedField([algebraic_decay(2), bump(2, [0.5, 0.2], 0.6)], [1.0, 0.1])
    r = whole_space_symmetry_probe(Y3, u)
    assert r.verdict == "fail" and r.worst_value > r.tolerance_used
    assert len(r.shells) > 0


def test_reports_serialize():
    r = check_max_principle(Y3, constant(1, 1.0), None, FAST, n_op_probes=8)
    d = r.to_dict()
    assert d["kind"] == "MPReport" and d["verdict"] == "pass"
    json.dumps(d, allow_nan=False)

