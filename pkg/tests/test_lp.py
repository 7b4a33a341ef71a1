import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analoglp import (LinearProgram, build_dual, build_primal_dual, canonicalize,
                      kkt_residual, solve_lp)
from analoglp.errors import StructuralError
from conftest import hardware_lp, highs, small_random_lp

DIRECTIONS = [(1, 1), (1, 0), (-1, 1), (-1, -1)]


def test_rejects_inconsistent_shapes():
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], [[1.0]], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], None, None, None, None)
    with pytest.raises(ValueError):
        LinearProgram([np.nan], [[1.0]], [1.0])


def test_json_round_trip():
    lp = hardware_lp((1, 0))
    back = LinearProgram.from_json(lp.to_json())
    assert back.to_dict() == lp.to_dict()
    assert json.loads(lp.to_json())["b_ineq"] == lp.b_ineq.tolist()


def test_canonicalize_identity_case():
    clp = canonicalize(LinearProgram([1.0], [[1.0]], [1.0]))
    inner = clp.inner
    assert inner.n == 2
    np.testing.assert_array_equal(inner.a_eq, [[1.0, 0.0], [1.0, 1.0]])
    np.testing.assert_array_equal(inner.b_eq, [1.0, 0.0])
    assert clp.recover(solve_lp(inner).v_star)[0] == pytest.approx(1.0)


def test_canonicalize_negative_cost_moves_to_minus_column():
    lp = LinearProgram([-1.0], None, None, [[1.0], [-1.0]], [2.0, 0.0])
    clp = canonicalize(lp)
    np.testing.assert_array_equal(clp.inner.c, [0.0, 1.0])
    assert clp.recover(solve_lp(clp.inner).v_star)[0] == pytest.approx(2.0)


@pytest.mark.parametrize("direction", DIRECTIONS)
def test_canonical_hardware_round_trip(direction):
    lp = hardware_lp(direction)
    clp = canonicalize(lp)
    assert clp.inner.n == 4
    x = clp.recover(solve_lp(clp.inner).v_star)
    np.testing.assert_allclose(x, solve_lp(lp).v_star, atol=1e-9)


def test_canonical_structure():
    clp = canonicalize(hardware_lp((1, 1)))
    g = np.vstack([clp.inner.c, clp.inner.a])
    assert np.all(g >= 0)
    assert np.all((g > 0).any(axis=0)) and np.all((g[1:] > 0).any(axis=1))
    for plus, minus in clp.pairing:
        row = np.zeros(clp.inner.n)
        row[[plus, minus]] = 1.0
        assert any(np.array_equal(r, row) for r in clp.inner.a_eq)


def test_canonicalize_rejects_dead_variable():
    with pytest.raises(StructuralError):
        canonicalize(LinearProgram([1.0, 0.0], [[1.0, 0.0]], [1.0]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_canonicalize_preserves_optimal_value(seed):
    lp = small_random_lp(np.random.default_rng(seed))
    a = solve_lp(lp)
    b = solve_lp(canonicalize(lp).inner)
    assert a.optimal and b.optimal
    assert b.cost == pytest.approx(a.cost, abs=1e-9 * max(1, abs(a.cost)))


def test_dual_one_dimensional():
    d = build_dual(LinearProgram([1.0], [[1.0]], [1.0]))
    sol = solve_lp(d.as_min_lp())
    assert -sol.cost == pytest.approx(1.0)


def test_dual_with_box():
    lp = LinearProgram([-1.0], None, None, [[1.0], [-1.0]], [2.0, 0.0])
    sol = solve_lp(build_dual(lp).as_min_lp())
    assert -sol.cost == pytest.approx(-2.0)


def test_dual_hardware_strong_duality():
    lp = hardware_lp((1, 1))
    primal = solve_lp(lp)
    dual = solve_lp(build_dual(lp).as_min_lp())
    assert primal.cost == pytest.approx(-10.0)
    assert -dual.cost == pytest.approx(primal.cost, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strong_duality_random(seed):
    lp = small_random_lp(np.random.default_rng(seed))
    p = solve_lp(lp)
    d = solve_lp(build_dual(lp).as_min_lp())
    assert abs(p.cost + d.cost) <= 1e-8 * max(1, abs(p.cost))


def test_primal_dual_trivial_point():
    lp = LinearProgram([1.0], [[1.0]], [1.0])
    pd = build_primal_dual(lp)
    z = np.array([1.0, 1.0, -1.0])      # V = 1, y = 1, y_minus = -1
    assert pd.lp.n == 3
    assert np.max(np.abs(pd.lp.a_eq @ z - pd.lp.b_eq)) <= 1e-12
    assert lp.cost(pd.primal(z)) == pytest.approx(lp.b @ pd.dual(z))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_primal_dual_points_are_optimal(seed):
    lp = small_random_lp(np.random.default_rng(seed))
    pd = build_primal_dual(lp)
    z = solve_lp(pd.lp)
    assert z.optimal
    v = pd.primal(z.v_star)
    lam, mu = pd.multipliers(z.v_star)
    assert lp.cost(v) == pytest.approx(lp.b @ pd.dual(z.v_star), abs=1e-8)
    assert lp.cost(v) == pytest.approx(highs(lp).fun, abs=1e-7 * max(1, abs(highs(lp).fun)))
    assert kkt_residual(lp, v, lam, mu).max <= 1e-8


@pytest.mark.parametrize("direction", [(1, 1), (1, 0)])
def test_primal_dual_hardware(direction):
    lp = hardware_lp(direction)
    pd = build_primal_dual(lp)
    z = solve_lp(pd.lp)
    np.testing.assert_allclose(pd.primal(z.v_star), solve_lp(lp).v_star, atol=1e-9)


def test_kkt_residual_optimal_and_suboptimal():
    lp = hardware_lp((1, 0))
    sol = solve_lp(lp)
    assert kkt_residual(lp, sol.v_star, sol.lambda_star, sol.mu_star).max <= 1e-9
    assert kkt_residual(lp, np.array([0.0, 0.0]), sol.lambda_star, sol.mu_star).max > 0


def test_kkt_residual_empty_blocks():
    eq_only = LinearProgram([1.0, 1.0], [[1.0, 1.0]], [1.0])
    r = kkt_residual(eq_only, np.array([0.5, 0.5]), np.zeros(0), np.array([-1.0]))
    assert r.max <= 1e-12
