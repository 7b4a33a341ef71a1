import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analoglp import (Circuit, LinearProgram, canonicalize, compile, compute_ucrit,
                      cost_sensitivity, kkt_residual, optimality_residual, reconstruct_duals,
                      solve_lp, solve_nocost_qp, solve_steady_state, steady_state_residuals,
                      thevenin_resistance, verify_equivalence)
from analoglp.circuit import COST, EQUALITY, cost_port_resistance
from analoglp.errors import AssumptionError
from analoglp.generate import RandomLpSpec, generate_random_lp
from analoglp.oracle import enumerate_vertices
from analoglp.steady import solve_exhaustive, solve_partition
from conftest import hardware_lp, small_random_lp

# critical voltages of the hardware LP, frozen from the bisected optimality
# threshold of the primal circuit (largest u whose operating point is optimal)
HW_UCRIT = {(1, 1): -305 / 17, (1, 0): -602 / 17, (-1, 1): -155 / 7, (-1, -1): -305 / 17}
HW_OPT = {(1, 1): (5, 5), (1, 0): (7, 0), (-1, 1): (-5, 5), (-1, -1): (-5, -5)}


def solve_lp_circuit(lp, offset):
    clp = canonicalize(lp)
    c = compile(clp)
    u = compute_ucrit(lp) - offset
    st_ = solve_steady_state(c, u)
    return clp, c, st_


def test_equality_only_trivial():
    clp = canonicalize(LinearProgram([1.0], [[1.0]], [1.0]))
    st_ = solve_steady_state(compile(clp), 0.0)
    assert clp.recover(st_.v)[0] == pytest.approx(1.0)


def test_trivial_ucrit_finite():
    lp = LinearProgram([1.0], [[1.0]], [1.0])
    u = compute_ucrit(lp)
    assert np.isfinite(u)
    clp, c, st_ = solve_lp_circuit(lp, 1.0)
    assert clp.recover(st_.v)[0] == pytest.approx(1.0)


@pytest.mark.parametrize("direction", list(HW_UCRIT))
def test_hardware_ucrit_frozen(direction):
    assert compute_ucrit(hardware_lp(direction)) == pytest.approx(HW_UCRIT[direction], abs=1e-8)


@pytest.mark.parametrize("direction", list(HW_OPT))
@pytest.mark.parametrize("offset", [0.0, 1.0, 5.0])
def test_hardware_optimum(direction, offset):
    clp, c, st_ = solve_lp_circuit(hardware_lp(direction), offset)
    np.testing.assert_allclose(clp.recover(st_.v), HW_OPT[direction], atol=1e-6)
    assert max(steady_state_residuals(c, st_).values()) <= 1e-8


def test_above_ucrit_deviates():
    lp = hardware_lp((1, 0))
    clp, c, st_ = solve_lp_circuit(lp, -50.0)
    assert abs(lp.cost(clp.recover(st_.v)) - solve_lp(lp).cost) > 1e-3
    assert optimality_residual(c, st_) > 1e-6


def test_missing_assumptions():
    with pytest.raises(AssumptionError) as err:
        compute_ucrit(LinearProgram([1.0], None, None, [[1.0], [-1.0]], [0.0, -1.0]))
    assert err.value.which == "primal"
    with pytest.raises(AssumptionError) as err:
        compute_ucrit(LinearProgram([-1.0, 0.0], None, None, [[-1.0, 1.0]], [0.0]))
    assert err.value.which == "dual"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 1.0, 5.0]))
def test_residual_suite_and_cost(seed, offset):
    lp = small_random_lp(np.random.default_rng(seed))
    clp, c, st_ = solve_lp_circuit(lp, offset)
    res = steady_state_residuals(c, st_)
    assert max(res.values()) <= 1e-8, res
    ref = solve_lp(lp).cost
    assert abs(lp.cost(clp.recover(st_.v)) - ref) <= 1e-6 * max(1, abs(ref))
    cur = st_.i[c.ineq_rows]
    slack = c.a[c.ineq_rows] @ st_.v - c.b[c.ineq_rows]
    assert np.min(cur, initial=0) >= -1e-9
    assert np.max(np.abs(cur * slack), initial=0) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unique_optimum_coordinates(seed):
    rng = np.random.default_rng(seed)
    lp = small_random_lp(rng, n=int(rng.integers(1, 4)), q=int(rng.integers(1, 3)))
    verts = enumerate_vertices(lp)
    costs = np.array([lp.cost(v) for v in verts])
    if np.sum(costs <= costs.min() + 1e-7) != 1:
        return                           # optimum not unique; cost is checked elsewhere
    clp, c, st_ = solve_lp_circuit(lp, 1.0)
    np.testing.assert_allclose(clp.recover(st_.v), verts[int(np.argmin(costs))], atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partition_and_exhaustive_agree(seed):
    lp = small_random_lp(np.random.default_rng(seed), q=2)
    clp, c, st_ = solve_lp_circuit(lp, 1.0)
    ex = solve_exhaustive(c, st_.u_cost)
    positions = np.flatnonzero(np.isin(c.ineq_rows, st_.active_set))
    again = solve_partition(c, st_.u_cost, positions)
    assert ex.cost == pytest.approx(st_.cost, abs=1e-8 * max(1, abs(st_.cost)))
    np.testing.assert_allclose(again.v, st_.v, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reconstructed_duals_certify_lp(seed):
    lp = small_random_lp(np.random.default_rng(seed))
    clp, c, st_ = solve_lp_circuit(lp, 1.0)
    lam, mu = reconstruct_duals(c, st_)
    x = clp.recover(st_.v)
    assert kkt_residual(lp, x, lam, mu[:lp.p]).max <= 1e-7
    assert optimality_residual(c, st_) <= 1e-7


def test_nocost_single_equality_closed_form():
    g = np.array([[0.0, 0.0], [1.0, 3.0]])
    c = Circuit(g, (COST, EQUALITY), [2.0], [-0.25])
    qc = solve_nocost_qp(c)
    s = g[1].sum()
    assert qc.i_eq[0] == pytest.approx(s * qc.mu_star[0])
    assert qc.u_eq[0] == pytest.approx(g[1] @ qc.v_star / s - qc.mu_star[0])
    assert max(qc.residuals().values()) <= 1e-8


def test_nocost_hardware_constraints():
    c = compile(canonicalize(hardware_lp((1, 1)))).without_cost()
    assert max(solve_nocost_qp(c).residuals().values()) <= 1e-8


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nocost_random(seed):
    c = compile(canonicalize(small_random_lp(np.random.default_rng(seed)))).without_cost()
    qc = solve_nocost_qp(c)
    res = qc.residuals()
    assert max(res.values()) <= 1e-8, res
    assert np.min(qc.i_ineq, initial=0) >= -1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 20.0), st.floats(-30.0, 30.0))
def test_cost_is_monotone_in_ucost(seed, delta, shift):
    lp = small_random_lp(np.random.default_rng(seed))
    c = compile(canonicalize(lp))
    uc = compute_ucrit(lp)
    assert cost_sensitivity(c, uc + shift, delta) >= -1e-9
    below = uc - abs(shift) - delta - 1.0
    assert abs(cost_sensitivity(c, below, delta)) <= 1e-8


def test_equality_only_sensitivity_matches_port_resistance():
    g = np.array([[1.0, 1.0], [1.0, 2.0]])
    c = Circuit(g, (COST, EQUALITY), [1.0], [-1.0 / 3.0])
    slope = cost_sensitivity(c, 0.0, 0.1)
    assert slope > 0
    assert slope == pytest.approx(c.c.sum() - 1.0 / cost_port_resistance(c), rel=1e-9)


def test_verify_equivalence_hardware_and_infeasible():
    rep = verify_equivalence(hardware_lp((1, 0)))
    assert rep.ok and rep.cost_gap <= 1e-6
    np.testing.assert_allclose(rep.v, [7.0, 0.0], atol=1e-6)
    assert set(rep.to_dict()) == {"cost_gap", "max_violation", "kkt_residual", "u_crit",
                                  "active_set"}
    assert verify_equivalence(LinearProgram([1.0], None, None, [[1.0], [-1.0]],
                                            [0.0, -1.0])).status == "infeasible"


def test_verify_random_small_spec():
    rep = verify_equivalence(generate_random_lp(RandomLpSpec(8, 3, 10, seed=0)))
    assert rep.ok and rep.cost_gap <= 1e-6


def test_forced_node_acts_as_equality():
    lp = hardware_lp((1, 1))
    clp = canonicalize(lp)
    c = compile(clp).with_forced({0: 3.0, 2: -3.0})
    st_ = solve_steady_state(c, compute_ucrit(lp) - 30.0)
    x = clp.recover(st_.v)
    ref = solve_lp(LinearProgram(lp.c, [[1.0, 0.0]], [3.0], lp.a_ineq, lp.b_ineq))
    assert x[0] == pytest.approx(3.0)
    assert lp.cost(x) == pytest.approx(ref.cost, abs=1e-8)
