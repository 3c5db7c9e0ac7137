import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crforge.capacity import (CapacityProblem, CapacitySolution, evaluate_point, grid_nodes,
                              solve_ascent, solve_brute_force, solve_sweep)
from crforge.channel import Dmc
from crforge.dist import AuxChannel, DoublySymmetricBinary, JointPmf, mutual_information
from crforge.errors import NonStochasticMatrix, TooLarge, ValidationError


def h2(p):
    return 0.0 if p in (0, 1) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def conv(a, b):
    return a * (1 - b) + b * (1 - a)


DSBS = DoublySymmetricBinary(0.11).joint()
INDEPENDENT = JointPmf.from_dense([[0.25, 0.25], [0.25, 0.25]])
PERFECT = JointPmf.from_dense([[0.5, 0.0], [0.0, 0.5]])


# -- evaluate_point ---------------------------------------------------------------------


def test_constant_aux_carries_nothing():
    assert evaluate_point(DSBS, AuxChannel.constant((0, 1))) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_copy_aux_gives_source_informations():
    i_ux, i_uy = evaluate_point(DSBS, AuxChannel.copy((0, 1)))
    assert i_ux == pytest.approx(1.0, abs=1e-12)
    assert i_uy == pytest.approx(mutual_information(DSBS), abs=1e-12)


def test_bsc_aux_over_dsbs_composes():
    i_ux, i_uy = evaluate_point(DSBS, AuxChannel.binary_symmetric(0.2))
    assert i_ux == pytest.approx(1 - h2(0.2), abs=1e-12)
    assert i_uy == pytest.approx(1 - h2(conv(0.2, 0.11)), abs=1e-12)


def test_matrix_rows_must_be_stochastic():
    with pytest.raises(NonStochasticMatrix):
        evaluate_point(DSBS, [[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(NonStochasticMatrix):
        evaluate_point(DSBS, [[1.0, 0.0]])


rows = st.lists(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda r: sum(r) > 0.01),
                min_size=2, max_size=2).map(lambda m: np.array(m) / np.sum(m, axis=1, keepdims=True))


@settings(max_examples=50, deadline=None)
@given(rows)
def test_data_processing(q):
    i_ux, i_uy = evaluate_point(DSBS, q)
    assert -1e-12 <= i_uy <= i_ux + 1e-12
    assert i_ux <= 1.0 + 1e-12


# -- closed cases -----------------------------------------------------------------------


def test_independent_source_is_capped_by_link():
    sol = solve_ascent(CapacityProblem(INDEPENDENT, 0.3))
    assert sol.value == pytest.approx(0.3, abs=1e-4)
    assert sol.constraint_slack >= -1e-9 - 1e-12  # feasible within tol


def test_perfect_source_needs_no_link():
    assert solve_ascent(CapacityProblem(PERFECT, 0.0)).value == pytest.approx(1.0, abs=1e-6)


def test_large_link_recovers_source_entropy():
    # c_w above H(X|Y) = h2(0.11) admits U = X
    assert solve_ascent(CapacityProblem(DSBS, 0.6)).value == pytest.approx(1.0, abs=1e-6)


def test_zero_link_on_dsbs():
    assert solve_ascent(CapacityProblem(DSBS, 0.0)).value == pytest.approx(0.0, abs=1e-3)


def test_for_channel_uses_shannon_capacity():
    prob = CapacityProblem.for_channel(DSBS, Dmc.bsc(0.11))
    assert prob.c_w == pytest.approx(1 - h2(0.11), abs=1e-9)
    assert prob.u_cardinality == 3


def test_problem_validation():
    with pytest.raises(ValidationError):
        CapacityProblem(DSBS, -0.1)
    with pytest.raises(ValidationError):
        CapacityProblem(DSBS, 0.1, u_cardinality=1)


# -- solver agreement ---------------------------------------------------------------------


def test_grid_nodes_cover_vertices():
    for spacing in ("quadratic", "uniform"):
        nodes = grid_nodes(8, 3, spacing)
        assert len(nodes) == math.comb(10, 2)
        assert np.allclose(nodes.sum(axis=1), 1.0)
        assert [1.0, 0.0, 0.0] in nodes.tolist()


def test_brute_force_matches_ascent_on_dsbs():
    prob = CapacityProblem(DSBS, 0.2)
    grid = solve_brute_force(prob, 32)
    asc = solve_ascent(prob)
    assert grid.constraint_slack >= -prob.tol
    assert asc.value >= grid.value - 1e-6
    assert asc.value - grid.value < 1e-2


def test_brute_force_limits():
    with pytest.raises(TooLarge):
        solve_brute_force(CapacityProblem(DSBS, 0.2), 65)
    four = JointPmf.from_dense(np.full((4, 2), 1 / 8))
    with pytest.raises(TooLarge):
        solve_brute_force(CapacityProblem(four, 0.2), 8)


def test_sweep_is_monotone_and_feasible():
    cs = [0.5, 0.0, 0.1, 0.3]
    sols = solve_sweep(DSBS, cs)
    by_c = sorted(zip(cs, (s.value for s in sols)))
    values = [v for _, v in by_c]
    assert values == sorted(values)
    for c, s in zip(cs, sols):
        assert s.i_ux - s.i_uy <= c + 1e-9


def test_ascent_is_deterministic():
    prob = CapacityProblem(DSBS, 0.2)
    a, b = solve_ascent(prob, seed=5), solve_ascent(prob, seed=5)
    assert a.value == b.value and np.array_equal(a.argmax, b.argmax)


def test_solution_json_and_aux():
    sol = solve_ascent(CapacityProblem(DSBS, 0.2))
    back = CapacitySolution.from_json(json.loads(json.dumps(sol.to_json())))
    assert back.value == sol.value and np.array_equal(back.argmax, sol.argmax)
    assert evaluate_point(DSBS, back.as_aux())[0] == pytest.approx(sol.value, abs=1e-12)
    assert sol.to_json()["label"] == "capacity"


def test_problem_json_round_trip():
    prob = CapacityProblem(DSBS, 0.25)
    back = CapacityProblem.from_json(json.loads(json.dumps(prob.to_json())))
    assert back.c_w == prob.c_w and np.allclose(back.dense, prob.dense)
