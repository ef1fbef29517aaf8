"""Walk layer: slow inspectable path, kernel fast paths, exact clocks."""

import csv

import numpy as np
import pytest

from gwalk import kernel
from gwalk.env import MarkedTree, build_chain
from gwalk.law import make_constant_bias, make_two_point
from gwalk.walk import (
    StepBudgetExceeded,
    WalkRecord,
    check_conservation,
    run_until_tau,
    run_until_time,
    simulate_excursion_grid,
    simulate_time_grid,
    snapshot_marginals,
    step,
    write_trajectories,
)

SUB = make_two_point(0.068)
CB = make_constant_bias(2.0)


def test_slow_path_matches_kernel_time_mode():
    """Both execution paths consume the walker stream identically."""
    env_seed, walk_seed = 111, 222
    tree = MarkedTree(SUB, env_seed)
    rec = WalkRecord(walk_seed)
    run_until_time(tree, rec, 1000)
    mid = (rec.L, rec.R, rec.t_ex)
    run_until_time(tree, rec, 5000)

    res = simulate_time_grid(SUB, env_seed, walk_seed, [1000, 5000])
    assert res["m"] == rec.m == 5000
    assert res["t_ex"] == rec.t_ex
    assert res["L"] == rec.L
    assert res["R"] == rec.R
    assert res["snap_L"].tolist()[0] == mid[0]
    assert res["snap_R"].tolist()[0] == mid[1]
    assert res["snap_T"].tolist()[0] == mid[2]
    assert res["snap_L"].tolist()[1] == rec.L


def test_slow_path_matches_kernel_crossing_mode():
    env_seed, walk_seed = 333, 444
    tree = MarkedTree(SUB, env_seed)
    rec = WalkRecord(walk_seed)
    run_until_tau(tree, rec, 50)

    res = simulate_excursion_grid(SUB, env_seed, walk_seed, [10, 50])
    assert res["snap_tau"].tolist() == [rec.tau[10], rec.tau[50]]
    assert res["snap_T"].tolist() == [rec.T[10], rec.T[50]]
    assert res["m"] == rec.m
    assert res["L"] == rec.L == 50
    assert res["R"] == rec.R


def test_slow_path_matches_kernel_with_depth_cap():
    env_seed, walk_seed = 9, 10
    tree = MarkedTree(SUB, env_seed, depth_cap=3)
    rec = WalkRecord(walk_seed)
    run_until_time(tree, rec, 4000)
    res = kernel.run_walk(
        SUB.tables(),
        env_seed,
        walk_seed,
        kernel.MODE_STEPS,
        4000,
        [4000],
        depth_cap=3,
        collect_tree=True,
    )
    assert (res["L"], res["R"], res["t_ex"]) == (rec.L, rec.R, rec.t_ex)
    assert res["tree_gen"].max() <= 3


def test_walkrecord_conservation_and_clock_identity():
    tree = MarkedTree(SUB, 77)
    rec = WalkRecord(88)
    run_until_tau(tree, rec, 200)
    check_conservation(rec)
    assert rec.L == rec.crossings == 200
    for j in range(201):
        assert rec.T[j] == rec.tau[j] - j
    # the excised clock never counts forced e* -> e steps
    assert rec.t_ex == rec.m - rec.L


def test_kernel_excised_clock_identity():
    res = simulate_time_grid(SUB, 5, 6, [20000])
    pending = 1 if res["pos"] == -1 else 0
    assert res["t_ex"] == res["m"] - res["L"] + pending


def test_single_step_bookkeeping():
    tree = MarkedTree(CB, 0)
    rec = WalkRecord(123)
    step(tree, rec)
    assert rec.m == 1 and rec.t_ex == 1
    assert rec.site_lt[rec.node] == 1
    if rec.node == -1:
        assert rec.L == 1
        step(tree, rec)  # forced return
        assert rec.node == 0 and rec.tau == [0, 2]


def test_budget_raises():
    tree = MarkedTree(SUB, 1)
    rec = WalkRecord(2)
    with pytest.raises(StepBudgetExceeded) as err:
        run_until_time(tree, rec, 10**6, budget=100)
    assert err.value.code == "STEP_BUDGET_EXCEEDED"
    with pytest.raises(StepBudgetExceeded):
        simulate_time_grid(SUB, 1, 2, [10**6], budget=100)
    with pytest.raises(StepBudgetExceeded):
        run_until_tau(MarkedTree(SUB, 1), WalkRecord(2), 10**6, budget=100)


def test_excursion_budget_censoring():
    res = simulate_excursion_grid(
        SUB, 1, 2, [1, 10**7], budget=500, raise_on_budget=False
    )
    assert res["status"] == kernel.STATUS_BUDGET
    assert len(res["snap_tau"]) <= 1  # deep grid point never reached
    with pytest.raises(StepBudgetExceeded):
        simulate_excursion_grid(SUB, 1, 2, [10**7], budget=500)


def test_snapshot_marginals_rows():
    tree = MarkedTree(SUB, 21)
    rec = WalkRecord(22)
    rows = snapshot_marginals(tree, rec, time_grid=[100, 400], excursion_grid=[5])
    kinds = [r[0] for r in rows]
    assert kinds == ["m", "m", "p"]
    assert rows[0][1] == 100 and rows[1][1] == 400
    assert rows[1][2] >= rows[0][2]  # L is nondecreasing
    assert rows[1][3] >= rows[0][3]  # R is nondecreasing
    p_row = rows[2]
    assert p_row[5] == p_row[4] - p_row[1]  # T^p = tau^p - p


def test_run_until_tau_rejects_past_target():
    tree = MarkedTree(SUB, 3)
    rec = WalkRecord(4)
    run_until_tau(tree, rec, 10)
    with pytest.raises(ValueError):
        run_until_tau(tree, rec, 5)


def test_explicit_tree_walk():
    """Kernel accepts a prebuilt finite chain and conserves steps on it."""
    chain = build_chain([0.3, -0.2])
    res = kernel.run_walk(
        None,
        0,
        909,
        kernel.MODE_CROSSINGS,
        100,
        [100],
        explicit=chain,
        collect_tree=True,
    )
    assert res["status"] == kernel.STATUS_OK
    assert res["L"] == 100
    assert res["nodes_grown"] == 3
    assert res["tree_ndown"].sum() + res["tree_nup"].sum() == res["m"]
    # every down-crossing of an inner edge is matched by an up-crossing
    assert np.array_equal(res["tree_ndown"][1:], res["tree_nup"][1:])


def test_explicit_tree_rejects_bad_layout():
    with pytest.raises(ValueError):
        kernel.run_walk(
            None,
            0,
            1,
            kernel.MODE_STEPS,
            10,
            [],
            explicit={"parent": [0, -1], "V": [0.0, 0.0]},
        )


def test_write_trajectories_roundtrip(tmp_path):
    path = tmp_path / "rows.csv"
    write_trajectories(path, [(0, 5, 100, 3, 7, None, 93)])
    with open(path) as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["trial", "seed", "m_or_p", "L", "R", "tau", "T"]
    assert got[1] == ["0", "5", "100", "3", "7", "", "93"]
