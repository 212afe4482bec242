import numpy as np
import pytest

from mecrelay import check_constraints
from mecrelay.oracle import grid_solve, multistart_solve

from conftest import feasible


def test_relay_only_grid_picks_full_frame(inst1):
    sol = grid_solve(inst1.with_alpha(1.0), 20, refine=0)
    assert sol.tau_r == inst1.system.T


def test_drained_battery_leaves_relay_only():
    inst = feasible(21, energy=0.0)
    sol = grid_solve(inst, 20, refine=1)
    assert np.all(sol.t_loc == 0) and np.all(sol.r_mec == 0) and np.all(sol.e_off == 0)
    assert sol.objective == pytest.approx(inst.system.alpha * sol.r_relay)


def test_finer_grid_never_much_worse(inst1):
    coarse = grid_solve(inst1, 15, refine=0).objective
    fine = grid_solve(inst1, 30, refine=0).objective
    # one coarse cell of relay time is the dominant Lipschitz term
    T = inst1.system.T
    from mecrelay.model import relay_bits_per_second
    cell = relay_bits_per_second(inst1) * T / 14
    assert fine >= coarse - cell
    assert grid_solve(inst1).objective >= fine - 1e-9 * fine


def test_multistart_agrees_with_grid(inst1):
    grid = grid_solve(inst1).objective
    ms = multistart_solve(inst1).objective
    assert abs(grid - ms) / grid <= 1e-3


def test_multistart_ascent_and_spread(inst2):
    sol, runs = multistart_solve(inst2, return_all=True)
    for _, _, history in runs:
        assert np.all(np.diff(history) >= 0)
    vals = np.array([v for v, _, _ in runs])
    assert (vals.max() - vals.min()) / vals.max() <= 1e-3
    assert sol.objective == pytest.approx(vals.max())


@pytest.mark.parametrize("seed", range(3))
def test_oracle_points_are_feasible(seed):
    inst = feasible(30 + seed, M=2)
    for sol in (grid_solve(inst, 12, refine=1), multistart_solve(inst, starts=4)):
        rep = check_constraints(inst, sol, 1e-6)
        assert rep.ok, rep.violations


def test_grid_limited_to_two_nodes():
    with pytest.raises(ValueError, match="oracle limited to M ≤ 2"):
        grid_solve(feasible(3, M=3))
