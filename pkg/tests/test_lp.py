import numpy as np
import pytest

from mecrelay import LinearProgram, solve_lp
from mecrelay.lp import INFEASIBLE, OPTIMAL, UNBOUNDED

from lp_oracle import random_lp, vertex_max


def test_single_variable():
    sol = solve_lp(LinearProgram([1.0], A_ub=[[1.0]], b_ub=[1.0]))
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(1.0)
    assert sol.x[0] == pytest.approx(1.0)


def test_equality_any_vertex():
    sol = solve_lp(LinearProgram([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[1.0]))
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(1.0)
    assert sol.x.sum() == pytest.approx(1.0)


def test_unbounded_and_infeasible():
    assert solve_lp(LinearProgram([1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])).status == UNBOUNDED
    lp = LinearProgram([1.0], A_ub=[[1.0]], b_ub=[-1.0])
    assert solve_lp(lp).status == INFEASIBLE


def test_bounds_respected():
    lp = LinearProgram([1.0, -1.0], lower=[-2.0, -1.0], upper=[3.0, 4.0])
    sol = solve_lp(lp)
    assert sol.value == pytest.approx(4.0)
    assert np.allclose(sol.x, [3.0, -1.0])


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook rule; Bland's rule terminates
    c = [0.75, -150.0, 1 / 50, -6.0]
    A = [[0.25, -60.0, -1 / 25, 9.0], [0.5, -90.0, -1 / 50, 3.0], [0.0, 0.0, 1.0, 0.0]]
    sol = solve_lp(LinearProgram(c, A_ub=A, b_ub=[0.0, 0.0, 1.0]))
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(0.05)


def test_mixed_magnitude_rows():
    # seconds next to bits-per-second coefficients, as in the recovery LP
    lp = LinearProgram([1e6, 1.0], A_ub=[[1.0, 0.0], [-3e7, 1.0]], b_ub=[0.1, 0.0],
                       upper=[np.inf, np.inf])
    sol = solve_lp(lp)
    assert sol.value == pytest.approx(1e5 + 3e6, rel=1e-12)


@pytest.mark.parametrize("seed", range(60))
def test_random_against_vertex_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    c, A_ub, b_ub, A_eq, b_eq, lo, up = random_lp(rng)
    lp = LinearProgram(c, A_ub, b_ub, A_eq, b_eq, lo, up)
    sol = solve_lp(lp)
    _, ref = vertex_max(c, A_ub, b_ub, A_eq, b_eq, lo, up)
    if ref == -np.inf:
        assert sol.status == INFEASIBLE
        return
    assert sol.status == OPTIMAL
    assert abs(sol.value - ref) <= 1e-8 * max(1.0, abs(ref))
    r_ub, r_eq = lp.residuals(sol.x)
    assert np.all(r_ub <= 1e-8) and np.all(np.abs(r_eq) <= 1e-8)
    assert np.all(sol.x >= lo - 1e-8) and np.all(sol.x <= up + 1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_value_independent_of_ordering(seed):
    rng = np.random.default_rng(5000 + seed)
    c, A_ub, b_ub, A_eq, b_eq, lo, up = random_lp(rng)
    first = solve_lp(LinearProgram(c, A_ub, b_ub, A_eq, b_eq, lo, up))
    perm = rng.permutation(len(c))
    rows = rng.permutation(len(b_ub))
    second = solve_lp(LinearProgram(c[perm], A_ub[rows][:, perm], b_ub[rows],
                                    A_eq[:, perm], b_eq, lo[perm], up[perm]))
    assert first.status == second.status
    if first.status == OPTIMAL:
        assert second.value == pytest.approx(first.value, abs=1e-8 * max(1, abs(first.value)))
