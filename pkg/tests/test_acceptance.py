"""One test per acceptance criterion; each records a pass/fail line for the run summary."""

import time
from pathlib import Path

import numpy as np
import pytest

from mecrelay import (
    ChannelGains,
    InfeasibleInstance,
    Instance,
    LinearProgram,
    solve_instance,
    solve_lp,
)
from mecrelay import config as cfgmod
from mecrelay.cli import main
from mecrelay.lp import INFEASIBLE, OPTIMAL
from mecrelay.model import feasibility_gate, relay_snr, tau_r_lower_bound
from mecrelay.montecarlo import random_feasible_instance, run_sweep
from mecrelay.oracle import grid_solve, multistart_solve

from conftest import record
from lp_oracle import random_lp, vertex_max

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ALPHAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
# per-trial trend checks compare two solves, each accurate to the solver tolerance
TREND_SLACK = 1e-6


def instances(seed, count, M):
    out = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        out.append(random_feasible_instance(rng, M=M))
    return out


def sweep(name):
    cfg = cfgmod.sweep_from_config(cfgmod.load_config(CONFIGS / f"{name}.toml"))
    assert cfg.trials >= 200
    return run_sweep(cfg)


@pytest.fixture(scope="module")
def m20_reports():
    insts = instances(2024, 50, 20)
    t0 = time.time()
    reps = [solve_instance(inst) for inst in insts]
    return insts, reps, time.time() - t0


@pytest.fixture(scope="module")
def placement_sweep():
    return sweep("placements")


@pytest.fixture(scope="module")
def battery_sweep():
    return sweep("battery")


@pytest.fixture(scope="module")
def split_sweep():
    return sweep("equal_split")


def test_criterion_01_oracle_single_node():
    t0 = time.time()
    worst = 0.0
    for inst in instances(101, 20, 1):
        got = solve_instance(inst).primal_value
        ref = grid_solve(inst).objective
        worst = max(worst, abs(got - ref) / ref)
    elapsed = time.time() - t0
    ok = worst <= 1e-2 and elapsed <= 60
    record(1, ok, f"worst rel. deviation {worst:.2e} (<= 1e-2), {elapsed:.1f} s (<= 60 s)")
    assert ok


def test_criterion_02_oracle_two_nodes():
    t0 = time.time()
    worst = 0.0
    for i, inst in enumerate(instances(102, 10, 2)):
        got = solve_instance(inst).primal_value
        ref = multistart_solve(inst, seed=i).objective
        worst = max(worst, abs(got - ref) / ref)
    elapsed = time.time() - t0
    ok = worst <= 2e-2 and elapsed <= 300
    record(2, ok, f"worst rel. deviation {worst:.2e} (<= 2e-2), {elapsed:.1f} s (<= 300 s)")
    assert ok


def test_criterion_03_processor_split(m20_reports):
    insts, reps, _ = m20_reports
    small = instances(103, 10, 1) + instances(104, 10, 3)
    pairs = list(zip(insts, reps)) + [(i, solve_instance(i)) for i in small]
    worst_prop = worst_sum = worst_tight = 0.0
    checked = 0
    for inst, rep in pairs:
        s = rep.solution
        total = s.r_mec.sum()
        if total <= 0:
            continue
        checked += 1
        F, C, T = inst.system.f_mec_max, inst.nodes.C[0], inst.system.T
        worst_prop = max(worst_prop, np.max(np.abs(s.f_mec * total - F * s.r_mec)) / (F * total))
        worst_sum = max(worst_sum, abs(s.f_mec.sum() - F) / F)
        worst_tight = max(worst_tight, abs(total * C / F - (T - s.tau_r - s.t_off.sum())) / T)
    ok = checked > 0 and worst_prop <= 1e-9 and worst_sum <= 1e-9 and worst_tight <= 1e-6
    record(3, ok, f"{checked} solves: proportionality {worst_prop:.1e}, sum {worst_sum:.1e}, "
                  f"remote-time equality {worst_tight:.1e}*T")
    assert ok


def test_criterion_04_duality_gap(m20_reports):
    _, reps, elapsed = m20_reports
    worst = max(r.gap for r in reps)
    ok = len(reps) == 50 and worst <= 1e-3 and elapsed <= 600
    record(4, ok, f"50 instances M=20: worst gap {worst:.2e} (<= 1e-3), {elapsed:.1f} s (<= 600 s)")
    assert ok


def test_criterion_05_closed_form_corners():
    worst_obj = worst_tau = worst_lb = 0.0
    for inst in instances(105, 5, 3):
        s = inst.system
        rep = solve_instance(inst.with_alpha(1.0))
        expected = s.T * s.B_w / 2 * np.log2(1 + relay_snr(inst))
        worst_obj = max(worst_obj, abs(rep.primal_value - expected) / expected)
        worst_tau = max(worst_tau, abs(rep.solution.tau_r - s.T) / s.T)
        rep0 = solve_instance(inst.with_alpha(0.0))
        worst_lb = max(worst_lb, abs(rep0.solution.tau_r - tau_r_lower_bound(inst)) / s.T)
    ok = worst_obj <= 1e-6 and worst_tau <= 1e-6 and worst_lb <= 1e-6
    record(5, ok, f"alpha=1 objective {worst_obj:.1e}, tau=T {worst_tau:.1e}; "
                  f"alpha=0 tau=lb {worst_lb:.1e}*T (all <= 1e-6)")
    assert ok


def _nondecreasing(paired, slack):
    bad = 0
    for by_alpha in paired.values():
        vals = [by_alpha[a] for a in sorted(by_alpha)]
        bad += any(b < a - slack * abs(a) for a, b in zip(vals, vals[1:]))
    return bad


def test_criterion_06_relay_trends(placement_sweep):
    bad = sum(_nondecreasing(placement_sweep.paired("relay_rate", d, 1.0), TREND_SLACK)
              for d in (20.0, 50.0, 80.0))
    m50 = [placement_sweep.row(a, 50.0, 1.0, "relay_rate").mean for a in ALPHAS]
    m80 = [placement_sweep.row(a, 80.0, 1.0, "relay_rate").mean for a in ALPHAS]
    farther_lower = all(x > y for x, y in zip(m50, m80))
    gains = {d: placement_sweep.row(0.5, d, 1.0, "primary_gain").mean for d in (20.0, 50.0, 80.0)}
    mutual = all(g > 1 for g in gains.values())
    n = {d: placement_sweep.row(0.5, d, 1.0, "relay_rate").n_feasible for d in (20.0, 50.0, 80.0)}
    ok = bad == 0 and farther_lower and mutual
    record(6, ok, f"monotone violations {bad}; mean relay 50 m > 80 m at every alpha: "
                  f"{farther_lower} (alpha=0.5: {m50[4]:.4g} vs {m80[4]:.4g}); "
                  f"mean primary gain at alpha=0.5 > 1: {mutual} "
                  f"({', '.join(f'{d:g} m {g:.6g}' for d, g in gains.items())}); feasible trials {n}")
    assert bad == 0, "relay rate decreased in alpha on some trial"
    assert farther_lower, "mean relay rate at 50 m does not exceed 80 m"
    assert mutual, "mean primary gain at alpha = 0.5 does not exceed 1"


def test_criterion_07_computation_trends(battery_sweep):
    bad = 0
    for E in (0.5, 1.0):
        comp = battery_sweep.paired("computation_rate", 70.0, E)
        neg = {t: {a: -v for a, v in by.items()} for t, by in comp.items()}
        bad += _nondecreasing(neg, TREND_SLACK)
    more_energy = all(battery_sweep.row(a, 70.0, 1.0, "computation_rate").mean
                      >= battery_sweep.row(a, 70.0, 0.5, "computation_rate").mean for a in ALPHAS)
    gains = {E: battery_sweep.row(0.5, 70.0, E, "iot_gain").mean for E in (0.5, 1.0)}
    iot = all(g > 1 for g in gains.values())
    n = battery_sweep.row(0.5, 70.0, 1.0, "iot_gain").n_feasible
    ok = bad == 0 and more_energy and iot
    record(7, ok, f"monotone violations {bad}; E=1 >= E=0.5 at every alpha: {more_energy}; "
                  f"mean IoT gain at alpha=0.5: {gains[0.5]:.4g} (E=0.5), {gains[1.0]:.4g} (E=1); "
                  f"feasible trials {n}")
    assert ok


def test_criterion_08_equal_split_gap(split_sweep):
    gaps = split_sweep.paired("utility_gap", 80.0, 1.0)
    opt = split_sweep.paired("optimal_utility", 80.0, 1.0)
    worst = min(gaps[t][a] / opt[t][a] for t in gaps for a in gaps[t])
    g1 = split_sweep.row(0.1, 80.0, 1.0, "utility_gap").mean
    g9 = split_sweep.row(0.9, 80.0, 1.0, "utility_gap").mean
    ok = worst >= -1e-6 and g9 <= g1 and len(gaps) > 0
    record(8, ok, f"{len(gaps)} paired trials: worst relative gap {worst:.2e} (>= -1e-6); "
                  f"mean gap alpha=0.9 {g9:.4g} <= alpha=0.1 {g1:.4g}")
    assert ok


def test_criterion_09_feasibility_gate():
    base = instances(109, 1, 2)[0]
    c = base.channels
    no_hop = Instance(base.system, base.geometry, base.nodes,
                      ChannelGains(c.g_pt_pr, 0.0, c.g_ap_pr, c.g_iot))
    try:
        feasibility_gate(no_hop)
        rejected, lb = False, None
    except InfeasibleInstance as exc:
        rejected, lb = True, exc.tau_r_lb
    no_direct = Instance(base.system, base.geometry, base.nodes,
                         ChannelGains(0.0, c.g_pt_ap, c.g_ap_pr, c.g_iot))
    lb0 = feasibility_gate(no_direct)
    ok = rejected and lb > base.system.T and lb0 == 0.0
    record(9, ok, f"g_pt_ap=0 infeasible: {rejected} (tau_lb={lb}); g_pt_pr=0 tau_lb={lb0}")
    assert ok


def test_criterion_10_lp_certification():
    t0 = time.time()
    worst, mismatched = 0.0, 0
    for i in range(200):
        c, A_ub, b_ub, A_eq, b_eq, lo, up = random_lp(np.random.default_rng(10_000 + i))
        sol = solve_lp(LinearProgram(c, A_ub, b_ub, A_eq, b_eq, lo, up))
        _, ref = vertex_max(c, A_ub, b_ub, A_eq, b_eq, lo, up)
        if ref == -np.inf:
            mismatched += sol.status != INFEASIBLE
        elif sol.status != OPTIMAL:
            mismatched += 1
        else:
            worst = max(worst, abs(sol.value - ref) / max(1.0, abs(ref)))
    elapsed = time.time() - t0
    ok = mismatched == 0 and worst <= 1e-8 and elapsed <= 30
    record(10, ok, f"200 LPs: status mismatches {mismatched}, worst deviation {worst:.1e} "
                   f"(<= 1e-8), {elapsed:.1f} s (<= 30 s)")
    assert ok


def test_criterion_11_sweep_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        code = main(["sweep", "--config", str(CONFIGS / "equal_split.toml"), "--trials", "40",
                     "--seed", "17", "--out", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    ok = outs[0] == outs[1]
    record(11, ok, f"two sweeps, {len(outs[0])} bytes each, identical: {ok}")
    assert ok
