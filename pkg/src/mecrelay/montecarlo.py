"""Random scenarios, alpha sweeps and the cooperation-gain metrics.

Channel draws are paired: every (trial, link) pair has its own random
stream derived from the sweep seed, so one trial sees the same fading
realization at every alpha, placement, energy level and for both solvers.
Adding grid points never perturbs existing draws.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .baseline import solve_equal_allocation
from .errors import DegenerateDirectLink, InfeasibleInstance, MecRelayError
from .model import (
    ChannelGains,
    Geometry,
    Instance,
    NodeParams,
    SystemParams,
    direct_rate,
    feasibility_gate,
)
from .recovery import SolverSettings, solve_instance

# stream index of each link class inside a trial
LINK_PT_PR, LINK_PT_AP, LINK_AP_PR, LINK_IOT = range(4)

METRICS = (
    "relay_rate",
    "computation_rate",
    "primary_gain",
    "iot_gain",
    "optimal_utility",
    "equal_utility",
    "utility_gap",
)
CSV_HEADER = ("alpha", "d_pt_ap", "energy", "metric", "mean", "std", "n_feasible", "n_total")


@dataclass(frozen=True)
class ChannelMeans:
    """Mean squared gains of the exponential (Rayleigh-power) fading per link class."""

    pt_pr: float = 1e-3
    pt_ap: float = 1.0
    ap_pr: float = 1.0
    iot: float = 5.0

    def __post_init__(self):
        for name in ("pt_pr", "pt_ap", "ap_pr", "iot"):
            if not getattr(self, name) > 0:
                raise ValueError(f"channel mean {name} must be positive")


@dataclass(frozen=True)
class SweepConfig:
    system: SystemParams = field(default_factory=SystemParams)
    M: int = 20
    d_pt_pr: float = 100.0
    d_iot: float = 10.0
    C: float = 1e4
    f: float = 1e10
    w: float = 1e-28
    alpha_grid: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    trials: int = 200
    seed: int = 0
    channel_means: ChannelMeans = field(default_factory=ChannelMeans)
    placements: tuple = (20.0, 50.0, 80.0)
    energy_levels: tuple = (1.0,)
    baseline: bool = True
    tolerance: float = 1e-6
    max_iterations: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "placements", tuple(float(d) for d in self.placements))
        object.__setattr__(self, "energy_levels", tuple(float(e) for e in self.energy_levels))
        if not self.alpha_grid or any(not 0.0 <= a <= 1.0 for a in self.alpha_grid):
            raise ValueError("alpha_grid must be a non-empty list of values in [0, 1]")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be an integer >= 1")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not self.placements or any(not 0 < d < self.d_pt_pr for d in self.placements):
            raise ValueError("placements must lie strictly between the PT and the PR")
        if not self.energy_levels or any(not e > 0 for e in self.energy_levels):
            raise ValueError("energy_levels must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def settings(self):
        return SolverSettings(tolerance=self.tolerance, max_iterations=self.max_iterations)


def sample_channels(rng, means: ChannelMeans, M=1):
    """One fading realization drawn from a single generator."""
    return ChannelGains(
        rng.exponential(means.pt_pr),
        rng.exponential(means.pt_ap),
        rng.exponential(means.ap_pr),
        rng.exponential(means.iot, size=M),
    )


def link_rng(seed, trial, link):
    """Independent generator for one (trial, link) pair."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, link)))


def trial_channels(seed, trial, means: ChannelMeans, M):
    """The fading realization of one trial, one stream per link class."""
    return ChannelGains(
        link_rng(seed, trial, LINK_PT_PR).exponential(means.pt_pr),
        link_rng(seed, trial, LINK_PT_AP).exponential(means.pt_ap),
        link_rng(seed, trial, LINK_AP_PR).exponential(means.ap_pr),
        link_rng(seed, trial, LINK_IOT).exponential(means.iot, size=M),
    )


def build_instance(config: SweepConfig, channels, d_pt_ap, energy, alpha):
    geo = Geometry.on_line(config.d_pt_pr, d_pt_ap, np.full(config.M, config.d_iot))
    nodes = NodeParams.uniform(config.M, config.C, config.f, config.w, energy)
    return Instance(replace(config.system, alpha=alpha), geo, nodes, channels)


def random_feasible_instance(rng, M=1, system=None, d_pt_ap=50.0, energy=1.0,
                             means=None, max_draws=100_000, geometry=None, nodes=None):
    """Rejection-sample channels until the relay guarantee is attainable.

    ``geometry`` and ``nodes`` override the on-line placement and the
    uniform reference nodes built from ``d_pt_ap`` and ``energy``.
    """
    system = system or SystemParams()
    means = means or ChannelMeans()
    geo = geometry or Geometry.on_line(100.0, d_pt_ap, np.full(M, 10.0))
    nodes = nodes or NodeParams.uniform(M, E=energy)
    for _ in range(max_draws):
        inst = Instance(system, geo, nodes, sample_channels(rng, means, nodes.M))
        try:
            feasibility_gate(inst)
        except InfeasibleInstance:
            continue
        return inst
    raise RuntimeError("no feasible draw found")


def primary_gain(instance, solution):
    """Relay rate over the direct-link rate."""
    d = direct_rate(instance)
    if d <= 0:
        raise DegenerateDirectLink("direct link rate is zero")
    return solution.r_relay / d


def local_only_bits(instance):
    n, T = instance.nodes, instance.system.T
    return float(np.sum(n.f / n.C * n.local_cap(T)))


def iot_gain(instance, solution):
    """Total computed bits over what local computing alone could do."""
    return solution.computation_bits / local_only_bits(instance)


@dataclass(frozen=True)
class TrialRecord:
    alpha: float
    d_pt_ap: float
    energy: float
    trial: int
    status: str  # "ok", "infeasible" or "error"
    values: dict = field(default_factory=dict)
    error: str = ""


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    d_pt_ap: float
    energy: float
    metric: str
    mean: float
    std: float
    n_feasible: int
    n_total: int


@dataclass(frozen=True)
class SweepReport:
    config: SweepConfig
    rows: tuple
    records: tuple = field(repr=False)

    def row(self, alpha, d_pt_ap, energy, metric):
        for r in self.rows:
            if (r.alpha, r.d_pt_ap, r.energy, r.metric) == (alpha, d_pt_ap, energy, metric):
                return r
        raise KeyError((alpha, d_pt_ap, energy, metric))

    def feasible_fraction(self, alpha, d_pt_ap, energy):
        r = self.row(alpha, d_pt_ap, energy, METRICS[0])
        return r.n_feasible / r.n_total

    def paired(self, metric, d_pt_ap, energy):
        """{trial: {alpha: value}} over successfully solved trials."""
        out = {}
        for rec in self.records:
            if rec.status == "ok" and rec.d_pt_ap == d_pt_ap and rec.energy == energy \
                    and metric in rec.values:
                out.setdefault(rec.trial, {})[rec.alpha] = rec.values[metric]
        return out

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([repr(r.alpha), repr(r.d_pt_ap), repr(r.energy), r.metric,
                             repr(r.mean), repr(r.std), r.n_feasible, r.n_total])
        return buf.getvalue()


def _solve_trial(config: SweepConfig, trial):
    """Every (placement, energy, alpha) record for one channel realization."""
    channels = trial_channels(config.seed, trial, config.channel_means, config.M)
    settings = config.settings()
    out = []
    for d in config.placements:
        for energy in config.energy_levels:
            for alpha in config.alpha_grid:
                inst = build_instance(config, channels, d, energy, alpha)
                out.append(_solve_point(inst, settings, config.baseline, alpha, d, energy, trial))
    return out


def _solve_point(inst, settings, baseline, alpha, d, energy, trial):
    try:
        rep = solve_instance(inst, settings)
        sol = rep.solution
        values = {
            "relay_rate": sol.r_relay,
            "computation_rate": sol.computation_bits,
            "primary_gain": primary_gain(inst, sol),
            "iot_gain": iot_gain(inst, sol),
            "optimal_utility": sol.objective,
        }
        if baseline:
            eq = solve_equal_allocation(inst, settings).solution.objective
            values["equal_utility"] = eq
            values["utility_gap"] = sol.objective - eq
        return TrialRecord(alpha, d, energy, trial, "ok", values)
    except InfeasibleInstance:
        return TrialRecord(alpha, d, energy, trial, "infeasible")
    except (MecRelayError, ArithmeticError, ValueError, RuntimeError) as exc:
        return TrialRecord(alpha, d, energy, trial, "error", error=f"{type(exc).__name__}: {exc}")


def _solve_chunk(args):
    config, trials = args
    return [rec for t in trials for rec in _solve_trial(config, t)]


def run_sweep(config: SweepConfig, threads=1) -> SweepReport:
    """Solve every (alpha, placement, energy, trial) point and aggregate.

    Results do not depend on ``threads``: trials are solved independently and
    reduced in trial order.
    """
    trials = list(range(config.trials))
    if threads and threads > 1:
        chunks = [trials[i::threads] for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_solve_chunk, [(config, c) for c in chunks]))
        records = [rec for part in parts for rec in part]
    else:
        records = _solve_chunk((config, trials))
    records.sort(key=lambda r: r.trial)
    return SweepReport(config, _aggregate(config, records), tuple(records))


def _aggregate(config, records):
    metrics = METRICS if config.baseline else METRICS[:5]
    rows = []
    for d in config.placements:
        for energy in config.energy_levels:
            for alpha in config.alpha_grid:
                recs = [r for r in records
                        if r.alpha == alpha and r.d_pt_ap == d and r.energy == energy]
                ok = [r for r in recs if r.status == "ok"]
                for m in metrics:
                    vals = np.array([r.values[m] for r in ok], dtype=float)
                    mean = float(vals.mean()) if vals.size else math.nan
                    std = float(vals.std()) if vals.size else math.nan
                    rows.append(SweepRow(alpha, d, energy, m, mean, std, len(ok), len(recs)))
    return tuple(rows)
