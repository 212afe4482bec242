"""Primal recovery: fix the offload powers at their dual values and solve an LP.

Once every node's offload power ``rho_k = e_k / t_k`` is fixed, the offload
capacity becomes linear in ``t_off`` and what remains of the reduced problem
is a linear program in ``(tau_r, t_loc, t_off, r_mec)``. Its optimum, with
``e_off = rho * t_off`` and the processor split applied afterwards, is the
reported solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dual import EQUAL, PROPORTIONAL, DualPoint, DualProblem, _solve_h, solve_dual
from .errors import InfeasibleInstance, SolutionValidationError
from .lp import INFEASIBLE, OPTIMAL, LinearProgram, solve_lp
from .model import ConstraintReport, PrimalSolution, check_constraints

LN2 = math.log(2.0)
# lam below this fraction of its typical scale counts as zero
LAM_ZERO_REL = 1e-9


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-6
    max_iterations: Optional[int] = None
    validate_tol: float = 1e-6
    radius: float = 10.0
    max_restarts: int = 3
    lp_tol: float = 1e-9
    refine: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class SolveReport:
    solution: PrimalSolution
    dual: DualPoint
    dual_value: float
    primal_value: float
    gap: float
    iterations: int
    feasibility: ConstraintReport = field(repr=False)
    tau_r_lb: float
    method: str
    rho: np.ndarray = field(repr=False)

    def to_dict(self):
        """JSON-ready dict keyed by the report's field names."""
        s = self.solution
        viol = max((-v.slack / v.scale for v in self.feasibility.slacks), default=0.0)
        return {
            "method": self.method,
            "solution": {
                "tau_r": s.tau_r,
                "t_loc": s.t_loc.tolist(),
                "t_off": s.t_off.tolist(),
                "e_off": s.e_off.tolist(),
                "r_mec": s.r_mec.tolist(),
                "f_mec": s.f_mec.tolist(),
                "objective": s.objective,
                "r_relay": s.r_relay,
                "r_local": s.r_local.tolist(),
            },
            "dual": {
                "zeta": self.dual.zeta.tolist(),
                "mu": self.dual.mu.tolist(),
                "lambda": self.dual.lam.tolist(),
                "eta": self.dual.eta.tolist(),
            },
            "dual_value": self.dual_value,
            "primal_value": self.primal_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "feasibility": {
                "status": "feasible",
                "tau_r_lb": self.tau_r_lb,
                "max_violation": max(viol, 0.0),
            },
        }


def infeasible_dict(err: InfeasibleInstance, method=PROPORTIONAL):
    """Report shape for an instance rejected by the feasibility gate."""
    return {
        "method": method,
        "solution": None,
        "dual": None,
        "dual_value": None,
        "primal_value": None,
        "gap": None,
        "iterations": 0,
        "feasibility": {
            "status": "infeasible",
            "tau_r_lb": err.tau_r_lb,
            "direct_rate": err.direct_rate,
        },
    }


def recover_power(problem: DualProblem, dual: DualPoint):
    """Offload power per node from the energy and capacity prices (lam, eta).

    When a node's energy price is numerically zero the closed form blows up;
    the node then spends its whole budget over the longest possible offload.
    """
    lam_scale = problem.initial_scale()[problem.J + problem.M:problem.J + 2 * problem.M]
    B = problem.instance.system.B_w
    rho = np.zeros(problem.M)
    for k in range(problem.M):
        s = problem.s[k]
        if s <= 0:
            continue
        if dual.lam[k] <= LAM_ZERO_REL * lam_scale[k]:
            span = problem.tbar if problem.tbar > 0 else problem.instance.system.T
            rho[k] = problem.E[k] / span
        else:
            rho[k] = max(dual.eta[k] * B / (dual.lam[k] * LN2) - 1.0 / s, 0.0)
    return rho


def recover_power_from_time_price(problem: DualProblem, dual: DualPoint, scale=1.0):
    """Offload power from the time and capacity prices (zeta, eta).

    Stationarity of the Lagrangian in t_off at fixed energy pins the offload
    SNR x = rho * s through ln(1+x) - x/(1+x) = kappa, kappa = zeta ln2 / (eta B).
    ``scale`` multiplies kappa. Entries are NaN where the relation is undefined.
    """
    B = problem.instance.system.B_w
    Z = dual.time_price
    rho = np.full(problem.M, np.nan)
    for k in range(problem.M):
        s = problem.s[k]
        if s <= 0:
            rho[k] = 0.0
        elif dual.eta[k] > 0 and Z > 0:
            x = _solve_h(scale * Z * LN2 / (dual.eta[k] * B))
            if np.isfinite(x):
                rho[k] = x / s
    return rho


def _lp_value(problem, rho, settings):
    sol = solve_lp(build_p3(problem, rho), tol=settings.lp_tol)
    return (sol.value if sol.status == OPTIMAL else -np.inf), sol


def refine_time_price(problem, dual, fallback, settings, width=1e-3, tol=1e-11, max_widen=4):
    """Golden-section search over a common factor on kappa, scored by the LP value.

    The dual value converges much faster than the multipliers along its flat
    directions; the error that matters for recovery is almost entirely a
    shared relative error in zeta/eta, i.e. one scalar. Returns (rho, lp).
    """
    def make(theta):
        rho = recover_power_from_time_price(problem, dual, math.exp(theta))
        return np.where(np.isnan(rho), fallback, rho)

    cache = {}

    def f(theta):
        if theta not in cache:
            rho = make(theta)
            cache[theta] = (*_lp_value(problem, rho, settings), rho)
        return cache[theta][0]

    lo, hi = -width, width
    for _ in range(max_widen):
        if max(f(lo), f(hi)) < f(0.0):
            break
        lo, hi = 2 * lo, 2 * hi
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    while b - a > tol:
        if f(c) >= f(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    theta = max(cache, key=lambda t: cache[t][0])
    return cache[theta][2], cache[theta][1]


def build_p3(problem: DualProblem, rho):
    """The LP in x = [tau_r, t_loc (M), t_off (M), r_mec (M)] for fixed offload powers."""
    inst = problem.instance
    sys_, M = inst.system, problem.M
    T, B, a = sys_.T, sys_.B_w, sys_.alpha
    n = 1 + 3 * M
    iL, iO, iR = 1, 1 + M, 1 + 2 * M
    c = np.zeros(n)
    c[0] = a * problem.a_relay
    c[iL:iO] = (1.0 - a) * problem.fC
    c[iR:] = 1.0 - a

    rate = B * np.log2(1.0 + np.asarray(rho) * problem.s)
    A_ub = np.zeros((2 * M, n))
    b_ub = np.zeros(2 * M)
    for k in range(M):
        A_ub[k, iL + k] = problem.wf3C[k]
        A_ub[k, iO + k] = rho[k]
        b_ub[k] = problem.E[k]
        A_ub[M + k, iR + k] = 1.0
        A_ub[M + k, iO + k] = -rate[k]

    coupling = np.zeros((problem.J, n))
    coupling[:, 0] = 1.0
    coupling[:, iO:iR] = 1.0
    coupling[:, iR:] = problem.Q
    rhs = np.full(problem.J, T)
    if problem.coupling == PROPORTIONAL:
        A_eq, b_eq = coupling, rhs
    else:
        A_ub, b_ub = np.vstack([A_ub, coupling]), np.concatenate([b_ub, rhs])
        A_eq = b_eq = None

    lower = np.zeros(n)
    lower[0] = problem.tau_lb
    upper = np.full(n, np.inf)
    upper[0] = T
    upper[iL:iO] = T
    upper[iO:iR] = problem.tbar
    return LinearProgram(c, A_ub, b_ub, A_eq, b_eq, lower, upper)


def allocate_processors(instance, r_mec, coupling=PROPORTIONAL):
    """Server CPU split: proportional to offloaded bits, or equal shares."""
    F, M = instance.system.f_mec_max, instance.M
    r_mec = np.asarray(r_mec, dtype=float)
    if coupling == EQUAL:
        return np.full(M, F / M)
    total = float(np.sum(r_mec))
    if total <= 0:
        return np.zeros(M)
    return F * r_mec / total


def solve_instance(instance, settings: Optional[SolverSettings] = None,
                   coupling=PROPORTIONAL) -> SolveReport:
    """Gate, dual ellipsoid solve, LP recovery and validation for one instance.

    Raises InfeasibleInstance from the gate, MaxIterationsExceeded from the
    dual solver and SolutionValidationError if the recovered point breaks a
    constraint.
    """
    settings = settings or SolverSettings()
    problem = DualProblem.build(instance, coupling)
    res = solve_dual(instance, settings.tolerance, settings.max_iterations, coupling,
                     settings.radius, settings.max_restarts)
    base = recover_power(problem, res.dual)
    best_val, best_sol = _lp_value(problem, base, settings)
    rho = base
    if settings.refine:
        alt, sol = refine_time_price(problem, res.dual, base, settings)
        if sol.status == OPTIMAL and sol.value > best_val:
            rho, best_val, best_sol = alt, sol.value, sol
    if best_sol.status != OPTIMAL:
        if best_sol.status == INFEASIBLE:
            raise InfeasibleInstance(problem.tau_lb, float("nan"), instance.system.T)
        raise RuntimeError(f"recovery LP ended with status {best_sol.status}")
    sol = best_sol
    return _finish(instance, problem, res, rho, sol.x, coupling, settings)


def _finish(instance, problem, res, rho, x, coupling, settings):
    M = problem.M
    tau = min(max(x[0], problem.tau_lb), instance.system.T)
    t_loc = np.clip(x[1:1 + M], 0.0, instance.system.T)
    t_off = np.clip(x[1 + M:1 + 2 * M], 0.0, problem.tbar)
    r_mec = np.maximum(x[1 + 2 * M:], 0.0)
    e_off = rho * t_off
    f_mec = allocate_processors(instance, r_mec, coupling)
    solution = PrimalSolution.build(instance, tau, t_loc, t_off, e_off, r_mec, f_mec)
    report = check_constraints(instance, solution, settings.validate_tol)
    primal = solution.objective
    gap = (res.value - primal) / max(1.0, abs(res.value))
    out = SolveReport(solution, res.dual, res.value, primal, gap, res.iterations,
                      report, problem.tau_lb, coupling, rho)
    if not report.ok:
        raise SolutionValidationError(out, report.violations)
    return out
