"""Lagrangian dual of the reduced problem and its ellipsoid-method solver.

The dual vector is laid out as ``(zeta | mu | lam | eta)``: ``zeta`` prices
the remote-computation time coupling (one entry for the proportional
processor split, one per node for the equal split), ``mu`` the local-time
caps, ``lam`` the battery budgets and ``eta`` the offload-capacity bounds.

The Lagrangian is maximized in closed form over the box

    tau_lb <= tau_r <= T,  0 <= t_loc <= T,  0 <= t_off <= T - tau_lb,
    0 <= e_off <= E,       0 <= r_mec <= r_bar,

all of which are implied by the problem's own constraints, so every value
returned by :func:`dual_function` is an upper bound on the optimum. Time,
local-compute and offload-bit choices are bang-bang in their switching
values; the offload energy follows ``e = rho * t`` until the battery cap
binds, after which the offload time solves a scalar stationarity equation.

The hot loop (Lagrangian maximization + central-cut ellipsoid update) is
compiled with numba.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import MaxIterationsExceeded
from .model import (
    PrimalSolution,
    feasibility_gate,
    offload_capacity,
    offload_snr_per_watt,
    relay_bits_per_second,
)

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2
LAM_FLOOR = 1e-12

PROPORTIONAL = "proportional"
EQUAL = "equal"


# -- compiled kernels --------------------------------------------------------


@njit(cache=True)
def _h(x):
    # ln(1+x) - x/(1+x), series below 1e-4 to avoid cancellation
    if x < 1e-4:
        return x * x * (0.5 - x * (2.0 / 3.0 - 0.75 * x))
    return math.log1p(x) - x / (1.0 + x)


@njit(cache=True)
def _solve_h(kappa):
    """x > 0 with ln(1+x) - x/(1+x) = kappa; inf when kappa is too large."""
    if kappa <= 0.0:
        return 0.0
    if kappa > 700.0:
        return math.inf
    lo, hi = -60.0, 710.0
    y = kappa + 1.0 if kappa > 1.0 else 0.5 * math.log(2.0 * kappa)
    for _ in range(100):
        x = math.exp(y)
        fy = _h(x) - kappa
        if fy > 0.0:
            hi = y
        else:
            lo = y
        dx = x / (1.0 + x)
        step = fy / (dx * dx)
        y_new = y - step
        if not (lo < y_new < hi):
            y_new = 0.5 * (lo + hi)
        if abs(y_new - y) <= 1e-15 * max(1.0, abs(y)) or hi - lo < 1e-15:
            y = y_new
            break
        y = y_new
    return math.exp(y)


@njit(cache=True)
def _argmax(y, J, Q, s, E, wf3C, fC, rbar, T, B, alpha, tau_lb, tbar, a_relay):
    M = s.shape[0]
    zeta = y[:J]
    mu = y[J:J + M]
    lam = y[J + M:J + 2 * M]
    eta = y[J + 2 * M:J + 3 * M]
    Z = 0.0
    for j in range(J):
        Z += zeta[j]
    t_loc = np.zeros(M)
    t_off = np.zeros(M)
    e_off = np.zeros(M)
    r_mec = np.zeros(M)
    rho = np.zeros(M)
    s_off = np.zeros(M)
    u = np.zeros(M)
    v = np.zeros(M)
    w1 = 1.0 - alpha
    for k in range(M):
        price_r = 0.0
        for j in range(J):
            price_r += Q[j, k] * zeta[j]
        r = 0.0
        if eta[k] > 0.0 and s[k] > 0.0:
            r = eta[k] * B / (max(lam[k], LAM_FLOOR) * LN2) - 1.0 / s[k]
            if r < 0.0:
                r = 0.0
        rho[k] = r
        sd = Z
        if r > 0.0:
            x = r * s[k]
            sd = Z - eta[k] * B * math.log2(1.0 + x) + eta[k] * B * LOG2E * x / (1.0 + x)
        s_off[k] = sd
        u[k] = mu[k] + lam[k] * wf3C[k] - w1 * fC[k]
        v[k] = price_r + eta[k] - w1
        if u[k] < 0.0:
            t_loc[k] = T
        if sd < 0.0 and tbar > 0.0:
            if r * tbar <= E[k]:
                t_off[k] = tbar
                e_off[k] = r * tbar
            else:
                xr = _solve_h(Z * LN2 / (eta[k] * B))
                t_root = E[k] * s[k] / xr if xr > 0.0 else math.inf
                t_off[k] = min(max(t_root, E[k] / r), tbar)
                e_off[k] = E[k]
        if v[k] < 0.0:
            r_mec[k] = rbar[k]
    s_relay = Z - alpha * a_relay
    tau = T if s_relay < 0.0 else tau_lb
    return tau, t_loc, t_off, e_off, r_mec, rho, s_off, u, v, s_relay


@njit(cache=True)
def _cap(t, e, s, B):
    if t <= 0.0:
        return 0.0
    return t * B * math.log2(1.0 + e * s / t)


@njit(cache=True)
def _value_and_residual(y, J, Q, s, E, wf3C, fC, rbar, T, B, alpha, tau_lb, tbar, a_relay):
    M = s.shape[0]
    tau, t_loc, t_off, e_off, r_mec, rho, s_off, u, v, s_relay = _argmax(
        y, J, Q, s, E, wf3C, fC, rbar, T, B, alpha, tau_lb, tbar, a_relay)
    n = J + 3 * M
    res = np.empty(n)
    base = tau - T
    for k in range(M):
        base += t_off[k]
    for j in range(J):
        acc = base
        for k in range(M):
            acc += Q[j, k] * r_mec[k]
        res[j] = acc
    val = alpha * a_relay * tau
    for k in range(M):
        res[J + k] = t_loc[k] - T
        res[J + M + k] = wf3C[k] * t_loc[k] + e_off[k] - E[k]
        res[J + 2 * M + k] = r_mec[k] - _cap(t_off[k], e_off[k], s[k], B)
        val += (1.0 - alpha) * (fC[k] * t_loc[k] + r_mec[k])
    for i in range(n):
        val -= y[i] * res[i]
    return val, res


@njit(cache=True)
def _ellipsoid(z, P, scale, tol, max_iter, J, Q, s, E, wf3C, fC, rbar,
               T, B, alpha, tau_lb, tbar, a_relay):
    """Central-cut ellipsoid minimization of the dual over y = scale * z >= 0.

    Works in the scaled coordinates z. Returns (status, iterations, z_best,
    g_best, lower, trace) with status 0 = converged, 1 = iteration cap,
    2 = degenerate shape matrix.
    """
    n = z.shape[0]
    nn = float(n)
    grow = nn * nn / (nn * nn - 1.0)
    shrink = 2.0 / (nn + 1.0)
    dlogvol = 0.5 * (nn * math.log(grow) + math.log(1.0 - shrink))
    logvol = 0.0
    g_best = math.inf
    lower = -math.inf
    z_best = z.copy()
    trace = np.full((max_iter, 2), np.nan)
    a = np.empty(n)
    y = np.empty(n)
    status = 1
    it = 0
    while it < max_iter:
        for i in range(n):
            y[i] = scale[i] * z[i]
        imin = 0
        for i in range(1, n):
            if z[i] < z[imin]:
                imin = i
        objective_cut = z[imin] >= 0.0
        if objective_cut:
            val, res = _value_and_residual(y, J, Q, s, E, wf3C, fC, rbar,
                                           T, B, alpha, tau_lb, tbar, a_relay)
            if val < g_best:
                g_best = val
                z_best[:] = z
            for i in range(n):
                a[i] = -res[i] * scale[i]
        else:
            for i in range(n):
                a[i] = 0.0
            a[imin] = -1.0
        Pa = P @ a
        q = 0.0
        for i in range(n):
            q += a[i] * Pa[i]
        if objective_cut:
            if q <= 0.0:
                # zero subgradient: the center is a minimizer
                lower = g_best
                trace[it, 0] = g_best
                trace[it, 1] = logvol
                status = 0
                it += 1
                break
            lb = val - math.sqrt(q)
            if lb > lower:
                lower = lb
            if g_best - lower <= tol * max(1.0, abs(g_best)):
                trace[it, 0] = g_best
                trace[it, 1] = logvol
                status = 0
                it += 1
                break
        elif q <= 0.0:
            status = 2
            break
        sq = math.sqrt(q)
        for i in range(n):
            Pa[i] /= sq
            z[i] -= Pa[i] / (nn + 1.0)
        for i in range(n):
            bi = Pa[i]
            for j in range(i, n):
                pij = grow * (P[i, j] - shrink * bi * Pa[j])
                P[i, j] = pij
                P[j, i] = pij
        logvol += dlogvol
        trace[it, 0] = g_best
        trace[it, 1] = logvol
        it += 1
    return status, it, z_best, g_best, lower, trace[:it]


# -- data model --------------------------------------------------------------


@dataclass(frozen=True)
class DualPoint:
    """Multipliers in the fixed order (zeta | mu | lam | eta)."""

    zeta: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        for name in ("zeta", "mu", "lam", "eta"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float, ndmin=1))
        if any(np.any(getattr(self, n) < 0) for n in ("zeta", "mu", "lam", "eta")):
            raise ValueError("multipliers must be nonnegative")
        if not (self.mu.size == self.lam.size == self.eta.size):
            raise ValueError("mu, lam and eta must have the same length")

    @property
    def time_price(self):
        return float(np.sum(self.zeta))

    def as_vector(self):
        return np.concatenate([self.zeta, self.mu, self.lam, self.eta])

    @classmethod
    def from_vector(cls, y, J, M):
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        return cls(y[:J], y[J:J + M], y[J + M:J + 2 * M], y[J + 2 * M:J + 3 * M])


@dataclass(frozen=True)
class SwitchValues:
    """Switching quantities whose signs select the Lagrangian maximizer.

    ``rho`` is the offload power (e/t) that balances the energy price against
    the capacity price; ``s_off``, ``u``, ``v`` and ``s_relay`` switch the
    offload time, local time, offloaded bits and relay time.
    """

    rho: np.ndarray
    s_off: np.ndarray
    u: np.ndarray
    v: np.ndarray
    s_relay: float


@dataclass(frozen=True)
class EllipsoidState:
    center: np.ndarray
    shape: np.ndarray
    iteration: int
    best_dual_value: float

    def is_positive_definite(self):
        try:
            np.linalg.cholesky(self.shape)
        except np.linalg.LinAlgError:
            return False
        return True


@dataclass(frozen=True)
class DualResult:
    dual: DualPoint
    value: float
    lower_bound: float
    iterations: int
    restarts: int
    trace: np.ndarray = field(repr=False)
    state: EllipsoidState = field(repr=False)


@dataclass(frozen=True)
class DualProblem:
    """Packed instance data for the Lagrangian kernels.

    ``coupling`` selects the remote-time coupling: one shared constraint with
    the proportional processor split, or one constraint per node when every
    node gets ``f_mec_max / M``.
    """

    instance: object
    coupling: str
    J: int
    Q: np.ndarray
    s: np.ndarray
    E: np.ndarray
    wf3C: np.ndarray
    fC: np.ndarray
    rbar: np.ndarray
    tau_lb: float
    tbar: float
    a_relay: float

    @classmethod
    def build(cls, instance, coupling=PROPORTIONAL):
        tau_lb = feasibility_gate(instance)
        C = instance.common_cycles()
        sys_, nodes = instance.system, instance.nodes
        M = instance.M
        tbar = sys_.T - tau_lb
        if coupling == PROPORTIONAL:
            Q = np.full((1, M), C / sys_.f_mec_max)
        elif coupling == EQUAL:
            Q = np.diag(np.full(M, C * M / sys_.f_mec_max))
        else:
            raise ValueError(f"unknown coupling {coupling!r}")
        rbar = tbar / Q.max(axis=0)
        return cls(
            instance, coupling, Q.shape[0], Q,
            np.ascontiguousarray(offload_snr_per_watt(instance)),
            np.array(nodes.E), nodes.local_energy_rate().copy(), (nodes.f / nodes.C).copy(),
            rbar, tau_lb, tbar, float(relay_bits_per_second(instance)),
        )

    @property
    def M(self):
        return self.instance.M

    @property
    def n(self):
        return self.J + 3 * self.M

    def _args(self):
        sys_ = self.instance.system
        return (self.J, self.Q, self.s, self.E, self.wf3C, self.fC, self.rbar,
                sys_.T, sys_.B_w, sys_.alpha, self.tau_lb, self.tbar, self.a_relay)

    def argmax(self, dual):
        return _argmax(dual.as_vector(), *self._args())

    def value_and_residual(self, dual):
        return _value_and_residual(dual.as_vector(), *self._args())

    def initial_scale(self):
        """Typical magnitude of each multiplier; the ellipsoid works in units of these."""
        sys_, M = self.instance.system, self.M
        w1 = max(1.0 - sys_.alpha, 0.05)
        q = self.Q.max(axis=0)
        zeta0 = max(w1 / float(q.mean()), sys_.alpha * self.a_relay / self.J)
        mu0 = w1 * self.fC
        span = self.tbar if self.tbar > 0 else sys_.T
        rho0 = self.E * M / span
        lam0 = w1 * sys_.B_w * LOG2E * self.s / (1.0 + rho0 * self.s)
        lam0 = np.maximum(lam0, 1e-6 * w1 * self.fC / self.wf3C)
        eta0 = np.full(M, w1)
        return np.concatenate([np.full(self.J, zeta0), mu0, lam0, eta0])


# -- public operations -------------------------------------------------------


def _problem(instance, coupling=PROPORTIONAL):
    return DualProblem.build(instance, coupling)


def switch_values(instance, dual, coupling=PROPORTIONAL):
    out = _problem(instance, coupling).argmax(dual)
    return SwitchValues(out[5], out[6], out[7], out[8], float(out[9]))


def primal_from_dual(instance, dual, coupling=PROPORTIONAL):
    """Lagrangian maximizer for a dual point.

    Switching values of exactly zero take the lower endpoint. The processor
    split is left at zero here; recovery assigns it.
    """
    tau, t_loc, t_off, e_off, r_mec = _problem(instance, coupling).argmax(dual)[:5]
    return PrimalSolution.build(instance, tau, t_loc, t_off, e_off, r_mec, np.zeros(instance.M))


def tie_mask(instance, dual, coupling=PROPORTIONAL):
    """Which switching values sit exactly at zero (ambiguous maximizers)."""
    sw = switch_values(instance, dual, coupling)
    return {"s_off": sw.s_off == 0, "u": sw.u == 0, "v": sw.v == 0, "s_relay": sw.s_relay == 0}


def _coupling_matrix(instance, coupling):
    C = instance.common_cycles()
    F, M = instance.system.f_mec_max, instance.M
    if coupling == PROPORTIONAL:
        return np.full((1, M), C / F)
    return np.diag(np.full(M, C * M / F))


def subgradient(instance, dual, primal, coupling=PROPORTIONAL):
    """Constraint residuals at ``primal`` in dual-vector order.

    These are the printed subgradient components; the dual function itself
    decreases along them, i.e. its subgradient is their negation.
    """
    sys_, nodes = instance.system, instance.nodes
    Q = _coupling_matrix(instance, coupling)
    time_used = primal.tau_r + float(np.sum(primal.t_off)) - sys_.T
    return np.concatenate([
        time_used + Q @ primal.r_mec,
        primal.t_loc - sys_.T,
        nodes.local_energy_rate() * primal.t_loc + primal.e_off - nodes.E,
        primal.r_mec - offload_capacity(instance, primal.t_off, primal.e_off),
    ])


def lagrangian_value(instance, dual, primal, coupling=PROPORTIONAL):
    a = instance.system.alpha
    obj = a * primal.r_relay + (1.0 - a) * float(np.sum(primal.r_local + primal.r_mec))
    return obj - float(dual.as_vector() @ subgradient(instance, dual, primal, coupling))


def dual_function(instance, dual, coupling=PROPORTIONAL):
    """g(dual): the maximum of the Lagrangian over the implied bound box."""
    return float(_problem(instance, coupling).value_and_residual(dual)[0])


def solve_dual(instance, tolerance=1e-6, max_iterations=None, coupling=PROPORTIONAL,
               radius=10.0, max_restarts=3):
    """Minimize the dual function with the central-cut ellipsoid method.

    Iterates in coordinates normalized by :meth:`DualProblem.initial_scale`,
    starting from the ball of radius ``radius`` around the all-ones point.
    The run stops once the gap between the best dual value and the cutting-
    plane lower bound is below ``tolerance`` (relative). When the best point
    ends up near the edge of the starting ball the radius is doubled and the
    run repeated, at most ``max_restarts`` times.
    """
    prob = _problem(instance, coupling)
    n = prob.n
    if max_iterations is None:
        max_iterations = 20 * n * n
    scale = prob.initial_scale()
    args = prob._args()
    total = 0
    traces = []
    for attempt in range(max_restarts + 1):
        z0 = np.ones(n)
        z = z0.copy()
        P = np.eye(n) * radius**2
        # z and P are updated in place and end as the final ellipsoid
        status, its, z_best, g_best, lower, trace = _ellipsoid(
            z, P, scale, tolerance, max_iterations, *args)
        trace = np.column_stack([np.arange(total, total + its), trace])
        traces.append(trace)
        total += its
        dist = np.linalg.norm(z_best - z0) / radius
        if dist < 0.9 or attempt == max_restarts:
            break
        radius *= 2.0
    y_best = scale * z_best
    dual = DualPoint.from_vector(y_best, prob.J, prob.M)
    state = EllipsoidState(scale * z, P * np.outer(scale, scale), total, g_best)
    result = DualResult(dual, float(g_best), float(lower), total, attempt,
                        np.vstack(traces), state)
    if status != 0:
        raise MaxIterationsExceeded(result, total)
    return result
