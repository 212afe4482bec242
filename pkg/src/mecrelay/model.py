"""System model: parameters, link rates, constraint checks and the feasibility gate.

All quantities are SI (watts, seconds, Hz, joules, bits). dBm values are
converted once, at the configuration boundary, with :func:`dbm_to_watt`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    HeterogeneousCycles,
    InfeasibleInstance,
    RelayPathDegenerate,
)


def dbm_to_watt(p_dbm):
    p = 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)
    return float(p) if p.ndim == 0 else p


def _frozen_array(values, name, length=None):
    arr = np.array(values, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional")
    if length is not None and arr.size != length:
        raise DimensionMismatch(f"{name} has length {arr.size}, expected {length}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemParams:
    """Frame, radio and server parameters. Defaults are the reference scenario."""

    T: float = 0.1
    B_w: float = 1.4e6
    sigma2: float = 10.0 ** ((-132.24 - 30.0) / 10.0)
    P_PT: float = 10.0 ** ((43.0 - 30.0) / 10.0)
    P_AP: float = 1.0
    f_mec_max: float = 1e12
    alpha: float = 0.5
    eta1: float = 4.0
    eta2: float = 4.0
    eta3: float = 4.0
    eta4: float = 2.0

    def __post_init__(self):
        for name in ("T", "B_w", "sigma2", "P_PT", "P_AP", "f_mec_max"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        for name in ("eta1", "eta2", "eta3", "eta4"):
            if getattr(self, name) < 1.0:
                raise ValueError(f"path-loss exponent {name} must be >= 1")


@dataclass(frozen=True)
class Geometry:
    d_pt_pr: float
    d_pt_ap: float
    d_ap_pr: float
    d_iot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d_iot", _frozen_array(self.d_iot, "d_iot"))
        dists = [self.d_pt_pr, self.d_pt_ap, self.d_ap_pr, *self.d_iot]
        if not all(np.isfinite(d) and d > 0 for d in dists):
            raise ValueError("all distances must be strictly positive")

    @classmethod
    def on_line(cls, d_pt_pr, d_pt_ap, d_iot):
        """Access point on the straight PT-PR segment."""
        return cls(d_pt_pr, d_pt_ap, d_pt_pr - d_pt_ap, d_iot)


@dataclass(frozen=True)
class NodeParams:
    """Per-node task and hardware parameters (arrays of length M).

    ``C`` is cycles per bit, ``f`` the local CPU rate, ``w`` the chip
    energy coefficient and ``E`` the battery budget for one frame.
    """

    C: np.ndarray
    f: np.ndarray
    w: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        M = np.size(self.C)
        for name in ("C", "f", "w", "E"):
            arr = _frozen_array(getattr(self, name), name, M)
            # a drained battery is allowed; the hardware figures are not
            low_ok = arr >= 0 if name == "E" else arr > 0
            if not np.all(np.isfinite(arr) & low_ok):
                raise ValueError(f"{name} must be {'nonnegative' if name == 'E' else 'strictly positive'}")
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, M, C=1e4, f=1e10, w=1e-28, E=1.0):
        ones = np.ones(M)
        return cls(C * ones, f * ones, w * ones, E * ones)

    @property
    def M(self):
        return self.C.size

    def local_energy_rate(self):
        """Joules per second of local computing, w f^3 / C."""
        return self.w * self.f**3 / self.C

    def local_cap(self, T):
        """Longest local-compute time allowed by the frame and the battery."""
        return np.minimum(T, self.E / self.local_energy_rate())


@dataclass(frozen=True)
class ChannelGains:
    """Squared channel magnitudes |h|^2."""

    g_pt_pr: float
    g_pt_ap: float
    g_ap_pr: float
    g_iot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g_iot", _frozen_array(self.g_iot, "g_iot"))
        if min(self.g_pt_pr, self.g_pt_ap, self.g_ap_pr) < 0 or np.any(self.g_iot < 0):
            raise ValueError("channel gains must be nonnegative")


@dataclass(frozen=True)
class Instance:
    system: SystemParams
    geometry: Geometry
    nodes: NodeParams
    channels: ChannelGains

    def __post_init__(self):
        M = self.nodes.M
        if M < 1:
            raise ValueError("need at least one IoT node")
        if self.geometry.d_iot.size != M:
            raise DimensionMismatch(f"d_iot has length {self.geometry.d_iot.size}, expected {M}")
        if self.channels.g_iot.size != M:
            raise DimensionMismatch(f"g_iot has length {self.channels.g_iot.size}, expected {M}")

    @property
    def M(self):
        return self.nodes.M

    def with_alpha(self, alpha):
        return replace(self, system=replace(self.system, alpha=alpha))

    def with_energy(self, E):
        n = self.nodes
        return replace(self, nodes=NodeParams(n.C, n.f, n.w, np.broadcast_to(E, n.C.shape)))

    def common_cycles(self):
        """The shared cycles-per-bit value; raises if nodes disagree."""
        C = self.nodes.C
        if not np.all(C == C[0]):
            raise HeterogeneousCycles("solver requires identical cycles per bit across nodes")
        return float(C[0])


@dataclass(frozen=True)
class PrimalSolution:
    tau_r: float
    t_loc: np.ndarray
    t_off: np.ndarray
    e_off: np.ndarray
    r_mec: np.ndarray
    f_mec: np.ndarray
    objective: float
    r_relay: float
    r_local: np.ndarray

    @classmethod
    def build(cls, instance, tau_r, t_loc, t_off, e_off, r_mec, f_mec):
        """Assemble a solution and fill in the derived rate and objective fields."""
        M = instance.M
        t_loc = _frozen_array(t_loc, "t_loc", M)
        t_off = _frozen_array(t_off, "t_off", M)
        e_off = _frozen_array(e_off, "e_off", M)
        r_mec = _frozen_array(r_mec, "r_mec", M)
        f_mec = _frozen_array(f_mec, "f_mec", M)
        r_relay = relay_rate(instance, tau_r)
        r_local = _frozen_array(local_bits(instance.nodes, t_loc), "r_local", M)
        a = instance.system.alpha
        value = a * r_relay + (1.0 - a) * float(np.sum(r_local + r_mec))
        return cls(float(tau_r), t_loc, t_off, e_off, r_mec, f_mec, value, r_relay, r_local)

    @property
    def computation_bits(self):
        return float(np.sum(self.r_local + self.r_mec))


# -- rates -------------------------------------------------------------------


def link_snr(power, gain, distance, exponent, sigma2):
    return power * gain * distance ** (-exponent) / sigma2


def direct_snr(instance):
    s, g, c = instance.system, instance.geometry, instance.channels
    return link_snr(s.P_PT, c.g_pt_pr, g.d_pt_pr, s.eta1, s.sigma2)


def relay_snr(instance):
    """min(gamma_PT-AP, gamma_PT-PR + gamma_AP-PR) for decode-and-forward."""
    s, g, c = instance.system, instance.geometry, instance.channels
    first_hop = link_snr(s.P_PT, c.g_pt_ap, g.d_pt_ap, s.eta3, s.sigma2)
    combined = direct_snr(instance) + link_snr(s.P_AP, c.g_ap_pr, g.d_ap_pr, s.eta2, s.sigma2)
    return min(first_hop, combined)


def relay_bits_per_second(instance):
    """Slope of the relay rate in tau_r: (B_w / 2) log2(1 + relay SNR)."""
    return 0.5 * instance.system.B_w * np.log2(1.0 + relay_snr(instance))


def relay_rate(instance, tau_r):
    return float(tau_r) * relay_bits_per_second(instance)


def direct_rate(instance):
    s = instance.system
    return s.T * s.B_w * np.log2(1.0 + direct_snr(instance))


def local_bits(nodes, t_loc):
    return np.asarray(t_loc, dtype=float) * nodes.f / nodes.C


def offload_snr_per_watt(instance):
    """Received SNR per watt of offload power, |h_k|^2 d_k^-eta4 / sigma^2."""
    s = instance.system
    return instance.channels.g_iot * instance.geometry.d_iot ** (-s.eta4) / s.sigma2


def capacity(t_off, e_off, snr_per_watt, B_w):
    """t B log2(1 + e s / t), extended by its limit 0 at t = 0."""
    t = np.asarray(t_off, dtype=float)
    e = np.asarray(e_off, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = t * B_w * np.log2(1.0 + e * snr_per_watt / t)
    val = np.where(t > 0, val, 0.0)
    return val if val.ndim else float(val)


def offload_capacity(instance, t_off, e_off):
    return capacity(t_off, e_off, offload_snr_per_watt(instance), instance.system.B_w)


def objective(instance, solution):
    a = instance.system.alpha
    comp = np.sum(local_bits(instance.nodes, solution.t_loc) + solution.r_mec)
    return a * relay_rate(instance, solution.tau_r) + (1.0 - a) * float(comp)


# -- feasibility -------------------------------------------------------------


def tau_r_lower_bound(instance):
    """Shortest relay phase whose relayed bits match the direct-link bits."""
    gd = direct_snr(instance)
    if gd == 0:
        return 0.0
    gr = relay_snr(instance)
    if gr == 0:
        raise RelayPathDegenerate("relay path SNR is zero")
    return 2.0 * instance.system.T * np.log2(1.0 + gd) / np.log2(1.0 + gr)


def feasibility_gate(instance):
    """Return tau_r_lb, or raise InfeasibleInstance when it exceeds T."""
    T = instance.system.T
    try:
        lb = tau_r_lower_bound(instance)
    except RelayPathDegenerate:
        lb = np.inf
    if lb > T:
        raise InfeasibleInstance(lb, direct_rate(instance), T)
    return float(lb)


# -- constraint checks -------------------------------------------------------


@dataclass(frozen=True)
class Slack:
    name: str
    slack: float
    scale: float

    def violated(self, tol):
        return self.slack < -tol * self.scale


@dataclass(frozen=True)
class ConstraintReport:
    slacks: tuple
    tol: float

    @property
    def violations(self):
        return [s for s in self.slacks if s.violated(self.tol)]

    @property
    def ok(self):
        return not self.violations

    def __getitem__(self, name):
        for s in self.slacks:
            if s.name == name:
                return s
        raise KeyError(name)


def _scale(rhs):
    mag = abs(float(rhs))
    return mag if mag > 0 else 1.0


def check_constraints(instance, solution, tol=1e-6):
    """Signed, scale-normalized slack for every constraint of the joint problem.

    Slack is rhs - lhs for ``lhs <= rhs``; a constraint is violated when the
    slack drops below ``-tol * |rhs|`` (``-tol`` when the rhs is zero).
    """
    sys_, nodes = instance.system, instance.nodes
    T, M = sys_.T, instance.M
    out = []

    def add(name, rhs, lhs, scale=None):
        out.append(Slack(name, float(rhs - lhs), _scale(rhs) if scale is None else scale))

    for fname in ("t_loc", "t_off", "e_off", "r_mec", "f_mec"):
        arr = getattr(solution, fname)
        for k in range(M):
            add(f"nonneg:{fname}[{k}]", arr[k], 0.0, 1.0)
    add("nonneg:tau_r", solution.tau_r, 0.0, T)
    add("frame", T, solution.tau_r, T)

    add("relay_guarantee", relay_rate(instance, solution.tau_r), direct_rate(instance),
        _scale(direct_rate(instance)))

    cap = offload_capacity(instance, solution.t_off, solution.e_off)
    remaining = T - solution.tau_r - float(np.sum(solution.t_off))
    energy = nodes.local_energy_rate() * solution.t_loc + solution.e_off
    for k in range(M):
        add(f"capacity[{k}]", cap[k], solution.r_mec[k])
        add(f"local_time[{k}]", T, solution.t_loc[k], T)
        if solution.f_mec[k] > 0:
            remote = solution.r_mec[k] * nodes.C[k] / solution.f_mec[k]
        else:
            remote = 0.0 if solution.r_mec[k] == 0 else np.inf
        add(f"remote_time[{k}]", remaining, remote, T)
        add(f"energy[{k}]", nodes.E[k], energy[k])
    add("mec_cpu", sys_.f_mec_max, float(np.sum(solution.f_mec)))
    return ConstraintReport(tuple(out), tol)
