"""Brute-force reference solvers for tiny instances.

These share no code with the dual solver beyond the model's rate formulas.
The grid search covers ``(tau_r, t_off, phi)`` with ``e_off = phi * E``; the
multistart search covers ``(t_off, phi)`` and sets ``tau_r`` exactly. The rest
is filled in analytically: local compute runs for as long as the leftover
energy and the frame allow, and the offloaded bits take the smaller of the
total uplink capacity and what the server can process in the remaining time.
"""

from __future__ import annotations

import numpy as np

from .model import (
    PrimalSolution,
    feasibility_gate,
    offload_snr_per_watt,
    relay_bits_per_second,
)

GRID_MAX_NODES = 2
MULTISTART_MAX_NODES = 4


class _Filler:
    """Vectorized objective over (tau, t_off[..., M], phi[..., M])."""

    def __init__(self, instance):
        self.inst = instance
        sys_, nodes = instance.system, instance.nodes
        self.T, self.B, self.alpha = sys_.T, sys_.B_w, sys_.alpha
        self.F = sys_.f_mec_max
        self.C = float(nodes.C[0])
        self.E = nodes.E
        self.s = offload_snr_per_watt(instance)
        self.loc_rate = nodes.local_energy_rate()
        self.fC = nodes.f / nodes.C
        self.a = relay_bits_per_second(instance)

    def parts(self, tau, t_off, phi):
        e = phi * self.E
        t_loc = np.minimum(self.T, (self.E - e) / self.loc_rate)
        with np.errstate(divide="ignore", invalid="ignore"):
            cap = np.where(t_off > 0, t_off * self.B * np.log2(1.0 + e * self.s / t_off), 0.0)
        left = self.T - tau - t_off.sum(axis=-1)
        total = np.minimum(cap.sum(axis=-1), np.maximum(left, 0.0) * self.F / self.C)
        capsum = cap.sum(axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(capsum[..., None] > 0, cap / capsum[..., None], 0.0)
        r_mec = share * total[..., None]
        value = self.alpha * self.a * tau + (1 - self.alpha) * (
            (self.fC * t_loc).sum(axis=-1) + total)
        value = np.where(left >= -1e-15, value, -np.inf)
        return value, t_loc, e, r_mec

    def value(self, tau, t_off, phi):
        return self.parts(tau, t_off, phi)[0]

    def best_tau(self, lb, t_off, phi):
        """Exact maximizer over tau for fixed offload times and energies.

        The objective is piecewise linear in tau with a single kink where the
        server time starts to bind, so the best tau is the lower bound, the
        kink or the end of the frame left after offloading. Works on stacks
        of points (leading axes of ``t_off`` and ``phi``).
        """
        e = phi * self.E
        with np.errstate(divide="ignore", invalid="ignore"):
            cap = np.where(t_off > 0, t_off * self.B * np.log2(1.0 + e * self.s / t_off), 0.0)
        top = self.T - t_off.sum(axis=-1)
        kink = top - cap.sum(axis=-1) * self.C / self.F
        cands = np.stack([np.full_like(top, lb), kink, top])
        cands = np.clip(cands, lb, np.maximum(top, lb))
        vals = self.value(cands, np.broadcast_to(t_off, (3,) + t_off.shape),
                          np.broadcast_to(phi, (3,) + phi.shape))
        i = np.argmax(vals, axis=0)
        pick = np.take_along_axis(cands, i[None], 0)[0]
        return pick, np.take_along_axis(vals, i[None], 0)[0]

    def solution(self, tau, t_off, phi):
        tau = float(tau)
        t_off = np.asarray(t_off, dtype=float)
        phi = np.asarray(phi, dtype=float)
        _, t_loc, e, r_mec = self.parts(np.array(tau), t_off, phi)
        tot = r_mec.sum()
        f_mec = self.F * r_mec / tot if tot > 0 else np.zeros_like(r_mec)
        return PrimalSolution.build(self.inst, tau, t_loc, t_off, e, r_mec, f_mec)


def grid_solve(instance, grid_points_per_axis=None, refine=3):
    """Exhaustive grid search, then ``refine`` rounds of zooming around the best cell.

    Each zoom re-grids a box two cells wide on each side of the incumbent, so
    the final resolution is ``(4 / (n - 1))**refine`` of the first grid's.
    """
    lb = feasibility_gate(instance)
    M = instance.M
    if M > GRID_MAX_NODES:
        raise ValueError(f"oracle limited to M ≤ {GRID_MAX_NODES}")
    n = grid_points_per_axis or (60 if M == 1 else 25)
    if n < 2:
        raise ValueError("need at least two grid points per axis")
    fill = _Filler(instance)
    T = fill.T
    lo = np.array([lb] + [0.0] * M + [0.0] * M)
    hi = np.array([T] + [T - lb] * M + [1.0] * M)
    box_lo, box_hi = lo.copy(), hi.copy()
    best_x, best_v = None, -np.inf
    for level in range(refine + 1):
        axes = [np.linspace(box_lo[i], box_hi[i], n) for i in range(1 + 2 * M)]
        x, v = _grid_best(fill, axes, M)
        if v > best_v:
            best_x, best_v = x, v
        if best_x is None:
            break
        step = (box_hi - box_lo) / (n - 1)
        box_lo = np.maximum(lo, best_x - 2 * step)
        box_hi = np.minimum(hi, best_x + 2 * step)
    return fill.solution(best_x[0], best_x[1:1 + M], best_x[1 + M:])


def _grid_best(fill, axes, M):
    best_v, best_x = -np.inf, None
    # loop over tau to bound memory; the other 2M axes are a dense mesh
    mesh = np.meshgrid(*axes[1:], indexing="ij")
    t_off = np.stack(mesh[:M], axis=-1).reshape(-1, M)
    phi = np.stack(mesh[M:], axis=-1).reshape(-1, M)
    for tau in axes[0]:
        vals = fill.value(np.full(t_off.shape[0], tau), t_off, phi)
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v = float(vals[i])
            best_x = np.concatenate([[tau], t_off[i], phi[i]])
    return best_x, best_v


def multistart_solve(instance, starts=20, local_steps=400, seed=0, return_all=False,
                     max_kicks=8):
    """Best of ``starts`` pattern-search ascents from random feasible points.

    The search runs over ``(t_off, phi)`` only; for each point the relay
    time is set to its exact maximizer (see ``_Filler.best_tau``), which
    removes the ridge where the server time starts to bind. Each ascent
    polls coordinate and random directions plus its last successful
    direction, moves to the best improving poll and doubles the step (capped
    at 0.25), or halves the step when no poll improves. A run whose
    step collapses restarts it at 1e-2, up to ``max_kicks`` times. Points are
    kept feasible by clipping to the box and shrinking the offload times when
    they would overrun the frame.
    """
    lb = feasibility_gate(instance)
    M = instance.M
    if M > MULTISTART_MAX_NODES:
        raise ValueError(f"multistart oracle limited to M ≤ {MULTISTART_MAX_NODES}")
    fill = _Filler(instance)
    T = fill.T
    lo = np.zeros(2 * M)
    hi = np.array([T - lb] * M + [1.0] * M)
    span = np.where(hi > lo, hi - lo, 1.0)
    rng = np.random.default_rng(seed)
    dim = 2 * M

    def project(x):
        x = np.clip(x, lo, hi)
        over = x[:M].sum() - (T - lb)
        if over > 0:
            x[:M] *= max(0.0, 1.0 - over / x[:M].sum())
        return x

    def f(X):
        return fill.best_tau(lb, X[..., :M], X[..., M:])[1]

    basis = np.vstack([np.eye(dim), -np.eye(dim)])
    results = []
    for _ in range(starts):
        x = project(lo + rng.random(dim) * span)
        v = float(f(x))
        step = 0.25
        kicks = 0
        last = np.zeros(dim)
        history = [v]
        for _ in range(local_steps):
            rand = rng.normal(size=(2 * dim, dim))
            rand /= np.linalg.norm(rand, axis=1, keepdims=True)
            dirs = np.vstack([basis, rand, -rand, last[None]])
            Y = np.array([project(x + step * d * span) for d in dirs])
            W = f(Y)
            j = int(np.argmax(W))
            if W[j] > v:
                # remember the winning direction and stretch along it
                move = (Y[j] - x) / span
                norm = np.linalg.norm(move)
                if norm > 0:
                    last = move / norm
                x, v = Y[j], float(W[j])
                step = min(2.0 * step, 0.25)
            else:
                step *= 0.5
                if step < 1e-13:
                    if kicks == max_kicks:
                        history.append(v)
                        break
                    kicks += 1
                    step = 1e-2
            history.append(v)
        results.append((v, x, history))
    v, x, _ = max(results, key=lambda r: r[0])
    tau = float(fill.best_tau(lb, x[:M], x[M:])[0])
    sol = fill.solution(tau, x[:M], x[M:])
    if return_all:
        return sol, results
    return sol
