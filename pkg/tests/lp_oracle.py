"""Vertex enumeration for small bounded LPs, used to certify the simplex code."""

from itertools import combinations

import numpy as np


def vertex_max(c, A_ub, b_ub, A_eq, b_eq, lower, upper, feas_tol=1e-9):
    """Best vertex of a bounded polytope, or (None, -inf) when it is empty.

    Every vertex is the solution of the equalities plus n - m_eq active
    inequalities (constraint rows and finite bounds).
    """
    n = len(c)
    rows = [A_ub, -np.eye(n), np.eye(n)[np.isfinite(upper)]]
    rhs = [b_ub, -lower, upper[np.isfinite(upper)]]
    G, h = np.vstack(rows), np.concatenate(rhs)
    m_eq = A_eq.shape[0]
    k = n - m_eq
    if k < 0:
        return None, -np.inf
    picks = list(combinations(range(G.shape[0]), k))
    combos = np.array(picks, dtype=int).reshape(len(picks), k)
    mats = np.concatenate([np.broadcast_to(A_eq, (len(combos), m_eq, n)), G[combos]], axis=1)
    vecs = np.concatenate([np.broadcast_to(b_eq, (len(combos), m_eq)), h[combos]], axis=1)
    keep = np.abs(np.linalg.det(mats)) > 1e-10
    if not keep.any():
        return None, -np.inf
    x = np.linalg.solve(mats[keep], vecs[keep][..., None])[..., 0]
    scale = 1.0 + np.abs(h)
    ok = np.all(x @ G.T - h <= feas_tol * scale, axis=1)
    if m_eq:
        ok &= np.all(np.abs(x @ A_eq.T - b_eq) <= feas_tol * (1.0 + np.abs(b_eq)), axis=1)
    if not ok.any():
        return None, -np.inf
    vals = x[ok] @ c
    i = int(np.argmax(vals))
    return x[ok][i], float(vals[i])


def random_lp(rng, n_max=8):
    """A random bounded LP with up to ``n_max`` variables; some are infeasible."""
    n = int(rng.integers(1, n_max + 1))
    m_ub = int(rng.integers(0, 5))
    m_eq = int(rng.integers(0, min(3, n + 1)))
    c = rng.normal(size=n)
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = rng.normal(size=m_ub) + 1.0
    A_eq = rng.normal(size=(m_eq, n))
    lower = np.where(rng.random(n) < 0.3, -rng.random(n), 0.0)
    upper = lower + 0.5 + 2 * rng.random(n)
    # equality right-hand sides from an interior point, perturbed now and then
    x0 = lower + rng.random(n) * (upper - lower)
    b_eq = A_eq @ x0
    if rng.random() < 0.15:
        b_eq = b_eq + 5 * rng.normal(size=m_eq)
    return c, A_ub, b_ub, A_eq, b_eq, lower, upper
