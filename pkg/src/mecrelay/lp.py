"""Dense two-phase primal simplex for small linear programs.

Problems here have a few dozen variables, so the tableau is kept dense and
Bland's rule is used for both the entering and the leaving choice; it is
slow on big problems but never cycles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def _as_matrix(A, n, name):
    if A is None:
        return np.zeros((0, n))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return np.zeros((0, n))
    if A.shape[1] != n:
        raise DimensionMismatch(f"{name} has {A.shape[1]} columns, expected {n}")
    return A


def _as_vector(b, m, name):
    if b is None:
        b = np.zeros(0)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != m:
        raise DimensionMismatch(f"{name} has length {b.size}, expected {m}")
    if not np.all(np.isfinite(b)):
        raise ValueError(f"{name} must be finite")
    return b


@dataclass(frozen=True)
class LinearProgram:
    """maximize c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper.

    ``lower`` defaults to 0 and must be finite; ``upper`` defaults to +inf.
    """

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A_ub = _as_matrix(self.A_ub, n, "A_ub")
        A_eq = _as_matrix(self.A_eq, n, "A_eq")
        b_ub = _as_vector(self.b_ub, A_ub.shape[0], "b_ub")
        b_eq = _as_vector(self.b_eq, A_eq.shape[0], "b_eq")
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.size != n or upper.size != n:
            raise DimensionMismatch("bounds must have one entry per variable")
        if not np.all(np.isfinite(lower)):
            raise ValueError("lower bounds must be finite")
        for name, val in (("c", c), ("A_ub", A_ub), ("b_ub", b_ub), ("A_eq", A_eq),
                          ("b_eq", b_eq), ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.c.size

    def residuals(self, x):
        """(A_ub x - b_ub, A_eq x - b_eq) for a candidate point."""
        return self.A_ub @ x - self.b_ub, self.A_eq @ x - self.b_eq


@dataclass(frozen=True)
class LpSolution:
    x: Optional[np.ndarray]
    value: float
    status: str
    basis: tuple = ()


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    piv = tab[row]
    colv = tab[:, col].copy()
    colv[row] = 0.0
    nz = np.nonzero(colv)[0]
    if nz.size:
        tab[nz] -= np.outer(colv[nz], piv)


def _run_simplex(tab, basis, n_cols, tol, max_pivots):
    """Bland's-rule simplex on a tableau whose last row holds -reduced costs.

    Only the first ``n_cols`` columns may enter. Returns OPTIMAL or UNBOUNDED.
    """
    m = len(basis)
    for _ in range(max_pivots):
        obj = tab[-1, :n_cols]
        entering = np.nonzero(obj < -tol)[0]
        if entering.size == 0:
            return OPTIMAL
        col = int(entering[0])
        a = tab[:m, col]
        rows = np.nonzero(a > tol)[0]
        if rows.size == 0:
            return UNBOUNDED
        ratios = tab[rows, -1] / a[rows]
        best = ratios.min()
        # ties are relative: step lengths here can be ~1e-7 after scaling
        ties = rows[ratios <= best + 1e-12 * abs(best)]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
    raise RuntimeError("simplex pivot limit reached")


def _equilibrate(A, passes=4):
    """Ruiz-style scaling; returns (row_scale, col_scale) with A_scaled = R A S."""
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    B = A.copy()
    for _ in range(passes):
        rmax = np.abs(B).max(axis=1) if n else np.ones(m)
        rmax[rmax == 0] = 1.0
        B /= np.sqrt(rmax)[:, None]
        r /= np.sqrt(rmax)
        cmax = np.abs(B).max(axis=0) if m else np.ones(n)
        cmax[cmax == 0] = 1.0
        B /= np.sqrt(cmax)[None, :]
        s /= np.sqrt(cmax)
    # final pass: every row's largest coefficient is exactly 1
    rmax = np.abs(B).max(axis=1) if n else np.ones(m)
    rmax[rmax == 0] = 1.0
    r /= rmax
    return r, s


def _basic_solution(A, b, basis, fallback):
    """Re-solve B x_B = b from the unpivoted rows; pivoting drifts on tiny values."""
    try:
        xb = np.linalg.solve(A[:, basis], b)
    except np.linalg.LinAlgError:
        return fallback
    if not np.all(np.isfinite(xb)):
        return fallback
    r_new = np.abs(A[:, basis] @ xb - b).max(initial=0.0)
    r_old = np.abs(A[:, basis] @ fallback - b).max(initial=0.0)
    return xb if r_new <= r_old else fallback


def solve_lp(lp: LinearProgram, tol: float = 1e-9, max_pivots: int = 100_000) -> LpSolution:
    """Solve a LinearProgram with the two-phase simplex method."""
    n = lp.n
    lower, upper = lp.lower, lp.upper
    if np.any(upper < lower):
        return LpSolution(None, float("nan"), INFEASIBLE)

    # shift to x' = x - lower >= 0 and turn finite upper bounds into rows
    bounded = np.nonzero(np.isfinite(upper))[0]
    U = np.zeros((bounded.size, n))
    U[np.arange(bounded.size), bounded] = 1.0
    A_ub = np.vstack([lp.A_ub, U])
    b_ub = np.concatenate([lp.b_ub - lp.A_ub @ lower, upper[bounded] - lower[bounded]])
    A_eq = lp.A_eq
    b_eq = lp.b_eq - A_eq @ lower
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])
    r, s = _equilibrate(A) if m else (np.ones(0), np.ones(n))
    A = A * r[:, None] * s[None, :]
    b = b * r
    c = lp.c * s

    # tableau columns: structural | slacks (one per inequality) | artificials
    sign = np.where(b < 0, -1.0, 1.0)
    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = sign[:m_ub] < 0
    art_rows = np.nonzero(needs_art)[0]
    n_art = art_rows.size
    N = n + m_ub + n_art
    tab = np.zeros((m + 1, N + 1))
    tab[:m, :n] = A * sign[:, None]
    tab[np.arange(m_ub), n + np.arange(m_ub)] = sign[:m_ub]
    tab[:m, -1] = b * sign
    basis = [0] * m
    for i in range(m_ub):
        if not needs_art[i]:
            basis[i] = n + i
    for j, i in enumerate(art_rows):
        tab[i, n + m_ub + j] = 1.0
        basis[i] = n + m_ub + j
    A0 = tab[:m, :n + m_ub].copy()
    b0 = tab[:m, -1].copy()
    rows = np.arange(m)

    # phase 1: maximize -(sum of artificials)
    if n_art:
        tab[-1, n + m_ub:N] = 1.0
        for i in art_rows:
            tab[-1] -= tab[i]
        _run_simplex(tab, basis, N, tol, max_pivots)
        if -tab[-1, -1] > 1e-8 * max(1.0, np.abs(tab[:m, -1]).max(initial=0.0)):
            return LpSolution(None, float("nan"), INFEASIBLE)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= n + m_ub:
                cand = np.nonzero(np.abs(tab[i, :n + m_ub]) > 1e-9)[0]
                if cand.size == 0:
                    continue
                _pivot(tab, i, int(cand[0]))
                basis[i] = int(cand[0])
            keep.append(i)
        tab = np.vstack([tab[keep], tab[-1:]])
        basis = [basis[i] for i in keep]
        rows = rows[keep]
        tab = np.delete(tab, np.s_[n + m_ub:N], axis=1)
        m = len(basis)

    # phase 2
    N2 = n + m_ub
    tab[-1] = 0.0
    tab[-1, :n] = -c
    for i, bcol in enumerate(basis):
        if tab[-1, bcol] != 0.0:
            tab[-1] -= tab[-1, bcol] * tab[i]
    status = _run_simplex(tab, basis, N2, tol, max_pivots)
    if status == UNBOUNDED:
        return LpSolution(None, float("inf"), UNBOUNDED, tuple(basis))

    xs = np.zeros(N2)
    xs[basis] = _basic_solution(A0[rows], b0[rows], basis, tab[:m, -1])
    x = lower + np.maximum(xs[:n], 0.0) * s
    return LpSolution(x, float(lp.c @ x), OPTIMAL, tuple(int(j) for j in basis))
