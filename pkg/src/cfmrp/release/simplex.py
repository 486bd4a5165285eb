"""Small dense two-phase simplex.

Used by the brute-force oracle so that the oracle's linear programs are not
solved by the same code as the branch-and-bound relaxations.
"""

from __future__ import annotations

import numpy as np

TOL = 1e-9


class LPError(RuntimeError):
    pass


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _iterate(T: np.ndarray, basis: list[int], n_cols: int, max_iter: int) -> None:
    """Minimize the objective held in the last row of tableau ``T``.

    Dantzig pricing; after a run of degenerate pivots switch to Bland's rule
    to rule out cycling.
    """
    degenerate = 0
    for _ in range(max_iter):
        reduced = T[-1, :n_cols]
        if degenerate > 50:
            candidates = np.flatnonzero(reduced < -TOL)
            if candidates.size == 0:
                return
            col = int(candidates[0])
        else:
            col = int(np.argmin(reduced))
            if reduced[col] >= -TOL:
                return
        column = T[:-1, col]
        rhs = T[:-1, -1]
        positive = column > TOL
        if not positive.any():
            raise LPError("unbounded")
        ratios = np.full(column.shape, np.inf)
        ratios[positive] = rhs[positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + TOL)
        row = int(min(ties, key=lambda r: basis[r]))
        degenerate = degenerate + 1 if best <= TOL else 0
        _pivot(T, row, col)
        basis[row] = col
    raise LPError("iteration limit")


def linprog_dense(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 20000):
    """Solve ``min c x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``.

    Returns ``(x, objective)``; raises :class:`LPError` if infeasible or unbounded.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Columns: structural | slacks (ub rows) | artificials (rows needing them).
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    negative = b < 0
    A[negative] *= -1
    b = np.where(negative, -b, b)

    needs_art = [i for i in range(m) if i >= m_ub or negative[i]]
    n_main = n + m_ub
    n_art = len(needs_art)
    T = np.zeros((m + 1, n_main + n_art + 1))
    T[:m, :n_main] = A
    T[:m, -1] = b
    basis = [n + i for i in range(m)]
    for k, i in enumerate(needs_art):
        T[i, n_main + k] = 1.0
        basis[i] = n_main + k

    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, n_main:n_main + n_art] = 1.0
        for i in needs_art:
            T[-1] -= T[i]
        _iterate(T, basis, n_main + n_art, max_iter)
        if -T[-1, -1] > 1e-7 * max(1.0, np.abs(b).max()):
            raise LPError("infeasible")
        # drive remaining artificials out of the basis
        for r, var in enumerate(basis):
            if var >= n_main:
                row = T[r, :n_main]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size:
                    _pivot(T, r, int(nz[0]))
                    basis[r] = int(nz[0])
        keep = [r for r, var in enumerate(basis) if var < n_main]
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[r] for r in keep]
        T = np.delete(T, np.s_[n_main:n_main + n_art], axis=1)

    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, var in enumerate(basis):
        if T[-1, var] != 0:
            T[-1] -= T[-1, var] * T[r]
    _iterate(T, basis, n_main, max_iter)

    x = np.zeros(n_main)
    for r, var in enumerate(basis):
        x[var] = T[r, -1]
    x = x[:n]
    return x, float(c @ x)
