"""Small dense two-phase simplex.

Every LP in the pipeline has a handful of variables and at most a few dozen
rows, so a dense tableau is both simple and fast enough. The solver keeps no
state between calls.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SolverError

TOL = 1e-9
MAX_PIVOTS = 10_000


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray] = None
    fun: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: np.ndarray, basis: list[int], ncols: int) -> str:
    """Minimise the objective in the last row over columns [0, ncols)."""
    m = T.shape[0] - 1
    stall = 0
    best = np.inf
    for _ in range(MAX_PIVOTS):
        red = T[-1, :ncols]
        if stall > 50:
            cand = np.flatnonzero(red < -TOL)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0])
        else:
            j = int(np.argmin(red))
            if red[j] >= -TOL:
                return "optimal"
        colj = T[:m, j]
        pos = colj > TOL
        if not pos.any():
            return "unbounded"
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colj[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + TOL * max(1.0, abs(rmin)))
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, j)
        basis[r] = j
        obj = -T[-1, -1]
        if obj < best - TOL:
            best = obj
            stall = 0
        else:
            stall += 1
    raise SolverError("simplex pivot limit reached")


def _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub):
    """Rewrite with y >= 0; return (c', A', b', eq-mask, back-map)."""
    nv = c.size
    cols = []  # per original variable: list of (column, sign)
    offset = np.zeros(nv)
    extra_rows = []
    ncol = 0
    for i in range(nv):
        lo, hi = lb[i], ub[i]
        if np.isfinite(lo):
            offset[i] = lo
            cols.append([(ncol, 1.0)])
            if np.isfinite(hi):
                extra_rows.append((ncol, hi - lo))
            ncol += 1
        elif np.isfinite(hi):
            offset[i] = hi
            cols.append([(ncol, -1.0)])
            ncol += 1
        else:
            cols.append([(ncol, 1.0), (ncol + 1, -1.0)])
            ncol += 2

    def transform(A):
        out = np.zeros((A.shape[0], ncol))
        for i, parts in enumerate(cols):
            for k, s in parts:
                out[:, k] += s * A[:, i]
        return out

    c2 = transform(c[None, :])[0]
    rows, rhs, eq = [], [], []
    if A_ub.shape[0]:
        rows.append(transform(A_ub))
        rhs.append(b_ub - A_ub @ offset)
        eq.append(np.zeros(A_ub.shape[0], bool))
    if extra_rows:
        E = np.zeros((len(extra_rows), ncol))
        for r, (k, cap) in enumerate(extra_rows):
            E[r, k] = 1.0
        rows.append(E)
        rhs.append(np.array([cap for _, cap in extra_rows]))
        eq.append(np.zeros(len(extra_rows), bool))
    if A_eq.shape[0]:
        rows.append(transform(A_eq))
        rhs.append(b_eq - A_eq @ offset)
        eq.append(np.ones(A_eq.shape[0], bool))
    if rows:
        A2, b2, eqm = np.vstack(rows), np.concatenate(rhs), np.concatenate(eq)
    else:
        A2, b2, eqm = np.zeros((0, ncol)), np.zeros(0), np.zeros(0, bool)

    def back(y):
        x = offset.copy()
        for i, parts in enumerate(cols):
            for k, s in parts:
                x[i] += s * y[k]
        return x

    return c2, A2, b2, eqm, back, float(c @ offset)


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None) -> LPResult:
    """Minimise c @ x subject to A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub.

    Bounds default to free variables (lb = -inf, ub = +inf).
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    nv = c.size
    A_ub = np.zeros((0, nv)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, nv)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    lb = np.full(nv, -np.inf) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (nv,))
    ub = np.full(nv, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (nv,))
    if np.any(lb > ub):
        return LPResult("infeasible")

    c2, A, b, eqm, back, const = _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub)
    m, ncol = A.shape
    n_slack = int((~eqm).sum())
    # columns: structural | slacks | artificials
    M = np.zeros((m, ncol + n_slack))
    M[:, :ncol] = A
    slack_of_row = np.full(m, -1)
    k = ncol
    for r in range(m):
        if not eqm[r]:
            M[r, k] = 1.0
            slack_of_row[r] = k
            k += 1
    rhs = b.copy()
    neg = rhs < 0
    M[neg] *= -1.0
    rhs[neg] *= -1.0
    need_art = [r for r in range(m) if slack_of_row[r] < 0 or neg[r]]
    n_art = len(need_art)
    ntot = M.shape[1] + n_art
    T = np.zeros((m + 1, ntot + 1))
    T[:m, :M.shape[1]] = M
    T[:m, -1] = rhs
    basis = [0] * m
    for r in range(m):
        basis[r] = slack_of_row[r]
    for a, r in enumerate(need_art):
        col = M.shape[1] + a
        T[r, col] = 1.0
        basis[r] = col

    n_real = M.shape[1]
    if n_art:
        T[-1, n_real:ntot] = 1.0
        for r in need_art:
            T[-1] -= T[r]
        status = _run(T, basis, ntot)
        if status != "optimal":
            raise SolverError(f"phase one ended with status {status}")
        if -T[-1, -1] > 1e-7 * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LPResult("infeasible")
        keep = []
        for r in range(m):
            if basis[r] >= n_real:
                nz = np.flatnonzero(np.abs(T[r, :n_real]) > TOL)
                if nz.size:
                    _pivot(T, r, int(nz[0]))
                    basis[r] = int(nz[0])
                    keep.append(r)
            else:
                keep.append(r)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[r] for r in keep]
        T = np.hstack([T[:, :n_real], T[:, -1:]])
        m = len(keep)

    T[-1] = 0.0
    T[-1, :ncol] = c2
    for r in range(m):
        j = basis[r]
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status = _run(T, basis, n_real)
    if status == "unbounded":
        return LPResult("unbounded")
    y = np.zeros(n_real)
    for r in range(m):
        y[basis[r]] = T[r, -1]
    x = back(y[:ncol])
    return LPResult("optimal", x, float(c @ x))
