"""Bounded-variable primal simplex on dense arrays.

Solves ``min c @ x`` s.t. ``A @ x <= b``, ``lo <= x <= hi`` (bounds may be
infinite).  Revised form with an explicit basis inverse, refreshed every
``REFACTOR_EVERY`` pivots.  Pricing is Dantzig's rule with lowest-index
tie-breaking; after a run of degenerate pivots it falls back to Bland's rule
for the rest of the phase, which guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REFACTOR_EVERY = 40
DEGENERATE_RUN = 30

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass
class SimplexOutcome:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    message: str = ""


class _NumericalFailure(Exception):
    pass


def simplex(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    feas_tol: float = 1e-7,
    opt_tol: float = 1e-9,
    max_iter: int = 50_000,
    hint: np.ndarray | None = None,
) -> SimplexOutcome:
    """Minimise ``c @ x``; ``hint`` picks, per variable, the starting bound nearest to it."""
    m, n = A.shape
    if np.any(lo > hi + feas_tol):
        return SimplexOutcome(INFEASIBLE, None, np.inf, 0, "crossed bounds")
    if m == 0:
        x = np.where(c > 0, lo, np.where(c < 0, hi, np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))))
        if not np.all(np.isfinite(x)):
            return SimplexOutcome(UNBOUNDED, None, -np.inf, 0)
        return SimplexOutcome(OPTIMAL, x, float(c @ x), 0)
    try:
        return _Tableau(c, A, b, lo, hi, feas_tol, opt_tol, max_iter, hint).run()
    except _NumericalFailure as exc:
        return SimplexOutcome(ERROR, None, np.nan, 0, str(exc))


class _Tableau:
    def __init__(self, c, A, b, lo, hi, feas_tol, opt_tol, max_iter, hint=None):
        m, n = A.shape
        self.m, self.n = m, n
        self.feas_tol, self.opt_tol, self.max_iter = feas_tol, opt_tol, max_iter
        self.b = np.asarray(b, dtype=float)
        x_struct = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        if hint is not None:
            nearer_hi = np.isfinite(hi) & (np.abs(hint - hi) < np.abs(hint - lo))
            x_struct = np.where(nearer_hi, hi, x_struct)
        slack = self.b - A @ x_struct
        art_rows = np.flatnonzero(slack < -feas_tol)
        n_art = len(art_rows)
        self.n_art = n_art
        art_cols = np.zeros((m, n_art))
        art_cols[art_rows, np.arange(n_art)] = -1.0
        self.M = np.hstack([A, np.eye(m), art_cols])
        self.A = np.ascontiguousarray(A, dtype=float)
        self.art_rows = art_rows
        total = n + m + n_art
        self.lo = np.concatenate([lo, np.zeros(m), np.zeros(n_art)]).astype(float)
        self.hi = np.concatenate([hi, np.full(m, np.inf), np.full(n_art, np.inf)]).astype(float)
        self.c2 = np.concatenate([c, np.zeros(m + n_art)]).astype(float)
        self.c1 = np.concatenate([np.zeros(n + m), np.ones(n_art)])
        self.x = np.zeros(total)
        self.x[:n] = x_struct
        self.x[n:n + m] = np.maximum(slack, 0.0)
        basis = np.arange(n, n + m)
        for col, r in enumerate(art_rows):
            basis[r] = n + m + col
            self.x[n + r] = 0.0
            self.x[n + m + col] = -slack[r]
        self.basis = basis
        self.is_basic = np.zeros(total, dtype=bool)
        self.is_basic[basis] = True
        self.iterations = 0
        # the starting basis is a signed identity
        self.Binv = np.diag(1.0 / self.M[np.arange(m), basis])
        self.since_refactor = 0

    def _refactor(self, invert: bool = True):
        if invert:
            B = self.M[:, self.basis]
            try:
                self.Binv = np.linalg.inv(B)
            except np.linalg.LinAlgError as exc:
                raise _NumericalFailure("singular basis") from exc
            if not np.all(np.isfinite(self.Binv)):
                raise _NumericalFailure("non-finite basis inverse")
        nonbasic = ~self.is_basic
        rhs = self.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    def _reduced_costs(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        # slack and artificial columns are signed unit vectors
        n, m = self.n, self.m
        d = cost.copy()
        d[:n] -= y @ self.A
        d[n:n + m] += -y
        d[n + m:] += y[self.art_rows]
        return d

    def _phase(self, cost: np.ndarray) -> str:
        degenerate = 0
        bland = False
        ftol, otol = self.feas_tol, self.opt_tol
        while True:
            if self.iterations >= self.max_iter:
                raise _NumericalFailure("iteration limit")
            y = cost[self.basis] @ self.Binv
            d = self._reduced_costs(cost, y)
            at_lo = self.x <= self.lo + ftol
            at_hi = self.x >= self.hi - ftol
            movable = ~self.is_basic & (self.hi > self.lo)
            up = movable & ~at_hi & (d < -otol)
            down = movable & ~at_lo & (d > otol)
            # a nonbasic variable at neither bound is free (or was left interior)
            eligible = up | down
            if not eligible.any():
                return OPTIMAL
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                q = int(np.argmax(score))
            sgn = 1.0 if up[q] else -1.0
            alpha = self.Binv @ self.M[:, q]
            w = sgn * alpha
            xb = self.x[self.basis]
            lb = self.lo[self.basis]
            ub = self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = w > 1e-9
            inc = w < -1e-9
            ratios[dec] = (xb[dec] - lb[dec]) / w[dec]
            ratios[inc] = (ub[inc] - xb[inc]) / (-w[inc])
            ratios = np.maximum(ratios, 0.0)
            theta_basic = ratios.min() if self.m else np.inf
            theta_flip = self.hi[q] - self.lo[q]
            if not np.isfinite(theta_basic) and not np.isfinite(theta_flip):
                return UNBOUNDED
            self.iterations += 1
            if theta_flip <= theta_basic:
                theta = theta_flip
                self.x[q] = self.hi[q] if sgn > 0 else self.lo[q]
                self.x[self.basis] = xb - theta * w
                degenerate = 0
                continue
            theta = theta_basic
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if bland or len(ties) == 1:
                r = int(ties[np.argmin(self.basis[ties])]) if bland else int(ties[0])
            else:
                mag = np.abs(w[ties])
                r = int(ties[np.argmax(mag)])
            leaving = self.basis[r]
            self.x[self.basis] = xb - theta * w
            self.x[q] += sgn * theta
            self.x[leaving] = lb[r] if w[r] > 0 else ub[r]
            piv = alpha[r]
            if abs(piv) < 1e-11:
                raise _NumericalFailure("tiny pivot")
            row = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[r] = row
            self.basis[r] = q
            self.is_basic[q] = True
            self.is_basic[leaving] = False
            self.since_refactor += 1
            if self.since_refactor >= REFACTOR_EVERY:
                self._refactor()
            if theta <= ftol:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0

    def run(self) -> SimplexOutcome:
        n, m = self.n, self.m
        if self.n_art:
            status = self._phase(self.c1)
            self._refactor(invert=False)
            infeas = float(self.x[n + m:].sum())
            if status != OPTIMAL or infeas > self.feas_tol * max(1.0, np.abs(self.b).max()):
                return SimplexOutcome(INFEASIBLE, None, np.inf, self.iterations, f"phase-1 residual {infeas:g}")
            # pin artificials at zero for phase 2
            self.hi[n + m:] = 0.0
            self.x[n + m:] = np.minimum(self.x[n + m:], 0.0)
            self._refactor(invert=False)
        status = self._phase(self.c2)
        if status == UNBOUNDED:
            return SimplexOutcome(UNBOUNDED, None, -np.inf, self.iterations)
        self._refactor(invert=False)
        x = self.x[:n].copy()
        x = np.minimum(np.maximum(x, self.lo[:n]), self.hi[:n])
        return SimplexOutcome(OPTIMAL, x, float(self.c2[:n] @ x), self.iterations)
