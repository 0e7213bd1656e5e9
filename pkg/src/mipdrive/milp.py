"""Exact MILP solving: LP relaxations plus depth-first branch and bound.

Every node first tightens variable boxes by row-activity propagation, then
solves the LP over the variables that are still free and the rows that can
still bind.  Integer solutions are polished by re-solving the LP with all
integer variables fixed to their rounded values, so an incumbent satisfies
every row exactly up to ``feas_tol`` rather than up to ``big_M * int_tol``.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from mipdrive.compiler import MilpInstance
from mipdrive.simplex import ERROR, INFEASIBLE, OPTIMAL, UNBOUNDED, simplex

NODE_LIMIT = "node_limit"
# stopped at the first incumbent on request; not proven optimal
FEASIBLE = "feasible"

MOST_FRACTIONAL = "most-fractional"
FIRST_FRACTIONAL = "first-fractional"
DEPTH_FIRST = "depth-first"
BEST_BOUND = "best-bound"


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    node_limit: int = 200_000
    branching: str = MOST_FRACTIONAL
    node_order: str = DEPTH_FIRST
    use_priorities: bool = True
    lp_engine: str = "simplex"
    dive: bool = True

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.int_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")
        if self.branching not in (MOST_FRACTIONAL, FIRST_FRACTIONAL):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_order not in (DEPTH_FIRST, BEST_BOUND):
            raise ValueError(f"unknown node order {self.node_order!r}")
        if self.lp_engine not in ("simplex", "highs"):
            raise ValueError(f"unknown LP engine {self.lp_engine!r}")


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int = 0
    message: str = ""


@dataclass
class MilpResult:
    status: str
    x: np.ndarray | None
    objective: float
    nodes: int
    root_bound: float = -math.inf
    incumbent_history: list[float] = field(default_factory=list)
    bound_violations: int = 0
    wall_time: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def lp_arrays(c, A, b, lo, hi, config: SolverConfig, hint=None) -> LpResult:
    """Solve ``min c@x, A@x <= b, lo <= x <= hi`` with the configured engine."""
    if config.lp_engine == "highs":
        return _highs_lp(c, A, b, lo, hi)
    out = simplex(c, A, b, lo, hi, feas_tol=config.feas_tol, hint=hint)
    if out.status == OPTIMAL and A.shape[0]:
        resid = float(np.max(A @ out.x - b))
        scale = 1.0 + float(np.max(np.abs(b)))
        if resid > 1e3 * config.feas_tol * scale:
            return LpResult(ERROR, None, math.nan, out.iterations, f"row residual {resid:g}")
    return LpResult(out.status, out.x, out.objective, out.iterations, out.message)


def _highs_lp(c, A, b, lo, hi) -> LpResult:
    from scipy.optimize import linprog

    bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))
    res = linprog(c, A_ub=A if A.shape[0] else None, b_ub=b if A.shape[0] else None,
                  bounds=bounds, method="highs")
    if res.status == 0:
        return LpResult(OPTIMAL, res.x, float(res.fun), int(res.nit))
    if res.status == 2:
        return LpResult(INFEASIBLE, None, math.inf, int(res.nit))
    if res.status == 3:
        return LpResult(UNBOUNDED, None, -math.inf, int(res.nit))
    return LpResult(ERROR, None, math.nan, int(res.nit), res.message)


def solve_lp(instance: MilpInstance, config: SolverConfig = SolverConfig()) -> LpResult:
    """LP relaxation of ``instance`` (integrality dropped)."""
    arr = instance.arrays
    res = lp_arrays(arr.c, arr.A, arr.b, arr.lo, arr.hi, config)
    if res.status == OPTIMAL:
        res.objective += arr.c0
    return res


class _Propagator:
    """Row-activity bound tightening over the nonzeros of ``A``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, integer: np.ndarray, tol: float):
        rows, cols = np.nonzero(A)
        self.rows, self.cols = rows, cols
        self.vals = A[rows, cols]
        self.pos = self.vals > 0
        self.m, self.n = A.shape
        self.b = b
        self.integer = integer
        self.tol = tol

    def _min_activity(self, lo, hi):
        bound = np.where(self.pos, lo[self.cols], hi[self.cols])
        contrib = self.vals * bound
        inf = ~np.isfinite(contrib)
        finite = np.where(inf, 0.0, contrib)
        fsum = np.bincount(self.rows, weights=finite, minlength=self.m)
        ninf = np.bincount(self.rows, weights=inf.astype(float), minlength=self.m)
        return contrib, inf, fsum, ninf

    def run(self, lo: np.ndarray, hi: np.ndarray, rounds: int = 25):
        tol = self.tol
        lo = lo.copy()
        hi = hi.copy()
        for _ in range(rounds):
            contrib, inf, fsum, ninf = self._min_activity(lo, hi)
            if np.any((ninf == 0) & (fsum > self.b + tol * (1.0 + np.abs(self.b)))):
                return False, lo, hi
            r = self.rows
            usable = np.where(inf, ninf[r] == 1, ninf[r] == 0)
            resid = np.where(inf, fsum[r], fsum[r] - np.where(inf, 0.0, contrib))
            slack = self.b[r] - resid
            with np.errstate(divide="ignore", invalid="ignore"):
                limit = slack / self.vals
            new_hi = np.full(self.n, np.inf)
            new_lo = np.full(self.n, -np.inf)
            sel = usable & self.pos
            np.minimum.at(new_hi, self.cols[sel], limit[sel])
            sel = usable & ~self.pos
            np.maximum.at(new_lo, self.cols[sel], limit[sel])
            ints = self.integer
            new_hi = np.where(ints, np.floor(new_hi + 1e-6), new_hi + 1e-9 * (1.0 + np.abs(new_hi)))
            new_lo = np.where(ints, np.ceil(new_lo - 1e-6), new_lo - 1e-9 * (1.0 + np.abs(new_lo)))
            width = np.where(np.isfinite(hi - lo), hi - lo, np.inf)
            gain = np.maximum(hi - new_hi, new_lo - lo)
            significant = np.where(ints, gain > 0.5, gain > 1e-3 * np.minimum(width, 1.0) + 1e-7)
            if not significant.any():
                break
            hi = np.where(significant & (new_hi < hi), new_hi, hi)
            lo = np.where(significant & (new_lo > lo), new_lo, lo)
            if np.any(lo > hi + tol):
                return False, lo, hi
        crossed = lo > hi
        lo = np.where(crossed, hi, lo)
        return True, lo, hi


class BranchAndBound:
    def __init__(self, instance: MilpInstance, config: SolverConfig):
        arr = instance.arrays
        self.arr = arr
        self.config = config
        self.prop = _Propagator(arr.A, arr.b, arr.integer, config.feas_tol)
        self.int_idx = np.flatnonzero(arr.integer)

    def _lp(self, lo, hi, hint=None):
        """LP over the free variables and potentially binding rows."""
        arr, cfg = self.arr, self.config
        free = hi - lo > 1e-12
        x = np.where(free, 0.0, lo)
        A = arr.A
        fixed_part = A[:, ~free] @ lo[~free]
        b = arr.b - fixed_part
        Af = A[:, free]
        lof, hif = lo[free], hi[free]
        if Af.shape[1]:
            maxact = np.where(Af > 0, Af * hif, Af * lof).sum(axis=1)
        else:
            maxact = np.zeros(A.shape[0])
        live = ~(maxact <= b + cfg.feas_tol)
        res = lp_arrays(arr.c[free], Af[live], b[live], lof, hif, cfg,
                        None if hint is None else hint[free])
        if res.status != OPTIMAL:
            return res
        x[free] = res.x
        return LpResult(OPTIMAL, x, float(arr.c @ x) + arr.c0, res.iterations)

    def _pick(self, x):
        cfg = self.config
        vals = x[self.int_idx]
        frac = np.abs(vals - np.round(vals))
        cand = frac > cfg.int_tol
        if not cand.any():
            return None
        idx = self.int_idx[cand]
        fr = frac[cand]
        if cfg.use_priorities:
            pr = self.arr.priority[idx]
            top = pr == pr.max()
            idx, fr = idx[top], fr[top]
        if cfg.branching == FIRST_FRACTIONAL:
            return int(idx[0])
        return int(idx[np.argmax(fr)])

    def solve(self, incumbent: np.ndarray | None = None, first_feasible: bool = False) -> MilpResult:
        t0 = time.perf_counter()
        cfg = self.config
        arr = self.arr
        best_x, best_obj = None, math.inf
        history: list[float] = []
        if incumbent is not None:
            inc = np.asarray(incumbent, dtype=float)
            if self.accepts(inc):
                best_x, best_obj = inc.copy(), float(arr.c @ inc) + arr.c0
                history.append(best_obj)
        counter = 0
        nodes = 0
        violations = 0
        root_bound = -math.inf
        # entries: (key, counter, lo, hi, parent_bound, parent_x)
        heap: list = []
        stack: list = []

        def push(lo, hi, bound, hint):
            nonlocal counter
            counter += 1
            if cfg.node_order == BEST_BOUND:
                heapq.heappush(heap, (bound, counter, lo, hi, bound, hint))
            else:
                stack.append((lo, hi, bound, hint))

        push(arr.lo.copy(), arr.hi.copy(), -math.inf, None)
        status = OPTIMAL
        while stack or heap:
            if first_feasible and best_x is not None:
                status = FEASIBLE
                break
            if nodes >= cfg.node_limit:
                status = NODE_LIMIT
                break
            if cfg.node_order == BEST_BOUND:
                _, _, lo, hi, parent, hint = heapq.heappop(heap)
            else:
                lo, hi, parent, hint = stack.pop()
            if parent >= best_obj - self._gap(best_obj):
                continue
            nodes += 1
            ok, lo, hi = self.prop.run(lo, hi)
            if not ok:
                continue
            res = self._lp(lo, hi, hint)
            if res.status == INFEASIBLE:
                continue
            if res.status == UNBOUNDED:
                if nodes == 1:
                    return MilpResult(UNBOUNDED, None, -math.inf, nodes, wall_time=time.perf_counter() - t0)
                continue
            if res.status != OPTIMAL:
                return MilpResult(ERROR, best_x, best_obj, nodes, root_bound, history, violations,
                                  time.perf_counter() - t0, res.message)
            if nodes == 1:
                root_bound = res.objective
                if cfg.dive and res.objective < best_obj - self._gap(best_obj):
                    found = self._dive(res.x, lo, hi)
                    if found is not None and found.objective < best_obj - self._gap(best_obj):
                        best_x, best_obj = found.x, found.objective
                        history.append(best_obj)
            if res.objective < parent - 1e-6 * (1.0 + abs(parent)):
                violations += 1
            if res.objective >= best_obj - self._gap(best_obj):
                continue
            j = self._pick(res.x)
            if j is None:
                polished = self._polish(res.x, lo, hi)
                if polished is not None and polished.objective < best_obj - self._gap(best_obj):
                    best_x, best_obj = polished.x, polished.objective
                    history.append(best_obj)
                    continue
                if polished is not None:
                    continue
                # rounding within int_tol broke a row: branch on the largest residue
                vals = res.x[self.int_idx]
                frac = np.abs(vals - np.round(vals))
                if frac.max() <= 0:
                    continue
                j = int(self.int_idx[np.argmax(frac)])
            xj = res.x[j]
            down_hi = hi.copy()
            down_hi[j] = math.floor(xj)
            up_lo = lo.copy()
            up_lo[j] = math.ceil(xj)
            down = (lo, down_hi)
            up = (up_lo, hi)
            # depth-first explores the nearer side first, so push it last
            first, second = (up, down) if xj - math.floor(xj) > 0.5 else (down, up)
            push(*second, res.objective, res.x)
            push(*first, res.objective, res.x)
        wall = time.perf_counter() - t0
        if best_x is None:
            return MilpResult(INFEASIBLE if status == OPTIMAL else status, None, math.inf, nodes,
                              root_bound, history, violations, wall)
        return MilpResult(status, best_x, best_obj, nodes, root_bound, history, violations, wall)

    def accepts(self, x: np.ndarray, slack: float = 10.0) -> bool:
        """Feasible within ``slack * feas_tol`` (scaled by the row size) and integral."""
        arr, cfg = self.arr, self.config
        tol = slack * cfg.feas_tol
        if x.shape != arr.lo.shape or not np.all(np.isfinite(x)):
            return False
        if np.any(x < arr.lo - tol * (1 + np.abs(arr.lo))) or np.any(x > arr.hi + tol * (1 + np.abs(arr.hi))):
            return False
        vals = x[self.int_idx]
        if np.any(np.abs(vals - np.round(vals)) > cfg.int_tol):
            return False
        return not arr.A.shape[0] or bool(np.all(arr.A @ x - arr.b <= tol * (1 + np.abs(arr.b))))

    def _gap(self, best: float) -> float:
        if not math.isfinite(best):
            return 0.0
        return 1e-9 * (1.0 + abs(best))

    def _dive(self, x, lo, hi, max_lps: int = 8):
        """Fix-and-propagate dive, one priority class at a time.

        Integral values of the class are fixed outright; fractional ones are
        rounded nearest-first, each followed by propagation, trying the other
        side when a rounding is refuted.
        """
        pr = self.arr.priority
        tol = self.config.int_tol
        for _ in range(max_lps):
            j = self._pick(x)
            if j is None:
                return self._polish(x, lo, hi)
            idx = self.int_idx
            if self.config.use_priorities:
                idx = idx[pr[idx] >= pr[j]]
            vals = x[idx]
            frac = np.abs(vals - np.round(vals))
            lo = lo.copy()
            hi = hi.copy()
            whole = idx[frac <= tol]
            lo[whole] = np.round(x[whole])
            hi[whole] = lo[whole]
            ok, lo, hi = self.prop.run(lo, hi)
            if not ok:
                return None
            for k in idx[frac > tol][np.argsort(frac[frac > tol])]:
                if lo[k] == hi[k]:
                    continue
                near = float(np.clip(np.round(x[k]), lo[k], hi[k]))
                for val in (near, lo[k] if near == hi[k] else hi[k]):
                    tlo, thi = lo.copy(), hi.copy()
                    tlo[k] = thi[k] = val
                    ok, tlo, thi = self.prop.run(tlo, thi)
                    if ok:
                        lo, hi = tlo, thi
                        break
                else:
                    return None
            res = self._lp(lo, hi, x)
            if res.status != OPTIMAL:
                return None
            x = res.x
        return None

    def _polish(self, x, lo, hi):
        lo = lo.copy()
        hi = hi.copy()
        r = np.round(x[self.int_idx])
        lo[self.int_idx] = r
        hi[self.int_idx] = r
        ok, lo, hi = self.prop.run(lo, hi, rounds=3)
        if not ok:
            return None
        res = self._lp(lo, hi, x)
        return res if res.status == OPTIMAL else None


def solve_milp(instance: MilpInstance, config: SolverConfig = SolverConfig(),
               incumbent: np.ndarray | None = None, first_feasible: bool = False) -> MilpResult:
    """Exact minimisation of ``instance``.

    ``incumbent`` may carry a known feasible point; it only prunes the search
    and is returned when nothing strictly better exists.  ``first_feasible``
    stops at the first incumbent (status ``feasible``).
    """
    return BranchAndBound(instance, config).solve(incumbent, first_feasible)


def solve_milp_highs(instance: MilpInstance, config: SolverConfig = SolverConfig()) -> MilpResult:
    """Adapter to scipy's HiGHS MILP, for cross-checking the embedded solver."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    arr = instance.arrays
    t0 = time.perf_counter()
    cons = [LinearConstraint(arr.A, -np.inf, arr.b)] if arr.A.shape[0] else []
    res = milp(arr.c, constraints=cons, integrality=arr.integer.astype(int),
               bounds=Bounds(arr.lo, arr.hi),
               options={"mip_rel_gap": 0.0})
    wall = time.perf_counter() - t0
    if res.status == 0:
        return MilpResult(OPTIMAL, res.x, float(res.fun) + arr.c0, 0, wall_time=wall)
    if res.status == 2:
        return MilpResult(INFEASIBLE, None, math.inf, 0, wall_time=wall)
    if res.status == 3:
        return MilpResult(UNBOUNDED, None, -math.inf, 0, wall_time=wall)
    return MilpResult(ERROR, None, math.nan, 0, wall_time=wall, message=res.message)
