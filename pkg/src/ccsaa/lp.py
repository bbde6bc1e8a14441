"""Dense bounded-variable linear programming with warm starts and exact duals.

Purpose-built for scenario programs: many inequality rows over a small block
of structural columns.  Any basis of such a program contains at most n
structural columns, so the active factorization -- the "kernel" of tight rows
against basic columns -- never exceeds n x n.  Pricing, search directions and
dual pivots all reduce to dense solves against that kernel plus one
matrix-vector product with the row block, which keeps large row counts cheap
and makes single-row edits (the dominant workload of discard heuristics)
nearly free.

Conventions: problems MAXIMIZE ``objective . x`` subject to column bounds and
rows ``a . x (<=|>=|=) b``.  Row duals are shadow prices dObj/dRHS, so
``<=`` rows carry duals >= 0 and ``>=`` rows duals <= 0 at an optimum.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

# Row relations
LE, GE, EQ = 0, 1, 2
_REL_CODES = {"<=": LE, "<": LE, ">=": GE, ">": GE, "=": EQ, "==": EQ,
              LE: LE, GE: GE, EQ: EQ}
_REL_TEXT = {LE: "<=", GE: ">=", EQ: "="}

# Variable / slack status markers
BASIC, AT_LOWER, AT_UPPER, NB_FREE = 0, 1, 2, 3

# Solution statuses
OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"

TOL_FEAS = 1e-9
TOL_DUAL = 1e-9
TOL_PIVOT = 1e-10
_TIE = 1e-12
_BLAND_AFTER = 100       # consecutive degenerate steps before Bland's rule
_MAX_PIVOTS = 200_000


class _KernelSingular(Exception):
    pass


@dataclass
class Basis:
    """Warm-start token: status markers for columns and row slacks."""

    col_status: np.ndarray          # int8, one per structural column
    row_ids: np.ndarray             # row ids the snapshot knows about
    row_status: np.ndarray          # int8 aligned with row_ids

    def copy(self) -> "Basis":
        return Basis(self.col_status.copy(), self.row_ids.copy(),
                     self.row_status.copy())

    @property
    def n_basic(self) -> int:
        return int((self.col_status == BASIC).sum()
                   + (self.row_status == BASIC).sum())


@dataclass
class SolveStats:
    solves: int = 0
    pivots: int = 0
    seconds: float = 0.0


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective_value: float
    basis: Basis
    iterations: int
    _row_ids: np.ndarray = field(repr=False, default=None)
    _duals: np.ndarray = field(repr=False, default=None)
    _slacks: np.ndarray = field(repr=False, default=None)

    def dual(self, row_id: int) -> float:
        return float(self._duals[self._locate(row_id)])

    def slack(self, row_id: int) -> float:
        return float(self._slacks[self._locate(row_id)])

    def duals_for(self, row_ids) -> np.ndarray:
        return self._duals[np.searchsorted(self._row_ids, row_ids)]

    def slacks_for(self, row_ids) -> np.ndarray:
        return self._slacks[np.searchsorted(self._row_ids, row_ids)]

    def _locate(self, row_id):
        idx = int(np.searchsorted(self._row_ids, row_id))
        if idx >= len(self._row_ids) or self._row_ids[idx] != row_id:
            raise KeyError(f"unknown row id {row_id}")
        return idx


class LpModel:
    """Mutable LP over a fixed column block and an editable set of rows.

    Row ids are stable handles: assigned on ``add_row``, never reused, and
    unaffected by the removal of other rows.
    """

    def __init__(self, objective, lower=None, upper=None):
        c = np.asarray(objective, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise ValueError("objective must be a non-empty finite vector")
        n = c.size
        self.obj = c.copy()
        self.lb = np.zeros(n) if lower is None else np.asarray(lower, float).copy()
        self.ub = np.full(n, np.inf) if upper is None else np.asarray(upper, float).copy()
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bounds must match the objective dimension")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")
        cap = 16
        self._A = np.zeros((cap, n))
        self._rhs = np.zeros(cap)
        self._rel = np.zeros(cap, dtype=np.int8)
        self._alive = np.zeros(cap, dtype=bool)
        self._labels: list = [None] * cap
        self._label_set: set = set()
        self._n_slots = 0
        self.stats = SolveStats()
        self._engine = None

    # ------------------------------------------------------------------
    @property
    def n_cols(self) -> int:
        return self.obj.size

    @property
    def n_rows(self) -> int:
        return int(self._alive[: self._n_slots].sum())

    def row_ids(self) -> np.ndarray:
        return np.flatnonzero(self._alive[: self._n_slots])

    def row(self, row_id: int):
        self._check_row(row_id)
        return (self._A[row_id].copy(), _REL_TEXT[int(self._rel[row_id])],
                float(self._rhs[row_id]), self._labels[row_id])

    def _check_row(self, row_id):
        if not (0 <= row_id < self._n_slots and self._alive[row_id]):
            raise KeyError(f"unknown row id {row_id}")

    # ------------------------------------------------------------------
    def add_row(self, coeffs, rel, rhs, label=None) -> int:
        a = np.asarray(coeffs, dtype=float).ravel()
        if a.shape != (self.n_cols,):
            raise ValueError(f"row has dimension {a.size}, expected {self.n_cols}")
        if not (np.all(np.isfinite(a)) and np.isfinite(rhs)):
            raise ValueError("row coefficients and rhs must be finite")
        code = _REL_CODES.get(rel)
        if code is None:
            raise ValueError(f"unknown relation {rel!r}")
        slot = self._n_slots
        if slot == self._A.shape[0]:
            self._grow(max(2 * slot, 16))
        if label is None:
            label = f"r{slot}"
        if label in self._label_set:
            raise ValueError(f"duplicate row label {label!r}")
        self._A[slot] = a
        self._rhs[slot] = rhs
        self._rel[slot] = code
        self._alive[slot] = True
        self._labels[slot] = label
        self._label_set.add(label)
        self._n_slots += 1
        if self._engine is not None:
            self._engine.attach_row(slot)
        return slot

    def add_rows(self, coeffs, rel, rhs, labels=None) -> np.ndarray:
        """Bulk append of rows sharing one relation; returns their ids."""
        A = np.asarray(coeffs, dtype=float)
        b = np.asarray(rhs, dtype=float).ravel()
        if A.ndim != 2 or A.shape != (b.size, self.n_cols):
            raise ValueError("rows must be (m, n_cols) with matching rhs")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("row coefficients and rhs must be finite")
        code = _REL_CODES.get(rel)
        if code is None:
            raise ValueError(f"unknown relation {rel!r}")
        first = self._n_slots
        need = first + b.size
        if need > self._A.shape[0]:
            self._grow(max(need, 2 * self._A.shape[0]))
        if labels is None:
            labels = [f"r{first + i}" for i in range(b.size)]
        for i, lab in enumerate(labels):
            if lab in self._label_set:
                raise ValueError(f"duplicate row label {lab!r}")
            self._labels[first + i] = lab
            self._label_set.add(lab)
        self._A[first:need] = A
        self._rhs[first:need] = b
        self._rel[first:need] = code
        self._alive[first:need] = True
        self._n_slots = need
        if self._engine is not None:
            self._engine._sync_slack_capacity()
            self._engine.ss[first:need] = BASIC
            self._engine._s = None
        return np.arange(first, need)

    def remove_row(self, row_id) -> None:
        self._check_row(row_id)
        if self._engine is not None:
            self._engine.detach_row(row_id)
        self._alive[row_id] = False
        self._label_set.discard(self._labels[row_id])

    def add_columns(self, objective, lower, upper) -> list:
        """Append structural columns (zero coefficients in existing rows)."""
        c = np.atleast_1d(np.asarray(objective, dtype=float))
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if not (c.shape == lo.shape == hi.shape):
            raise ValueError("objective and bounds must have equal length")
        first = self.n_cols
        self.obj = np.concatenate([self.obj, c])
        self.lb = np.concatenate([self.lb, lo])
        self.ub = np.concatenate([self.ub, hi])
        self._A = np.hstack([self._A, np.zeros((self._A.shape[0], c.size))])
        self._engine = None
        return list(range(first, self.n_cols))

    def set_coefficient(self, row_id, col, value) -> None:
        self._check_row(row_id)
        self._A[row_id, col] = value
        self._engine = None

    def set_bounds(self, col, lower, upper) -> None:
        if lower > upper:
            raise ValueError("lower bound exceeds upper bound")
        self.lb[col] = lower
        self.ub[col] = upper
        if self._engine is not None:
            self._engine.bounds_changed(col)

    def _grow(self, cap):
        n = self.n_cols
        grow = cap - self._A.shape[0]
        self._A = np.vstack([self._A, np.zeros((grow, n))])
        self._rhs = np.concatenate([self._rhs, np.zeros(grow)])
        self._rel = np.concatenate([self._rel, np.zeros(grow, dtype=np.int8)])
        self._alive = np.concatenate([self._alive, np.zeros(grow, dtype=bool)])
        self._labels.extend([None] * grow)

    # ------------------------------------------------------------------
    def dump(self) -> str:
        """Plain-text listing of the model for triage."""
        lines = ["maximize",
                 "  " + " + ".join(f"{c:g} x{j}" for j, c in enumerate(self.obj)),
                 "subject to"]
        for rid in self.row_ids():
            a, rel, b, label = self.row(rid)
            body = " + ".join(f"{v:g} x{j}" for j, v in enumerate(a) if v != 0.0)
            lines.append(f"  [{label}] {body} {rel} {b:g}")
        lines.append("bounds")
        for j in range(self.n_cols):
            lines.append(f"  {self.lb[j]:g} <= x{j} <= {self.ub[j]:g}")
        return "\n".join(lines)


# ----------------------------------------------------------------------
# Engine
# ----------------------------------------------------------------------

class _Engine:
    """Simplex state for one LpModel: statuses, kernel index sets, iterate."""

    def __init__(self, model: LpModel):
        self.m = model
        n = model.n_cols
        self.cs = np.full(n, AT_LOWER, dtype=np.int8)
        self.ss = np.zeros(model._A.shape[0], dtype=np.int8)
        self.S: list = []           # row slots whose slack is nonbasic (tight)
        self.T: list = []           # basic structural columns
        self.x = np.zeros(n)
        self._s = None              # cached slack values over all slots
        self.valid = False

    # -- construction / loading ---------------------------------------
    def cold_reset(self):
        m = self.m
        self.cs = np.where(np.isfinite(m.lb), AT_LOWER,
                           np.where(np.isfinite(m.ub), AT_UPPER, NB_FREE)).astype(np.int8)
        self._sync_slack_capacity()
        self.ss[:] = BASIC
        self.S = []
        self.T = []
        self._set_nonbasic_values()
        self._s = None
        self.valid = True

    def load_basis(self, basis: Basis):
        m = self.m
        n = m.n_cols
        self._sync_slack_capacity()
        cs = np.full(n, AT_LOWER, dtype=np.int8)
        k = min(n, basis.col_status.size)
        cs[:k] = basis.col_status[:k]
        self.cs = cs
        self.ss[:] = BASIC
        known = dict(zip(basis.row_ids.tolist(), basis.row_status.tolist()))
        for slot in m.row_ids():
            st = known.get(int(slot), BASIC)
            self.ss[slot] = BASIC if st == BASIC else self._nb_slack_status(slot)
        self._rebuild_sets()
        self._repair_counts()
        self._set_nonbasic_values()
        try:
            self._recompute_x()
        except _KernelSingular:
            self.cold_reset()
        self.valid = True

    def _nb_slack_status(self, slot):
        return AT_UPPER if self.m._rel[slot] == GE else AT_LOWER

    def _sync_slack_capacity(self):
        cap = self.m._A.shape[0]
        if self.ss.size < cap:
            self.ss = np.concatenate(
                [self.ss, np.zeros(cap - self.ss.size, dtype=np.int8)])

    def _rebuild_sets(self):
        alive = self.m.row_ids()
        self.S = [int(i) for i in alive if self.ss[i] != BASIC]
        self.T = [int(j) for j in np.flatnonzero(self.cs == BASIC)]

    def _repair_counts(self):
        # A valid basis pairs tight rows with basic columns one-to-one.
        while len(self.T) > len(self.S):
            j = self.T.pop()
            self.cs[j] = self._nearest_bound_status(j)
        while len(self.S) > len(self.T):
            slot = self.S.pop()
            self.ss[slot] = BASIC

    def _nearest_bound_status(self, j):
        lo, hi = self.m.lb[j], self.m.ub[j]
        if np.isfinite(lo) and np.isfinite(hi):
            return AT_LOWER if abs(self.x[j] - lo) <= abs(self.x[j] - hi) else AT_UPPER
        if np.isfinite(lo):
            return AT_LOWER
        if np.isfinite(hi):
            return AT_UPPER
        return NB_FREE

    # -- incremental edits ---------------------------------------------
    def attach_row(self, slot):
        if not self.valid:
            return
        self._sync_slack_capacity()
        self.ss[slot] = BASIC           # new row enters with a basic slack
        self._s = None

    def detach_row(self, slot):
        """Release one row ahead of its removal, keeping the point feasible.

        A non-binding row (basic slack) simply drops out.  A binding row is
        released by pivoting its slack into the basis along the objective-
        improving direction -- the textbook constraint-relaxation step -- so
        the iterate stays primal feasible and re-optimization stays warm.
        """
        if not self.valid:
            return
        if self.ss[slot] == BASIC:
            self._s = None
            return
        try:
            pos = self.S.index(slot)
            y = self._duals_kernel(self.m.obj)
            d = -y[pos]
            for sigma in ((1.0, -1.0) if abs(d) <= TOL_DUAL
                          else ((1.0,) if d > 0 else (-1.0,))):
                e = np.zeros(len(self.T))
                e[pos] = 1.0
                dx = np.zeros(self.m.n_cols)
                dx[self.T] = sigma * (-self._ksolve(e))
                outcome = self._pivot_from_direction(
                    kind="slack", idx=slot, sigma=sigma, dx=dx,
                    own_range=np.inf, skip_slot=slot)
                if outcome is not None:
                    self._s = None
                    return
            self.valid = False
        except (_KernelSingular, np.linalg.LinAlgError):
            self.valid = False

    def bounds_changed(self, col):
        if not self.valid:
            return
        lo, hi = self.m.lb[col], self.m.ub[col]
        if self.cs[col] == AT_LOWER and not np.isfinite(lo):
            self.cs[col] = AT_UPPER if np.isfinite(hi) else NB_FREE
        elif self.cs[col] == AT_UPPER and not np.isfinite(hi):
            self.cs[col] = AT_LOWER if np.isfinite(lo) else NB_FREE
        if self.cs[col] != BASIC:
            self._set_nonbasic_values()
            try:
                self._recompute_x()
            except _KernelSingular:
                self.valid = False

    # -- kernel algebra -------------------------------------------------
    def _kernel(self):
        return self.m._A[np.ix_(self.S, self.T)]

    def _ksolve(self, rhs):
        if not self.T:
            return np.zeros(0)
        try:
            return np.linalg.solve(self._kernel(), rhs)
        except np.linalg.LinAlgError:
            raise _KernelSingular from None

    def _ksolve_t(self, rhs):
        if not self.T:
            return np.zeros(0)
        try:
            return np.linalg.solve(self._kernel().T, rhs)
        except np.linalg.LinAlgError:
            raise _KernelSingular from None

    def _duals_kernel(self, c):
        return self._ksolve_t(c[self.T])

    def _set_nonbasic_values(self):
        m = self.m
        nb_lo = self.cs == AT_LOWER
        nb_hi = self.cs == AT_UPPER
        self.x[nb_lo] = m.lb[nb_lo]
        self.x[nb_hi] = m.ub[nb_hi]
        self.x[self.cs == NB_FREE] = 0.0
        self._s = None

    def _recompute_x(self):
        self._s = None
        if not self.T:
            return
        m = self.m
        xn = self.x.copy()
        xn[self.T] = 0.0
        r = m._rhs[self.S] - m._A[self.S] @ xn
        # Nonbasic slacks sit at zero, so tight rows read A x = rhs exactly.
        self.x[self.T] = self._ksolve(r)

    def _slack_values(self):
        if self._s is None:
            ns = self.m._n_slots
            self._s = self.m._rhs[:ns] - self.m._A[:ns] @ self.x
        return self._s

    def _slack_lims(self):
        rel = self.m._rel[: self.m._n_slots]
        lo = np.where(rel == GE, -np.inf, 0.0)
        hi = np.where(rel == LE, np.inf, 0.0)
        return lo, hi

    # -- pricing ---------------------------------------------------------
    def _nonbasic_candidates(self):
        m = self.m
        cols = np.flatnonzero((self.cs != BASIC) & (m.lb < m.ub))
        slacks = [i for i in self.S if m._rel[i] != EQ]
        return cols, slacks

    def _reduced_costs(self, c, cols, slacks, y=None):
        if y is None:
            y = self._duals_kernel(c)
        m = self.m
        if len(cols):
            d_cols = c[cols] - (m._A[np.ix_(self.S, cols)].T @ y
                                if self.S else np.zeros(len(cols)))
        else:
            d_cols = np.zeros(0)
        if slacks:
            pos = {s: p for p, s in enumerate(self.S)}
            d_slack = np.array([-y[pos[i]] for i in slacks])
        else:
            d_slack = np.zeros(0)
        return d_cols, d_slack

    def dual_feasible(self, c, tol=TOL_DUAL):
        cols, slacks = self._nonbasic_candidates()
        try:
            d_cols, d_slack = self._reduced_costs(c, cols, slacks)
        except _KernelSingular:
            return False
        for j, d in zip(cols, d_cols):
            st = self.cs[j]
            if ((st == AT_LOWER and d > tol) or (st == AT_UPPER and d < -tol)
                    or (st == NB_FREE and abs(d) > tol)):
                return False
        for i, d in zip(slacks, d_slack):
            st = self.ss[i]
            if (st == AT_LOWER and d > tol) or (st == AT_UPPER and d < -tol):
                return False
        return True

    # -- ratio test and basis exchange ------------------------------------
    def _pivot_from_direction(self, kind, idx, sigma, dx, own_range, skip_slot=None):
        """Primal ratio test for a unit move of the entering variable along
        ``dx``; applies the winning pivot or bound flip.

        Returns the step length, or None when the ray is unbounded.
        """
        m = self.m
        ns = m._n_slots
        ds = -(m._A[:ns] @ dx)
        s = self._slack_values()
        slo, shi = self._slack_lims()

        # blockers among basic structural columns (small set)
        col_theta, col_pick, col_status = np.inf, -1, AT_LOWER
        for p in self.T:
            rate = dx[p]
            if rate < -TOL_PIVOT and np.isfinite(m.lb[p]):
                theta, stat = (self.x[p] - m.lb[p]) / (-rate), AT_LOWER
            elif rate > TOL_PIVOT and np.isfinite(m.ub[p]):
                theta, stat = (m.ub[p] - self.x[p]) / rate, AT_UPPER
            else:
                continue
            theta = max(theta, 0.0)
            if theta < col_theta - _TIE or (theta <= col_theta + _TIE and p < col_pick):
                col_theta, col_pick, col_status = min(col_theta, theta), p, stat

        # blockers among basic slacks (vectorized over row slots)
        mask = m._alive[:ns] & (self.ss[:ns] == BASIC)
        if skip_slot is not None:
            mask = mask.copy()
            mask[skip_slot] = False
        thetas = np.full(ns, np.inf)
        down = mask & (ds < -TOL_PIVOT) & np.isfinite(slo)
        up = mask & (ds > TOL_PIVOT) & np.isfinite(shi)
        thetas[down] = np.maximum(s[down] - slo[down], 0.0) / (-ds[down])
        thetas[up] = np.maximum(shi[up] - s[up], 0.0) / ds[up]
        slk_theta, slk_pick = np.inf, -1
        if down.any() or up.any():
            slk_theta = thetas.min()
            slk_pick = int(np.flatnonzero(thetas <= slk_theta + _TIE)[0])

        # lowest variable index wins ties (columns index below slacks)
        best_theta = min(col_theta, slk_theta)
        if np.isinf(best_theta) and not np.isfinite(own_range):
            return None
        if own_range < best_theta - _TIE:
            # entering variable crosses its own box: bound flip, basis kept
            self.x += dx * own_range
            if kind == "col":
                self.cs[idx] = AT_UPPER if sigma > 0 else AT_LOWER
                self.x[idx] = m.ub[idx] if sigma > 0 else m.lb[idx]
            self._recompute_x()
            return own_range

        use_col = col_theta <= slk_theta + _TIE and col_pick >= 0
        if use_col and slk_pick >= 0 and slk_theta < col_theta - _TIE:
            use_col = False
        theta = max(min(col_theta, slk_theta), 0.0)
        self.x += dx * theta
        if use_col:
            self.T.remove(col_pick)
            self.cs[col_pick] = col_status
            self.x[col_pick] = m.lb[col_pick] if col_status == AT_LOWER else m.ub[col_pick]
        else:
            self.ss[slk_pick] = self._nb_slack_status(slk_pick)
            self.S.append(slk_pick)
        if kind == "col":
            self.cs[idx] = BASIC
            self.T.append(idx)
        else:
            self.ss[idx] = BASIC
            self.S.remove(idx)
        self._recompute_x()
        m.stats.pivots += 1
        return theta

    # -- primal simplex ----------------------------------------------------
    def primal(self, c):
        m = self.m
        stall, bland = 0, False
        for _ in range(_MAX_PIVOTS):
            cols, slacks = self._nonbasic_candidates()
            y = self._duals_kernel(c)
            d_cols, d_slack = self._reduced_costs(c, cols, slacks, y=y)
            entering = None   # (key, kind, ref, sigma)
            for j, d in zip(cols, d_cols):
                st = self.cs[j]
                if st == AT_LOWER and d > TOL_DUAL:
                    sig = 1.0
                elif st == AT_UPPER and d < -TOL_DUAL:
                    sig = -1.0
                elif st == NB_FREE and abs(d) > TOL_DUAL:
                    sig = 1.0 if d > 0 else -1.0
                else:
                    continue
                key = (int(j),) if bland else (-abs(d), int(j))
                if entering is None or key < entering[0]:
                    entering = (key, "col", int(j), sig)
            for i, d in zip(slacks, d_slack):
                st = self.ss[i]
                if st == AT_LOWER and d > TOL_DUAL:
                    sig = 1.0
                elif st == AT_UPPER and d < -TOL_DUAL:
                    sig = -1.0
                else:
                    continue
                key = (m.n_cols + i,) if bland else (-abs(d), m.n_cols + i)
                if entering is None or key < entering[0]:
                    entering = (key, "slack", i, sig)
            if entering is None:
                return OPTIMAL
            _, kind, ref, sigma = entering
            dx = np.zeros(m.n_cols)
            if kind == "col":
                if self.S:
                    dx[self.T] = sigma * (-self._ksolve(m._A[self.S, ref]))
                dx[ref] = sigma
                rng = m.ub[ref] - m.lb[ref]
                own_range = rng if np.isfinite(rng) else np.inf
            else:
                e = np.zeros(len(self.T))
                e[self.S.index(ref)] = 1.0
                dx[self.T] = sigma * (-self._ksolve(e))
                own_range = np.inf    # slack leaves its finite bound outward
            theta = self._pivot_from_direction(kind, ref, sigma, dx, own_range)
            if theta is None:
                return UNBOUNDED
            stall = stall + 1 if theta <= _TIE else 0
            if stall > _BLAND_AFTER:
                bland = True
        raise NumericalFailure("primal simplex exceeded the pivot cap")

    # -- dual simplex -------------------------------------------------------
    def dual(self, c):
        m = self.m
        stall, bland = 0, False
        last_total = np.inf
        for _ in range(_MAX_PIVOTS):
            ns = m._n_slots
            s = self._slack_values()
            slo, shi = self._slack_lims()
            basic = m._alive[:ns] & (self.ss[:ns] == BASIC)
            below = np.where(basic, slo - s, -np.inf)
            above = np.where(basic, s - shi, -np.inf)
            viol = np.maximum(below, above)
            viol[viol < TOL_FEAS] = 0.0

            lkind = lref = need = None
            best_v = 0.0
            if viol.max(initial=0.0) > 0.0:
                if bland:
                    slot = int(np.flatnonzero(viol > 0.0)[0])
                else:
                    slot = int(np.argmax(viol))
                lkind, lref = "slack", slot
                need = +1 if below[slot] >= above[slot] else -1
                best_v = float(viol[slot])
            for p in self.T:
                v, nd = 0.0, 0
                if self.x[p] < m.lb[p] - TOL_FEAS:
                    v, nd = m.lb[p] - self.x[p], +1
                elif self.x[p] > m.ub[p] + TOL_FEAS:
                    v, nd = self.x[p] - m.ub[p], -1
                if nd and (lkind is None or (not bland and v > best_v)
                           or (bland and p < (lref if lkind == "col" else np.inf))):
                    lkind, lref, need, best_v = "col", p, nd, v
            if lkind is None:
                return "feasible"
            total = float(viol.sum())
            for p in self.T:
                total += max(m.lb[p] - self.x[p], 0.0) + max(self.x[p] - m.ub[p], 0.0)
            stall = stall + 1 if total >= last_total - _TIE else 0
            last_total = total
            if stall > _BLAND_AFTER:
                bland = True

            # pivot row of the leaving variable over nonbasic candidates
            t = len(self.T)
            if lkind == "slack":
                w = self._ksolve_t(m._A[lref, self.T]) if t else np.zeros(0)
                base = m._A[lref]
            else:
                e = np.zeros(t)
                e[self.T.index(lref)] = 1.0
                w = self._ksolve_t(e)
                base = None

            cols, slacks = self._nonbasic_candidates()
            y = self._duals_kernel(c)
            d_cols, d_slack = self._reduced_costs(c, cols, slacks, y=y)
            if len(cols):
                proj = (m._A[np.ix_(self.S, cols)].T @ w if t else np.zeros(len(cols)))
                alpha_cols = (base[cols] - proj) if base is not None else proj
            else:
                alpha_cols = np.zeros(0)
            pos_of = {slot: p for p, slot in enumerate(self.S)}
            alpha_slk = np.array([(-w[pos_of[i]]) if base is not None else w[pos_of[i]]
                                  for i in slacks]) if slacks else np.zeros(0)

            entering = None  # (key, kind, ref)
            def consider(vindex, kind, ref, st, d, alpha):
                nonlocal entering
                if abs(alpha) <= TOL_PIVOT:
                    return
                deltas = (1.0,) if st == AT_LOWER else (
                    (-1.0,) if st == AT_UPPER else (1.0, -1.0))
                for delta in deltas:
                    # leaving basic moves at rate -alpha*delta per unit step
                    if (-alpha * delta) * need <= TOL_PIVOT:
                        continue
                    key = (vindex,) if bland else (abs(d) / abs(alpha), vindex)
                    if entering is None or key < entering[0]:
                        entering = (key, kind, ref)

            for j, d, a in zip(cols, d_cols, alpha_cols):
                consider(int(j), "col", int(j), self.cs[j], d, a)
            for i, d, a in zip(slacks, d_slack, alpha_slk):
                consider(m.n_cols + i, "slack", i, self.ss[i], d, a)
            if entering is None:
                return INFEASIBLE
            _, kind, ref = entering

            # exchange: the leaving variable snaps to its violated bound
            if lkind == "col":
                self.T.remove(lref)
                self.cs[lref] = AT_LOWER if need > 0 else AT_UPPER
            else:
                self.ss[lref] = self._nb_slack_status(lref)
                self.S.append(lref)
            if kind == "col":
                self.cs[ref] = BASIC
                self.T.append(ref)
            else:
                self.ss[ref] = BASIC
                self.S.remove(ref)
            self._set_nonbasic_values()
            self._recompute_x()
            m.stats.pivots += 1
        raise NumericalFailure("dual simplex exceeded the pivot cap")

    # -- driver -----------------------------------------------------------
    def _primal_infeasibility(self):
        m = self.m
        ns = m._n_slots
        v = 0.0
        if self.T:
            xt = self.x[self.T]
            v = max(v, float(np.max(np.maximum(m.lb[self.T] - xt, 0.0), initial=0.0)))
            v = max(v, float(np.max(np.maximum(xt - m.ub[self.T], 0.0), initial=0.0)))
        s = self._slack_values()
        slo, shi = self._slack_lims()
        basic = m._alive[:ns] & (self.ss[:ns] == BASIC)
        if basic.any():
            v = max(v, float(np.max(np.maximum(slo[basic] - s[basic], 0.0), initial=0.0)))
            v = max(v, float(np.max(np.maximum(s[basic] - shi[basic], 0.0), initial=0.0)))
        return v

    def _clamped_costs(self):
        c = self.m.obj
        ct = np.zeros_like(c)
        lo = self.cs == AT_LOWER
        hi = self.cs == AT_UPPER
        ct[lo] = np.minimum(c[lo], 0.0)
        ct[hi] = np.maximum(c[hi], 0.0)
        return ct

    def optimize(self):
        c = self.m.obj
        if not self.valid:
            self.cold_reset()
        for _ in range(3):
            try:
                self._set_nonbasic_values()
                self._recompute_x()
                if self._primal_infeasibility() > 10 * TOL_FEAS:
                    if self.dual_feasible(c):
                        r = self.dual(c)
                    else:
                        ct = self._clamped_costs()
                        if not self.dual_feasible(ct):
                            self.cold_reset()
                            ct = self._clamped_costs()
                        r = self.dual(ct)
                    if r == INFEASIBLE:
                        return INFEASIBLE
                r = self.primal(c)
                if r == UNBOUNDED:
                    return UNBOUNDED
                if self._primal_infeasibility() <= 1e-7:
                    return OPTIMAL
                # drifted out of feasibility: run the repair loop again
            except _KernelSingular:
                self.cold_reset()
        raise NumericalFailure("could not stabilize the basis")

    # -- reporting ----------------------------------------------------------
    def snapshot_basis(self) -> Basis:
        ids = self.m.row_ids()
        return Basis(self.cs.copy(), ids.copy(), self.ss[ids].copy())

    def solution(self, status, iterations=0) -> LpSolution:
        m = self.m
        ids = m.row_ids()
        duals = np.zeros(ids.size)
        slacks = np.zeros(ids.size)
        obj = float("nan")
        if status == OPTIMAL:
            y_full = np.zeros(m._n_slots)
            if self.S:
                y_full[self.S] = self._duals_kernel(m.obj)
            duals = y_full[ids]
            slacks = self._slack_values()[ids]
            obj = float(m.obj @ self.x)
        return LpSolution(status=status, x=self.x.copy(), objective_value=obj,
                          basis=self.snapshot_basis(), iterations=iterations,
                          _row_ids=ids, _duals=duals, _slacks=slacks)


# ----------------------------------------------------------------------

def lp_solve(model: LpModel, warm: Basis | None = None,
             from_scratch: bool = False) -> LpSolution:
    """Solve ``model``, reusing its internal basis unless told otherwise.

    ``warm`` installs an explicit starting basis (stale bases are repaired
    against the current rows, not rejected).  ``from_scratch`` forces a cold
    start.  The model keeps its final basis, so consecutive calls after
    single-row edits warm-start automatically.
    """
    t0 = time.perf_counter()
    eng = model._engine
    if eng is None or from_scratch:
        eng = _Engine(model)
        model._engine = eng
    if warm is not None:
        eng.load_basis(warm)
    pivots_before = model.stats.pivots
    status = eng.optimize()
    model.stats.solves += 1
    model.stats.seconds += time.perf_counter() - t0
    return eng.solution(status, iterations=model.stats.pivots - pivots_before)


def dual_objective(model: LpModel, sol: LpSolution) -> float:
    """Dual objective of an optimal solution, for strong-duality checks."""
    ids = model.row_ids()
    y = sol.duals_for(ids)
    val = float(y @ model._rhs[ids])
    d = model.obj - model._A[ids].T @ y
    for j in range(model.n_cols):
        st = sol.basis.col_status[j]
        if st == AT_LOWER:
            val += d[j] * model.lb[j]
        elif st == AT_UPPER:
            val += d[j] * model.ub[j]
    return val
