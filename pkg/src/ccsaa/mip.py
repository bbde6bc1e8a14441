"""Branch-and-bound over the LP core: exact discard models and
semi-continuous portfolio variables.

The exact discard model attaches one binary Z_s per scenario row,

    r_s . x >= alpha - M_s Z_s,     sum_s Z_s <= k,

so the search picks the best k rows to sacrifice.  M_s is tight on the unit
simplex: the worst value of alpha - r_s . x over feasible x is
alpha - min_j r_sj, clipped at zero and padded slightly.

Search strategy: best-bound node selection, branching on the most fractional
binary, with an initial depth-first dive to find the first incumbent fast.
Nodes warm-start the bounded-variable simplex from their parent's basis, so
each node costs a handful of dual pivots.
"""

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .saa import ScenarioSet

_INTEGRALITY_TOL = 1e-6
DEFAULT_GAP = 1e-4
DEFAULT_TIME_LIMIT = 3600.0


@dataclass(frozen=True)
class SemiContinuousSpec:
    """Invest-or-nothing band: each targeted column is 0 or in [lower, upper]."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 < self.lower < self.upper < 1.0):
            raise ValueError(f"need 0 < l < u < 1, got l={self.lower}, u={self.upper}")


@dataclass
class MipModel:
    base: lp.LpModel
    binaries: list
    gap_tolerance: float = DEFAULT_GAP
    semicontinuous_cols: dict = field(default_factory=dict)   # col -> indicator

    def __post_init__(self):
        if self.gap_tolerance <= 0:
            raise ValueError("gap_tolerance must be positive")
        self.binaries = sorted(int(j) for j in set(self.binaries))
        for j in self.binaries:
            if not (self.base.lb[j] >= 0.0 and self.base.ub[j] <= 1.0):
                raise ValueError(f"binary column {j} must have bounds within [0,1]")


@dataclass
class MipResult:
    status: str                     # optimal | infeasible | time_limit
    x: np.ndarray
    objective_value: float
    node_count: int
    lp_solves: int
    root_bound: float
    gap: float
    hit_time_limit: bool
    _lp: lp.LpSolution = field(repr=False, default=None)

    def slack(self, row_id):
        return self._lp.slack(row_id)

    def slacks_for(self, row_ids):
        return self._lp.slacks_for(row_ids)


def big_m_values(scenarios: ScenarioSet, alpha: float) -> np.ndarray:
    """Per-scenario constants, tight over the unit simplex."""
    return np.maximum(0.0, alpha - scenarios.returns.min(axis=1)) + 1e-6


def build_saa_bigm(scenarios: ScenarioSet, alpha: float, k: int,
                   objective, gap_tolerance: float = DEFAULT_GAP) -> MipModel:
    """Exact N-scenario, k-discard model with one binary per scenario."""
    c = np.asarray(objective, dtype=float).ravel()
    N, n = scenarios.n_scenarios, scenarios.n_assets
    if c.size != n:
        raise ValueError(f"objective has dimension {c.size}, expected {n}")
    if not 0 <= k < N:
        raise ValueError(f"need 0 <= k < N, got k={k}, N={N}")
    M = big_m_values(scenarios, alpha)
    model = lp.LpModel(np.concatenate([c, np.zeros(N)]),
                       lower=np.zeros(n + N),
                       upper=np.concatenate([np.full(n, np.inf), np.ones(N)]))
    ones = np.concatenate([np.ones(n), np.zeros(N)])
    model.add_row(ones, "=", 1.0, label="budget")
    for s in range(N):
        row = np.zeros(n + N)
        row[:n] = scenarios.returns[s]
        row[n + s] = M[s]
        model.add_row(row, ">=", alpha, label=f"s{s}")
    card = np.concatenate([np.zeros(n), np.ones(N)])
    model.add_row(card, "<=", float(k), label="cardinality")
    return MipModel(base=model, binaries=list(range(n, n + N)),
                    gap_tolerance=gap_tolerance)


def apply_semicontinuous(model: MipModel, spec: SemiContinuousSpec,
                         columns) -> list:
    """Attach indicator binaries forcing each column into {0} u [l, u].

    Adds, per column i, a fresh binary y_i and the rows
    ``x_i - l y_i >= 0`` and ``x_i - u y_i <= 0``.  Returns the new binary
    column indices.  Applying twice to the same column is rejected.
    """
    base = model.base
    cols = [int(j) for j in columns]
    for j in cols:
        if not 0 <= j < base.n_cols:
            raise ValueError(f"column {j} out of range")
        if j in model.semicontinuous_cols:
            raise ValueError(f"column {j} already has a semi-continuous indicator")
    fresh = base.add_columns(np.zeros(len(cols)), np.zeros(len(cols)),
                             np.ones(len(cols)))
    for j, y in zip(cols, fresh):
        lo_row = np.zeros(base.n_cols)
        lo_row[j] = 1.0
        lo_row[y] = -spec.lower
        base.add_row(lo_row, ">=", 0.0, label=f"semi_lo_{j}")
        hi_row = np.zeros(base.n_cols)
        hi_row[j] = 1.0
        hi_row[y] = -spec.upper
        base.add_row(hi_row, "<=", 0.0, label=f"semi_hi_{j}")
        model.semicontinuous_cols[j] = y
        model.binaries.append(y)
    model.binaries = sorted(set(model.binaries))
    return fresh


# ----------------------------------------------------------------------

def _fractional(x, binaries):
    worst, pick = _INTEGRALITY_TOL, -1
    for j in binaries:
        f = min(x[j] - np.floor(x[j]), np.ceil(x[j]) - x[j])
        f = min(abs(x[j] - 0.0), abs(x[j] - 1.0), f)
        if f > worst:
            worst, pick = f, j
    return pick


def _incumbent_valid(model: MipModel, x) -> bool:
    base = model.base
    if x is None or x.shape != (base.n_cols,):
        return False
    if np.any(x < base.lb - 1e-9) or np.any(x > base.ub + 1e-9):
        return False
    for j in model.binaries:
        if min(abs(x[j]), abs(x[j] - 1.0)) > _INTEGRALITY_TOL:
            return False
    ids = base.row_ids()
    vals = base._A[ids] @ x
    rel = base._rel[ids]
    rhs = base._rhs[ids]
    bad = ((rel == lp.LE) & (vals > rhs + 1e-7)) | \
          ((rel == lp.GE) & (vals < rhs - 1e-7)) | \
          ((rel == lp.EQ) & (np.abs(vals - rhs) > 1e-7))
    return not bool(bad.any())


def mip_solve(model: MipModel, warm=None,
              time_limit: float = DEFAULT_TIME_LIMIT) -> MipResult:
    """Solve the integer model to the configured relative gap.

    ``warm`` is an optional incumbent point from a previous, related solve;
    it is adopted only after passing feasibility and integrality screening.
    On hitting the time limit the best incumbent is returned, flagged.
    """
    base = model.base
    t0 = time.perf_counter()
    solves_before = base.stats.solves

    original_bounds = {j: (base.lb[j], base.ub[j]) for j in model.binaries}

    def set_patch(patch):
        for j in model.binaries:
            lo, hi = patch.get(j, original_bounds[j])
            base.set_bounds(j, lo, hi)

    def restore():
        for j, (lo, hi) in original_bounds.items():
            base.set_bounds(j, lo, hi)

    incumbent_x, incumbent_obj, incumbent_sol = None, -np.inf, None
    if warm is not None:
        w = np.asarray(warm, dtype=float)
        if _incumbent_valid(model, w):
            incumbent_x, incumbent_obj = w.copy(), float(base.obj @ w)

    root = lp.lp_solve(base)
    nodes = 1
    if root.status != lp.OPTIMAL:
        restore()
        status = lp.INFEASIBLE if root.status == lp.INFEASIBLE else root.status
        return MipResult(status, root.x, float("nan"), nodes,
                         base.stats.solves - solves_before, float("nan"),
                         float("nan"), False, _lp=root)
    root_bound = root.objective_value

    def gap_abs():
        return model.gap_tolerance * max(1.0, abs(incumbent_obj))

    heap = []      # (-bound, tie, patch, basis)
    stack = []     # dive stack, used until the first incumbent
    tie = 0
    stack.append((root_bound, {}, root.basis, root))
    best_bound = root_bound
    hit_limit = False

    while stack or heap:
        if time.perf_counter() - t0 > time_limit:
            hit_limit = True
            break
        if stack and incumbent_x is None:
            bound, patch, basis, sol = stack.pop()
        else:
            while stack:
                b, p, bs, _ = stack.pop()
                tie += 1
                heapq.heappush(heap, (-b, tie, p, bs))
            if not heap:
                break
            negb, _, patch, basis = heapq.heappop(heap)
            bound, sol = -negb, None
        if incumbent_x is not None and bound <= incumbent_obj + gap_abs():
            continue
        if sol is None:
            set_patch(patch)
            sol = lp.lp_solve(base, warm=basis)
            nodes += 1
            if sol.status != lp.OPTIMAL:
                continue
            if incumbent_x is not None and sol.objective_value <= incumbent_obj + gap_abs():
                continue
        j = _fractional(sol.x, model.binaries)
        if j < 0:
            if sol.objective_value > incumbent_obj:
                incumbent_x = sol.x.copy()
                incumbent_obj = sol.objective_value
                incumbent_sol = sol
            continue
        # children: explore the rounded side first while diving
        near = 1.0 if sol.x[j] >= 0.5 else 0.0
        far = 1.0 - near
        child_near = dict(patch)
        child_near[j] = (near, near)
        child_far = dict(patch)
        child_far[j] = (far, far)
        if incumbent_x is None:
            tie += 1
            heapq.heappush(heap, (-sol.objective_value, tie, child_far,
                                  sol.basis.copy()))
            # dive: solve the rounded side immediately
            set_patch(child_near)
            child_sol = lp.lp_solve(base, warm=sol.basis)
            nodes += 1
            if child_sol.status == lp.OPTIMAL:
                stack.append((child_sol.objective_value, child_near,
                              child_sol.basis, child_sol))
        else:
            for child in (child_far, child_near):
                tie += 1
                heapq.heappush(heap, (-sol.objective_value, tie, child,
                                      sol.basis.copy()))

    if heap and not hit_limit:
        best_bound = max(incumbent_obj, -heap[0][0])
    elif heap:
        best_bound = max(best_bound, -heap[0][0])
    else:
        best_bound = incumbent_obj if incumbent_x is not None else best_bound

    restore()
    lp_solves = base.stats.solves - solves_before
    if incumbent_x is None:
        status = "time_limit" if hit_limit else lp.INFEASIBLE
        return MipResult(status, root.x, float("nan"), nodes, lp_solves,
                         root_bound, float("nan"), hit_limit, _lp=root)
    gap = max(0.0, best_bound - incumbent_obj) / max(1.0, abs(incumbent_obj))
    status = "time_limit" if hit_limit else lp.OPTIMAL
    if incumbent_sol is None:
        # incumbent came from the warm hint; recover row values at that point
        set_patch({j: (round(incumbent_x[j]), round(incumbent_x[j]))
                   for j in model.binaries})
        incumbent_sol = lp.lp_solve(base)
        restore()
    return MipResult(status, incumbent_x, incumbent_obj, nodes, lp_solves,
                     root_bound, gap, hit_limit, _lp=incumbent_sol)
