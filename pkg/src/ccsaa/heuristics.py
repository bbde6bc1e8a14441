"""Constraint-discard heuristics for the k-relaxed scenario program.

Removal family (start from the full model, drop k rows):
  greedy_removal      trial-removes every binding row, keeps the best (GR-P)
  random_removal      drops a random binding row per round (RA-P)
  dual_greedy_removal ranks binding rows by dual value instead of trials (FGR-P)

Insertion family (start empty, add rows until certified):
  pool_and_discard    pools the most violated scenario, then tries discards
                      (PND; ``fast=True`` ranks discards by duals: FPND)
  active_set          adds one ranked violated scenario per round (ASM-1)
  polish_resolve      sweep-and-replace polish of an active-set run (ASM-2)
  polish_dual         dual-guided polish of an active-set run (ASM-3)

Every method returns a SolveReport whose solution violates at most k
training scenarios.  Methods that rank by duals refuse integer masters
(UnsupportedForMip): branch-and-bound exposes no dual values.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import lp, saa
from .certificate import ScenarioBudget
from .errors import CapExceeded, ConfigError, InfeasibleModel, UnsupportedForMip
from .mip import MipModel, SemiContinuousSpec, apply_semicontinuous, mip_solve
from .reports import (STATUS_CAP, STATUS_OK, STATUS_TIME_LIMIT, SolveReport,
                      WorkingSet)
from .saa import (VIOLATION_TOL, ChanceProgramSpec, ScenarioSet,
                  evaluate_outcomes)

BINDING_TOL_LP = 1e-7
BINDING_TOL_MIP = 1e-1      # integer masters detect binding rows loosely


@dataclass
class AsmConfig:
    """Knobs of the active-set family.

    ``w`` steers which ranked violation gets added: 1.0 picks the (k+1)-th
    most violated, 0.0 the least violated.  ``polish_iterations`` defaults to
    the decision dimension when unset.  ``max_rounds`` caps constraint
    additions as a runaway guard.
    """

    w: float = 0.5
    polish_iterations: int | None = None
    max_rounds: int = 100_000

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError("w must lie in [0,1]")
        if self.polish_iterations is not None and self.polish_iterations < 1:
            raise ValueError("polish_iterations must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    def resolved_iterations(self, n_assets: int) -> int:
        return self.polish_iterations if self.polish_iterations is not None else n_assets


class _Master:
    """Working model over a subset of scenario rows, LP or integer."""

    def __init__(self, scenarios: ScenarioSet, spec: ChanceProgramSpec,
                 subset, semi: SemiContinuousSpec | None = None,
                 gap_tolerance: float = 1e-4):
        self.scenarios = scenarios
        self.spec = spec
        subset = list(subset)
        self.model = saa.build_saa_lp(scenarios, spec, subset=subset)
        self.row_of = {int(i): rid for i, rid in
                       zip(subset, range(1, len(subset) + 1))}
        self.mip = None
        if semi is not None:
            if spec.cash_index is None:
                raise ConfigError("semi-continuous runs need spec.cash_index")
            self.mip = MipModel(base=self.model, binaries=[],
                                gap_tolerance=gap_tolerance)
            apply_semicontinuous(self.mip, semi,
                                 [j for j in range(scenarios.n_assets)
                                  if j != spec.cash_index])
        self.binding_tol = BINDING_TOL_MIP if self.mip else BINDING_TOL_LP
        self.solves = 0
        self.mip_nodes = 0
        self.solver_time = 0.0
        self.x = None               # asset block of the last solution
        self._x_full = None
        self._sol = None            # last LpSolution (LP masters only)

    @property
    def is_mip(self) -> bool:
        return self.mip is not None

    def solve(self):
        t0 = time.perf_counter()
        if self.mip is not None:
            res = mip_solve(self.mip, warm=self._x_full)
            self.mip_nodes += res.node_count
            status, x_full, obj = res.status, res.x, res.objective_value
            self._sol = None
        else:
            sol = lp.lp_solve(self.model)
            status, x_full, obj = sol.status, sol.x, sol.objective_value
            self._sol = sol
        self.solver_time += time.perf_counter() - t0
        self.solves += 1
        if status != lp.OPTIMAL:
            raise InfeasibleModel(f"master solve returned {status}")
        self._x_full = x_full
        self.x = x_full[: self.scenarios.n_assets]
        return self.x, float(obj)

    # -- row management -------------------------------------------------
    def add(self, i: int):
        self.row_of[i] = saa.add_scenario_row(self.model, self.scenarios,
                                              self.spec, i)

    def remove(self, i: int):
        self.model.remove_row(self.row_of.pop(i))

    def members(self):
        return list(self.row_of.keys())

    # -- state at the last solution --------------------------------------
    def enforced_slack(self, indices=None):
        """r_i . x - alpha for enforced scenarios at the last solution."""
        idx = np.fromiter(self.row_of.keys() if indices is None else indices,
                          dtype=np.int64)
        return idx, self.scenarios.returns[idx] @ self.x - self.spec.alpha

    def binding(self):
        """Enforced scenarios whose row is tight at the last solution."""
        if not self.row_of:
            return []
        idx, over = self.enforced_slack()
        mask = (over >= -1e-9) & (over <= self.binding_tol)
        return sorted(int(i) for i in idx[mask])

    def duals(self):
        """Scenario-row duals of the last LP solve; integer masters refuse."""
        if self.is_mip or self._sol is None:
            raise UnsupportedForMip(
                "dual values are not available from an integer master")
        items = sorted(self.row_of.items())
        ids = np.array([rid for _, rid in items], dtype=np.int64)
        order = np.argsort(ids)
        pis = np.empty(ids.size)
        pis[order] = self._sol.duals_for(ids[order])
        return {i: float(p) for (i, _), p in zip(items, pis)}

    def working_set(self) -> WorkingSet:
        items = sorted(self.row_of.items())
        return WorkingSet([i for i, _ in items], dict(items))

    def report(self, method, obj, seed=None, status=STATUS_OK,
               extra_solves=0, extra_nodes=0, extra_time=0.0,
               x=None, working_set=None, violations=None) -> SolveReport:
        x = self.x if x is None else x
        if violations is None:
            violations = evaluate_outcomes(x, self.scenarios,
                                           self.spec).violation_count
        return SolveReport(
            method=method, x=np.array(x, copy=True), objective=float(obj),
            working_set=self.working_set() if working_set is None else working_set,
            lp_solves=self.solves + extra_solves,
            mip_nodes=self.mip_nodes + extra_nodes,
            wall_time=self.solver_time + extra_time,
            train_violations=int(violations), seed=seed, status=status)


def _deadline_hit(t0, time_limit):
    return time_limit is not None and time.perf_counter() - t0 > time_limit


# ----------------------------------------------------------------------
# full model and the removal family
# ----------------------------------------------------------------------

def solve_full(scenarios, spec, semi=None) -> SolveReport:
    """Enforce every scenario row; the conservative zero-discard baseline."""
    master = _Master(scenarios, spec, range(scenarios.n_scenarios), semi=semi)
    x, obj = master.solve()
    return master.report("full", obj)


def greedy_removal(scenarios, spec, budget: ScenarioBudget, semi=None,
                   time_limit=None) -> SolveReport:
    """GR-P: k rounds, each trial-removing every binding row and keeping the
    removal that improves the objective most."""
    t0 = time.perf_counter()
    master = _Master(scenarios, spec, range(scenarios.n_scenarios), semi=semi)
    x, obj = master.solve()
    best_x, best_obj = x.copy(), obj
    for _ in range(budget.k_removals):
        if _deadline_hit(t0, time_limit):
            return master.report("grp", best_obj, x=best_x,
                                 status=STATUS_TIME_LIMIT)
        candidates = master.binding()
        if not candidates:
            # nothing binding: drop the row closest to binding
            idx, over = master.enforced_slack()
            candidates = [int(idx[np.argmin(over)])]
        best = None
        for i in candidates:
            master.remove(i)
            x, obj = master.solve()
            if best is None or obj > best[1] + 1e-12:
                best = (i, obj, x.copy(), master._x_full.copy())
            master.add(i)
        i, best_obj, best_x, full = best
        master.remove(i)
        # model now equals the winning trial state; restore its solution
        # instead of spending another solve
        master._x_full = full
        master.x = best_x
    return master.report("grp", best_obj, x=best_x)


def random_removal(scenarios, spec, budget: ScenarioBudget, seed,
                   semi=None, time_limit=None) -> SolveReport:
    """RA-P: k rounds, each dropping one binding row chosen uniformly."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    master = _Master(scenarios, spec, range(scenarios.n_scenarios), semi=semi)
    x, obj = master.solve()
    for _ in range(budget.k_removals):
        if _deadline_hit(t0, time_limit):
            return master.report("rap", obj, seed=seed, status=STATUS_TIME_LIMIT)
        candidates = master.binding()
        if not candidates:
            idx, over = master.enforced_slack()
            candidates = [int(idx[np.argmin(over)])]
        master.remove(candidates[int(rng.integers(len(candidates)))])
        x, obj = master.solve()
    return master.report("rap", obj, seed=seed)


def dual_greedy_removal(scenarios, spec, budget: ScenarioBudget,
                        time_limit=None) -> SolveReport:
    """FGR-P: like GR-P but each round removes the binding row whose dual
    promises the largest instantaneous improvement; 1 + k solves total."""
    t0 = time.perf_counter()
    master = _Master(scenarios, spec, range(scenarios.n_scenarios))
    x, obj = master.solve()
    for _ in range(budget.k_removals):
        if _deadline_hit(t0, time_limit):
            return master.report("fgrp", obj, status=STATUS_TIME_LIMIT)
        pis = master.duals()
        # improvement rate per unit relaxation is |dual| regardless of the
        # row-orientation sign convention
        pick = max(pis, key=lambda i: (abs(pis[i]), -i))
        if abs(pis[pick]) <= 1e-12:
            idx, over = master.enforced_slack()
            pick = int(idx[np.argmin(over)])
        master.remove(pick)
        x, obj = master.solve()
    return master.report("fgrp", obj)


# ----------------------------------------------------------------------
# pool and discard
# ----------------------------------------------------------------------

def pool_and_discard(scenarios, spec, budget: ScenarioBudget, fast: bool,
                     seed=None, semi=None, cfg: AsmConfig | None = None,
                     time_limit=None) -> SolveReport:
    """PND / FPND reconstruction.

    Pooling adds the most violated scenario and re-solves until the iterate
    is certified (at most k violations).  The discard phase then walks the
    pooled rows: candidates ranked by trial re-solves (PND) or by dual
    values (FPND) are removed one per round when the removal improves the
    objective and keeps certification.  The reported working set is pruned
    to the rows binding at the final solution.

    The discard bookkeeping follows one faithful reading of the published
    pool-and-discard scheme, whose original statement leaves the inner-loop
    accounting open.
    """
    method = "fpnd" if fast else "pnd"
    cfg = cfg or AsmConfig()
    t0 = time.perf_counter()
    k = budget.k_removals
    master = _Master(scenarios, spec, [], semi=semi)
    if fast and master.is_mip:
        raise UnsupportedForMip("FPND ranks removals by dual values")
    x, obj = master.solve()
    out = evaluate_outcomes(x, scenarios, spec)
    rounds = 0
    while out.violation_count > k:
        rounds += 1
        if rounds > cfg.max_rounds:
            raise CapExceeded("pooling round cap exceeded",
                              report=master.report(method, obj, seed=seed,
                                                   status=STATUS_CAP))
        if _deadline_hit(t0, time_limit):
            return master.report(method, obj, seed=seed,
                                 status=STATUS_TIME_LIMIT)
        master.add(int(out.ranked[0]))
        x, obj = master.solve()
        out = evaluate_outcomes(x, scenarios, spec)

    incumbent_x, incumbent_obj = x.copy(), obj
    incumbent_viol = out.violation_count
    improved = True
    while improved and master.row_of:
        improved = False
        if _deadline_hit(t0, time_limit):
            break
        if fast:
            pis = master.duals()
            order = sorted(master.binding(),
                           key=lambda i: (-abs(pis.get(i, 0.0)), i))
        else:
            order = master.binding()
        if not order:
            break
        if fast:
            # test candidates in dual order, accept the first that works
            for i in order:
                master.remove(i)
                x, obj = master.solve()
                out = evaluate_outcomes(x, scenarios, spec)
                if out.violation_count <= k and obj > incumbent_obj + 1e-12:
                    incumbent_x, incumbent_obj = x.copy(), obj
                    incumbent_viol = out.violation_count
                    improved = True
                    break
                master.add(i)
                # the re-added row invalidates the trial point for the next
                # candidate; the next solve repairs it warmly
        else:
            # trial every candidate, keep the best certified improvement
            best = None
            for i in order:
                master.remove(i)
                x, obj = master.solve()
                out = evaluate_outcomes(x, scenarios, spec)
                if (out.violation_count <= k and obj > incumbent_obj + 1e-12
                        and (best is None or obj > best[1] + 1e-12)):
                    best = (i, obj, x.copy(), master._x_full.copy(),
                            out.violation_count)
                master.add(i)
            if best is not None:
                i, incumbent_obj, incumbent_x, full, incumbent_viol = best
                master.remove(i)
                master._x_full = full
                master.x = incumbent_x
                improved = True

    # keep only rows binding at the incumbent in the reported working set
    master.x = incumbent_x
    ws = master.working_set()
    if len(ws):
        idx, over = master.enforced_slack()
        keep = {int(i) for i, o in zip(idx, over)
                if -1e-9 <= o <= master.binding_tol}
        ws = WorkingSet([i for i in ws.scenario_indices if i in keep],
                        {i: r for i, r in ws.row_ids.items() if i in keep})
    return master.report(method, incumbent_obj, seed=seed, x=incumbent_x,
                         working_set=ws, violations=incumbent_viol)


# ----------------------------------------------------------------------
# active-set family
# ----------------------------------------------------------------------

def _rank_position(k: int, n_violated: int, w: float) -> int:
    """1-based rank of the violation to enforce next, clamped to range."""
    j = int(np.floor(w * (k + 1) + (1.0 - w) * n_violated))
    return min(max(j, k + 1), n_violated)


def active_set(scenarios, spec, budget: ScenarioBudget,
               cfg: AsmConfig | None = None, semi=None,
               time_limit=None, seed=None) -> SolveReport:
    """ASM-1: grow a working set by one ranked violated scenario per round.

    Round structure: solve the relaxed master, rank the violated outcomes
    largest-first, stop once at most k remain, otherwise enforce the
    scenario at rank ``floor(w (k+1) + (1-w) |ranked|)`` and re-solve warm.
    """
    cfg = cfg or AsmConfig()
    t0 = time.perf_counter()
    k = budget.k_removals
    master = _Master(scenarios, spec, [], semi=semi)
    x, obj = master.solve()
    additions = 0
    while True:
        out = evaluate_outcomes(x, scenarios, spec)
        ranked = out.ranked
        if ranked.size <= k:
            break
        if additions >= cfg.max_rounds:
            raise CapExceeded(
                "active-set addition cap exceeded",
                report=master.report("asm1", obj, seed=seed, status=STATUS_CAP))
        if _deadline_hit(t0, time_limit):
            return master.report("asm1", obj, seed=seed,
                                 status=STATUS_TIME_LIMIT)
        j = _rank_position(k, ranked.size, cfg.w)
        master.add(int(ranked[j - 1]))
        additions += 1
        x, obj = master.solve()
    return master.report("asm1", obj, seed=seed,
                         violations=int(ranked.size))


def _polish_master(report: SolveReport, scenarios, spec, budget, semi):
    if report.train_violations > budget.k_removals:
        raise ValueError("polish input must be certified")
    master = _Master(scenarios, spec, list(report.working_set.scenario_indices),
                     semi=semi)
    return master


def _kth_outcome(out, k: int):
    """Value and scenario of the test rank: the k-th largest outcome overall
    (the largest when k = 0, where any violation is already too many)."""
    return out.kth_ranked(max(k, 1))


def polish_resolve(report: SolveReport, scenarios, spec,
                   budget: ScenarioBudget, cfg: AsmConfig | None = None,
                   semi=None, time_limit=None) -> SolveReport:
    """ASM-2: sweep the working set; remove each row, and when the test rank
    is still violated swap that scenario in; keep certified improvements."""
    cfg = cfg or AsmConfig()
    t0 = time.perf_counter()
    k = budget.k_removals
    if len(report.working_set) == 0:
        return SolveReport("asm2", report.x.copy(), report.objective,
                           report.working_set.copy(), report.lp_solves,
                           report.mip_nodes, report.wall_time,
                           report.train_violations, seed=report.seed)
    master = _polish_master(report, scenarios, spec, budget, semi)
    incumbent = (report.x.copy(), report.objective, report.train_violations,
                 report.working_set.copy())
    members = list(report.working_set.scenario_indices)
    status = STATUS_OK
    for _ in range(cfg.resolved_iterations(scenarios.n_assets)):
        if status != STATUS_OK:
            break
        for s in list(members):
            if s not in master.row_of:
                continue
            if _deadline_hit(t0, time_limit):
                status = STATUS_TIME_LIMIT
                break
            master.remove(s)
            members.remove(s)
            x, obj = master.solve()
            out = evaluate_outcomes(x, scenarios, spec)
            kth, swap_in = _kth_outcome(out, k)
            if kth > VIOLATION_TOL and swap_in not in master.row_of:
                master.add(swap_in)
                members.append(swap_in)
                x, obj = master.solve()
                out = evaluate_outcomes(x, scenarios, spec)
                kth, _ = _kth_outcome(out, k)
            if kth <= VIOLATION_TOL and obj > incumbent[1] + 1e-12:
                incumbent = (x.copy(), obj, out.violation_count,
                             master.working_set())
    x, obj, viol, ws = incumbent
    return master.report("asm2", obj, seed=report.seed, x=x, working_set=ws,
                         violations=viol, status=status,
                         extra_solves=report.lp_solves,
                         extra_nodes=report.mip_nodes,
                         extra_time=report.wall_time)


def polish_dual(report: SolveReport, scenarios, spec,
                budget: ScenarioBudget, cfg: AsmConfig | None = None,
                time_limit=None) -> SolveReport:
    """ASM-3: like the sweep polish, but each iteration removes only the row
    whose dual value promises the largest instantaneous improvement."""
    cfg = cfg or AsmConfig()
    t0 = time.perf_counter()
    k = budget.k_removals
    if len(report.working_set) == 0:
        return SolveReport("asm3", report.x.copy(), report.objective,
                           report.working_set.copy(), report.lp_solves,
                           report.mip_nodes, report.wall_time,
                           report.train_violations, seed=report.seed)
    master = _polish_master(report, scenarios, spec, budget, semi=None)
    master.solve()          # establish dual values for the working set
    incumbent = (report.x.copy(), report.objective, report.train_violations,
                 report.working_set.copy())
    status = STATUS_OK
    for _ in range(cfg.resolved_iterations(scenarios.n_assets)):
        if not master.row_of:
            break
        if _deadline_hit(t0, time_limit):
            status = STATUS_TIME_LIMIT
            break
        pis = master.duals()
        pick = max(pis, key=lambda i: (abs(pis[i]), -i))
        if abs(pis[pick]) <= 1e-12:
            break               # no removal can move the objective
        master.remove(pick)
        x, obj = master.solve()
        out = evaluate_outcomes(x, scenarios, spec)
        kth, swap_in = _kth_outcome(out, k)
        if kth > VIOLATION_TOL and swap_in not in master.row_of:
            master.add(swap_in)
            x, obj = master.solve()
            out = evaluate_outcomes(x, scenarios, spec)
            kth, _ = _kth_outcome(out, k)
        if kth <= VIOLATION_TOL and obj > incumbent[1] + 1e-12:
            incumbent = (x.copy(), obj, out.violation_count,
                         master.working_set())
    x, obj, viol, ws = incumbent
    return master.report("asm3", obj, seed=report.seed, x=x, working_set=ws,
                         violations=viol, status=status,
                         extra_solves=report.lp_solves,
                         extra_nodes=report.mip_nodes,
                         extra_time=report.wall_time)


# ----------------------------------------------------------------------

METHODS = ("full", "grp", "rap", "fgrp", "pnd", "fpnd", "asm1", "asm2", "asm3")
DUAL_METHODS = ("fgrp", "fpnd", "asm3")


def run_method(name: str, scenarios, spec, budget: ScenarioBudget,
               cfg: AsmConfig | None = None, seed=None, semi=None,
               time_limit=None) -> SolveReport:
    """Dispatch one heuristic by its tag; dual-based tags refuse ``semi``."""
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}")
    if semi is not None and name in DUAL_METHODS:
        raise UnsupportedForMip(f"{name} needs LP duals and cannot run on "
                                "an integer master")
    cfg = cfg or AsmConfig()
    if name == "full":
        return solve_full(scenarios, spec, semi=semi)
    if name == "grp":
        return greedy_removal(scenarios, spec, budget, semi=semi,
                              time_limit=time_limit)
    if name == "rap":
        return random_removal(scenarios, spec, budget, seed, semi=semi,
                              time_limit=time_limit)
    if name == "fgrp":
        return dual_greedy_removal(scenarios, spec, budget,
                                   time_limit=time_limit)
    if name in ("pnd", "fpnd"):
        return pool_and_discard(scenarios, spec, budget, fast=(name == "fpnd"),
                                seed=seed, semi=semi, cfg=cfg,
                                time_limit=time_limit)
    base = active_set(scenarios, spec, budget, cfg=cfg, semi=semi,
                      time_limit=time_limit, seed=seed)
    if name == "asm1":
        return base
    if name == "asm2":
        return polish_resolve(base, scenarios, spec, budget, cfg=cfg,
                              semi=semi, time_limit=time_limit)
    return polish_dual(base, scenarios, spec, budget, cfg=cfg,
                       time_limit=time_limit)
