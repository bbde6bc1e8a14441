"""One active-set run, narrated round by round.

The method starts from the fully relaxed portfolio program, checks the
incumbent against all N sampled return vectors, and enforces one ranked
violating scenario per round until at most k violations remain.  Watch the
violation count collapse while the working set stays tiny.

This walkthrough drives the loop by hand with the public pieces; the
packaged `active_set` does the same with bookkeeping and safety caps.
"""

import numpy as np

from ccsaa import (certify, default_instance, evaluate_outcomes,
                   max_removals, sample_scenarios)
from ccsaa.lp import lp_solve
from ccsaa.saa import add_scenario_row, build_saa_lp

inst = default_instance()
spec = inst.program_spec
N = 50_000
k = max_removals(N, inst.risk_spec).k_removals
scenarios = sample_scenarios(inst.model, N, seed=7)
print(f"N={N}, k={k} (k/N={k / N:.4f})\n")

w = 0.5
master = build_saa_lp(scenarios, spec, subset=[])   # relaxed: budget row only
working = []
sol = lp_solve(master)
for round_no in range(10_000):
    out = evaluate_outcomes(sol.x, scenarios, spec)
    ranked = out.ranked                              # violated, worst first
    print(f"round {round_no:>3}: objective={sol.objective_value:.5f} "
          f"violations={ranked.size:>6} working set={len(working):>3}")
    if ranked.size <= k:
        break
    # enforce the scenario at rank floor(w (k+1) + (1-w) |ranked|)
    j = int(np.floor(w * (k + 1) + (1 - w) * ranked.size))
    j = min(max(j, k + 1), ranked.size)
    pick = int(ranked[j - 1])
    add_scenario_row(master, scenarios, spec, pick)
    working.append(pick)
    sol = lp_solve(master)                           # warm re-solve

budget = max_removals(N, inst.risk_spec)
print(f"\ncertified: {certify(sol.x, scenarios, budget, spec)} "
      f"after {master.stats.solves} model solves "
      f"({master.stats.pivots} simplex pivots total)")
top = np.argsort(-sol.x)[:4]
print("largest allocations:",
      {inst.names[i]: round(float(sol.x[i]), 4) for i in top})
