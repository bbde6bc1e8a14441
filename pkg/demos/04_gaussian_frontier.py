"""The exact Gaussian frontier versus the sampled approximation.

With normal returns, the chance-constrained portfolio solves exactly as a
cone program (here: cutting planes on the LP core).  Evaluating it at the
empirical discard fraction k/N gives the ceiling that scenario methods chase
as N grows.
"""

import numpy as np

from ccsaa import (active_set, default_instance, max_removals,
                   sample_scenarios, solve_gaussian_exact)

inst = default_instance()
spec = inst.program_spec

true_frontier = solve_gaussian_exact(inst.model, inst.alpha, inst.epsilon,
                                     cash_index=inst.cash_index)
print(f"exact optimum at the true risk level eps={inst.epsilon}: "
      f"{true_frontier.objective:.5f}\n")

print(f"{'N':>8} {'k/N':>7} {'cone@k/N':>9} {'active-set':>11} {'gap':>8}")
for N in (1000, 10000, 100000):
    budget = max_removals(N, inst.risk_spec)
    eps_hat = max(budget.discard_fraction, 1e-9)
    ceiling = solve_gaussian_exact(inst.model, inst.alpha, eps_hat,
                                   cash_index=inst.cash_index)
    objs = []
    for trial in range(5):
        scenarios = sample_scenarios(inst.model, N, 3000 + 1000 * trial)
        objs.append(active_set(scenarios, spec, budget).objective)
    mean_obj = float(np.mean(objs))
    print(f"{N:>8} {budget.discard_fraction:>7.4f} {ceiling.objective:>9.5f} "
          f"{mean_obj:>11.5f} {ceiling.objective - mean_obj:>8.5f}")

print("\nThe sampled method tracks the cone ceiling at matched k/N, and both")
print("climb toward the true-eps optimum as N (and so k/N) grows.  The small")
print("negative gap in the k=0 row is real: a finite sample is slightly")
print("optimistic against a ceiling evaluated at (near) zero risk.")
