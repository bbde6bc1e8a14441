"""Scenario-program abstraction: scenario data, outcome ranking, certification.

A scenario program enforces, for each sampled return vector r_i, the row
``r_i . x >= alpha`` on top of the budget constraint ``sum(x) = 1`` and
``x >= 0``.  The outcome of scenario i at a point x is ``O_i = alpha - r_i . x``;
positive outcomes are violations.
"""

from dataclasses import dataclass

import numpy as np

from . import lp
from .certificate import ScenarioBudget
from .reports import WorkingSet

BUDGET_LABEL = "budget"

# An outcome counts as a violation only beyond the LP feasibility tolerance:
# binding rows at an optimum evaluate to zero only up to rounding, and a row
# the solver holds satisfied must not be counted violated by the evaluator.
VIOLATION_TOL = 1e-9


@dataclass(frozen=True)
class ScenarioSet:
    """An N x n matrix of sampled returns, one row per scenario."""

    returns: np.ndarray
    provenance: str = "unknown"

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2 or r.shape[0] < 1:
            raise ValueError("returns must be a non-empty N x n matrix")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns must be finite")
        r = np.ascontiguousarray(r)
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)

    @property
    def n_scenarios(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class ChanceProgramSpec:
    """Loss threshold, objective coefficients, and optional cash column.

    ``alpha`` is the portfolio-value floor: a scenario is violated when the
    realized return falls below it.  Note one convention trap: some sources
    quote the loss fraction (e.g. 0.05) rather than the floor (0.95); this
    type always stores the floor.
    """

    alpha: float
    objective: np.ndarray
    cash_index: int | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        if not np.all(np.isfinite(c)):
            raise ValueError("objective must be finite")
        object.__setattr__(self, "objective", c)
        if self.cash_index is not None:
            if not 0 <= self.cash_index < c.size:
                raise ValueError("cash_index out of range")
            if self.alpha > 1.0:
                raise ValueError("alpha > 1 breaks the all-cash feasibility guarantee")

    @property
    def n_assets(self) -> int:
        return self.objective.size


class OutcomeVector:
    """Per-scenario violation values with ranked views.

    ``ranked`` orders the *violated* scenarios by outcome, largest first
    (ties broken by ascending scenario index); ``ranked_all`` orders every
    scenario the same way.  Both report original scenario indices.
    """

    def __init__(self, values: np.ndarray):
        self.values = values
        self._ranked = None
        self._ranked_all = None

    @property
    def violation_count(self) -> int:
        return int(np.count_nonzero(self.values > VIOLATION_TOL))

    @property
    def ranked(self) -> np.ndarray:
        if self._ranked is None:
            idx = np.flatnonzero(self.values > VIOLATION_TOL)
            order = np.argsort(-self.values[idx], kind="stable")
            self._ranked = idx[order]
        return self._ranked

    @property
    def ranked_all(self) -> np.ndarray:
        if self._ranked_all is None:
            self._ranked_all = np.argsort(-self.values, kind="stable")
        return self._ranked_all

    def kth_ranked(self, rank: int):
        """(value, scenario) at a 1-based rank of the descending ordering.

        Same ordering as ``ranked_all`` (ties by ascending scenario index)
        but O(N) via partitioning instead of a full sort.
        """
        v = self.values
        if not 1 <= rank <= v.size:
            raise ValueError(f"rank {rank} out of range 1..{v.size}")
        val = -np.partition(-v, rank - 1)[rank - 1]
        greater = int(np.count_nonzero(v > val))
        ties = np.flatnonzero(v == val)
        return float(val), int(ties[rank - greater - 1])


def scenario_row(scenarios: ScenarioSet, spec: ChanceProgramSpec, index: int):
    """Row data (coeffs, relation, rhs, label) enforcing scenario ``index``."""
    return scenarios.returns[index], ">=", spec.alpha, f"s{index}"


def add_scenario_row(model: lp.LpModel, scenarios: ScenarioSet,
                     spec: ChanceProgramSpec, index: int) -> int:
    coeffs, rel, rhs, label = scenario_row(scenarios, spec, index)
    if model.n_cols > coeffs.size:
        # master models may carry extra columns (indicator binaries)
        padded = np.zeros(model.n_cols)
        padded[: coeffs.size] = coeffs
        coeffs = padded
    return model.add_row(coeffs, rel, rhs, label=label)


def build_saa_lp(scenarios: ScenarioSet, spec: ChanceProgramSpec,
                 subset=None) -> lp.LpModel:
    """LP enforcing the budget row plus the given subset of scenario rows.

    ``subset=None`` enforces every scenario; an empty subset gives the fully
    relaxed program.  The budget row is added first, then one row per subset
    member in order, so row ids are 0 (budget) and 1..len(subset).
    """
    if scenarios.n_scenarios < 1:
        raise ValueError("empty scenario set")
    if spec.n_assets != scenarios.n_assets:
        raise ValueError("objective dimension does not match scenarios")
    model = lp.LpModel(spec.objective)          # x >= 0 by default
    model.add_row(np.ones(scenarios.n_assets), "=", 1.0, label=BUDGET_LABEL)
    if subset is None:
        subset = range(scenarios.n_scenarios)
    idx = np.fromiter((int(i) for i in subset), dtype=np.int64)
    if idx.size:
        model.add_rows(scenarios.returns[idx], ">=",
                       np.full(idx.size, spec.alpha),
                       labels=[f"s{i}" for i in idx])
    return model


def evaluate_outcomes(x: np.ndarray, scenarios: ScenarioSet,
                      spec: ChanceProgramSpec) -> OutcomeVector:
    """O_i = alpha - r_i . x for every scenario, with ranking on demand."""
    x = np.asarray(x, dtype=float)
    if x.shape != (scenarios.n_assets,):
        raise ValueError(f"x has dimension {x.shape}, expected ({scenarios.n_assets},)")
    return OutcomeVector(spec.alpha - scenarios.returns @ x)


def certify(x: np.ndarray, scenarios: ScenarioSet, budget: ScenarioBudget,
            spec: ChanceProgramSpec) -> bool:
    """True iff x violates at most ``budget.k_removals`` training scenarios."""
    return evaluate_outcomes(x, scenarios, spec).violation_count <= budget.k_removals


def new_working_set() -> WorkingSet:
    return WorkingSet([], {})
