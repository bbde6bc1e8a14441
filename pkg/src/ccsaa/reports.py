"""Result records shared by every solve path."""

from dataclasses import dataclass, field

import numpy as np

STATUS_OK = "ok"
STATUS_TIME_LIMIT = "time_limit"
STATUS_CAP = "cap_exceeded"


@dataclass
class WorkingSet:
    """Scenario indices currently enforced as rows, with their row handles."""

    scenario_indices: list = field(default_factory=list)
    row_ids: dict = field(default_factory=dict)     # scenario index -> row id

    def __post_init__(self):
        if len(set(self.scenario_indices)) != len(self.scenario_indices):
            raise ValueError("working-set scenario indices must be distinct")

    def __len__(self):
        return len(self.scenario_indices)

    def copy(self) -> "WorkingSet":
        return WorkingSet(list(self.scenario_indices), dict(self.row_ids))


@dataclass
class SolveReport:
    """One method run: solution, bookkeeping counters, and training stats."""

    method: str
    x: np.ndarray
    objective: float
    working_set: WorkingSet
    lp_solves: int
    mip_nodes: int
    wall_time: float
    train_violations: int
    seed: int | None = None
    status: str = STATUS_OK

    def __post_init__(self):
        if self.lp_solves < 0 or self.mip_nodes < 0:
            raise ValueError("solver counters must be non-negative")
