"""The four slotting strategies as compositions of a grouping and a locating stage.

=====  ==================  ===================
name   grouping            locating
=====  ==================  ===================
FA     dedicated           frequency
ICA    dedicated           clustered (SA)
SSFA   scattered           frequency
SSCA   scattered           clustered (SA)
=====  ==================  ===================
"""

from __future__ import annotations

import csv
from enum import Enum
from pathlib import Path

import numpy as np

from ..model import Assignment, DrugCatalog, Grouping, IngestionError, Location, MachineLayout
from .grouping import group_dedicated, group_scattered_heuristic
from .locating import SAParams, locate_frequency, locate_sa


class StrategyId(str, Enum):
    FA = "FA"
    ICA = "ICA"
    SSFA = "SSFA"
    SSCA = "SSCA"

    @property
    def scattered(self) -> bool:
        return self in (StrategyId.SSFA, StrategyId.SSCA)

    @property
    def clustered(self) -> bool:
        return self in (StrategyId.ICA, StrategyId.SSCA)

    def __str__(self) -> str:
        return self.value


def group(strategy: StrategyId, catalog: DrugCatalog, S: np.ndarray, R: int, Q: int, seed: int = 0) -> Grouping:
    strategy = StrategyId(strategy)
    if strategy.scattered:
        return group_scattered_heuristic(catalog, S, R, Q, seed=seed)
    return group_dedicated(catalog, S, R, Q, seed=seed)


def locate(
    strategy: StrategyId,
    grouping: Grouping,
    catalog: DrugCatalog,
    S: np.ndarray,
    layout: MachineLayout,
    params: SAParams,
) -> Assignment:
    strategy = StrategyId(strategy)
    machines = []
    for r in range(1, grouping.R + 1):
        drugs = grouping.machine_bins(r)
        if strategy.clustered:
            machines.append(locate_sa(drugs, S, catalog, layout, params))
        else:
            machines.append(locate_frequency(drugs, catalog, layout))
    return Assignment(tuple(machines), K=catalog.K)


def slot(
    strategy: StrategyId,
    catalog: DrugCatalog,
    S: np.ndarray,
    R: int,
    layout: MachineLayout | None = None,
    params: SAParams | None = None,
    seed: int = 0,
) -> Assignment:
    """Run both stages of ``strategy`` and return the fleet-wide assignment."""
    layout = layout or MachineLayout()
    params = params or SAParams()
    grouping = group(strategy, catalog, S, R, layout.Q, seed=seed)
    return locate(strategy, grouping, catalog, S, layout, params)


ASSIGNMENT_COLUMNS = ["machine", "side", "row", "col", "drug_id"]


def write_assignment(assignment: Assignment, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ASSIGNMENT_COLUMNS)
        w.writerows(assignment.rows())


def read_assignment(path: str | Path, R: int | None = None, K: int | None = None) -> Assignment:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ASSIGNMENT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
        machines: dict[int, dict[Location, int]] = {}
        for line, row in enumerate(reader, start=2):
            try:
                r = int(row["machine"])
                loc = Location(int(row["side"]), int(row["row"]), int(row["col"]))
                k = int(row["drug_id"])
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"{path}:{line}: {exc}") from None
            slot_map = machines.setdefault(r, {})
            if loc in slot_map:
                raise IngestionError(f"{path}:{line}: location {tuple(loc)} on machine {r} assigned twice")
            slot_map[loc] = k
    count = R or max(machines, default=0)
    return Assignment(tuple(machines.get(r, {}) for r in range(1, count + 1)), K=K)
