"""Stage II: placing one machine's drugs into its storage locations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..model import CapacityError, DrugCatalog, Location, MachineLayout
from ..picking.travel import nearest_io_time


@dataclass(frozen=True)
class SAParams:
    cluster_capacity: int = 3  # drug types per cluster
    threshold: float = 0.01    # minimum similarity for chaining

    def __post_init__(self):
        if self.cluster_capacity < 1:
            raise ValueError("cluster capacity must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("similarity threshold must lie in [0, 1]")


def sorted_locations(layout: MachineLayout) -> list[Location]:
    """Storage locations by ascending one-way time to the nearer I/O point.

    Ties fall back to (row, col, side), so the two faces of one rack cell are
    consumed together.
    """
    locs = layout.storage_locations()
    return sorted(locs, key=lambda l: (nearest_io_time(l, layout), l.row, l.col, l.side))


def frequency_sequence(drugs: Mapping[int, int], catalog: DrugCatalog) -> list[int]:
    return sorted(drugs, key=lambda k: (-catalog[k].per_bin_frequency, k))


def sa_sequence(drugs: Mapping[int, int], S: np.ndarray, catalog: DrugCatalog, params: SAParams) -> list[int]:
    """Drug placement order of the sequential alternating heuristic.

    Each cluster is seeded with the remaining drug of highest per-bin
    frequency. The cluster then chains: the next drug is the remaining one
    most similar to the drug placed last, provided that similarity reaches the
    threshold (ties: higher per-bin frequency, then lower id); otherwise the
    remaining drug of highest per-bin frequency joins. A cluster closes after
    ``cluster_capacity`` drugs.
    """
    remaining = frequency_sequence(drugs, catalog)
    eta = {k: catalog[k].per_bin_frequency for k in remaining}
    out: list[int] = []
    while remaining:
        anchor = remaining.pop(0)
        out.append(anchor)
        room = params.cluster_capacity - 1
        while room > 0 and remaining:
            sims = S[anchor - 1, [k - 1 for k in remaining]]
            top = sims.max()
            if top >= params.threshold and top > 0:
                tied = [k for k, v in zip(remaining, sims) if v == top]
                nxt = min(tied, key=lambda k: (-eta[k], k))
            else:
                nxt = remaining[0]
            remaining.remove(nxt)
            out.append(nxt)
            anchor = nxt
            room -= 1
    return out


def _fill(order: list[int], drugs: Mapping[int, int], layout: MachineLayout) -> dict[Location, int]:
    slots = sorted_locations(layout)
    needed = sum(drugs[k] for k in order)
    if needed > len(slots):
        raise CapacityError(f"{needed} bins do not fit into {len(slots)} storage locations")
    out: dict[Location, int] = {}
    pos = 0
    for k in order:
        for _ in range(drugs[k]):
            out[slots[pos]] = k
            pos += 1
    return out


def locate_frequency(drugs: Mapping[int, int], catalog: DrugCatalog, layout: MachineLayout) -> dict[Location, int]:
    """Assign bins in descending per-bin frequency to the quickest free locations.

    ``drugs`` maps drug id to the number of bins it holds on this machine.
    """
    return _fill(frequency_sequence(drugs, catalog), drugs, layout)


def locate_sa(
    drugs: Mapping[int, int],
    S: np.ndarray,
    catalog: DrugCatalog,
    layout: MachineLayout,
    params: SAParams,
) -> dict[Location, int]:
    return _fill(sa_sequence(drugs, S, catalog, params), drugs, layout)
