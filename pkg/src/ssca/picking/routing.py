"""Per-machine pick routes with the crane alternating between two I/O points.

Visit ``v`` (1-based) of a sub-order is presented at I/O point 1 when ``v``
is odd and at I/O point 2 when even, so the odd visits form one chain and the
even visits another. The timeline of an ``n``-drug route is

* fetch of visit 1 (round trip from I/O 1), not overlapped;
* fetch of visit 2 (round trip from I/O 2), overlapped with the first sort;
* for ``v >= 3`` a dual-command trip at visit v's I/O point that puts back
  visit ``v - 2`` and brings visit ``v``, overlapped with a sort;
* when ``n >= 3``, the round trip putting back visit ``n - 1`` (overlapped)
  and the one putting back visit ``n`` (not overlapped).

An overlapped leg of travel time ``t`` costs E[max(X, t)]; the rest cost
``t``. A single-drug route is just its fetch and a two-drug route has no
put-back trips.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..model import Assignment, Location, MachineLayout, PickerModel, SlottingError, StockoutError, StockState
from .travel import cell, expected_max_sort, expected_max_sort_array, travel_rows, travel_table

EXACT_MAX_DRUGS = 7


class RouteGuardError(SlottingError):
    pass


@dataclass(frozen=True)
class Leg:
    kind: str          # "fetch", "dual" or "return"
    io: int            # 1 or 2
    start: Location    # first storage location visited on the trip
    end: Location      # last storage location visited on the trip
    travel: float
    overlapped: bool
    cost: float


@dataclass(frozen=True)
class MachineRoute:
    machine: int
    visits: tuple[tuple[int, Location], ...]  # (drug, location) in visit order
    legs: tuple[Leg, ...]
    expected_time: float

    @property
    def io_sequences(self) -> dict[int, list[Location]]:
        return {p: [loc for v, (_, loc) in enumerate(self.visits) if v % 2 == p - 1] for p in (1, 2)}


def route_legs(locations: Sequence[Location], layout: MachineLayout) -> list[tuple[str, int, Location, Location, float, bool]]:
    """Robot trips for visiting ``locations`` in order: (kind, io, start, end, travel, overlapped)."""
    n = len(locations)
    T = travel_rows(layout)
    io = [cell(p, layout) for p in layout.io_points]
    cells = [cell(loc, layout) for loc in locations]
    out = []

    def rt(p: int, c: int) -> float:
        return T[io[p - 1]][c] + T[c][io[p - 1]]

    for v, loc in enumerate(locations, start=1):
        p = 1 if v % 2 else 2
        c = cells[v - 1]
        if v <= 2:
            out.append(("fetch", p, loc, loc, rt(p, c), v == 2))
        else:
            prev = cells[v - 3]
            t = T[io[p - 1]][prev] + T[prev][c] + T[c][io[p - 1]]
            out.append(("dual", p, locations[v - 3], loc, t, True))
    if n >= 3:
        for v, overlapped in ((n - 1, True), (n, False)):
            p = 1 if v % 2 else 2
            loc = locations[v - 1]
            out.append(("return", p, loc, loc, rt(p, cells[v - 1]), overlapped))
    return out


def route_time(
    visits: Sequence[tuple[int, Location]],
    machine: int,
    layout: MachineLayout,
    picker: PickerModel,
    extra_sort: bool = False,
) -> MachineRoute:
    """Evaluate a fixed visit sequence. ``extra_sort`` adds the mean sort time once per drug."""
    legs = []
    total = 0.0
    for kind, p, a, b, t, overlapped in route_legs([loc for _, loc in visits], layout):
        cost = expected_max_sort(t, picker) if overlapped else t
        legs.append(Leg(kind, p, a, b, t, overlapped, cost))
        total += cost
    if extra_sort:
        total += picker.mu * len(visits)
    return MachineRoute(machine, tuple(visits), tuple(legs), total)


def feasible_locations(
    sub_order: Sequence[tuple[int, int]],
    machine: int,
    assignment: Assignment,
    stock: StockState,
) -> list[list[Location]]:
    """Per drug, the stocked locations on ``machine`` that cover the dosage.

    Locations on opposite faces of one rack cell are equivalent for travel, so
    only the first (in canonical order) is kept.
    """
    out = []
    for k, a in sub_order:
        seen = set()
        locs = []
        for loc in assignment.locations_of(k, machine):
            if stock[(machine, loc)] >= a and (loc.row, loc.col) not in seen:
                seen.add((loc.row, loc.col))
                locs.append(loc)
        if not locs:
            raise StockoutError(k, f"drug {k} has no bin on machine {machine} holding {a} units")
        out.append(locs)
    return out


def _undominated(cells: list[np.ndarray], anchors: list[int], table: np.ndarray) -> list[np.ndarray]:
    """Indices of each drug's candidates that no sibling candidate dominates.

    Candidate ``l`` is dropped when some other candidate of the same drug is no
    farther from every I/O point and every other drug's candidate, and either
    strictly closer somewhere or earlier in order. Every leg cost is monotone
    in those distances, so some optimal route survives.
    """
    if all(len(c) == 1 for c in cells):
        return [np.zeros(1, dtype=np.int64)] * len(cells)
    out = []
    for i, c in enumerate(cells):
        if len(c) == 1:
            out.append(np.zeros(1, dtype=np.int64))
            continue
        others = np.concatenate([anchors] + [x for j, x in enumerate(cells) if j != i])
        d = table[c][:, others]                                  # (m, X)
        le = (d[:, None, :] <= d[None, :, :]).all(axis=2)         # le[a, b]: a no farther than b
        strict = le & ~le.T
        order = np.arange(len(c))
        tie = le & le.T & (order[:, None] < order[None, :])
        dominated = (strict | tie).any(axis=0)
        out.append(np.flatnonzero(~dominated))
    return out


class _Chain:
    """Held-Karp over the visits presented at one I/O point.

    Candidate locations of all drugs are flattened into nodes. ``dp[mask, v]``
    is the cheapest cost of a chain through the drug set ``mask`` ending at
    node ``v``, excluding the final put-back trip; unreachable states hold
    ``inf``.
    """

    def __init__(self, drug_of, cell_of, io_cell, table, over, first_overlapped, max_size):
        n = int(drug_of.max()) + 1
        N = len(drug_of)
        self.drug_of = drug_of
        ow = table[io_cell][cell_of]
        self.rt = ow + ow
        self.rt_over = over(self.rt)
        dp = np.full((1 << n, N), np.inf)
        bit = 1 << drug_of
        dp[bit, np.arange(N)] = self.rt_over if first_overlapped else self.rt
        self.step = None
        if max_size >= 2:
            # step[u, v]: dual trip putting back node u and bringing node v
            step = over(ow[:, None] + table[cell_of[:, None], cell_of[None, :]] + ow[None, :])
            step[drug_of[:, None] == drug_of[None, :]] = np.inf
            self.step = step
            into = step.T
            for size in range(2, max_size + 1):
                masks = _masks_of_size(n, size)
                prev = dp[masks[:, None] ^ bit[None, :]]            # (B, v, u)
                best = (prev + into[None]).min(axis=2)              # (B, v)
                inside = (masks[:, None] & bit[None, :]) != 0
                dp[masks] = np.where(inside, best, np.inf)
        self.dp = dp

    def close(self, masks: np.ndarray, ret: str | None) -> tuple[np.ndarray, np.ndarray]:
        """Per mask, the cheapest finished chain and its end node."""
        tail = 0.0 if ret is None else (self.rt_over if ret == "over" else self.rt)
        total = self.dp[masks] + tail
        end = total.argmin(axis=1)
        return total[np.arange(len(masks)), end], end

    def path(self, mask: int, end: int) -> list[int]:
        v = int(end)
        out = [v]
        while mask != 1 << int(self.drug_of[v]):
            mask ^= 1 << int(self.drug_of[v])
            v = int((self.dp[mask] + self.step[:, v]).argmin())
            out.append(v)
        return out[::-1]


@lru_cache(maxsize=None)
def _masks_of_size(n: int, size: int) -> np.ndarray:
    """Bitmasks of ``size``-subsets of range(n), in itertools.combinations order."""
    return np.array([sum(1 << i for i in c) for c in itertools.combinations(range(n), size)], dtype=np.int64)


def route_machine_exact(
    sub_order: Sequence[tuple[int, int]],
    machine: int,
    assignment: Assignment,
    stock: StockState,
    picker: PickerModel,
    layout: MachineLayout,
    extra_sort: bool = False,
) -> MachineRoute:
    """Minimum expected-time route for one machine's share of an order.

    Searches one stocked location per drug, the balanced split of drugs
    between the I/O points (the odd-sized extra goes to I/O 1) and the visit
    order at each point.
    """
    if len(sub_order) > EXACT_MAX_DRUGS:
        n = len(sub_order)
        raise RouteGuardError(f"exact routing handles at most {EXACT_MAX_DRUGS} drugs per machine, got {n}; use greedy")
    if not sub_order:
        raise ValueError("empty sub-order")
    cands = feasible_locations(sub_order, machine, assignment, stock)
    return exact_route([k for k, _ in sub_order], cands, machine, picker, layout, extra_sort)


def exact_route(
    drugs: Sequence[int],
    cands: Sequence[Sequence[Location]],
    machine: int,
    picker: PickerModel,
    layout: MachineLayout,
    extra_sort: bool = False,
) -> MachineRoute:
    """:func:`route_machine_exact` over precomputed candidate locations per drug."""
    n = len(drugs)
    size_a, size_b = (n + 1) // 2, n // 2
    ret_a = ret_b = None
    if n >= 3:
        # the chain holding the last visit ends with a non-overlapped put-back
        ret_a, ret_b = ("plain", "over") if n % 2 else ("over", "plain")
    table = travel_table(layout)
    io1, io2 = (cell(p, layout) for p in layout.io_points)
    cells = [np.array([cell(loc, layout) for loc in c]) for c in cands]
    keep = _undominated(cells, [io1, io2], table)
    cands = [[c[k] for k in kk] for c, kk in zip(cands, keep)]
    drug_of = np.concatenate([np.full(len(kk), i) for i, kk in enumerate(keep)])
    cell_of = np.concatenate([c[kk] for c, kk in zip(cells, keep)])
    loc_of = [loc for c in cands for loc in c]

    def over(t):
        return expected_max_sort_array(t, picker)

    chain_a = _Chain(drug_of, cell_of, io1, table, over, False, size_a)
    masks_a = _masks_of_size(n, size_a)
    cost, end_a = chain_a.close(masks_a, ret_a)
    end_b = None
    full = (1 << n) - 1
    if size_b:
        chain_b = _Chain(drug_of, cell_of, io2, table, over, True, size_b)
        cost_b, end_b = chain_b.close(full ^ masks_a, ret_b)
        cost = cost + cost_b
    pick = int(cost.argmin())
    mask_a = int(masks_a[pick])
    path_a = chain_a.path(mask_a, end_a[pick])
    path_b = chain_b.path(full ^ mask_a, end_b[pick]) if size_b else []
    visits = []
    for v in range(n):
        node = path_a[v // 2] if v % 2 == 0 else path_b[v // 2]
        visits.append((drugs[int(drug_of[node])], loc_of[node]))
    return route_time(visits, machine, layout, picker, extra_sort)


def route_machine_greedy(
    sub_order: Sequence[tuple[int, int]],
    machine: int,
    assignment: Assignment,
    stock: StockState,
    picker: PickerModel,
    layout: MachineLayout,
    extra_sort: bool = False,
) -> MachineRoute:
    """Nearest-neighbour insertion, alternating between the two I/O points.

    Each step serves the next visit's I/O point with the remaining drug and
    stocked location that make the cheapest trip from where that point's
    chain last stopped.
    """
    if not sub_order:
        raise ValueError("empty sub-order")
    cands = feasible_locations(sub_order, machine, assignment, stock)
    return greedy_route([k for k, _ in sub_order], cands, machine, picker, layout, extra_sort)


def greedy_route(
    drugs: Sequence[int],
    cands: Sequence[Sequence[Location]],
    machine: int,
    picker: PickerModel,
    layout: MachineLayout,
    extra_sort: bool = False,
) -> MachineRoute:
    """:func:`route_machine_greedy` over precomputed candidate locations per drug."""
    n = len(drugs)
    T = travel_rows(layout)
    io = [cell(p, layout) for p in layout.io_points]
    left = list(range(n))
    last: dict[int, int | None] = {1: None, 2: None}
    visits = []
    for v in range(1, n + 1):
        p = 1 if v % 2 else 2
        o = io[p - 1]
        prev = last[p]
        best = None
        for i in left:
            for loc in cands[i]:
                c = cell(loc, layout)
                if prev is None:
                    t = T[o][c] + T[c][o]
                else:
                    t = T[o][prev] + T[prev][c] + T[c][o]
                if best is None or t < best[0]:
                    best = (t, i, loc, c)
        _, i, loc, c = best
        left.remove(i)
        last[p] = c
        visits.append((drugs[i], loc))
    return route_time(visits, machine, layout, picker, extra_sort)


def route_machine(
    sub_order: Sequence[tuple[int, int]],
    machine: int,
    assignment: Assignment,
    stock: StockState,
    picker: PickerModel,
    layout: MachineLayout,
    extra_sort: bool = False,
) -> MachineRoute:
    """Exact routing within the size guard, greedy beyond it."""
    fn = route_machine_exact if len(sub_order) <= EXACT_MAX_DRUGS else route_machine_greedy
    return fn(sub_order, machine, assignment, stock, picker, layout, extra_sort)
