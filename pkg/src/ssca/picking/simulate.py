"""Order splitting across machines and order-stream simulation."""

from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..model import (
    Assignment,
    MachineLayout,
    OrderHistory,
    PickerModel,
    PrescriptionOrder,
    StockoutError,
    StockState,
)
from .routing import EXACT_MAX_DRUGS, MachineRoute, exact_route, feasible_locations, greedy_route
from .travel import nearest_io_time

log = logging.getLogger(__name__)

MAX_SPLIT_CANDIDATES = 256
DEFAULT_FILL = 50
DEFAULT_PENALTY = 60.0


@dataclass(frozen=True)
class SplitPlan:
    order_id: int
    sub_orders: dict[int, tuple[tuple[int, int], ...]]  # machine -> ((drug, dosage), ...)
    routes: dict[int, MachineRoute] = field(default_factory=dict, compare=False)

    @property
    def machine_count(self) -> int:
        return len(self.sub_orders)

    @property
    def machines(self) -> tuple[int, ...]:
        return tuple(sorted(self.sub_orders))

    def machine_of(self, drug_id: int) -> int:
        for r, lines in self.sub_orders.items():
            if any(k == drug_id for k, _ in lines):
                return r
        raise KeyError(drug_id)

    @property
    def expected_time(self) -> float:
        return sum(self.routes[r].expected_time for r in self.machines)


def stocking_machines(order: PrescriptionOrder, assignment: Assignment, stock: StockState) -> dict[int, list[int]]:
    """Machines able to serve each line of ``order`` from a single bin."""
    out = {}
    for k, a in order.lines:
        rs = [r for r in assignment.machines_of(k) if any(stock[(r, loc)] >= a for loc in assignment.locations_of(k, r))]
        if not rs:
            raise StockoutError(k)
        out[k] = rs
    return out


def minimal_machine_sets(options: dict[int, list[int]]) -> list[tuple[int, ...]]:
    """All smallest machine sets covering every drug, in lexicographic order."""
    pool = sorted({r for rs in options.values() for r in rs})
    for size in range(1, len(pool) + 1):
        found = [c for c in itertools.combinations(pool, size) if all(set(rs) & set(c) for rs in options.values())]
        if found:
            return found
    return []


class _RouteMemo:
    """Caches routes per (machine, sub-order).

    A route depends on the drugs and their usable locations only, so the
    shared cache (which outlives one order) keys on those rather than on
    dosages.
    """

    def __init__(self, assignment, stock, picker, layout, extra_sort, exact, cache=None):
        self.args = (assignment, stock, picker, layout, extra_sort)
        self.fn = exact_route if exact else greedy_route
        self.local: dict = {}
        self.shared = {} if cache is None else cache

    def __call__(self, machine: int, lines: tuple[tuple[int, int], ...]) -> MachineRoute:
        key = (machine, lines)
        hit = self.local.get(key)
        if hit is not None:
            return hit
        assignment, stock, picker, layout, extra_sort = self.args
        cands = feasible_locations(lines, machine, assignment, stock)
        drugs = tuple(k for k, _ in lines)
        shared_key = (self.fn.__name__, machine, drugs, tuple(map(tuple, cands)))
        hit = self.shared.get(shared_key)
        if hit is None:
            hit = self.fn(drugs, cands, machine, picker, layout, extra_sort)
            self.shared[shared_key] = hit
        self.local[key] = hit
        return hit


def split_order(
    order: PrescriptionOrder,
    assignment: Assignment,
    stock: StockState,
    picker: PickerModel | None = None,
    layout: MachineLayout | None = None,
    extra_sort: bool = False,
    route_cache: dict | None = None,
) -> SplitPlan:
    """Spread an order over the fewest machines, then over the quickest routes.

    Machine sets are enumerated by increasing size; among the smallest
    feasible sets every drug-to-machine map is priced by routing each
    machine's share. Ties go to the smaller machine-id set, then to the first
    map enumerated. When a set allows more than ``MAX_SPLIT_CANDIDATES`` maps,
    flexible drugs go to the machine with their quickest bin instead.

    Routes are exact when every candidate share fits the exact router's size
    guard and greedy for all candidates otherwise.
    """
    picker = picker or PickerModel()
    layout = layout or MachineLayout()
    options = stocking_machines(order, assignment, stock)
    dosage = dict(order.lines)
    candidates = []
    for subset in minimal_machine_sets(options):
        choices = [[r for r in options[k] if r in subset] for k in order.drugs]
        n_maps = 1
        for c in choices:
            n_maps *= len(c)
        if n_maps > MAX_SPLIT_CANDIDATES:
            maps = [_nearest_map(order, choices, assignment, stock, layout)]
        else:
            maps = itertools.product(*choices)
        for machines in maps:
            subs: dict[int, list[tuple[int, int]]] = {}
            for k, r in zip(order.drugs, machines):
                subs.setdefault(r, []).append((k, dosage[k]))
            if len(subs) == len(subset):
                candidates.append({r: tuple(v) for r, v in sorted(subs.items())})
    exact = all(len(v) <= EXACT_MAX_DRUGS for subs in candidates for v in subs.values())
    route = _RouteMemo(assignment, stock, picker, layout, extra_sort, exact, route_cache)
    best = None
    for subs in candidates:
        routes = {r: route(r, lines) for r, lines in subs.items()}
        total = sum(routes[r].expected_time for r in routes)
        if best is None or total < best[0]:
            best = (total, subs, routes)
    _, subs, routes = best
    return SplitPlan(order.order_id, subs, routes)


def _nearest_map(order, choices, assignment, stock, layout) -> tuple[int, ...]:
    out = []
    for (k, a), rs in zip(order.lines, choices):
        def quickest(r):
            return min(nearest_io_time(loc, layout) for loc in assignment.locations_of(k, r) if stock[(r, loc)] >= a)
        out.append(min(rs, key=lambda r: (quickest(r), r)))
    return tuple(out)


@dataclass(frozen=True)
class OrderRecord:
    order_id: int
    size: int
    machine_count: int
    expected_time: float
    penalized_time: float
    stockout: bool = False
    plan: SplitPlan | None = field(default=None, compare=False, repr=False)


def evaluate_order(
    order: PrescriptionOrder,
    assignment: Assignment,
    stock: StockState,
    picker: PickerModel | None = None,
    cross_penalty: float = DEFAULT_PENALTY,
    layout: MachineLayout | None = None,
    extra_sort: bool = False,
    route_cache: dict | None = None,
) -> OrderRecord:
    """Split, route and pick one order, drawing its dosages from ``stock``.

    The consolidation penalty is charged once for any order picked on two or
    more machines.
    """
    plan = split_order(order, assignment, stock, picker, layout, extra_sort, route_cache)
    travel = 0.0
    for r in plan.machines:
        route = plan.routes[r]
        travel += route.expected_time
        lines = dict(plan.sub_orders[r])
        for k, loc in route.visits:
            stock.take(r, loc, lines[k])
    total = travel + (cross_penalty if plan.machine_count >= 2 else 0.0)
    return OrderRecord(order.order_id, order.size, plan.machine_count, travel, total, False, plan)


@dataclass
class EvalMetrics:
    records: list[OrderRecord]

    @property
    def fulfilled(self) -> list[OrderRecord]:
        return [r for r in self.records if not r.stockout]

    @property
    def order_count(self) -> int:
        return len(self.fulfilled)

    @property
    def stockouts(self) -> int:
        return sum(r.stockout for r in self.records)

    @property
    def avg_pick_time(self) -> float | None:
        done = self.fulfilled
        return sum(r.penalized_time for r in done) / len(done) if done else None

    @property
    def cross_machine_probability(self) -> float | None:
        done = self.fulfilled
        return sum(r.machine_count >= 2 for r in done) / len(done) if done else None

    def bucket(self, lo: int, hi: int | None) -> "EvalMetrics":
        """Records whose order size lies in ``[lo, hi]`` (``hi=None`` is unbounded)."""
        return EvalMetrics([r for r in self.records if r.size >= lo and (hi is None or r.size <= hi)])

    def summary(self, **params) -> dict:
        return {
            **params,
            "avg_pick_time": self.avg_pick_time,
            "cross_machine_probability": self.cross_machine_probability,
            "order_count": self.order_count,
            "stockouts": self.stockouts,
        }


def simulate(
    orders: Iterable[PrescriptionOrder] | OrderHistory,
    assignment: Assignment,
    layout: MachineLayout | None = None,
    picker: PickerModel | None = None,
    cross_penalty: float = DEFAULT_PENALTY,
    stock: StockState | int = DEFAULT_FILL,
    extra_sort: bool = False,
    keep_plans: bool = False,
) -> EvalMetrics:
    """Pick orders one at a time in arrival order.

    ``stock`` is either a StockState (consumed in place) or a fill level
    applied to every occupied bin. Orders hitting a stockout are recorded and
    skipped.
    """
    layout = layout or MachineLayout()
    picker = picker or PickerModel()
    if not isinstance(stock, StockState):
        stock = StockState.filled(assignment, int(stock))
    cache: dict = {}
    records = []
    for order in orders:
        try:
            rec = evaluate_order(order, assignment, stock, picker, cross_penalty, layout, extra_sort, cache)
        except StockoutError as exc:
            log.debug("order %s skipped: %s", order.order_id, exc)
            records.append(OrderRecord(order.order_id, order.size, 0, 0.0, 0.0, True))
            continue
        if not keep_plans:
            rec = OrderRecord(rec.order_id, rec.size, rec.machine_count, rec.expected_time, rec.penalized_time)
        records.append(rec)
    return EvalMetrics(records)


ORDER_COLUMNS = ["order_id", "machine_count", "expected_time_s", "penalized_time_s", "stockout_flag"]


def write_order_results(metrics: EvalMetrics, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORDER_COLUMNS)
        for r in metrics.records:
            w.writerow([r.order_id, r.machine_count, f"{r.expected_time:.6f}", f"{r.penalized_time:.6f}", int(r.stockout)])


def write_summary(summary: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
