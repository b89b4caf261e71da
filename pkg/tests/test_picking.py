import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from ssca.correlation import jaccard_matrix
from ssca.datagen import GenConfig, generate_history
from ssca.model import Assignment, Location, MachineLayout, OrderHistory, PickerModel, PrescriptionOrder, StockoutError, StockState
from ssca.picking import (
    RouteGuardError,
    evaluate_order,
    one_way_time,
    route_machine,
    route_machine_exact,
    route_machine_greedy,
    simulate,
    split_order,
    write_order_results,
    write_summary,
)
from ssca.slotting import StrategyId, slot

LAYOUT = MachineLayout()
IO1, IO2 = LAYOUT.io_points
ZERO = PickerModel()


def assignment(*machines):
    """Each machine is a {drug: [(row, col), ...]} dict, stored on side 1."""
    return Assignment(tuple({Location(1, r, c): k for k, cells in m.items() for r, c in cells} for m in machines))


def order(*drugs, q=1, dose=1):
    return PrescriptionOrder(q, tuple((k, dose) for k in drugs))


def rt(io, cell):
    return 2 * one_way_time(io, Location(1, *cell), LAYOUT)


# --- single-machine routing ------------------------------------------------

def test_one_drug_is_one_round_trip():
    a = assignment({1: [(2, 3)]})
    route = route_machine_exact([(1, 1)], 1, a, StockState.filled(a), PickerModel(10, 2), LAYOUT)
    assert route.expected_time == rt(IO1, (2, 3))
    assert len(route.legs) == 1


def test_two_drugs_are_two_round_trips_without_picker():
    a = assignment({1: [(2, 3)], 2: [(9, 16)]})
    route = route_machine_exact([(1, 1), (2, 1)], 1, a, StockState.filled(a), ZERO, LAYOUT)
    want = min(rt(IO1, (2, 3)) + rt(IO2, (9, 16)), rt(IO1, (9, 16)) + rt(IO2, (2, 3)))
    assert route.expected_time == pytest.approx(want, abs=1e-12)


def test_two_drugs_second_trip_overlaps_sorting():
    a = assignment({1: [(8, 7)], 2: [(9, 7)]})
    route = route_machine_exact([(1, 1), (2, 1)], 1, a, StockState.filled(a), PickerModel(20, 0), LAYOUT)
    # the second fetch hides behind the 20 s sort of the first drug
    assert route.expected_time == pytest.approx(rt(IO1, (8, 7)) + 20)


def test_three_drugs_match_brute_force():
    cells = {1: [(1, 1), (5, 12)], 2: [(9, 2)], 3: [(3, 16), (7, 7)]}
    a = assignment(cells)
    for picker in (ZERO, PickerModel(10, 2), PickerModel(5, 5)):
        route = route_machine_exact([(1, 1), (2, 1), (3, 1)], 1, a, StockState.filled(a), picker, LAYOUT)
        want = oracles.brute_force_route([cells[k] for k in (1, 2, 3)], picker.mu, picker.sigma)
        assert route.expected_time == pytest.approx(want, abs=1e-9)


def test_visits_alternate_io_points():
    cells = {k: [(k, 2 * k)] for k in range(1, 6)}
    a = assignment(cells)
    route = route_machine_exact([(k, 1) for k in cells], 1, a, StockState.filled(a), ZERO, LAYOUT)
    assert [leg.io for leg in route.legs if leg.kind != "return"] == [1, 2, 1, 2, 1]
    assert len(route.io_sequences[1]) == 3 and len(route.io_sequences[2]) == 2


def test_exact_guard_points_to_greedy():
    cells = {k: [(1 + k % 9, 1 + k)] for k in range(1, 9)}
    a = assignment(cells)
    lines = [(k, 1) for k in cells]
    with pytest.raises(RouteGuardError, match="greedy"):
        route_machine_exact(lines, 1, a, StockState.filled(a), ZERO, LAYOUT)
    route = route_machine(lines, 1, a, StockState.filled(a), ZERO, LAYOUT)
    assert sorted(k for k, _ in route.visits) == list(cells)


def test_greedy_equals_exact_for_one_drug():
    a = assignment({1: [(4, 4), (6, 9)]})
    s = StockState.filled(a)
    ex = route_machine_exact([(1, 1)], 1, a, s, ZERO, LAYOUT)
    gr = route_machine_greedy([(1, 1)], 1, a, s, ZERO, LAYOUT)
    assert gr.expected_time == ex.expected_time


def test_greedy_skips_understocked_bin():
    a = assignment({1: [(8, 7), (2, 2)]})
    stock = StockState({(1, Location(1, 8, 7)): 1, (1, Location(1, 2, 2)): 5})
    route = route_machine_greedy([(1, 3)], 1, a, stock, ZERO, LAYOUT)
    assert route.visits == ((1, Location(1, 2, 2)),)


def test_missing_stock_raises_naming_drug():
    a = assignment({1: [(8, 7)]})
    with pytest.raises(StockoutError, match="drug 1"):
        route_machine_exact([(1, 9)], 1, a, StockState.filled(a, 2), ZERO, LAYOUT)


cell_st = st.tuples(st.integers(1, 9), st.integers(1, 16)).filter(lambda c: c not in oracles.IO)


@st.composite
def route_instances(draw):
    n = draw(st.integers(1, 4))
    cells = draw(st.lists(cell_st, min_size=n, max_size=3 * n, unique=True))
    cands = {k: [] for k in range(1, n + 1)}
    for i, c in enumerate(cells):
        cands[1 + (i % n)].append(c)
    mu = draw(st.sampled_from([0.0, 5.0, 10.0, 15.0]))
    sigma = draw(st.sampled_from([0.0, 2.0, 5.0])) if mu else 0.0
    return cands, PickerModel(mu, sigma)


@given(route_instances())
def test_exact_route_property(inst):
    cands, picker = inst
    a = assignment(cands)
    s = StockState.filled(a)
    lines = [(k, 1) for k in cands]
    ex = route_machine_exact(lines, 1, a, s, picker, LAYOUT)
    gr = route_machine_greedy(lines, 1, a, s, picker, LAYOUT)
    want = oracles.brute_force_route([cands[k] for k in cands], picker.mu, picker.sigma)
    assert ex.expected_time == pytest.approx(want, abs=1e-9)
    assert gr.expected_time >= ex.expected_time - 1e-9
    assert sum(leg.cost for leg in ex.legs) == pytest.approx(ex.expected_time)


def test_extra_sort_adds_mean_per_drug():
    a = assignment({1: [(3, 3)], 2: [(5, 5)]})
    s = StockState.filled(a)
    lines = [(1, 1), (2, 1)]
    base = route_machine_exact(lines, 1, a, s, PickerModel(7, 0), LAYOUT)
    more = route_machine_exact(lines, 1, a, s, PickerModel(7, 0), LAYOUT, extra_sort=True)
    assert more.expected_time == pytest.approx(base.expected_time + 14)


# --- splitting and penalties -----------------------------------------------

def test_all_on_one_machine():
    a = assignment({1: [(2, 2)], 2: [(3, 3)]}, {1: [(4, 4)]})
    assert split_order(order(1, 2), a, StockState.filled(a)).machine_count == 1


def test_forced_split():
    a = assignment({1: [(2, 2)]}, {2: [(3, 3)]})
    plan = split_order(order(1, 2), a, StockState.filled(a))
    assert plan.machine_count == 2
    assert plan.machine_of(1) == 1 and plan.machine_of(2) == 2


def test_shared_machine_wins():
    a = assignment({1: [(2, 2)]}, {1: [(5, 5)], 2: [(3, 3)]}, {2: [(4, 4)]})
    plan = split_order(order(1, 2), a, StockState.filled(a))
    assert plan.machines == (2,)


def test_split_respects_stock():
    a = assignment({1: [(2, 2)], 2: [(2, 3)]}, {1: [(5, 5)]})
    stock = StockState.filled(a)
    stock.take(1, Location(1, 2, 2), 50)
    plan = split_order(order(1, 2), a, stock)
    assert plan.machine_of(1) == 2 and plan.machine_count == 2


def test_unstocked_drug_is_a_stockout():
    a = assignment({1: [(2, 2)]})
    with pytest.raises(StockoutError, match="drug 2"):
        split_order(order(1, 2), a, StockState.filled(a))


def test_single_machine_order_has_no_penalty():
    a = assignment({1: [(2, 2)], 2: [(3, 3)]})
    rec = evaluate_order(order(1, 2), a, StockState.filled(a), ZERO, 60.0)
    assert rec.penalized_time == rec.expected_time


@pytest.mark.parametrize("penalty", [60.0, 0.0])
def test_split_order_penalty(penalty):
    a = assignment({1: [(2, 2)]}, {2: [(3, 3)]})
    rec = evaluate_order(order(1, 2), a, StockState.filled(a), ZERO, penalty)
    routes = oracles.sequence_time([(2, 2)], 0, 0) + oracles.sequence_time([(3, 3)], 0, 0)
    assert rec.expected_time == pytest.approx(routes)
    assert rec.penalized_time == pytest.approx(routes + penalty)


@st.composite
def split_instances(draw):
    R = draw(st.integers(1, 4))
    Kq = draw(st.integers(1, 5))
    stocked = {k: draw(st.sets(st.integers(1, R), min_size=1)) for k in range(1, Kq + 1)}
    return R, stocked


@given(split_instances())
def test_split_is_minimal(inst):
    R, stocked = inst
    machines = [{k: [(1 + k, 1 + r)] for k, rs in stocked.items() if r in rs} for r in range(1, R + 1)]
    a = assignment(*machines)
    plan = split_order(order(*stocked), a, StockState.filled(a))
    assert plan.machine_count == oracles.min_machine_count(stocked, R)
    assert all(plan.machine_of(k) in stocked[k] for k in stocked)


# --- streams -----------------------------------------------------------------

def test_empty_stream():
    a = assignment({1: [(2, 2)]})
    m = simulate([], a)
    assert m.order_count == 0
    assert m.avg_pick_time is None and m.cross_machine_probability is None
    assert m.summary()["order_count"] == 0


def test_one_single_drug_order():
    a = assignment({1: [(2, 2)]})
    m = simulate([order(1)], a, picker=PickerModel(10, 5))
    assert m.avg_pick_time == pytest.approx(rt(IO1, (2, 2)))
    assert m.cross_machine_probability == 0


def test_stockouts_are_counted_and_skipped():
    a = assignment({1: [(2, 2)]})
    m = simulate([order(1, q=1, dose=3), order(1, q=2, dose=3)], a, stock=4)
    assert m.stockouts == 1 and m.order_count == 1


@given(st.lists(st.tuples(st.sets(st.integers(1, 6), min_size=1, max_size=4), st.integers(1, 5)), max_size=25))
def test_stock_is_conserved(spec):
    a = assignment({1: [(2, 2)], 2: [(2, 3)], 3: [(4, 4)]}, {3: [(3, 3)], 4: [(5, 5)], 5: [(6, 6)], 6: [(7, 7), (1, 1)]},
                   {1: [(9, 9)], 6: [(3, 8)]})
    orders = [PrescriptionOrder(q, tuple((k, d) for k in drugs)) for q, (drugs, d) in enumerate(spec, 1)]
    stock = StockState.filled(a, 12)
    before = stock.total()
    m = simulate(orders, a, stock=stock)
    done = {r.order_id for r in m.fulfilled}
    assert before - stock.total() == sum(sum(d for _, d in o.lines) for o in orders if o.order_id in done)
    assert m.order_count + m.stockouts == len(orders)


def test_scattered_clustered_splits_no_more_than_frequency():
    cat, hist = generate_history(GenConfig(drugs=60, orders=100, cliques=10, seed=4))
    S = jaccard_matrix(hist, cat.K)
    fa = simulate(hist, slot(StrategyId.FA, cat, S, 3))
    ssca = simulate(hist, slot(StrategyId.SSCA, cat, S, 3))
    assert ssca.cross_machine_probability <= fa.cross_machine_probability


def test_result_files(tmp_path):
    a = assignment({1: [(2, 2)]}, {2: [(3, 3)]})
    m = simulate(OrderHistory((order(1, 2, q=7), order(1, q=8))), a)
    write_order_results(m, tmp_path / "o.csv")
    write_summary(m.summary(strategy="FA"), tmp_path / "s.json")
    rows = list(csv.DictReader(open(tmp_path / "o.csv")))
    assert list(rows[0]) == ["order_id", "machine_count", "expected_time_s", "penalized_time_s", "stockout_flag"]
    assert [r["machine_count"] for r in rows] == ["2", "1"]
    summary = json.load(open(tmp_path / "s.json"))
    assert summary["order_count"] == 2 and summary["cross_machine_probability"] == 0.5
    assert np.isclose(summary["avg_pick_time"], m.avg_pick_time)
