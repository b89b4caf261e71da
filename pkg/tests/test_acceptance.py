"""Acceptance criteria, one test each. Every test records a PASS/FAIL line that
is printed in the terminal summary; run ``pytest tests/test_acceptance.py -v``.
"""

import filecmp
import itertools
import time
from dataclasses import replace

import numpy as np
import pytest

import oracles
from ssca.cli import main
from ssca.correlation import jaccard_matrix
from ssca.datagen import GenConfig, generate_history, write_config
from ssca.experiment import ExperimentSpec, run_grid
from ssca.model import Assignment, DrugCatalog, Location, MachineLayout, PickerModel, PrescriptionOrder, StockState
from ssca.picking import evaluate_order, expected_max_sort, route_machine_exact, simulate, split_order
from ssca.slotting import StrategyId, group_scattered_exact, group_scattered_heuristic, grouping_violations, slot

LAYOUT = MachineLayout()
RESULTS: dict[int, str] = {}
STRATEGIES = [s.value for s in StrategyId]


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {detail}"
    print(RESULTS[n])


def free_cells(rng, count):
    cells = [(r, c) for r in range(1, 10) for c in range(1, 17) if (r, c) not in oracles.IO]
    return [cells[i] for i in rng.choice(len(cells), size=count, replace=False)]


def test_1_expected_max_matches_quadrature():
    start = time.perf_counter()
    worst = 0.0
    for mu in (0.0, 5.0, 10.0, 15.0):
        for sigma in (0.5, 2.0, 5.0):
            p = PickerModel(mu, sigma)
            for t in np.linspace(0.0, 60.0, 1000):
                worst = max(worst, abs(expected_max_sort(float(t), p) - oracles.quad_expected_max(float(t), mu, sigma)))
    exact = all(expected_max_sort(float(t), PickerModel(mu, 0.0)) == max(mu, float(t))
                for mu in (0.0, 5.0, 10.0, 15.0) for t in np.linspace(0.0, 60.0, 1000))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and exact and elapsed < 5
    record(1, ok, f"max |closed form - quadrature| = {worst:.2e} over 12,000 points (tol 1e-8); "
                  f"sigma=0 exact: {exact}; {elapsed:.2f} s (limit 5 s)")
    assert ok


def test_2_exact_routing_matches_brute_force():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, count = 0.0, 200
    for _ in range(count):
        n = int(rng.integers(1, 6))
        per_drug = rng.integers(1, 4, size=n)
        cells = free_cells(rng, int(per_drug.sum()))
        cands, pos = {}, 0
        for k in range(1, n + 1):
            cands[k] = cells[pos:pos + per_drug[k - 1]]
            pos += per_drug[k - 1]
        mu = float(rng.choice([0.0, 5.0, 10.0, 15.0]))
        sigma = float(rng.choice([0.0, 2.0, 5.0])) if mu else 0.0
        a = Assignment(({Location(int(rng.integers(1, 3)), r, c): k for k, cs in cands.items() for r, c in cs},))
        route = route_machine_exact([(k, 1) for k in cands], 1, a, StockState.filled(a), PickerModel(mu, sigma), LAYOUT)
        want = oracles.brute_force_route(list(cands.values()), mu, sigma)
        worst = max(worst, abs(route.expected_time - want))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 60
    record(2, ok, f"max |exact - brute force| = {worst:.2e} on {count} instances, n<=5, 1-3 bins (tol 1e-9); "
                  f"{elapsed:.1f} s (limit 60 s)")
    assert ok


def test_3_grouping_matches_exhaustive():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst, bad_heur, infeasible, ties = 0.0, 0, 0, 0
    count = 50
    for _ in range(count):
        K, R = int(rng.integers(2, 9)), int(rng.integers(1, 4))
        bins = rng.integers(1, 4, size=K).tolist()
        Q = int(rng.integers(-(-sum(bins) // R), sum(bins) + 1))
        S = np.triu(rng.random((K, K)) * (rng.random((K, K)) < 0.7), 1)
        S = S + S.T
        cat = DrugCatalog.from_bins(bins)
        value, pattern = oracles.exhaustive_grouping(S, bins, R, Q)
        exact = group_scattered_exact(cat, S, R, Q)
        heur = group_scattered_heuristic(cat, S, R, Q, seed=int(rng.integers(100)))
        worst = max(worst, abs(exact.objective_value - value))
        ties += pattern != [tuple(int(r) for r in np.flatnonzero(row)) for row in exact.bins]
        bad_heur += heur.objective_value > exact.objective_value + 1e-9
        infeasible += bool(grouping_violations(exact.bins, cat, Q)) + bool(grouping_violations(heur.bins, cat, Q))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and ties == 0 and bad_heur == 0 and infeasible == 0 and elapsed < 120
    record(3, ok, f"{count} instances K<=8, R<=3: max |exact - exhaustive| = {worst:.2e}, tie-break mismatches {ties}, "
                  f"heuristic above exact {bad_heur}, infeasible outputs {infeasible}; {elapsed:.1f} s (limit 120 s)")
    assert ok


def test_4_split_is_minimal():
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    wrong, count = 0, 200
    for q in range(count):
        R, Kq = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        stocked = {}
        for k in range(1, Kq + 1):
            size = int(rng.integers(1, R + 1))
            stocked[k] = {int(r) for r in rng.choice(np.arange(1, R + 1), size=size, replace=False)}
        machines = tuple({Location(1, k, r): k for k, rs in stocked.items() if r in rs} for r in range(1, R + 1))
        a = Assignment(machines)
        order = PrescriptionOrder(q, tuple((k, 1) for k in stocked))
        plan = split_order(order, a, StockState.filled(a))
        wrong += plan.machine_count != oracles.min_machine_count(stocked, R)
    elapsed = time.perf_counter() - start
    ok = wrong == 0 and elapsed < 30
    record(4, ok, f"{count} instances K_q<=5, R<=4: {wrong} non-minimal splits; {elapsed:.1f} s (limit 30 s)")
    assert ok


def test_5_picking_time_monotone_in_mu_and_sigma():
    cat, hist = generate_history(GenConfig(orders=1000, seed=21))
    S = jaccard_matrix(hist, cat.K)
    mus, sigmas = (0.0, 5.0, 10.0, 15.0), (0.0, 2.0, 5.0)
    violations = []
    for strategy in StrategyId:
        a = slot(strategy, cat, S, 3, seed=21)
        avg = {(m, s): simulate(hist, a, LAYOUT, PickerModel(m, s)).avg_pick_time for m in mus for s in sigmas}
        for s in sigmas:
            seq = [avg[(m, s)] for m in mus]
            violations += [(strategy.value, "mu", s)] if any(x > y for x, y in zip(seq, seq[1:])) else []
        for m in mus:
            seq = [avg[(m, s)] for s in sigmas]
            violations += [(strategy.value, "sigma", m)] if any(x > y for x, y in zip(seq, seq[1:])) else []
    ok = not violations
    record(5, ok, f"1,000 orders, 4 strategies x 4 mu x 3 sigma: {len(violations)} monotonicity violations "
                  f"(zero tolerance){' ' + str(violations) if violations else ''}")
    assert ok


@pytest.fixture(scope="module")
def strategy_runs():
    spec = ExperimentSpec(seeds=tuple(range(1, 21)), gen=GenConfig(drugs=100, orders=5000, co_draw=0.8), machines=3)
    start = time.perf_counter()
    rows, failures = run_grid(spec)
    elapsed = time.perf_counter() - start
    assert not failures
    table = {(r["seed"], r["strategy"]): r for r in rows if r["bucket"] == "all"}
    return spec.seeds, table, elapsed


def test_6_strategy_ordering(strategy_runs):
    seeds, table, elapsed = strategy_runs
    wins = sum(min(STRATEGIES, key=lambda s: table[(seed, s)]["avg_time"]) == "SSCA" for seed in seeds)
    mean = {s: np.mean([table[(seed, s)]["avg_time"] for seed in seeds]) for s in STRATEGIES}
    margin = (mean["FA"] - mean["SSCA"]) / mean["FA"]
    ok = wins >= 0.8 * len(seeds) and margin >= 0.02 and elapsed < 600
    means = ", ".join(f"{s} {mean[s]:.2f}" for s in STRATEGIES)
    record(6, ok, f"SSCA lowest in {wins}/{len(seeds)} seeds (need >= {int(0.8 * len(seeds))}); "
                  f"mean(SSCA) below mean(FA) by {100 * margin:.1f}% (need >= 2%); means {means} s; "
                  f"{elapsed:.0f} s (limit 600 s)")
    assert ok


def test_7_cross_machine_probability(strategy_runs):
    seeds, table, _ = strategy_runs
    good = sum(max(table[(seed, s)]["cross_prob"] for s in ("SSCA", "SSFA"))
               <= min(table[(seed, s)]["cross_prob"] for s in ("FA", "ICA")) for seed in seeds)
    mean = {s: np.mean([table[(seed, s)]["cross_prob"] for seed in seeds]) for s in STRATEGIES}
    ok = good >= 0.8 * len(seeds)
    record(7, ok, f"SSCA and SSFA at or below FA and ICA in {good}/{len(seeds)} seeds (need >= {int(0.8 * len(seeds))}); "
                  "mean probability " + ", ".join(f"{s} {mean[s]:.3f}" for s in STRATEGIES))
    assert ok


def test_8_zero_picker_is_pure_travel():
    cat, hist = generate_history(GenConfig(orders=100, seed=8))
    a = slot(StrategyId.SSCA, cat, jaccard_matrix(hist, cat.K), 3)
    stock = StockState.filled(a)
    mismatched = 0
    for order in hist:
        rec = evaluate_order(order, a, stock, PickerModel(0.0, 0.0), 60.0, LAYOUT)
        travel = 0.0
        for r in rec.plan.machines:
            travel += oracles.sequence_time([(loc.row, loc.col) for _, loc in rec.plan.routes[r].visits], 0.0, 0.0)
        penalty = 60.0 if rec.machine_count >= 2 else 0.0
        mismatched += rec.expected_time != travel or rec.penalized_time != travel + penalty
    ok = mismatched == 0
    record(8, ok, f"{hist.N} orders at mu=sigma=0: {mismatched} differ from independently summed travel (exact equality)")
    assert ok


def test_9_compare_is_deterministic(tmp_path):
    gen = tmp_path / "gen.ini"
    write_config(GenConfig(orders=600, seed=0), gen)
    args = ["compare", "--gen-config", str(gen), "--seed", "1-2", "--cluster-size", "2,3", "--mu", "0,10", "--sigma", "0,2"]
    for name in ("a", "b"):
        assert main(args + ["--out", str(tmp_path / name)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = [filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False) for f in files]
    ok = all(same) and sorted(p.name for p in (tmp_path / "b").iterdir()) == files
    record(9, ok, f"two compare runs: {sum(same)}/{len(files)} report files byte-identical ({', '.join(files)})")
    assert ok
