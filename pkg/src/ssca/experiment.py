"""Strategy-comparison grids: run every cell, then write the long CSV, summary and pivot table.

A grid cell is one (strategy, C, s, mu, sigma, seed) combination. Strategies
without a clustering stage (FA, SSFA) ignore C and s, so they contribute a
single cell per (mu, sigma, seed) with blank C and s columns.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .correlation import compute_frequencies, jaccard_matrix
from .datagen import GenConfig, generate_history, read_catalog, read_history
from .model import DrugCatalog, MachineLayout, OrderHistory, PickerModel
from .picking.simulate import DEFAULT_FILL, DEFAULT_PENALTY, EvalMetrics, simulate
from .slotting import SAParams, StrategyId, group, locate

log = logging.getLogger(__name__)

BUCKETS = (("all", 1, None), ("1-5", 1, 5), ("6+", 6, None))
PICKER_GRID = ((0.0, 0.0), (5.0, 0.0), (5.0, 2.0), (5.0, 5.0), (10.0, 0.0),
               (10.0, 2.0), (10.0, 5.0), (15.0, 0.0), (15.0, 2.0), (15.0, 5.0))
LONG_COLUMNS = ["strategy", "C", "s", "mu", "sigma", "seed", "bucket", "avg_time", "cross_prob"]
SUMMARY_COLUMNS = ["strategy", "C", "s", "mu", "sigma", "bucket", "seeds", "mean_avg_time", "mean_cross_prob"]


def picker_grid(mus, sigmas) -> list[tuple[float, float]]:
    """Cartesian (mu, sigma) grid without the degenerate mu = 0, sigma > 0 cells."""
    return [(float(m), float(s)) for m in mus for s in sigmas if m > 0 or s == 0]


@dataclass(frozen=True)
class ExperimentSpec:
    strategies: tuple[StrategyId, ...] = tuple(StrategyId)
    cluster_sizes: tuple[int, ...] = (3,)
    thresholds: tuple[float, ...] = (0.01,)
    pickers: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    seeds: tuple[int, ...] = (0,)
    cross_penalty: float = DEFAULT_PENALTY
    machines: int = 3
    fill: int = DEFAULT_FILL
    gen: GenConfig | None = None              # synthesise a history per seed
    history_path: str | None = None           # or evaluate one fixed history
    catalog_path: str | None = None
    layout: MachineLayout = field(default_factory=MachineLayout)

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(StrategyId(s) for s in self.strategies))
        for name in ("strategies", "cluster_sizes", "thresholds", "pickers", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if (self.gen is None) == (self.history_path is None):
            raise ValueError("give exactly one of a generator config or a history file")
        if self.history_path is not None and self.catalog_path is None:
            raise ValueError("a history file needs a catalog file")

    def sa_grid(self, strategy: StrategyId) -> list[tuple[int | None, float | None]]:
        if not strategy.clustered:
            return [(None, None)]
        return list(itertools.product(self.cluster_sizes, self.thresholds))

    def units(self) -> list[tuple]:
        """Work units (seed, strategy, C, s); each covers every picker cell."""
        return [(seed, st, C, s) for seed in self.seeds for st in self.strategies for C, s in self.sa_grid(st)]


_CACHE: dict[tuple, object] = {}


def _cached(key: tuple, build):
    # specs hold dicts, so key on their repr; a few entries cover one worker's units
    if key not in _CACHE:
        if len(_CACHE) >= 8:
            _CACHE.clear()
        _CACHE[key] = build()
    return _CACHE[key]


def _dataset(spec: ExperimentSpec, seed: int) -> tuple[DrugCatalog, OrderHistory, np.ndarray]:
    return _cached(("data", repr(spec), seed), lambda: _build_dataset(spec, seed))


def _build_dataset(spec: ExperimentSpec, seed: int) -> tuple[DrugCatalog, OrderHistory, np.ndarray]:
    if spec.gen is not None:
        catalog, history = generate_history(replace(spec.gen, seed=seed, machines=spec.machines))
    else:
        history = read_history(spec.history_path)
        catalog = read_catalog(spec.catalog_path)
        history.validate(catalog.K)
        catalog = compute_frequencies(history, catalog)
    return catalog, history, jaccard_matrix(history, catalog.K)


def _grouping(spec: ExperimentSpec, seed: int, scattered: bool):
    def build():
        catalog, _, S = _dataset(spec, seed)
        strategy = StrategyId.SSFA if scattered else StrategyId.FA
        return group(strategy, catalog, S, spec.machines, spec.layout.Q, seed=seed)
    return _cached(("group", repr(spec), seed, scattered), build)


def run_unit(spec: ExperimentSpec, unit: tuple) -> list[dict]:
    """Long-format rows for one (seed, strategy, C, s) unit across the picker grid."""
    seed, strategy, C, s = unit
    catalog, history, S = _dataset(spec, seed)
    grouping = _grouping(spec, seed, strategy.scattered)
    params = SAParams(C, s) if strategy.clustered else SAParams()
    assignment = locate(strategy, grouping, catalog, S, spec.layout, params)
    rows = []
    for mu, sigma in spec.pickers:
        metrics = simulate(history, assignment, spec.layout, PickerModel(mu, sigma), spec.cross_penalty, spec.fill)
        if metrics.stockouts:
            log.warning("%s seed %s: %d orders hit a stockout and were skipped", strategy, seed, metrics.stockouts)
        for name, lo, hi in BUCKETS:
            part: EvalMetrics = metrics.bucket(lo, hi)
            rows.append({
                "strategy": strategy.value, "C": C, "s": s, "mu": mu, "sigma": sigma, "seed": seed,
                "bucket": name, "avg_time": part.avg_pick_time, "cross_prob": part.cross_machine_probability,
            })
    return rows


def _run_unit_safe(args):
    spec, unit = args
    try:
        return unit, run_unit(spec, unit), None
    except Exception as exc:  # a failed cell is reported, the rest of the grid continues
        return unit, [], f"{type(exc).__name__}: {exc}"


def run_grid(spec: ExperimentSpec, workers: int = 1) -> tuple[list[dict], list[tuple]]:
    """All long-format rows in grid order, plus (unit, error) for failed units."""
    jobs = [(spec, u) for u in spec.units()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_unit_safe, jobs))
    else:
        results = [_run_unit_safe(j) for j in jobs]
    rows, failures = [], []
    for unit, unit_rows, err in results:
        if err is not None:
            log.error("cell %s failed: %s", unit, err)
            failures.append((unit, err))
        rows.extend(unit_rows)
    return rows, failures


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def _sort_key(row: dict):
    return (row["strategy"], row["C"] or 0, row["s"] or 0.0, row["mu"], row["sigma"], row.get("seed", 0),
            [b for b, _, _ in BUCKETS].index(row["bucket"]))


def write_long(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_COLUMNS)
        for row in sorted(rows, key=_sort_key):
            w.writerow([_fmt(row[c]) for c in LONG_COLUMNS])


def summarise(rows: list[dict]) -> list[dict]:
    """Seed-averaged rows, one per (strategy, C, s, mu, sigma, bucket)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = tuple(row[c] for c in ("strategy", "C", "s", "mu", "sigma", "bucket"))
        groups.setdefault(key, []).append(row)

    def mean(vals):
        vals = [v for v in vals if v is not None]
        return sum(vals) / len(vals) if vals else None

    out = []
    for key, members in groups.items():
        rec = dict(zip(("strategy", "C", "s", "mu", "sigma", "bucket"), key))
        rec["seeds"] = len(members)
        rec["mean_avg_time"] = mean(r["avg_time"] for r in members)
        rec["mean_cross_prob"] = mean(r["cross_prob"] for r in members)
        out.append(rec)
    return sorted(out, key=_sort_key)


def write_summary_csv(summary: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summary:
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def column_label(strategy: str, C, s) -> str:
    return strategy if C is None else f"{strategy}(C={C},s={s:g})"


def pivot_table(summary: list[dict], bucket: str = "all") -> str:
    """Plain-text table: one row per (mu, sigma), one column per strategy variant."""
    cells = {}
    cols: list[str] = []
    rows: list[tuple[float, float]] = []
    order = [s.value for s in StrategyId]
    for rec in sorted(summary, key=lambda r: (order.index(r["strategy"]), r["C"] or 0, r["s"] or 0.0)):
        if rec["bucket"] != bucket:
            continue
        col = column_label(rec["strategy"], rec["C"], rec["s"])
        if col not in cols:
            cols.append(col)
        ms = (rec["mu"], rec["sigma"])
        if ms not in rows:
            rows.append(ms)
        cells[(ms, col)] = rec["mean_avg_time"]
    rows.sort()
    width = max([len(c) for c in cols] + [8])
    lines = [f"{'(mu, sigma)':<12}" + "".join(f"{c:>{width + 2}}" for c in cols)]
    for ms in rows:
        vals = [cells.get((ms, c)) for c in cols]
        best = min((v for v in vals if v is not None), default=None)
        text = []
        for v in vals:
            cell = "-" if v is None else f"{v:.2f}" + ("*" if v == best else " ")
            text.append(f"{cell:>{width + 2}}")
        lines.append(f"({ms[0]:g},{ms[1]:g})".ljust(12) + "".join(text))
    lines.append("")
    lines.append(f"mean penalised picking time (s) over seeds, orders of size bucket '{bucket}'; * marks the row minimum")
    return "\n".join(lines) + "\n"
