"""Command-line entry point: ``ssca {gen,similarity,slot,simulate,compare}``."""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .correlation import compute_frequencies, jaccard_matrix, read_matrix, write_matrix
from .datagen import GenConfig, generate_history, read_catalog, read_config, read_history, write_catalog, write_config, write_history
from .experiment import PICKER_GRID, ExperimentSpec, picker_grid, pivot_table, run_grid, summarise, write_long, write_summary_csv
from .model import MachineLayout, PickerModel, SlottingError
from .picking.simulate import DEFAULT_FILL, DEFAULT_PENALTY, simulate, write_order_results, write_summary
from .slotting import SAParams, StrategyId, read_assignment, slot, write_assignment

log = logging.getLogger("ssca")


def _list(kind):
    def parse(text: str):
        out = []
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if kind is int and "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(kind(part))
        if not out:
            raise argparse.ArgumentTypeError(f"empty list: {text!r}")
        return out
    return parse


def _strategies(text: str) -> list[StrategyId]:
    try:
        return [StrategyId(s.upper()) for s in _list(str)(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load(args) -> tuple:
    history = read_history(args.orders)
    catalog = read_catalog(args.catalog)
    history.validate(catalog.K)
    return compute_frequencies(history, catalog), history


def cmd_gen(args) -> int:
    config = read_config(args.config) if args.config else GenConfig()
    overrides = {"seed": args.seed, "drugs": args.drugs, "orders": args.n_orders, "machines": args.machines}
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    catalog, history = generate_history(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_history(history, out / "orders.csv")
    write_catalog(catalog, out / "catalog.csv")
    write_config(config, out / "config.ini")
    log.info("wrote %d orders over %d drugs (%d bins) to %s", history.N, catalog.K, catalog.total_bins, out)
    return 0


def cmd_similarity(args) -> int:
    catalog, history = _load(args)
    write_matrix(jaccard_matrix(history, catalog.K), args.out)
    return 0


def cmd_slot(args) -> int:
    catalog, history = _load(args)
    S = read_matrix(args.similarity) if args.similarity else jaccard_matrix(history, catalog.K)
    if S.shape != (catalog.K, catalog.K):
        raise SlottingError(f"similarity matrix is {S.shape}, catalog has {catalog.K} drugs")
    params = SAParams(args.cluster_size, args.threshold)
    assignment = slot(args.strategy, catalog, S, args.machines, MachineLayout(), params, seed=args.seed)
    write_assignment(assignment, args.out)
    return 0


def cmd_simulate(args) -> int:
    history = read_history(args.orders)
    assignment = read_assignment(args.assignment)
    layout = MachineLayout()
    assignment.validate(layout)
    picker = PickerModel(args.mu, args.sigma)
    metrics = simulate(history, assignment, layout, picker, args.penalty, args.fill)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_order_results(metrics, out / "orders_result.csv")
    summary = metrics.summary(strategy=args.strategy, mu=args.mu, sigma=args.sigma, penalty=args.penalty,
                              assignment=str(args.assignment))
    write_summary(summary, out / "summary.json")
    log.info("avg picking time %s s, cross-machine probability %s, %d stockouts",
             summary["avg_pick_time"], summary["cross_machine_probability"], summary["stockouts"])
    return 0


def _experiment_config(path: str) -> dict:
    """Keys of an INI ``[experiment]`` section, parsed as the matching compare flags."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise SlottingError(f"cannot read experiment config {path}")
    if "experiment" not in cp:
        raise SlottingError(f"{path}: missing [experiment] section")
    return dict(cp["experiment"])


def build_spec(args) -> ExperimentSpec:
    gen = None
    if args.orders is None:
        gen = read_config(args.gen_config) if args.gen_config else GenConfig()
    if args.mu is None and args.sigma is None:
        pickers = PICKER_GRID if args.full_grid else ((0.0, 0.0),)
    else:
        pickers = tuple(picker_grid(args.mu or [0.0], args.sigma or [0.0]))
    return ExperimentSpec(
        strategies=tuple(args.strategy),
        cluster_sizes=tuple(args.cluster_size),
        thresholds=tuple(args.threshold),
        pickers=tuple(pickers),
        seeds=tuple(args.seed),
        cross_penalty=args.penalty,
        machines=args.machines,
        fill=args.fill,
        gen=gen,
        history_path=args.orders,
        catalog_path=args.catalog,
    )


def cmd_compare(args) -> int:
    spec = build_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rows, failures = run_grid(spec, args.workers)
    write_long(rows, out / "results_long.csv")
    summary = summarise(rows)
    write_summary_csv(summary, out / "summary.csv")
    (out / "pivot.txt").write_text(pivot_table(summary, "all"))
    if summary and not args.no_figures:
        from .report import write_figures

        write_figures(summary, out)
    log.info("%d cells in %.1f s, reports in %s", len(rows) // 3, time.perf_counter() - start, out)
    for unit, err in failures:
        print(f"cell {unit} failed: {err}", file=sys.stderr)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssca", description="Drug slotting and order-picking experiments for dispensing machines.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="synthesise an order history and catalog")
    g.add_argument("--config", help="generator INI file ([generator] section)")
    g.add_argument("--seed", type=int)
    g.add_argument("--drugs", type=int)
    g.add_argument("--n-orders", type=int, help="number of orders to generate")
    g.add_argument("--machines", type=int)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("similarity", parents=[common], help="write the drug similarity matrix")
    s.add_argument("--orders", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("--out", required=True, help="matrix CSV path")
    s.set_defaults(func=cmd_similarity)

    sl = sub.add_parser("slot", parents=[common], help="assign drug bins to machines and locations")
    sl.add_argument("--orders", required=True)
    sl.add_argument("--catalog", required=True)
    sl.add_argument("--similarity", help="precomputed matrix; computed from --orders if omitted")
    sl.add_argument("--strategy", type=lambda v: StrategyId(v.upper()), default=StrategyId.SSCA)
    sl.add_argument("--machines", type=int, default=3)
    sl.add_argument("--cluster-size", type=int, default=SAParams().cluster_capacity)
    sl.add_argument("--threshold", type=float, default=SAParams().threshold)
    sl.add_argument("--seed", type=int, default=0)
    sl.add_argument("--out", required=True, help="assignment CSV path")
    sl.set_defaults(func=cmd_slot)

    sm = sub.add_parser("simulate", parents=[common], help="pick an order stream against an assignment")
    sm.add_argument("--orders", required=True)
    sm.add_argument("--assignment", required=True)
    sm.add_argument("--strategy", default="", help="label recorded in the summary")
    sm.add_argument("--mu", type=float, default=0.0)
    sm.add_argument("--sigma", type=float, default=0.0)
    sm.add_argument("--penalty", type=float, default=DEFAULT_PENALTY)
    sm.add_argument("--fill", type=int, default=DEFAULT_FILL, help="initial units per bin")
    sm.add_argument("--out", required=True, help="output directory")
    sm.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", parents=[common], help="run a strategy x parameter x seed grid and write reports")
    c.add_argument("--config", help="INI file whose [experiment] keys set defaults for these flags")
    c.add_argument("--orders", help="fixed history; otherwise one is generated per seed")
    c.add_argument("--catalog")
    c.add_argument("--gen-config", help="generator INI used for per-seed histories")
    c.add_argument("--strategy", type=_strategies, default=list(StrategyId))
    c.add_argument("--cluster-size", type=_list(int), default=[SAParams().cluster_capacity], help="e.g. 3 or 2-14 or 2,3,6")
    c.add_argument("--threshold", type=_list(float), default=[SAParams().threshold])
    c.add_argument("--mu", type=_list(float))
    c.add_argument("--sigma", type=_list(float))
    c.add_argument("--full-grid", action="store_true", help="use all ten (mu, sigma) cells of the picker grid")
    c.add_argument("--penalty", type=float, default=DEFAULT_PENALTY)
    c.add_argument("--machines", type=int, default=3)
    c.add_argument("--fill", type=int, default=DEFAULT_FILL)
    c.add_argument("--seed", type=_list(int), default=[0], help="seed list, e.g. 1-20")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--no-figures", action="store_true")
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.command == "compare" and args.config:
        sub = parser._subparsers._group_actions[0].choices["compare"]
        defaults = {}
        for key, value in _experiment_config(args.config).items():
            action = next((a for a in sub._actions if a.dest == key.replace("-", "_")), None)
            if action is None:
                parser.error(f"{args.config}: unknown key '{key}'")
            if action.const is True:
                defaults[action.dest] = value.strip().lower() in ("1", "true", "yes", "on")
            else:
                defaults[action.dest] = action.type(value) if action.type else value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, SlottingError, ValueError) as exc:
        print(f"ssca {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
