"""Reading, writing and synthesising order histories and drug catalogs.

File formats
------------
orders CSV   ``order_id,drug_id,dosage``, one row per order line
catalog CSV  ``drug_id,bin_count,demand_frequency``
config INI   a ``[generator]`` section whose keys mirror :class:`GenConfig`;
             ``order_sizes`` is written as ``1:0.30, 2:0.22, ...``
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .correlation import compute_frequencies
from .model import CapacityError, DrugCatalog, DrugRecord, IngestionError, OrderHistory, PrescriptionOrder

HISTORY_COLUMNS = ["order_id", "drug_id", "dosage"]
CATALOG_COLUMNS = ["drug_id", "bin_count", "demand_frequency"]

# about 89% of orders hold 1-5 drugs, mean size near 2.9
DEFAULT_ORDER_SIZES = {
    1: 0.30, 2: 0.22, 3: 0.16, 4: 0.12, 5: 0.09, 6: 0.04,
    7: 0.03, 8: 0.02, 9: 0.01, 10: 0.005, 11: 0.003, 12: 0.002,
}


@dataclass(frozen=True)
class GenConfig:
    drugs: int = 100
    orders: int = 5000
    order_sizes: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_ORDER_SIZES))
    popularity_skew: float = 1.0   # p(rank) ~ rank ** -skew
    cliques: int = 20
    clique_size: int = 3
    co_draw: float = 0.8           # chance a further line comes from the seed drug's clique
    max_dosage: int = 3
    machines: int = 3
    bins_per_machine: int = 286
    fill: float = 0.9              # fraction of fleet bins given to drugs
    seed: int = 0

    def __post_init__(self):
        if self.drugs < 1 or self.orders < 1:
            raise ValueError("drugs and orders must be >= 1")
        sizes = {int(k): float(v) for k, v in self.order_sizes.items()}
        object.__setattr__(self, "order_sizes", dict(sorted(sizes.items())))
        if any(k < 1 for k in sizes) or any(v < 0 for v in sizes.values()):
            raise ValueError("order sizes must be >= 1 with non-negative probabilities")
        if abs(sum(sizes.values()) - 1.0) > 1e-9:
            raise ValueError(f"order-size probabilities sum to {sum(sizes.values())}, not 1")
        if not 0.0 <= self.co_draw <= 1.0:
            raise ValueError("co_draw must lie in [0, 1]")
        if self.cliques * self.clique_size > self.drugs:
            raise ValueError("cliques need more drugs than the catalog has")
        if not 0.0 < self.fill <= 1.0:
            raise ValueError("fill must lie in (0, 1]")
        if self.max_dosage < 1:
            raise ValueError("max_dosage must be >= 1")


def _format_sizes(sizes: dict[int, float]) -> str:
    return ", ".join(f"{k}:{v:g}" for k, v in sizes.items())


def _parse_sizes(text: str) -> dict[int, float]:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        k, _, v = part.partition(":")
        out[int(k)] = float(v)
    return out


def write_config(config: GenConfig, path: str | Path) -> None:
    cp = configparser.ConfigParser()
    cp["generator"] = {
        f.name: _format_sizes(getattr(config, f.name)) if f.name == "order_sizes" else str(getattr(config, f.name))
        for f in fields(config)
    }
    with open(path, "w") as fh:
        cp.write(fh)


def read_config(path: str | Path, **overrides) -> GenConfig:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise IngestionError(f"cannot read config {path}")
    if "generator" not in cp:
        raise IngestionError(f"{path}: missing [generator] section")
    sec = cp["generator"]
    known = {f.name: f for f in fields(GenConfig)}
    unknown = set(sec) - set(known)
    if unknown:
        raise IngestionError(f"{path}: unknown key(s) {', '.join(sorted(unknown))}")
    kwargs = {}
    defaults = GenConfig()
    for name, value in sec.items():
        if name == "order_sizes":
            kwargs[name] = _parse_sizes(value)
        else:
            kwargs[name] = type(getattr(defaults, name))(value)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return GenConfig(**kwargs)


def _rows(path: str | Path, columns: list[str]):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise IngestionError(f"{path}: missing column '{col}'")
        for line, row in enumerate(reader, start=2):
            try:
                yield line, [int(row[c]) for c in columns]
            except (TypeError, ValueError):
                raise IngestionError(f"{path}:{line}: expected integers in {columns}, got {row}") from None


def read_history(path: str | Path) -> OrderHistory:
    lines: dict[int, dict[int, int]] = {}
    for line, (q, k, a) in _rows(path, HISTORY_COLUMNS):
        order = lines.setdefault(q, {})
        if k in order:
            raise IngestionError(f"{path}:{line}: drug {k} listed twice in order {q}")
        if a < 1:
            raise IngestionError(f"{path}:{line}: dosage must be >= 1")
        order[k] = a
    return OrderHistory(tuple(PrescriptionOrder(q, tuple(d.items())) for q, d in lines.items()))


def write_history(history: OrderHistory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for order in history:
            for k, a in order.lines:
                w.writerow([order.order_id, k, a])


def read_catalog(path: str | Path) -> DrugCatalog:
    recs = []
    for line, (k, b, f) in _rows(path, CATALOG_COLUMNS):
        try:
            recs.append(DrugRecord(k, b, f))
        except ValueError as exc:
            raise IngestionError(f"{path}:{line}: {exc}") from None
    recs.sort(key=lambda r: r.drug_id)
    try:
        return DrugCatalog(tuple(recs))
    except ValueError as exc:
        raise IngestionError(f"{path}: {exc}") from None


def write_catalog(catalog: DrugCatalog, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CATALOG_COLUMNS)
        for r in catalog:
            w.writerow([r.drug_id, r.bin_count, r.demand_frequency])


def bins_from_frequency(freqs: np.ndarray, total: int, cap: int) -> np.ndarray:
    """Bins proportional to demand, at least one and at most ``cap`` each, summing to ``total``.

    Largest-remainder rounding keeps the result deterministic.
    """
    K = len(freqs)
    if K > total:
        raise CapacityError(f"{K} drugs need at least {K} bins; only {total} available")
    total = min(total, K * cap)
    freqs = np.asarray(freqs, dtype=float)
    bins = np.ones(K, dtype=np.int64)
    spare = total - K
    weight = freqs.copy()
    while spare > 0:
        open_ = bins < cap
        w = np.where(open_, weight, 0.0)
        if w.sum() <= 0:
            w = open_.astype(float)
        share = w / w.sum() * spare
        room = cap - bins
        add = np.minimum(np.floor(share).astype(np.int64), room)
        left = spare - int(add.sum())
        if left > 0:
            frac = np.where(open_ & (add < room), share - np.floor(share), -1.0)
            for k in sorted(range(K), key=lambda k: (-frac[k], k))[:left]:
                if frac[k] < 0:
                    break
                add[k] += 1
        if add.sum() == 0:
            break
        bins += add
        spare -= int(add.sum())
    return bins


def generate_history(config: GenConfig) -> tuple[DrugCatalog, OrderHistory]:
    """Synthesise a catalog and order history with power-law popularity and drug cliques.

    Drug 1 is the most popular. Cliques are random disjoint drug groups; an
    order draws a seed drug by popularity and each further line comes from the
    seed's clique with probability ``co_draw`` (while members remain), else by
    popularity.
    """
    rng = np.random.default_rng(config.seed)
    K = config.drugs
    pop = np.arange(1, K + 1, dtype=float) ** -config.popularity_skew
    pop /= pop.sum()
    perm = rng.permutation(K)
    clique_of = np.full(K, -1)
    members: list[list[int]] = []
    for c in range(config.cliques):
        group = sorted(int(i) for i in perm[c * config.clique_size:(c + 1) * config.clique_size])
        members.append(group)
        clique_of[group] = c

    size_vals = np.array(list(config.order_sizes))
    size_p = np.array(list(config.order_sizes.values()))
    sizes = rng.choice(size_vals, size=config.orders, p=size_p)
    orders = []
    for q, m in enumerate(sizes, start=1):
        m = min(int(m), K)
        seed_drug = int(rng.choice(K, p=pop))
        chosen = [seed_drug]
        taken = np.zeros(K, dtype=bool)
        taken[seed_drug] = True
        while len(chosen) < m:
            c = clique_of[seed_drug]
            mates = [d for d in members[c] if not taken[d]] if c >= 0 else []
            if mates and rng.random() < config.co_draw:
                d = mates[int(rng.integers(len(mates)))]
            else:
                p = np.where(taken, 0.0, pop)
                d = int(rng.choice(K, p=p / p.sum()))
            taken[d] = True
            chosen.append(d)
        dosages = rng.integers(1, config.max_dosage + 1, size=len(chosen))
        orders.append(PrescriptionOrder(q, tuple((d + 1, int(a)) for d, a in zip(chosen, dosages))))
    history = OrderHistory(tuple(orders))

    blank = DrugCatalog.from_bins([1] * K)
    freqs = compute_frequencies(history, blank).frequencies
    capacity = config.machines * config.bins_per_machine
    bins = bins_from_frequency(freqs, int(config.fill * capacity), config.bins_per_machine)
    catalog = DrugCatalog.from_bins(bins, freqs)
    catalog.check_capacity(config.machines, config.bins_per_machine)
    return catalog, history
