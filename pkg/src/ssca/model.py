"""Domain types for drug-dispensing slotting and picking.

Drug ids are dense integers ``1..K`` and machine ids are ``1..R``. Arrays
indexed by drug or machine use ``id - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np


class SlottingError(ValueError):
    """Base class for errors raised by this package."""


class CapacityError(SlottingError):
    pass


class IngestionError(SlottingError):
    pass


class StockoutError(SlottingError):
    def __init__(self, drug_id: int, message: str | None = None):
        self.drug_id = drug_id
        super().__init__(message or f"drug {drug_id} is not stocked with enough units on any machine")


@dataclass(frozen=True)
class DrugRecord:
    drug_id: int
    bin_count: int
    demand_frequency: int = 0

    def __post_init__(self):
        if self.bin_count < 1:
            raise ValueError(f"drug {self.drug_id}: bin_count must be >= 1, got {self.bin_count}")
        if self.demand_frequency < 0:
            raise ValueError(f"drug {self.drug_id}: demand_frequency must be >= 0")

    @property
    def per_bin_frequency(self) -> float:
        return self.demand_frequency / self.bin_count


@dataclass(frozen=True)
class DrugCatalog:
    records: tuple[DrugRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for pos, rec in enumerate(self.records, start=1):
            if rec.drug_id != pos:
                raise ValueError(f"drug ids must be contiguous 1..K; position {pos} holds id {rec.drug_id}")

    @classmethod
    def from_bins(cls, bins: Iterable[int], frequencies: Iterable[int] | None = None) -> "DrugCatalog":
        bins = list(bins)
        freqs = list(frequencies) if frequencies is not None else [0] * len(bins)
        if len(freqs) != len(bins):
            raise ValueError("bins and frequencies differ in length")
        return cls(tuple(DrugRecord(k, int(b), int(f)) for k, (b, f) in enumerate(zip(bins, freqs), start=1)))

    @property
    def K(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DrugRecord]:
        return iter(self.records)

    def __getitem__(self, drug_id: int) -> DrugRecord:
        if not 1 <= drug_id <= len(self.records):
            raise KeyError(drug_id)
        return self.records[drug_id - 1]

    @property
    def bins(self) -> np.ndarray:
        return np.array([r.bin_count for r in self.records], dtype=np.int64)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([r.demand_frequency for r in self.records], dtype=np.int64)

    @property
    def per_bin_frequencies(self) -> np.ndarray:
        return np.array([r.per_bin_frequency for r in self.records], dtype=float)

    @property
    def total_bins(self) -> int:
        return sum(r.bin_count for r in self.records)

    def check_capacity(self, machines: int, bins_per_machine: int) -> None:
        if self.total_bins > machines * bins_per_machine:
            raise CapacityError(
                f"catalog needs {self.total_bins} bins but {machines} machines hold only "
                f"{machines * bins_per_machine}"
            )


@dataclass(frozen=True)
class PrescriptionOrder:
    order_id: int
    lines: tuple[tuple[int, int], ...]  # (drug_id, dosage), sorted by drug id

    def __post_init__(self):
        lines = tuple(sorted((int(k), int(a)) for k, a in self.lines))
        object.__setattr__(self, "lines", lines)
        if not lines:
            raise ValueError(f"order {self.order_id} has no lines")
        drugs = [k for k, _ in lines]
        if len(set(drugs)) != len(drugs):
            raise ValueError(f"order {self.order_id} lists a drug twice")
        for k, a in lines:
            if a < 1:
                raise ValueError(f"order {self.order_id}: dosage of drug {k} must be >= 1")

    @property
    def drugs(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.lines)

    @property
    def size(self) -> int:
        return len(self.lines)

    def dosage(self, drug_id: int) -> int:
        for k, a in self.lines:
            if k == drug_id:
                return a
        raise KeyError(drug_id)


@dataclass(frozen=True)
class OrderHistory:
    orders: tuple[PrescriptionOrder, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(self.orders))

    @property
    def N(self) -> int:
        return len(self.orders)

    def __len__(self) -> int:
        return len(self.orders)

    def __iter__(self) -> Iterator[PrescriptionOrder]:
        return iter(self.orders)

    def validate(self, K: int) -> None:
        for order in self.orders:
            for k in order.drugs:
                if not 1 <= k <= K:
                    raise IngestionError(f"order {order.order_id} references unknown drug id {k} (K={K})")


class Location(NamedTuple):
    side: int
    row: int
    col: int


@dataclass(frozen=True)
class MachineLayout:
    rows: int = 9
    cols: int = 16
    sides: int = 2
    row_pitch: float = 0.275  # d_m, multiplies row differences
    col_pitch: float = 0.168  # d_n, multiplies column differences
    speed: float = 0.1486
    io_points: tuple[Location, Location] = (Location(1, 8, 6), Location(1, 9, 6))

    def __post_init__(self):
        if min(self.rows, self.cols, self.sides) < 1:
            raise ValueError("layout dimensions must be positive")
        if min(self.row_pitch, self.col_pitch, self.speed) <= 0:
            raise ValueError("pitches and speed must be positive")
        if len(self.io_points) != 2 or self.io_points[0] == self.io_points[1]:
            raise ValueError("a machine has exactly two distinct I/O points")
        for p in self.io_points:
            if not self.contains(p):
                raise ValueError(f"I/O point {p} lies outside the rack")
        object.__setattr__(self, "io_points", tuple(Location(*p) for p in self.io_points))

    def contains(self, loc: Location) -> bool:
        return 1 <= loc.side <= self.sides and 1 <= loc.row <= self.rows and 1 <= loc.col <= self.cols

    @property
    def Q(self) -> int:
        return self.sides * self.rows * self.cols - len(self.io_points)

    def storage_locations(self) -> list[Location]:
        io = set(self.io_points)
        return [
            Location(e, x, y)
            for e in range(1, self.sides + 1)
            for x in range(1, self.rows + 1)
            for y in range(1, self.cols + 1)
            if Location(e, x, y) not in io
        ]


@dataclass(frozen=True)
class Grouping:
    """Stage-I result: ``bins[k-1, r-1]`` bins of drug k on machine r."""

    bins: np.ndarray
    objective_value: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.bins, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "bins", arr)

    @property
    def K(self) -> int:
        return self.bins.shape[0]

    @property
    def R(self) -> int:
        return self.bins.shape[1]

    @property
    def presence(self) -> np.ndarray:
        return self.bins > 0

    def machine_bins(self, machine: int) -> dict[int, int]:
        col = self.bins[:, machine - 1]
        return {int(k) + 1: int(col[k]) for k in np.flatnonzero(col)}

    def machines_of(self, drug_id: int) -> list[int]:
        return [int(r) + 1 for r in np.flatnonzero(self.bins[drug_id - 1])]


@dataclass(frozen=True)
class Assignment:
    """Stage-II result: per machine, a map from storage location to drug id."""

    machines: tuple[Mapping[Location, int], ...]
    K: int | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        machines = tuple(dict(sorted(m.items())) for m in self.machines)
        object.__setattr__(self, "machines", machines)
        index: dict[tuple[int, int], list[Location]] = {}
        top = 0
        for r, mapping in enumerate(machines, start=1):
            for loc, k in mapping.items():
                index.setdefault((k, r), []).append(loc)
                top = max(top, k)
        object.__setattr__(self, "_index", index)
        if self.K is None:
            object.__setattr__(self, "K", top)

    @property
    def R(self) -> int:
        return len(self.machines)

    def locations_of(self, drug_id: int, machine: int) -> list[Location]:
        """The set M_k(r): locations on ``machine`` holding ``drug_id``, in canonical order."""
        return self._index.get((drug_id, machine), [])

    def machines_of(self, drug_id: int) -> list[int]:
        return [r for r in range(1, self.R + 1) if (drug_id, r) in self._index]

    def to_grouping(self) -> Grouping:
        K = self.K or 0
        bins = np.zeros((K, self.R), dtype=np.int64)
        for (k, r), locs in self._index.items():
            bins[k - 1, r - 1] = len(locs)
        return Grouping(bins)

    def rows(self) -> list[tuple[int, int, int, int, int]]:
        """(machine, side, row, col, drug_id) for every occupied bin, sorted."""
        out = []
        for r, mapping in enumerate(self.machines, start=1):
            for loc, k in mapping.items():
                out.append((r, loc.side, loc.row, loc.col, k))
        out.sort()
        return out

    def validate(self, layout: MachineLayout) -> None:
        io = set(layout.io_points)
        for r, mapping in enumerate(self.machines, start=1):
            for loc in mapping:
                if not layout.contains(loc):
                    raise ValueError(f"machine {r}: location {loc} outside the rack")
                if loc in io:
                    raise ValueError(f"machine {r}: I/O point {loc} used as storage")


class StockState:
    """Remaining units per (machine, location). The only mutable model type."""

    def __init__(self, units: Mapping[tuple[int, Location], int] | None = None):
        self._units: dict[tuple[int, Location], int] = dict(units or {})
        if any(v < 0 for v in self._units.values()):
            raise ValueError("stock cannot be negative")

    @classmethod
    def filled(cls, assignment: Assignment, level: int = 50) -> "StockState":
        return cls({(r, loc): level for r, m in enumerate(assignment.machines, start=1) for loc in m})

    def __getitem__(self, key: tuple[int, Location]) -> int:
        return self._units.get(key, 0)

    def take(self, machine: int, loc: Location, units: int) -> None:
        have = self._units.get((machine, loc), 0)
        if units > have:
            raise ValueError(f"cannot take {units} units from {loc} on machine {machine}; only {have} left")
        self._units[(machine, loc)] = have - units

    def total(self) -> int:
        return sum(self._units.values())

    def copy(self) -> "StockState":
        return StockState(self._units)


@dataclass(frozen=True)
class PickerModel:
    """Pharmacist sort time X ~ N(mu, sigma^2); sigma == 0 means X == mu."""

    mu: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mean sort time must be >= 0")
        if self.sigma < 0:
            raise ValueError("sort-time standard deviation must be >= 0")
