"""Crane travel times and the expected overlap of robot legs with pharmacist sorting."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from ..model import Location, MachineLayout, PickerModel

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def one_way_time(a: Location, b: Location, layout: MachineLayout) -> float:
    """Chebyshev travel time between two rack positions; the rack side is irrelevant."""
    v = layout.speed
    return max(abs(a.row - b.row) * layout.row_pitch / v, abs(a.col - b.col) * layout.col_pitch / v)


def dual_command_time(i: Location, j: Location, io: Location, layout: MachineLayout) -> float:
    """Trip io -> i -> j -> io. With ``i == j`` this is the single-command round trip."""
    return one_way_time(io, i, layout) + one_way_time(i, j, layout) + one_way_time(j, io, layout)


@lru_cache(maxsize=16)
def travel_table(layout: MachineLayout) -> np.ndarray:
    """One-way times between rack cells; cell index is ``(row - 1) * cols + (col - 1)``."""
    rows, cols = np.divmod(np.arange(layout.rows * layout.cols), layout.cols)
    v = layout.speed
    dr = np.abs(rows[:, None] - rows[None, :])
    dc = np.abs(cols[:, None] - cols[None, :])
    table = np.maximum(dr * layout.row_pitch / v, dc * layout.col_pitch / v)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=16)
def travel_rows(layout: MachineLayout) -> tuple[tuple[float, ...], ...]:
    """:func:`travel_table` as nested tuples of Python floats, for scalar lookups."""
    return tuple(map(tuple, travel_table(layout).tolist()))


def cell(loc: Location, layout: MachineLayout) -> int:
    return (loc.row - 1) * layout.cols + (loc.col - 1)


def nearest_io_time(loc: Location, layout: MachineLayout) -> float:
    return min(one_way_time(io, loc, layout) for io in layout.io_points)


def expected_max_sort(t: float, picker: PickerModel) -> float:
    """E[max(X, t)] for X ~ N(mu, sigma^2), over the full normal support.

    Uses E[max(X, t)] = t + (mu - t) * Phi(z) + sigma * phi(z) with
    z = (mu - t) / sigma. ``sigma == 0`` gives ``max(mu, t)`` exactly.
    """
    if t < 0:
        raise ValueError("travel time must be >= 0")
    mu, sigma = picker.mu, picker.sigma
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return max(mu, t)
    z = (mu - t) / sigma
    cdf = 0.5 * math.erfc(-z / _SQRT2)
    pdf = _INV_SQRT2PI * math.exp(-0.5 * z * z)
    return t + (mu - t) * cdf + sigma * pdf


def expected_max_sort_array(t: np.ndarray, picker: PickerModel) -> np.ndarray:
    """Vectorised :func:`expected_max_sort`."""
    t = np.asarray(t, dtype=float)
    if picker.sigma == 0:
        return np.maximum(t, picker.mu)
    with np.errstate(over="ignore"):  # tiny sigma: z -> +-inf is the right limit
        z = (picker.mu - t) / picker.sigma
        return t + (picker.mu - t) * ndtr(z) + picker.sigma * _INV_SQRT2PI * np.exp(-0.5 * z * z)


def sample_max_sort(t: float, picker: PickerModel, rng: np.random.Generator, n: int = 10_000) -> float:
    """Monte-Carlo estimate of E[max(X, t)]; for validating the analytic form only."""
    x = rng.normal(picker.mu, picker.sigma, size=n) if picker.sigma > 0 else np.full(n, picker.mu)
    return float(np.maximum(x, t).mean())
