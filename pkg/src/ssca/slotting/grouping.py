"""Stage I: grouping drugs onto machines by within-machine similarity.

The objective is the sum of ``S[k, k']`` over every machine holding both
drugs. Under scattered storage a drug's bins may be split over several
machines (each share at least one bin); dedicated storage keeps all bins of
a drug on one machine.
"""

from __future__ import annotations

import itertools
import logging

import networkx as nx
import numpy as np

from ..model import CapacityError, DrugCatalog, Grouping, SlottingError

log = logging.getLogger(__name__)

EXACT_MAX_DRUGS = 12
EXACT_MAX_MACHINES = 3
MAX_MOVES = 10_000
_TOL = 1e-12


class ScaleGuardError(SlottingError):
    pass


def grouping_objective(bins: np.ndarray, S: np.ndarray) -> float:
    X = (np.asarray(bins) > 0).astype(float)
    return float(0.5 * np.einsum("kr,kj,jr->", X, S, X))


def grouping_violations(bins: np.ndarray, catalog: DrugCatalog, Q: int, dedicated: bool = False) -> list[str]:
    """Check the bin-conservation, machine-capacity and linking constraints."""
    bins = np.asarray(bins)
    out = []
    if bins.shape[0] != catalog.K:
        return [f"grouping covers {bins.shape[0]} drugs, catalog has {catalog.K}"]
    if (bins < 0).any():
        out.append("negative bin count")
    for k, rec in enumerate(catalog, start=0):
        if bins[k].sum() != rec.bin_count:
            out.append(f"drug {k + 1}: {bins[k].sum()} bins placed, needs {rec.bin_count}")
        if dedicated and (bins[k] > 0).sum() != 1:
            out.append(f"drug {k + 1}: dedicated storage needs exactly one machine")
    for r, load in enumerate(bins.sum(axis=0), start=1):
        if load > Q:
            out.append(f"machine {r}: {load} bins exceed capacity {Q}")
    x = (bins > 0).astype(int)
    if ((x > bins) | (bins > Q * x)).any():
        out.append("linking constraint x <= b <= Q*x violated")
    return out


def _check_instance(catalog: DrugCatalog, S: np.ndarray, R: int, Q: int) -> None:
    if R < 1 or Q < 1:
        raise ValueError("need at least one machine with positive capacity")
    if S.shape != (catalog.K, catalog.K):
        raise ValueError(f"similarity matrix is {S.shape}, catalog has {catalog.K} drugs")
    catalog.check_capacity(R, Q)


# ---------------------------------------------------------------------------
# exact solver


def _mask_key(mask: int, R: int) -> tuple[int, ...]:
    return tuple(r for r in range(R) if mask >> r & 1)


def _distribute(masks: list[int], catalog: DrugCatalog, R: int, Q: int) -> np.ndarray:
    """Turn presence masks into bin counts: one bin per present machine, the rest by max-flow."""
    bins = np.zeros((catalog.K, R), dtype=np.int64)
    for k, m in enumerate(masks):
        for r in _mask_key(m, R):
            bins[k, r] = 1
    free = Q - bins.sum(axis=0)
    g = nx.DiGraph()
    total = 0
    for k, m in enumerate(masks):
        extra = catalog[k + 1].bin_count - len(_mask_key(m, R))
        if extra:
            total += extra
            g.add_edge("src", ("d", k), capacity=extra)
            for r in _mask_key(m, R):
                g.add_edge(("d", k), ("m", r))
    for r in range(R):
        g.add_edge(("m", r), "sink", capacity=int(free[r]))
    if total:
        value, flow = nx.maximum_flow(g, "src", "sink")
        if value != total:
            raise AssertionError("presence pattern passed the Hall check but could not be filled")
        for k in range(catalog.K):
            for node, units in flow.get(("d", k), {}).items():
                bins[k, node[1]] += units
    return bins


def _hall_ok(need: dict[int, int], counts: list[int], Q: int, R: int) -> bool:
    for T in range(1, 1 << R):
        room = sum(Q - counts[r] for r in range(R) if T >> r & 1)
        if room < 0 or need[T] > room:
            return False
    return True


def group_scattered_exact(catalog: DrugCatalog, S: np.ndarray, R: int, Q: int) -> Grouping:
    """Certified optimum of the scattered grouping model by depth-first branch and bound.

    Branches over each drug's set of machines; a drug spread over ``m``
    machines needs ``m <= b_k`` bins, and a partial pattern is pruned when the
    remaining bins cannot be packed (Hall's condition over machine subsets).
    Among optimal patterns the one with the lexicographically smallest
    per-drug machine tuples, in drug-id order, is returned.
    """
    S = np.asarray(S, dtype=float)
    _check_instance(catalog, S, R, Q)
    K = catalog.K
    if K > EXACT_MAX_DRUGS or R > EXACT_MAX_MACHINES:
        raise ScaleGuardError(
            f"exact grouping supports K <= {EXACT_MAX_DRUGS} and R <= {EXACT_MAX_MACHINES}; "
            f"got K={K}, R={R}; use the heuristic"
        )
    b = catalog.bins
    all_masks = sorted(range(1, 1 << R), key=lambda m: _mask_key(m, R))
    options = [[m for m in all_masks if bin(m).count("1") <= b[k]] for k in range(K)]

    # bound on pairs not yet decided: each pair can share at most min(R, b_k, b_k') machines
    pair_cap = np.minimum(np.minimum(b[:, None], b[None, :]), R).astype(float) * S
    tail_pairs = np.zeros(K + 1)
    for i in range(K - 1, -1, -1):
        tail_pairs[i] = tail_pairs[i + 1] + pair_cap[i, i + 1:].sum()

    W = np.zeros((R, K))  # W[r, k]: similarity of k to drugs already on machine r
    masks = [0] * K
    counts = [0] * R
    need = {T: 0 for T in range(1 << R)}
    best = {"value": -np.inf, "masks": None}
    b_cap = np.minimum(b, R)

    def bound(depth: int, value: float) -> float:
        if depth == K:
            return value
        rest = np.sort(W[:, depth:], axis=0)[::-1]
        csum = np.cumsum(rest, axis=0)
        gains = csum[b_cap[depth:] - 1, np.arange(K - depth)]
        return value + float(gains.sum()) + tail_pairs[depth]

    def dfs(depth: int, value: float) -> None:
        if depth == K:
            if value > best["value"] + _TOL:
                best["value"], best["masks"] = value, list(masks)
            return
        if bound(depth, value) < best["value"] + _TOL:
            return
        free = int(b[depth])
        for m in options[depth]:
            rs = _mask_key(m, R)
            gain = float(sum(W[r, depth] for r in rs))
            masks[depth] = m
            for r in rs:
                counts[r] += 1
            extra = free - len(rs)
            for T in range(1, 1 << R):
                if m & T == m:
                    need[T] += extra
            if _hall_ok(need, counts, Q, R):
                for r in rs:
                    W[r] += S[depth]
                dfs(depth + 1, value + gain)
                for r in rs:
                    W[r] -= S[depth]
            for T in range(1, 1 << R):
                if m & T == m:
                    need[T] -= extra
            for r in rs:
                counts[r] -= 1
            masks[depth] = 0

    dfs(0, 0.0)
    if best["masks"] is None:
        raise CapacityError("no feasible grouping exists")
    bins = _distribute(best["masks"], catalog, R, Q)
    return Grouping(bins, grouping_objective(bins, S))


# ---------------------------------------------------------------------------
# heuristic


class _LocalSearch:
    """Incremental objective bookkeeping over a bins matrix."""

    def __init__(self, bins: np.ndarray, S: np.ndarray, Q: int):
        self.b = bins
        self.S = S
        self.Q = Q
        self.X = (bins > 0).astype(float)
        self.G = S @ self.X  # G[k, r]: similarity of k to the drugs present on r
        self.load = bins.sum(axis=0)
        self.moves = 0

    def delta(self, changes: list[tuple[int, int, int]]) -> float:
        """Objective change if each ``(k, r, new_presence)`` were applied."""
        S, X, G = self.S, self.X, self.G
        d = 0.0
        for i, (k, r, nx) in enumerate(changes):
            ox = X[k, r]
            own = G[k, r]
            for k2, r2, _ in changes:
                if r2 == r and k2 != k:
                    own -= S[k, k2] * X[k2, r]
            d += (nx - ox) * own
            for k2, r2, nx2 in changes[i + 1:]:
                if r2 == r and k2 != k:
                    d += S[k, k2] * (nx * nx2 - ox * X[k2, r])
        return d

    def apply(self, k: int, r_from: int, r_to: int, count: int) -> None:
        old_from, old_to = self.X[k, r_from], self.X[k, r_to]
        self.b[k, r_from] -= count
        self.b[k, r_to] += count
        self.load[r_from] -= count
        self.load[r_to] += count
        new_from = float(self.b[k, r_from] > 0)
        if new_from != old_from:
            self.X[k, r_from] = new_from
            self.G[:, r_from] += (new_from - old_from) * self.S[:, k]
        if old_to == 0.0:
            self.X[k, r_to] = 1.0
            self.G[:, r_to] += self.S[:, k]

    def objective(self) -> float:
        return grouping_objective(self.b, self.S)


def _seed_order(catalog: DrugCatalog) -> list[int]:
    f = catalog.frequencies
    return sorted(range(catalog.K), key=lambda k: (-f[k], k))


def _greedy_scattered(catalog: DrugCatalog, S: np.ndarray, R: int, Q: int) -> np.ndarray:
    bins = np.zeros((catalog.K, R), dtype=np.int64)
    X = np.zeros((catalog.K, R))
    free = np.full(R, Q, dtype=np.int64)
    for k in _seed_order(catalog):
        need = catalog[k + 1].bin_count
        gain = S[k] @ X
        ranked = sorted(range(R), key=lambda r: (-gain[r], -free[r], r))
        if free[ranked[0]] < need:
            log.debug("drug %d split across machines: best machine lacks room", k + 1)
        for r in ranked:
            take = min(need, int(free[r]))
            if take:
                bins[k, r] += take
                free[r] -= take
                X[k, r] = 1.0
                need -= take
            if not need:
                break
        if need:
            raise CapacityError(f"drug {k + 1} does not fit: machines are full")
    return bins


def _greedy_dedicated(catalog: DrugCatalog, S: np.ndarray, R: int, Q: int, order: list[int]) -> np.ndarray | None:
    bins = np.zeros((catalog.K, R), dtype=np.int64)
    X = np.zeros((catalog.K, R))
    free = np.full(R, Q, dtype=np.int64)
    for k in order:
        need = catalog[k + 1].bin_count
        gain = S[k] @ X
        fits = [r for r in range(R) if free[r] >= need]
        if not fits:
            return None
        r = min(fits, key=lambda r: (-gain[r], -free[r], r))
        bins[k, r] = need
        free[r] -= need
        X[k, r] = 1.0
    return bins


def _improve(ls: _LocalSearch, R: int, rng: np.random.Generator, dedicated: bool) -> None:
    K = ls.b.shape[0]
    Q = ls.Q
    improved = True
    while improved and ls.moves < MAX_MOVES:
        improved = False
        for k in rng.permutation(K).tolist():
            if ls.moves >= MAX_MOVES:
                return
            if _relocate(ls, k, R, dedicated):
                improved = True
            for r1 in range(R):
                for r2 in range(R):
                    if r1 == r2 or not ls.b[k, r1] or ls.X[k, r2]:
                        continue
                    if ls.moves >= MAX_MOVES:
                        return
                    if _swap(ls, k, r1, r2, dedicated):
                        improved = True


def _relocate(ls: _LocalSearch, k: int, R: int, dedicated: bool) -> bool:
    for r1 in range(R):
        n1 = int(ls.b[k, r1])
        if not n1:
            continue
        for r2 in range(R):
            if r2 == r1:
                continue
            room = ls.Q - ls.load[r2]
            if room >= n1 and ls.delta([(k, r1, 0), (k, r2, 1)]) > _TOL:
                ls.apply(k, r1, r2, n1)
                ls.moves += 1
                return True
            if not dedicated and n1 >= 2 and room >= 1 and not ls.X[k, r2] and ls.G[k, r2] > _TOL:
                ls.apply(k, r1, r2, 1)
                ls.moves += 1
                return True
    return False


def _swap(ls: _LocalSearch, k: int, r1: int, r2: int, dedicated: bool) -> bool:
    """Exchange drug k on r1 (absent from r2) with some drug on r2, first improving partner wins.

    Deltas for every partner are evaluated at once; ``a`` and ``c`` are the
    presences of k on r1 and of the partner on r2 after the move.
    """
    S, G, b = ls.S, ls.G, ls.b
    n1 = int(b[k, r1])
    partners = np.flatnonzero(b[:, r2])
    partners = partners[partners != k]
    if partners.size == 0:
        return False
    s = S[k, partners]
    y1 = ls.X[partners, r1]
    g1 = G[partners, r1]
    g2 = G[partners, r2]
    n2 = b[partners, r2]

    def gain(a, c):
        return ((a - 1.0) * (G[k, r1] - s * y1) + (1.0 - y1) * (g1 - s) + s * (a - y1)
                + G[k, r2] - s + (c - 1.0) * g2 + s * c)

    fits = (ls.load[r2] - n2 + n1 <= ls.Q) & (ls.load[r1] - n1 + n2 <= ls.Q)
    block = np.where(fits, gain(0.0, 0.0), -np.inf)
    if dedicated:
        single = np.full(partners.size, -np.inf)
    else:
        single = gain(0.0 if n1 == 1 else 1.0, (n2 > 1).astype(float))
    ok = np.flatnonzero((block > _TOL) | (single > _TOL))
    if ok.size == 0:
        return False
    i = ok[0]
    k2 = int(partners[i])
    if block[i] > _TOL:
        m2 = int(n2[i])
        ls.apply(k, r1, r2, n1)
        ls.apply(k2, r2, r1, m2)
    else:
        ls.apply(k, r1, r2, 1)
        ls.apply(k2, r2, r1, 1)
    ls.moves += 1
    return True


def group_scattered_heuristic(catalog: DrugCatalog, S: np.ndarray, R: int, Q: int, seed: int = 0) -> Grouping:
    """Greedy seeding by demand followed by first-improvement local search.

    Moves are whole-block relocations, single-bin relocations onto a machine
    that lacks the drug, and block or single-bin swaps between two drugs. The
    seed only fixes the drug visiting order of the sweeps.
    """
    S = np.asarray(S, dtype=float)
    _check_instance(catalog, S, R, Q)
    ls = _LocalSearch(_greedy_scattered(catalog, S, R, Q), S, Q)
    _improve(ls, R, np.random.default_rng(seed), dedicated=False)
    log.debug("scattered local search stopped after %d moves", ls.moves)
    return Grouping(ls.b.copy(), ls.objective())


def group_dedicated(catalog: DrugCatalog, S: np.ndarray, R: int, Q: int, seed: int = 0) -> Grouping:
    """Same machinery as the scattered heuristic, with every drug on exactly one machine."""
    S = np.asarray(S, dtype=float)
    _check_instance(catalog, S, R, Q)
    too_big = [r.drug_id for r in catalog if r.bin_count > Q]
    if too_big:
        raise CapacityError(f"drugs {too_big} need more bins than one machine holds ({Q})")
    bins = _greedy_dedicated(catalog, S, R, Q, _seed_order(catalog))
    if bins is None:
        b = catalog.bins
        bins = _greedy_dedicated(catalog, S, R, Q, sorted(range(catalog.K), key=lambda k: (-b[k], k)))
    if bins is None:
        raise CapacityError("drugs cannot be packed onto machines without splitting")
    ls = _LocalSearch(bins, S, Q)
    _improve(ls, R, np.random.default_rng(seed), dedicated=True)
    return Grouping(ls.b.copy(), ls.objective())


def enumerate_machine_sets(R: int) -> list[tuple[int, ...]]:
    """All non-empty machine subsets (0-based) in the exact solver's tie-break order."""
    return sorted((c for n in range(1, R + 1) for c in itertools.combinations(range(R), n)))
