"""Demand frequencies and pairwise Jaccard similarity from an order history."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .model import DrugCatalog, DrugRecord, IngestionError, OrderHistory


def _incidence(history: OrderHistory, K: int) -> np.ndarray:
    """N x K 0/1 matrix; repeated units of a drug in one order count once."""
    A = np.zeros((history.N, K), dtype=np.float64)
    for row, order in enumerate(history.orders):
        for k in order.drugs:
            if not 1 <= k <= K:
                raise IngestionError(f"order {order.order_id} references unknown drug id {k} (K={K})")
            A[row, k - 1] = 1.0
    return A


def compute_frequencies(history: OrderHistory, catalog: DrugCatalog) -> DrugCatalog:
    """Return ``catalog`` with f_k set to the number of orders containing drug k."""
    if history.N == 0:
        raise ValueError("order history is empty")
    counts = _incidence(history, catalog.K).sum(axis=0).astype(np.int64)
    return DrugCatalog(
        tuple(DrugRecord(r.drug_id, r.bin_count, int(counts[r.drug_id - 1])) for r in catalog.records)
    )


def jaccard_matrix(history: OrderHistory, K: int) -> np.ndarray:
    """K x K matrix of gamma / (alpha + beta + gamma) with a zero diagonal.

    ``S[k-1, k'-1]`` is the similarity of drugs k and k'. Pairs that never
    appear in any order get 0.
    """
    if history.N == 0:
        raise ValueError("order history is empty")
    A = _incidence(history, K)
    both = A.T @ A
    single = np.diag(both).copy()
    union = single[:, None] + single[None, :] - both
    S = np.divide(both, union, out=np.zeros_like(both), where=union > 0)
    np.fill_diagonal(S, 0.0)
    return S


def write_matrix(S: np.ndarray, path: str | Path) -> None:
    K = S.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(range(1, K + 1)))
        for row in S:
            w.writerow([f"{v:.6f}" for v in row])


def read_matrix(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestionError(f"{path}: empty matrix file")
    K = len(rows[0])
    data = rows[1:]
    if len(data) != K or any(len(r) != K for r in data):
        raise IngestionError(f"{path}: expected {K} rows of {K} values")
    return np.array([[float(v) for v in r] for r in data])
