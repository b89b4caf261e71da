import filecmp
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssca.correlation import jaccard_matrix
from ssca.datagen import (
    GenConfig,
    bins_from_frequency,
    generate_history,
    read_catalog,
    read_config,
    read_history,
    write_catalog,
    write_config,
    write_history,
)
from ssca.model import CapacityError, DrugCatalog, IngestionError, OrderHistory, PrescriptionOrder


def write(path, text):
    path.write_text(text)
    return path


def test_two_rows_one_order(tmp_path):
    h = read_history(write(tmp_path / "o.csv", "order_id,drug_id,dosage\n5,1,2\n5,3,1\n"))
    assert h.N == 1 and h.orders[0].size == 2 and h.orders[0].dosage(1) == 2


def test_header_only_is_empty(tmp_path):
    assert read_history(write(tmp_path / "o.csv", "order_id,drug_id,dosage\n")).N == 0


def test_missing_column_is_named(tmp_path):
    with pytest.raises(IngestionError, match="dosage"):
        read_history(write(tmp_path / "o.csv", "order_id,drug_id\n1,1\n"))
    with pytest.raises(IngestionError, match="bin_count"):
        read_catalog(write(tmp_path / "c.csv", "drug_id,demand_frequency\n1,3\n"))


def test_non_integer_dosage_reports_line(tmp_path):
    with pytest.raises(IngestionError, match=":3"):
        read_history(write(tmp_path / "o.csv", "order_id,drug_id,dosage\n1,1,2\n1,2,two\n"))


def test_duplicate_line_rejected(tmp_path):
    with pytest.raises(IngestionError, match="twice"):
        read_history(write(tmp_path / "o.csv", "order_id,drug_id,dosage\n1,1,2\n1,1,1\n"))


def test_unknown_drug_names_order():
    h = OrderHistory((PrescriptionOrder(9, ((4, 1),)),))
    with pytest.raises(IngestionError, match="order 9"):
        h.validate(3)


histories = st.lists(
    st.dictionaries(st.integers(1, 20), st.integers(1, 9), min_size=1, max_size=5), max_size=15
).map(lambda ods: OrderHistory(tuple(PrescriptionOrder(q, tuple(d.items())) for q, d in enumerate(ods, 1))))


@given(histories)
def test_history_round_trip(tmp_path_factory, h):
    path = tmp_path_factory.mktemp("h") / "o.csv"
    write_history(h, path)
    assert read_history(path) == h


@given(st.lists(st.tuples(st.integers(1, 9), st.integers(0, 500)), min_size=1, max_size=20))
def test_catalog_round_trip(tmp_path_factory, recs):
    cat = DrugCatalog.from_bins([b for b, _ in recs], [f for _, f in recs])
    path = tmp_path_factory.mktemp("c") / "c.csv"
    write_catalog(cat, path)
    assert read_catalog(path) == cat


def test_config_round_trip(tmp_path):
    cfg = GenConfig(drugs=40, orders=300, cliques=5, co_draw=0.75, seed=9)
    write_config(cfg, tmp_path / "g.ini")
    assert read_config(tmp_path / "g.ini") == cfg


def test_config_rejects_unknown_key(tmp_path):
    with pytest.raises(IngestionError, match="colour"):
        read_config(write(tmp_path / "g.ini", "[generator]\ncolour = red\n"))


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(order_sizes={1: 0.5, 2: 0.4})
    with pytest.raises(ValueError):
        GenConfig(drugs=0)


def test_same_seed_same_files(tmp_path):
    for name in ("a", "b"):
        cat, h = generate_history(GenConfig(orders=500, seed=3))
        write_history(h, tmp_path / f"{name}.csv")
        write_catalog(cat, tmp_path / f"{name}_cat.csv")
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)
    assert filecmp.cmp(tmp_path / "a_cat.csv", tmp_path / "b_cat.csv", shallow=False)


def test_full_co_draw_keeps_orders_in_one_clique():
    cfg = GenConfig(drugs=20, orders=2000, cliques=10, clique_size=2, co_draw=1.0, order_sizes={1: 0.5, 2: 0.5}, seed=1)
    cat, h = generate_history(cfg)
    S = jaccard_matrix(h, cat.K)
    pairs = {tuple(o.drugs) for o in h if o.size == 2}
    assert len(pairs) <= 10
    within = np.array([S[a - 1, b - 1] for a, b in pairs])
    mask = np.ones_like(S, dtype=bool)
    for a, b in pairs:
        mask[a - 1, b - 1] = mask[b - 1, a - 1] = False
    np.fill_diagonal(mask, False)
    assert within.min() > 0.2
    assert S[mask].max() == 0.0


def test_no_co_draw_uniform_popularity_near_independence():
    cfg = GenConfig(drugs=30, orders=10_000, cliques=0, co_draw=0.0, popularity_skew=0.0,
                    order_sizes={3: 1.0}, seed=2)
    cat, h = generate_history(cfg)
    S = jaccard_matrix(h, cat.K)
    p = 3 / 30                     # chance a given drug is in an order
    pair = p * (2 / 29)            # chance a given pair is
    baseline = pair / (2 * p - pair)
    off = S[~np.eye(30, dtype=bool)]
    assert abs(off.mean() - baseline) < 0.1 * baseline
    assert off.std() < 0.5 * baseline


def test_size_histogram_matches_distribution():
    cfg = GenConfig(orders=10_000, seed=5)
    _, h = generate_history(cfg)
    counts = Counter(o.size for o in h)
    tv = 0.5 * sum(abs(counts.get(k, 0) / h.N - p) for k, p in cfg.order_sizes.items())
    assert tv <= 0.02
    assert sum(p for k, p in cfg.order_sizes.items() if k <= 5) == pytest.approx(0.89, abs=0.02)


def test_single_line_orders_never_split():
    from ssca.picking import simulate
    from ssca.slotting import StrategyId, slot

    cat, h = generate_history(GenConfig(drugs=40, orders=300, cliques=5, order_sizes={1: 1.0}, seed=6))
    assert all(o.size == 1 for o in h)
    a = slot(StrategyId.SSCA, cat, jaccard_matrix(h, cat.K), 3)
    assert simulate(h, a).cross_machine_probability == 0


def test_bins_track_frequency_and_fit_fleet():
    cat, h = generate_history(GenConfig(seed=7))
    b, f = cat.bins, cat.frequencies
    assert b.min() >= 1 and b.sum() <= 3 * 286
    top, bottom = np.argsort(-f)[:10], np.argsort(f)[:10]
    assert b[top].mean() > b[bottom].mean()


def test_bins_from_frequency_rules():
    b = bins_from_frequency(np.array([10, 0, 30]), total=10, cap=6)
    assert b.sum() == 10 and b.min() >= 1 and b.max() <= 6
    with pytest.raises(CapacityError):
        bins_from_frequency(np.ones(5), total=4, cap=2)
