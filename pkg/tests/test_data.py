import numpy as np
import pytest

from diffgt.data import (
    InteractionGraph,
    SideFeatures,
    dataset_stats,
    enrich_with_side_info,
    ingest,
    normalize_adjacency,
    split,
    top_similar,
)
from diffgt.errors import EmptyDatasetError, ParseError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_ingest_minimal_graph(tmp_path):
    g, side = ingest(write(tmp_path / "d.tsv", "7\t3\n"))
    assert side is None
    assert (g.num_users, g.num_items) == (1, 1)
    assert g.edges == [(0, 0)]
    assert g.density == 1.0


def test_ingest_collapses_duplicates(tmp_path):
    g, _ = ingest(write(tmp_path / "d.tsv", "1\t2\n1\t2\n1\t3\n"))
    assert len(g.edges) == 2


def test_ingest_ignores_extra_columns_and_reindexes(tmp_path):
    g, _ = ingest(write(tmp_path / "d.tsv", "10\t200\t5\t999\n2\t100\t3\t111\n"))
    assert g.num_users == 2 and g.num_items == 2
    # numeric id order: user 2 -> 0, user 10 -> 1; item 100 -> 0, item 200 -> 1
    assert g.edges == [(0, 0), (1, 1)]


def test_ingest_malformed_row_reports_line(tmp_path):
    p = write(tmp_path / "d.tsv", "1\t2\nbroken-row\n")
    with pytest.raises(ParseError, match="line 2"):
        ingest(p)


def test_ingest_empty_file(tmp_path):
    with pytest.raises(EmptyDatasetError):
        ingest(write(tmp_path / "d.tsv", "\n# comment only\n"))


def test_foursquare_shaped_statistics(tmp_path):
    # fabricate a dump with the Foursquare check-in dataset's shape:
    # 2,060 users / 2,876 items / 27,149 interactions -> 0.46% density
    rng = np.random.default_rng(0)
    n_u, n_i, target = 2060, 2876, 27149
    lines = [f"{u}\t{u % n_i}" for u in range(n_u)]  # every user appears
    lines += [f"{i % n_u}\t{i}" for i in range(n_i)]  # every item appears
    seen = {(u, u % n_i) for u in range(n_u)} | {(i % n_u, i) for i in range(n_i)}
    while len(seen) < target:
        u = int(rng.integers(0, n_u))
        i = int(rng.integers(0, n_i))
        if (u, i) not in seen:
            seen.add((u, i))
            lines.append(f"{u}\t{i}")
    g, _ = ingest(write(tmp_path / "fsq.tsv", "\n".join(lines) + "\n"))
    stats = dataset_stats(g)
    assert stats["num_users"] == 2060
    assert stats["num_items"] == 2876
    assert stats["num_interactions"] == 27149
    assert stats["density_pct"] == "0.46%"


def test_normalize_single_pair():
    g = InteractionGraph(1, 1, [(0, 0)])
    a = normalize_adjacency(g).toarray()
    assert a == pytest.approx(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_normalize_hand_degrees():
    # one user connected to 4 items of degree 1: entry = 1/sqrt(4*1)
    g = InteractionGraph(1, 4, [(0, i) for i in range(4)])
    a = normalize_adjacency(g).toarray()
    assert a[0, 1:] == pytest.approx(np.full(4, 0.5))
    assert np.allclose(a, a.T)


def test_normalize_isolated_node_rows_zero():
    g = InteractionGraph(2, 2, [(0, 0), (0, 1)])  # user 1 interacts with nothing
    # user 1 has no edges at all; its row/column must be exactly zero
    a = normalize_adjacency(g).toarray()
    assert np.all(a[1] == 0) and np.all(a[:, 1] == 0)


def test_enrich_top0_is_identity():
    g = InteractionGraph(2, 3, [(0, 0), (1, 2)])
    side = SideFeatures("item", ["a"], np.ones((3, 1)))
    g2 = enrich_with_side_info(g, side, top_n=0)
    assert (g2.enriched_adjacency != g.base_adjacency).nnz == 0


def test_enrich_identical_vectors_mutual_edge():
    g = InteractionGraph(1, 2, [(0, 0), (0, 1)])
    side = SideFeatures("item", ["a", "b"], np.array([[1.0, 1.0], [1.0, 1.0]]))
    g2 = enrich_with_side_info(g, side, top_n=1)
    assert g2.extra_links == [(1, 2)]  # item nodes 1 and 2 linked
    assert np.allclose(g2.enriched_adjacency.toarray(), g2.enriched_adjacency.toarray().T)


def test_enrich_matches_bruteforce_cosine_oracle():
    feats = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.9, 0.1, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.9, 0.4],
            [1.0, 1.0, 1.0],
        ]
    )
    top_n = 2
    # brute-force oracle: exhaustive pairwise cosine, python-side ranking
    expected = set()
    for i in range(5):
        sims = []
        for j in range(5):
            if j == i:
                continue
            c = feats[i] @ feats[j] / (np.linalg.norm(feats[i]) * np.linalg.norm(feats[j]))
            sims.append((-c, j))
        for _, j in sorted(sims)[:top_n]:
            expected.add((min(i, j), max(i, j)))
    assert set(top_similar(feats, top_n)) == expected

    g = InteractionGraph(1, 5, [(0, k) for k in range(5)])
    g2 = enrich_with_side_info(g, SideFeatures("item", ["x", "y", "z"], feats), top_n)
    assert set(g2.extra_links) == {(a + 1, b + 1) for a, b in expected}


def test_enrich_zero_norm_rows_add_nothing():
    feats = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.1]])
    pairs = top_similar(feats, top_n=2)
    assert pairs == [(1, 2)]


def test_enrich_user_class_links_user_nodes():
    g = InteractionGraph(3, 2, [(0, 0), (1, 1), (2, 0)])
    side = SideFeatures("user", ["a"], np.ones((3, 1)))
    g2 = enrich_with_side_info(g, side, top_n=2)
    # user nodes are 0..2, so links stay in that range (no item offset)
    assert g2.extra_links == [(0, 1), (0, 2), (1, 2)]


def test_enrichment_never_removes_interactions():
    g = InteractionGraph(2, 2, [(0, 0), (1, 1)])
    side = SideFeatures("item", ["a"], np.ones((2, 1)))
    g2 = enrich_with_side_info(g, side, top_n=1)
    base = g.base_adjacency.toarray()
    enriched = g2.enriched_adjacency.toarray()
    assert np.all(enriched >= base)


def test_split_exact_ratio_user():
    g = InteractionGraph(1, 10, [(0, i) for i in range(10)])
    s = split(g, seed=1)
    assert (len(s.train), len(s.validation), len(s.test_sets[0])) == (7, 1, 2)


def test_split_single_edge_user_keeps_train():
    g = InteractionGraph(1, 1, [(0, 0)])
    s = split(g, seed=3)
    assert s.train == [(0, 0)]
    assert s.validation == [] and all(not t for t in s.test_sets)


def test_split_deterministic_and_ten_distinct_seeds():
    g = InteractionGraph(3, 30, [(u, i) for u in range(3) for i in range(30)])
    s1 = split(g, seed=9)
    s2 = split(g, seed=9)
    assert s1 == s2
    assert s1.seeds == list(range(9, 19))
    assert len(s1.test_sets) == 10
    assert len({tuple(t) for t in s1.test_sets}) == 10


def test_split_partitions_per_draw():
    g = InteractionGraph(2, 20, [(u, i) for u in range(2) for i in range(20)])
    s = split(g, seed=5)
    all_edges = set(g.edges)
    base = set(s.train) | set(s.validation) | set(s.test_sets[0])
    assert base == all_edges
    assert not (set(s.train) & set(s.validation))
    assert not (set(s.train) & set(s.test_sets[0]))
    assert not (set(s.validation) & set(s.test_sets[0]))
    for k in range(10):
        # each draw's test set has the per-user 20% size
        assert len(s.test_sets[k]) == 2 * 4


def test_adjacency_symmetry_exact():
    g = InteractionGraph(3, 4, [(0, 0), (1, 2), (2, 3), (0, 1)])
    norm = normalize_adjacency(g)
    assert (norm != norm.T).nnz == 0
