"""Interaction ingestion, adjacency construction, side-info enrichment, splits.

Interaction files are UTF-8 TSV ``user_id \\t item_id [\\t rating \\t ts]``
(extra columns ignored). Side-info files are TSV ``entity_id \\t a|b|c``
multi-hot attribute lists. Built graphs are immutable after construction
and safe to share across threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDatasetError, ParseError
from .rng import RandomSource

log = logging.getLogger(__name__)


@dataclass
class InteractionGraph:
    """Bipartite user-item interactions plus the side-info-enriched adjacency.

    Node indexing is users first (0..num_users-1) then items
    (num_users..num_users+num_items-1). ``base_adjacency`` holds only
    user-item edges; ``enriched_adjacency`` adds similarity edges and is
    identical to the base one until enrichment runs.
    """

    num_users: int
    num_items: int
    edges: list[tuple[int, int]]  # (user index, item-local index)
    extra_links: list[tuple[int, int]] = field(default_factory=list)  # node-index pairs, i < j

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    @property
    def density(self) -> float:
        return len(self.edges) / (self.num_users * self.num_items)

    def item_node(self, item: int) -> int:
        return self.num_users + item

    def _assemble(self, pairs) -> sp.csr_matrix:
        n = self.num_nodes
        if not pairs:
            return sp.csr_matrix((n, n))
        rows = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
        cols = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
        data = np.ones(len(pairs))
        upper = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
        mat = (upper + upper.T).tocsr()
        mat.data[:] = 1.0  # duplicates collapse back to weight 1
        return mat

    @property
    def base_adjacency(self) -> sp.csr_matrix:
        return self._assemble([(u, self.item_node(i)) for u, i in self.edges])

    @property
    def enriched_adjacency(self) -> sp.csr_matrix:
        pairs = [(u, self.item_node(i)) for u, i in self.edges]
        return self._assemble(pairs + list(self.extra_links))

    def items_by_user(self) -> list[list[int]]:
        per_user: list[list[int]] = [[] for _ in range(self.num_users)]
        for u, i in self.edges:
            per_user[u].append(i)
        return per_user


@dataclass
class SideFeatures:
    """Multi-hot attribute vectors for one entity class ('user' or 'item')."""

    entity_class: str
    attributes: list[str]
    matrix: np.ndarray  # (num entities of that class) x len(attributes)

    def dominant_labels(self) -> np.ndarray:
        """Index of the strongest attribute per entity; -1 for empty rows."""
        labels = np.argmax(self.matrix, axis=1)
        labels[self.matrix.sum(axis=1) == 0] = -1
        return labels


@dataclass
class DataSplit:
    """Per-user 7:1:2 partition with ten seeded test-set draws.

    ``train``/``validation`` come from the draw under ``seeds[0]``; each
    entry of ``test_sets`` is the test part of a full partition drawn under
    the corresponding seed, so the k-th draw partitions the edge set into
    (its own train+val remainder) and ``test_sets[k]``.
    """

    train: list[tuple[int, int]]
    validation: list[tuple[int, int]]
    test_sets: list[list[tuple[int, int]]]
    seeds: list[int]
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _partition_user_edges(items: list[int], rng: RandomSource, ratios) -> tuple[list, list, list]:
    n = len(items)
    n_test = _round_half_up(ratios[2] * n)
    n_val = _round_half_up(ratios[1] * n)
    n_train = n - n_test - n_val
    while n_train < 1:  # starvation guard: every user keeps >= 1 train edge
        if n_test > 0:
            n_test -= 1
        else:
            n_val -= 1
        n_train = n - n_test - n_val
    order = rng.permutation(n)
    shuffled = [items[j] for j in order]
    return shuffled[:n_train], shuffled[n_train : n_train + n_val], shuffled[n_train + n_val :]


def split(graph: InteractionGraph, seed: int, num_test_sets: int = 10) -> DataSplit:
    """Seeded per-user 7:1:2 split with ``num_test_sets`` test draws."""
    per_user = graph.items_by_user()
    for u, items in enumerate(per_user):
        if not items:
            raise EmptyDatasetError(f"user {u} has no interactions")
    seeds = [seed + k for k in range(num_test_sets)]
    train: list[tuple[int, int]] = []
    validation: list[tuple[int, int]] = []
    test_sets: list[list[tuple[int, int]]] = []
    for k, draw_seed in enumerate(seeds):
        rng = RandomSource(draw_seed, stream=701)
        test_k: list[tuple[int, int]] = []
        for u, items in enumerate(per_user):
            tr, va, te = _partition_user_edges(sorted(items), rng, (0.7, 0.1, 0.2))
            test_k.extend((u, i) for i in sorted(te))
            if k == 0:
                train.extend((u, i) for i in sorted(tr))
                validation.extend((u, i) for i in sorted(va))
        test_sets.append(test_k)
    return DataSplit(train=train, validation=validation, test_sets=test_sets, seeds=seeds)


def _parse_interactions(path) -> list[tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2 or not parts[0].strip() or not parts[1].strip():
                raise ParseError(f"{path}: line {lineno}: expected 'user<TAB>item', got {line!r}")
            rows.append((parts[0].strip(), parts[1].strip()))
    return rows


def _sorted_ids(ids) -> list[str]:
    uniq = set(ids)
    try:
        return sorted(uniq, key=lambda s: (0, int(s)))
    except ValueError:
        return sorted(uniq)


def ingest(path, side_path=None, side_class: str = "item"):
    """Read an interaction file (and optional side-info file).

    Returns ``(InteractionGraph, SideFeatures | None)``. Ids are reindexed
    to contiguous zero-based ranges (numeric order when every id parses as
    an integer, lexicographic otherwise); duplicate edges collapse.
    """
    raw = _parse_interactions(path)
    if not raw:
        raise EmptyDatasetError(f"{path}: no interactions found")
    user_ids = _sorted_ids(u for u, _ in raw)
    item_ids = _sorted_ids(i for _, i in raw)
    user_index = {uid: k for k, uid in enumerate(user_ids)}
    item_index = {iid: k for k, iid in enumerate(item_ids)}
    edges = sorted({(user_index[u], item_index[i]) for u, i in raw})
    graph = InteractionGraph(num_users=len(user_ids), num_items=len(item_ids), edges=edges)

    side = None
    if side_path is not None:
        side = _parse_side(side_path, side_class, user_index if side_class == "user" else item_index)
    return graph, side


def _parse_side(path, entity_class: str, index: dict) -> SideFeatures:
    per_entity: dict[int, list[str]] = {}
    attrs: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ParseError(f"{path}: line {lineno}: expected 'id<TAB>attr|attr', got {line!r}")
            entity = parts[0].strip()
            if entity not in index:
                continue  # side rows for entities absent from the interactions
            tags = [t.strip() for t in parts[1].split("|") if t.strip()]
            per_entity[index[entity]] = tags
            attrs.update(tags)
    attributes = sorted(attrs)
    col = {a: k for k, a in enumerate(attributes)}
    matrix = np.zeros((len(index), len(attributes)))
    for ent, tags in per_entity.items():
        for t in tags:
            matrix[ent, col[t]] = 1.0
    covered = len(per_entity)
    if covered < len(index):
        log.info("side info covers %d/%d %ss; the rest add no similarity edges", covered, len(index), entity_class)
    return SideFeatures(entity_class=entity_class, attributes=attributes, matrix=matrix)


def top_similar(features: np.ndarray, top_n: int) -> list[tuple[int, int]]:
    """Per-entity cosine top-n neighbour pairs (self excluded, ties to lower index).

    Zero-norm entities contribute no pairs in either direction.
    """
    n = features.shape[0]
    norms = np.linalg.norm(features, axis=1)
    alive = norms > 0
    if not np.any(alive):
        log.info("all feature rows have zero norm; no similarity edges added")
    unit = np.zeros_like(features)
    unit[alive] = features[alive] / norms[alive, None]
    sims = unit @ unit.T
    index_key = np.arange(n)
    pairs = set()
    for i in range(n):
        if not alive[i]:
            continue
        row = sims[i].copy()
        row[i] = -np.inf
        row[~alive] = -np.inf
        order = np.lexsort((index_key, -row))  # sort by (-similarity, index)
        for j in order[:top_n]:
            if not np.isfinite(row[j]):
                break  # ran out of eligible candidates
            pairs.add((min(i, int(j)), max(i, int(j))))
    return sorted(pairs)


def enrich_with_side_info(graph: InteractionGraph, side: SideFeatures, top_n: int) -> InteractionGraph:
    """Add symmetric same-class similarity links to the enriched adjacency.

    The base adjacency is untouched; each entity links to its ``top_n``
    most cosine-similar peers with weight 1, like an interaction edge.
    """
    if top_n < 0:
        raise ValueError(f"top_n must be >= 0, got {top_n}")
    if top_n == 0:
        return InteractionGraph(graph.num_users, graph.num_items, list(graph.edges), list(graph.extra_links))
    offset = 0 if side.entity_class == "user" else graph.num_users
    links = [(a + offset, b + offset) for a, b in top_similar(side.matrix, top_n)]
    merged = sorted(set(graph.extra_links) | set(links))
    return InteractionGraph(graph.num_users, graph.num_items, list(graph.edges), merged)


def normalize_adjacency(graph: InteractionGraph, enriched: bool = True) -> sp.csr_matrix:
    """Symmetric degree normalization D^-1/2 A D^-1/2; isolated rows stay zero."""
    adj = graph.enriched_adjacency if enriched else graph.base_adjacency
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    d = sp.diags(inv_sqrt)
    return (d @ adj @ d).tocsr()


def dataset_stats(graph: InteractionGraph) -> dict:
    return {
        "num_users": graph.num_users,
        "num_items": graph.num_items,
        "num_interactions": len(graph.edges),
        "density": graph.density,
        "density_pct": f"{100.0 * graph.density:.2f}%",
    }
