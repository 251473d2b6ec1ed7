"""Seeded synthetic datasets for diagnostics, timing runs, and tests.

The cluster generators plant the anisotropic, sign-structured geometry
that implicit-feedback embeddings exhibit, so noise-direction effects are
measurable at desk scale without shipping any external dataset.
"""

from __future__ import annotations

import numpy as np

from .data import InteractionGraph, SideFeatures
from .rng import RandomSource


def anisotropic_clusters(
    num_points: int,
    dim: int,
    num_clusters: int,
    rng: RandomSource,
    elongation: float = 6.0,
    jitter: float = 0.15,
):
    """Elongated point clusters with distinct per-cluster sign patterns.

    Each cluster stretches along its own axis direction whose coordinates
    carry a fixed sign pattern, so the cloud is anisotropic and
    orthant-separated. Returns ``(points, labels)``.
    """
    signs = np.where(rng.uniform(0.0, 1.0, (num_clusters, dim)) < 0.5, -1.0, 1.0)
    profile = rng.uniform(0.2, 1.0, (num_clusters, dim))
    # a few coordinates per cluster dominate: that is the elongation
    for c in range(num_clusters):
        heavy = rng.choice_without_replacement(dim, max(1, dim // 4))
        profile[c, heavy] *= elongation
    directions = signs * profile
    points = np.zeros((num_points, dim))
    labels = np.zeros(num_points, dtype=np.int64)
    for p in range(num_points):
        c = p % num_clusters
        scale = rng.uniform(0.6, 1.6, ())
        noise = rng.standard_normal(1, dim)[0] * jitter
        points[p] = scale * directions[c] + noise
        labels[p] = c
    return points, labels


def clustered_interactions(
    num_users: int,
    num_items: int,
    num_clusters: int,
    edges_per_user: int,
    rng: RandomSource,
    mismatch_rate: float = 0.25,
):
    """Implicit-feedback graph with planted co-cluster structure + label noise.

    Users and items are split round-robin into clusters; each user mostly
    interacts inside their cluster, with ``mismatch_rate`` of edges drawn
    across clusters (the false positives a recommender has to shrug off).
    Side features tag each item with its cluster, one-hot.
    """
    item_cluster = np.arange(num_items) % num_clusters
    items_of = [np.flatnonzero(item_cluster == c) for c in range(num_clusters)]
    edges = set()
    for u in range(num_users):
        c = u % num_clusters
        count = 0
        attempts = 0
        while count < edges_per_user and attempts < 50 * edges_per_user:
            attempts += 1
            if rng.uniform(0.0, 1.0, ()) < mismatch_rate:
                i = int(rng.integers(0, num_items))
            else:
                pool = items_of[c]
                i = int(pool[rng.integers(0, len(pool))])
            if (u, i) not in edges:
                edges.add((u, i))
                count += 1
    graph = InteractionGraph(num_users, num_items, sorted(edges))
    features = np.zeros((num_items, num_clusters))
    features[np.arange(num_items), item_cluster] = 1.0
    side = SideFeatures(
        entity_class="item",
        attributes=[f"cluster{c}" for c in range(num_clusters)],
        matrix=features,
    )
    return graph, side


def bipartite_random(num_users: int, num_items: int, num_edges: int, rng: RandomSource) -> InteractionGraph:
    """Random bipartite graph where every user keeps at least one edge."""
    edges = {(u, int(rng.integers(0, num_items))) for u in range(num_users)}
    while len(edges) < num_edges:
        u = int(rng.integers(0, num_users))
        i = int(rng.integers(0, num_items))
        edges.add((u, i))
    return InteractionGraph(num_users, num_items, sorted(edges))


def write_interaction_tsv(path, graph: InteractionGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, i in graph.edges:
            fh.write(f"{u}\t{i}\n")


def write_side_tsv(path, side: SideFeatures) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ent in range(side.matrix.shape[0]):
            tags = [side.attributes[j] for j in np.flatnonzero(side.matrix[ent] > 0)]
            fh.write(f"{ent}\t{'|'.join(tags)}\n")
