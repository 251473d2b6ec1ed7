"""Top-k ranking metrics and multi-test-set evaluation.

Users are evaluated against the full catalog with their known non-test
interactions masked out; metrics are averaged per test set, then across
the ten seeded sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DataSplit, InteractionGraph
from .model import score_matrix


def recall_at_k(ranked, relevant, k: int) -> float:
    """|top-k intersect relevant| / |relevant|; relevant must be non-empty."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set is empty; caller should skip this user")
    hits = sum(1 for item in ranked[:k] if item in relevant)
    return hits / len(relevant)


def ndcg_at_k(ranked, relevant, k: int) -> float:
    """Binary-gain DCG at cutoff k over the ideal front-loaded ranking."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set is empty; caller should skip this user")
    dcg = sum(
        1.0 / np.log2(rank + 2) for rank, item in enumerate(ranked[:k]) if item in relevant
    )
    ideal_hits = min(len(relevant), k)
    idcg = sum(1.0 / np.log2(rank + 2) for rank in range(ideal_hits))
    return dcg / idcg


@dataclass
class MetricReport:
    """Recall@k / NDCG@k per test set with their mean and spread."""

    k: int
    recall_per_set: list[float] = field(default_factory=list)
    ndcg_per_set: list[float] = field(default_factory=list)

    @property
    def recall_mean(self) -> float:
        return float(np.mean(self.recall_per_set))

    @property
    def recall_std(self) -> float:
        return float(np.std(self.recall_per_set))

    @property
    def ndcg_mean(self) -> float:
        return float(np.mean(self.ndcg_per_set))

    @property
    def ndcg_std(self) -> float:
        return float(np.std(self.ndcg_per_set))

    def to_csv(self) -> str:
        lines = [f"test_set,recall@{self.k},ndcg@{self.k}"]
        for idx, (r, n) in enumerate(zip(self.recall_per_set, self.ndcg_per_set)):
            lines.append(f"{idx},{r:.10g},{n:.10g}")
        lines.append(f"mean,{self.recall_mean:.10g},{self.ndcg_mean:.10g}")
        lines.append(f"std,{self.recall_std:.10g},{self.ndcg_std:.10g}")
        return "\n".join(lines) + "\n"


def rank_items(scores_row: np.ndarray) -> np.ndarray:
    """Item ids by descending score; ties break to the lower id."""
    return np.lexsort((np.arange(len(scores_row)), -scores_row))


def evaluate_rankings(scores: np.ndarray, graph: InteractionGraph, split: DataSplit, k: int = 20) -> MetricReport:
    """Score-matrix evaluation across every test draw.

    For draw j, a user's candidate pool is the full catalog minus their
    interactions outside that draw's test set (so test items are always
    reachable and seen items never rank). Users without test items in a
    draw are skipped.
    """
    interacted = [set() for _ in range(graph.num_users)]
    for u, i in graph.edges:
        interacted[u].add(i)
    report = MetricReport(k=k)
    for test_edges in split.test_sets:
        test_items = [set() for _ in range(graph.num_users)]
        for u, i in test_edges:
            test_items[u].add(i)
        recalls, ndcgs = [], []
        for u in range(graph.num_users):
            relevant = test_items[u]
            if not relevant:
                continue
            row = scores[u].copy()
            masked = interacted[u] - relevant
            if masked:
                row[list(masked)] = -np.inf
            ranked = rank_items(row)
            recalls.append(recall_at_k(ranked, relevant, k))
            ndcgs.append(ndcg_at_k(ranked, relevant, k))
        report.recall_per_set.append(float(np.mean(recalls)) if recalls else 0.0)
        report.ndcg_per_set.append(float(np.mean(ndcgs)) if ndcgs else 0.0)
    return report


def evaluate_embeddings(x_final: np.ndarray, graph: InteractionGraph, split: DataSplit, k: int = 20) -> MetricReport:
    """Inner-product scoring of denoised embeddings, then ranking metrics."""
    scores = score_matrix(x_final, graph.num_users)
    return evaluate_rankings(scores, graph, split, k)
