"""Filtered rank-based link-prediction metrics and relation groupings.

For every evaluated triple both perturbations are ranked: all candidate
tails for (h, r, ?) and all candidate heads for (?, r, t).  Competitors
forming known-true triples anywhere in train/valid/test (other than the
evaluated entity itself) are filtered out before ranking.  Ties resolve
to the realistic rank (mean of best and worst rank among equal scores)
by default; optimistic and pessimistic policies are available.

Relations can additionally be partitioned into frequent vs long-tail
groups (by training-triple count) or correlated vs less-correlated
groups (by the best |Pearson coefficient| over head/tail attribute
pairs), and per-group MRR is reported next to the all-triples row.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from litrel import scoring
from litrel.data import KnowledgeGraph
from litrel.errors import ValidationError

TIE_POLICIES = ("realistic", "optimistic", "pessimistic")


@dataclass
class RankRecord:
    head: int
    relation: int
    tail: int
    head_rank: float
    tail_rank: float


@dataclass
class RelationGrouping:
    """Partition of relations into two labeled groups."""

    kind: str                    # "frequency" or "correlation"
    threshold: float
    partition: dict[int, str]    # relation -> group label
    labels: tuple[str, str]      # (upper group, lower group)

    def group_of(self, relation: int) -> str:
        return self.partition[relation]


@dataclass
class EvaluationReport:
    mrr: float
    hits1: float
    hits10: float
    num_triples: int
    group_metrics: dict[str, dict] = field(default_factory=dict)
    grouping_kind: str | None = None

    def to_dict(self) -> dict:
        out = {
            "mrr": self.mrr,
            "hits_at_1": self.hits1,
            "hits_at_10": self.hits10,
            "num_triples": self.num_triples,
        }
        if self.grouping_kind is not None:
            out["grouping"] = self.grouping_kind
            out["groups"] = self.group_metrics
        return out

    def to_table(self) -> str:
        lines = [
            f"{'group':<16} {'triples':>8} {'MRR':>8} {'H@1':>8} {'H@10':>8}",
        ]
        def fmt(value):
            return "--" if value is None else f"{value:.4f}"

        for label, metrics in self.group_metrics.items():
            lines.append(
                f"{label:<16} {metrics['num_triples']:>8} {fmt(metrics['mrr']):>8} "
                f"{fmt(metrics['hits_at_1']):>8} {fmt(metrics['hits_at_10']):>8}"
            )
        lines.append(
            f"{'all triples':<16} {self.num_triples:>8} {self.mrr:>8.4f} "
            f"{self.hits1:>8.4f} {self.hits10:>8.4f}"
        )
        return "\n".join(lines)


def _rank_of(scores: np.ndarray, true_index: int, filtered: set[int], tie_policy: str) -> float:
    """Rank of the true entity after filtering known-true competitors."""
    true_score = scores[true_index]
    mask = np.ones(scores.shape[0], dtype=bool)
    for competitor in filtered:
        mask[competitor] = False
    mask[true_index] = True
    kept = scores[mask]
    better = int((kept > true_score).sum())
    ties = int((kept == true_score).sum()) - 1  # excluding the true entity
    if tie_policy == "optimistic":
        return float(better + 1)
    if tie_policy == "pessimistic":
        return float(better + ties + 1)
    return better + 1 + ties / 2.0


def rank_triple(triple, state, graph: KnowledgeGraph, tie_policy: str = "realistic") -> RankRecord:
    """Filtered head and tail ranks of one triple under the trained model."""
    if tie_policy not in TIE_POLICIES:
        raise ValidationError(f"unknown tie policy {tie_policy!r}")
    h, r, t = (int(x) for x in triple)
    r_lit = state.fused_relation(r)
    model, tables = state.model, state.tables
    tail_scores = scoring.score_all_tails(h, r_lit, model, tables)
    tail_rank = _rank_of(tail_scores, t, graph.filter_tails.get((h, r), set()), tie_policy)
    head_scores = scoring.score_all_heads(t, r_lit, model, tables)
    head_rank = _rank_of(head_scores, h, graph.filter_heads.get((r, t), set()), tie_policy)
    return RankRecord(head=h, relation=r, tail=t, head_rank=head_rank, tail_rank=tail_rank)


def compute_metrics(records: list[RankRecord]) -> tuple[float, float, float]:
    """Pool head and tail ranks (two per triple) into MRR, Hits@1, Hits@10."""
    if not records:
        raise ValidationError("cannot compute metrics over an empty record list")
    ranks = np.array([rank for rec in records for rank in (rec.head_rank, rec.tail_rank)])
    mrr = float((1.0 / ranks).mean())
    hits1 = float((ranks <= 1).mean())
    hits10 = float((ranks <= 10).mean())
    return mrr, hits1, hits10


def pearson(xs, ys) -> float:
    """Pearson correlation; 0 when n < 2 or a series has zero variance."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValidationError(f"length mismatch: {xs.shape} vs {ys.shape}")
    n = xs.shape[0]
    if n < 2:
        return 0.0
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(dx @ dy) / (sx * sy)


def group_by_frequency(graph: KnowledgeGraph, threshold_count: float) -> RelationGrouping:
    """Split relations into frequent (> threshold training triples) vs long-tail."""
    if threshold_count < 0:
        raise ValidationError("frequency threshold must be >= 0")
    counts = np.bincount(graph.train[:, 1], minlength=graph.num_relations)
    partition = {
        r: "frequent" if counts[r] > threshold_count else "long-tail"
        for r in range(graph.num_relations)
    }
    return RelationGrouping(
        kind="frequency",
        threshold=float(threshold_count),
        partition=partition,
        labels=("frequent", "long-tail"),
    )


def frequency_threshold_from_fraction(graph: KnowledgeGraph, fraction: float) -> float:
    """Absolute training-triple threshold for a fraction like 0.0255."""
    if not 0 <= fraction <= 1:
        raise ValidationError("fraction must be within [0, 1]")
    return fraction * graph.train.shape[0]


def group_by_correlation(
    graph: KnowledgeGraph, threshold: float, min_samples: int = 3
) -> RelationGrouping:
    """Split relations by head/tail attribute correlation over training triples.

    A relation is "correlated" iff some (head attribute, tail attribute)
    pair, over the relation's training triples where both values are
    present, reaches |Pearson coefficient| >= threshold.  Pairs with
    fewer than ``min_samples`` complete observations are skipped.
    """
    if not 0 <= threshold <= 1:
        raise ValidationError("correlation threshold must be within [0, 1]")
    values = graph.literals.values
    present = graph.literals.present
    partition = {}
    for relation in range(graph.num_relations):
        triples = graph.train[graph.train[:, 1] == relation]
        correlated = False
        if triples.shape[0] >= min_samples and graph.num_attributes > 0:
            heads = triples[:, 0]
            tails = triples[:, 2]
            head_mask = present[heads]   # (n, |A|)
            tail_mask = present[tails]
            for ha in range(graph.num_attributes):
                if correlated:
                    break
                if head_mask[:, ha].sum() < min_samples:
                    continue
                for ta in range(graph.num_attributes):
                    both = head_mask[:, ha] & tail_mask[:, ta]
                    if int(both.sum()) < min_samples:
                        continue
                    coef = pearson(values[heads[both], ha], values[tails[both], ta])
                    if abs(coef) >= threshold:
                        correlated = True
                        break
        partition[relation] = "correlated" if correlated else "less-correlated"
    return RelationGrouping(
        kind="correlation",
        threshold=float(threshold),
        partition=partition,
        labels=("correlated", "less-correlated"),
    )


def evaluate(
    state,
    graph: KnowledgeGraph,
    grouping: RelationGrouping | None = None,
    split: str = "test",
    tie_policy: str = "realistic",
) -> EvaluationReport:
    """Rank every triple of a split and assemble the metric report."""
    triples = graph.split(split)
    if triples.shape[0] == 0:
        raise ValidationError(f"split {split!r} is empty")
    records = [rank_triple(triple, state, graph, tie_policy) for triple in triples]
    mrr, hits1, hits10 = compute_metrics(records)
    report = EvaluationReport(
        mrr=mrr, hits1=hits1, hits10=hits10, num_triples=len(records)
    )
    if grouping is not None:
        report.grouping_kind = grouping.kind
        for label in grouping.labels:
            group_records = [rec for rec in records if grouping.group_of(rec.relation) == label]
            if group_records:
                g_mrr, g_h1, g_h10 = compute_metrics(group_records)
                report.group_metrics[label] = {
                    "num_triples": len(group_records),
                    "mrr": g_mrr,
                    "hits_at_1": g_h1,
                    "hits_at_10": g_h10,
                }
            else:
                report.group_metrics[label] = {
                    "num_triples": 0,
                    "mrr": None,
                    "hits_at_1": None,
                    "hits_at_10": None,
                }
    return report


def save_report(report: EvaluationReport, json_path: str, table_path: str | None = None) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if table_path is not None:
        with open(table_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_table() + "\n")
