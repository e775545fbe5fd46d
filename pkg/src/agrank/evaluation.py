"""Ranklist evaluation: graded-relevance nDCG, qrels IO, the
common-object-count baseline, and the CSV evaluation report."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from agrank.ranking import RankEntry, RankList

MAX_RELEVANCE = 3


@dataclass
class RelevanceAnnotations:
    """Graded relevance (0..3) per (query_id, image_id) pair."""

    grades: dict[tuple[str, str], int] = field(default_factory=dict)

    def set(self, query_id: str, image_id: str, relevance: int) -> None:
        if relevance not in (0, 1, 2, 3):
            raise ValueError(f"relevance must be 0..3, got {relevance}")
        self.grades[(query_id, image_id)] = relevance

    def get(self, query_id: str, image_id: str) -> int | None:
        return self.grades.get((query_id, image_id))

    def for_query(self, query_id: str) -> dict[str, int]:
        return {img: rel for (q, img), rel in self.grades.items() if q == query_id}

    def query_ids(self) -> list[str]:
        return sorted({q for q, _ in self.grades})

    @classmethod
    def load(cls, path) -> "RelevanceAnnotations":
        ann = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
                ann.set(parts[0], parts[1], int(parts[2]))
        return ann

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for (q, img), rel in sorted(self.grades.items()):
                fh.write(f"{q}\t{img}\t{rel}\n")


def dcg_at_k(relevances: Sequence[int], k: int) -> float:
    """Discounted cumulative gain with gain 2^rel - 1 and discount log2(i+1).

    The i+1 discount keeps the first position undiscounted and preserves
    nDCG = 1 for the ideal ordering. k beyond the list truncates.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 0.0
    for i, rel in enumerate(relevances[:k], start=1):
        total += (2.0**rel - 1.0) / math.log2(i + 1)
    return total


def ndcg_at_k(
    ranked_ids: Sequence[str] | RankList,
    annotations: RelevanceAnnotations | Mapping[str, int],
    k: int,
    query_id: str | None = None,
) -> tuple[float, int]:
    """Normalized DCG at truncation k; returns (ndcg, unannotated_count).

    The ideal ordering is the relevance-descending sort of the query's full
    annotated reference set. Ranked images without an annotation count as
    relevance 0 (and are tallied in the second return value). An
    all-irrelevant reference set yields 1.0 by convention.
    """
    if isinstance(ranked_ids, RankList):
        query_id = ranked_ids.query_id
        ranked_ids = [e.image_id for e in ranked_ids.entries]
    if isinstance(annotations, RelevanceAnnotations):
        if query_id is None:
            raise ValueError("query_id required with RelevanceAnnotations")
        grades = annotations.for_query(query_id)
    else:
        grades = dict(annotations)

    unannotated = sum(1 for img in ranked_ids[:k] if img not in grades)
    rels = [grades.get(img, 0) for img in ranked_ids]
    dcg = dcg_at_k(rels, k)
    ideal = sorted(grades.values(), reverse=True)
    idcg = dcg_at_k(ideal, k)
    if idcg == 0.0:
        return 1.0, unannotated
    return min(1.0, dcg / idcg), unannotated


def baseline_common_objects(query_record, database_records) -> RankList:
    """Rank by the (normalized) number of object classes in common.

    score = |multiset intersection of class labels| / query object count.
    """
    q_counts = Counter(det.class_label for det in query_record.detections)
    denom = max(1, query_record.num_objects)
    entries = []
    for rec in database_records:
        d_counts = Counter(det.class_label for det in rec.detections)
        common = sum((q_counts & d_counts).values())
        score = common / denom
        entries.append(RankEntry(image_id=rec.image_id, fused=score, s_lcl=0.0, s_gbl=0.0, s_edge=0.0))
    entries.sort(key=lambda e: (-e.fused, e.image_id))
    return RankList(query_id=query_record.image_id, entries=tuple(entries))


def evaluate_ranklists(
    ranklists: Iterable[RankList],
    annotations: RelevanceAnnotations,
    ks: Sequence[int],
) -> tuple[list[dict], int]:
    """nDCG per (query, k) plus a mean row per k.

    Returns (rows, unannotated_count). Row dicts have keys query_id, k,
    ndcg; mean rows use query_id "mean".
    """
    ks = sorted(set(int(k) for k in ks))
    rows: list[dict] = []
    warn_total = 0
    per_k: dict[int, list[float]] = {k: [] for k in ks}
    for rl in sorted(ranklists, key=lambda r: r.query_id):
        for k in ks:
            value, unann = ndcg_at_k(rl, annotations, k)
            warn_total += unann
            rows.append({"query_id": rl.query_id, "k": k, "ndcg": value})
            per_k[k].append(value)
    for k in ks:
        vals = per_k[k]
        mean = sum(vals) / len(vals) if vals else 0.0
        rows.append({"query_id": "mean", "k": k, "ndcg": mean})
    return rows, warn_total


def write_report(rows: list[dict], path, config_line: str | None = None) -> None:
    """CSV report; one row per (query, k), mean rows last per k."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_line:
            fh.write(f"# {config_line}\n")
        writer = csv.writer(fh)
        writer.writerow(["query_id", "k", "ndcg"])
        for row in rows:
            writer.writerow([row["query_id"], row["k"], repr(row["ndcg"])])


def read_report(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    for row in reader:
        rows.append({"query_id": row["query_id"], "k": int(row["k"]), "ndcg": float(row["ndcg"])})
    return rows
