"""Query-vs-database ranking: match the query graph against every database
graph, fuse the decomposed scores, and emit a deterministic ranklist."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from agrank.graph import AttributeGraph, build_graph, write_graph_cache
from agrank.matching import MatcherConfig, match_graphs
from agrank.records import parse_manifest

ABLATIONS = ("drop_global_node", "drop_edges", "drop_weights")


@dataclass(frozen=True)
class RankParams:
    """Fusion constants, matcher settings, and ablation switches.

    fused = alpha * s_lcl + beta * s_gbl + (1 - alpha - beta) * s_edge.
    """

    alpha: float = 0.4
    beta: float = 0.4
    matcher: MatcherConfig = field(default_factory=MatcherConfig)
    ablation: frozenset = frozenset()

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta > 1.0:
            raise ValueError("need alpha >= 0, beta >= 0, alpha + beta <= 1")
        object.__setattr__(self, "ablation", frozenset(self.ablation))
        unknown = self.ablation - set(ABLATIONS)
        if unknown:
            raise ValueError(f"unknown ablation switches: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "ablation": sorted(self.ablation),
            **self.matcher.to_dict(),
        }


@dataclass(frozen=True)
class RankEntry:
    image_id: str
    fused: float
    s_lcl: float
    s_gbl: float
    s_edge: float


@dataclass(frozen=True)
class RankList:
    query_id: str
    entries: tuple[RankEntry, ...]
    status: str = "ok"


def combine_score(s_lcl: float, s_gbl: float, s_edge: float, alpha: float, beta: float) -> float:
    return alpha * s_lcl + beta * s_gbl + (1.0 - alpha - beta) * s_edge


def score_one(query: AttributeGraph, db: AttributeGraph, params: RankParams) -> RankEntry:
    """Match one pair and fuse the decomposed scores per the params."""
    wts = None
    if "drop_weights" in params.ablation and query.num_local:
        wts = np.full(query.num_local, 1.0 / query.num_local)
    result = match_graphs(
        query,
        db,
        wts=wts,
        cfg=params.matcher,
        alpha=params.alpha,
        beta=params.beta,
        drop_global_node="drop_global_node" in params.ablation,
        drop_edges="drop_edges" in params.ablation,
    )
    return RankEntry(
        image_id=db.image_id,
        fused=result.fused,
        s_lcl=result.s_lcl,
        s_gbl=result.s_gbl,
        s_edge=result.s_edge,
    )


def rank(
    query: AttributeGraph,
    database: Mapping[str, AttributeGraph] | Iterable[AttributeGraph],
    params: RankParams | None = None,
    threads: int = 1,
) -> RankList:
    """Score every database graph against the query and sort.

    The final sort (fused descending, image_id ascending on ties) makes the
    result independent of scheduling, so any thread count yields the same
    ranklist.
    """
    params = params or RankParams()
    graphs = list(database.values()) if isinstance(database, Mapping) else list(database)
    if not graphs:
        warnings.warn(f"empty database for query '{query.image_id}'")
        return RankList(query_id=query.image_id, entries=(), status="empty-database")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(lambda g: score_one(query, g, params), graphs))
    else:
        entries = [score_one(query, g, params) for g in graphs]

    entries.sort(key=lambda e: (-e.fused, e.image_id))
    return RankList(query_id=query.image_id, entries=tuple(entries))


def precompute_graphs(manifest_path, cache_path, header_extra: dict | None = None) -> int:
    """Build graphs for every manifest record and write the cache.

    Idempotent: identical inputs produce a byte-identical cache file.
    """
    records = parse_manifest(manifest_path)
    graphs = [build_graph(rec) for rec in records]
    write_graph_cache(graphs, cache_path, header_extra=header_extra)
    return len(graphs)


# --- ranklist file format (TSV) --------------------------------------------


def write_ranklist(ranklist: RankList, params: RankParams, path) -> None:
    """Tab-separated ranklist with a header echoing the full run config."""
    items = " ".join(f"{k}={v}" for k, v in sorted(params.to_dict().items()))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# query={ranklist.query_id} {items} status={ranklist.status}\n")
        for rank_pos, e in enumerate(ranklist.entries, start=1):
            fh.write(
                f"{rank_pos}\t{e.image_id}\t{e.fused!r}\t{e.s_lcl!r}\t{e.s_gbl!r}\t{e.s_edge!r}\n"
            )


def read_ranklist(path) -> RankList:
    query_id = ""
    status = "ok"
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("query="):
                        query_id = token[len("query="):]
                    elif token.startswith("status="):
                        status = token[len("status="):]
                continue
            _, image_id, fused, s_lcl, s_gbl, s_edge = line.split("\t")
            entries.append(
                RankEntry(
                    image_id=image_id,
                    fused=float(fused),
                    s_lcl=float(s_lcl),
                    s_gbl=float(s_gbl),
                    s_edge=float(s_edge),
                )
            )
    return RankList(query_id=query_id, entries=tuple(entries), status=status)
