"""Constrained matching between two attribute graphs.

Matching is posed on an association graph whose nodes are candidate
node-correspondences: object nodes pair only within the same class, scene
nodes only with each other. A reweighted random walk over the candidate
affinity matrix produces soft correspondence scores; an optimal bipartite
assignment discretizes them; the match quality decomposes into object,
scene and edge scores.

An exhaustive enumerator over small instances serves as the independent
optimum oracle for the walk-based solver.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from agrank.graph import AttributeGraph, EdgeFeature, GLOBAL_EDGE, LOCAL_EDGE

_TIE_EPS = 1e-12


@dataclass(frozen=True, order=True)
class Candidate:
    """One candidate correspondence; None stands for the scene node."""

    query: int | None
    db: int | None

    @property
    def is_global(self) -> bool:
        return self.query is None

    def sort_key(self) -> tuple[int, int]:
        big = 1 << 30
        return (big if self.query is None else self.query, big if self.db is None else self.db)


@dataclass(frozen=True)
class MatcherConfig:
    """Affinity and solver parameters.

    node_affinity_mode: "cosine" or "rbf" (Gaussian on the attribute
    difference with bandwidth rbf_sigma). Edge affinities are products of
    Gaussians over the per-channel feature deltas.
    """

    node_affinity_mode: str = "cosine"
    rbf_sigma: float = 1.0
    sigma_mu: float = 0.2
    sigma_theta: float = 30.0
    sigma_o: float = 0.2
    sigma_area: float = 0.15
    rw_mix: float = 0.2
    reweight_strength: float = 30.0
    sinkhorn_iters: int = 20
    max_iters: int = 300
    tol: float = 1e-6

    def __post_init__(self):
        if self.node_affinity_mode not in ("cosine", "rbf"):
            raise ValueError(f"unknown node_affinity_mode {self.node_affinity_mode!r}")
        for name in ("rbf_sigma", "sigma_mu", "sigma_theta", "sigma_o", "sigma_area", "tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.rw_mix < 1.0):
            raise ValueError("rw_mix must lie in (0, 1)")
        if self.reweight_strength <= 0 or self.sinkhorn_iters < 1 or self.max_iters < 1:
            raise ValueError("invalid solver parameters")

    def to_dict(self) -> dict:
        return {
            "node_affinity_mode": self.node_affinity_mode,
            "rbf_sigma": self.rbf_sigma,
            "sigma_mu": self.sigma_mu,
            "sigma_theta": self.sigma_theta,
            "sigma_o": self.sigma_o,
            "sigma_area": self.sigma_area,
            "rw_mix": self.rw_mix,
            "reweight_strength": self.reweight_strength,
            "sinkhorn_iters": self.sinkhorn_iters,
            "max_iters": self.max_iters,
            "tol": self.tol,
        }


@dataclass(frozen=True)
class Assignment:
    """One-to-one correspondence plus the pre-discretization soft scores."""

    pairs: tuple[Candidate, ...]
    soft_scores: dict[Candidate, float] = field(default_factory=dict)

    def local_mapping(self) -> dict[int, int]:
        return {c.query: c.db for c in self.pairs if not c.is_global}

    @property
    def has_global(self) -> bool:
        return any(c.is_global for c in self.pairs)


@dataclass(frozen=True)
class MatchResult:
    assignment: Assignment
    s_lcl: float
    s_gbl: float
    s_edge: float
    fused: float
    degenerate: bool = False  # all-zero affinity matrix, uniform soft scores


def candidate_correspondences(
    q: AttributeGraph, d: AttributeGraph, include_global: bool = True
) -> list[Candidate]:
    """All class-consistent object pairs plus the single scene pair."""
    cands = [
        Candidate(qi, di)
        for qi, qn in enumerate(q.local_nodes)
        for di, dn in enumerate(d.local_nodes)
        if qn.class_label == dn.class_label
    ]
    if include_global:
        cands.append(Candidate(None, None))
    return cands


def node_affinity(a: np.ndarray, b: np.ndarray, cfg: MatcherConfig | None = None) -> float:
    """Similarity of two attribute vectors in [0, 1]."""
    cfg = cfg or MatcherConfig()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"attribute dimensionality mismatch: {a.shape} vs {b.shape}")
    if cfg.node_affinity_mode == "rbf":
        dist2 = float(np.sum((a - b) ** 2))
        return math.exp(-dist2 / (2.0 * cfg.rbf_sigma**2))
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    # clip: rounding can push identical vectors a hair above 1
    return float(min(1.0, max(0.0, float(np.dot(a, b)) / (na * nb))))


def edge_affinity(e: EdgeFeature, f: EdgeFeature, cfg: MatcherConfig | None = None) -> float:
    """Product of per-channel Gaussians on the edge feature deltas."""
    cfg = cfg or MatcherConfig()
    if e.kind != f.kind:
        raise ValueError(f"edge kind mismatch: {e.kind} vs {f.kind}")
    sigma_third = cfg.sigma_o if e.kind == LOCAL_EDGE else cfg.sigma_area
    return math.exp(
        -((e.mu - f.mu) ** 2) / (2.0 * cfg.sigma_mu**2)
        - ((e.theta - f.theta) ** 2) / (2.0 * cfg.sigma_theta**2)
        - ((e.third - f.third) ** 2) / (2.0 * sigma_third**2)
    )


def _query_weight_lookup(q: AttributeGraph, wts: np.ndarray | None) -> np.ndarray:
    if wts is None:
        return q.weights
    wts = np.asarray(wts, dtype=np.float64)
    if wts.shape != (q.num_local,):
        raise ValueError(f"expected {q.num_local} query weights, got {wts.shape}")
    return wts


def build_affinity_matrix(
    q: AttributeGraph,
    d: AttributeGraph,
    candidates: Sequence[Candidate],
    wts: np.ndarray | None = None,
    cfg: MatcherConfig | None = None,
    drop_edges: bool = False,
) -> np.ndarray:
    """Symmetric candidate affinity matrix.

    Diagonal: node affinities, query-weighted for object candidates so
    larger query objects dominate the walk. Off-diagonal: affinity between
    the query edge and the db edge spanned by a candidate pair; zero when
    the candidates conflict or the edge kinds do not correspond.
    """
    cfg = cfg or MatcherConfig()
    wts = _query_weight_lookup(q, wts)
    m = len(candidates)
    W = np.zeros((m, m), dtype=np.float64)

    for a, ca in enumerate(candidates):
        if ca.is_global:
            W[a, a] = node_affinity(q.global_node.attributes, d.global_node.attributes, cfg)
        else:
            W[a, a] = wts[ca.query] * node_affinity(
                q.local_nodes[ca.query].attributes, d.local_nodes[ca.db].attributes, cfg
            )

    if drop_edges:
        return W

    for a in range(m):
        ca = candidates[a]
        for b in range(a + 1, m):
            cb = candidates[b]
            if ca.query == cb.query or ca.db == cb.db:
                continue  # conflicting candidates stay zero
            if ca.is_global or cb.is_global:
                loc, _ = (cb, ca) if ca.is_global else (ca, cb)
                eq = q.global_edges[loc.query]
                ed = d.global_edges[loc.db]
            else:
                eq = q.local_edge(ca.query, cb.query)
                ed = d.local_edge(ca.db, cb.db)
            W[a, b] = W[b, a] = edge_affinity(eq, ed, cfg)
    return W


@dataclass(frozen=True)
class SolverResult:
    soft_scores: np.ndarray  # per-candidate, sums to 1
    iterations: int
    converged: bool
    degenerate: bool


def _candidate_grid_index(
    candidates: Sequence[Candidate], nq: int, nd: int
) -> tuple[np.ndarray, np.ndarray]:
    rows = np.array([nq if c.query is None else c.query for c in candidates])
    cols = np.array([nd if c.db is None else c.db for c in candidates])
    return rows, cols


def _sinkhorn_project(
    x: np.ndarray, rows: np.ndarray, cols: np.ndarray, nq: int, nd: int, iters: int
) -> np.ndarray:
    """Alternate row/column normalization of x over the candidate grid."""
    grid = np.zeros((nq + 1, nd + 1), dtype=np.float64)
    grid[rows, cols] = x
    for _ in range(iters):
        rs = grid.sum(axis=1, keepdims=True)
        np.divide(grid, rs, out=grid, where=rs > 0)
        cs = grid.sum(axis=0, keepdims=True)
        np.divide(grid, cs, out=grid, where=cs > 0)
    return grid[rows, cols]


def rrwm_solve(
    W: np.ndarray,
    candidates: Sequence[Candidate],
    nq: int,
    nd: int,
    cfg: MatcherConfig | None = None,
) -> SolverResult:
    """Random walk with reweighting jumps over the association matrix.

    Each step mixes the plain walk (row-normalized W transposed) with a
    jump distribution obtained by exponentiating the current scores and
    projecting them toward one-to-one consistency via Sinkhorn iterations
    on the query-node x db-node grid.
    """
    cfg = cfg or MatcherConfig()
    m = len(candidates)
    if W.shape != (m, m):
        raise ValueError(f"affinity matrix shape {W.shape} does not match {m} candidates")
    x = np.full(m, 1.0 / m)
    if not np.any(W > 0):
        return SolverResult(soft_scores=x, iterations=0, converged=True, degenerate=True)

    rows, cols = _candidate_grid_index(candidates, nq, nd)
    row_sums = W.sum(axis=1, keepdims=True)
    P = np.divide(W, row_sums, out=np.zeros_like(W), where=row_sums > 0)
    Pt = P.T.copy()

    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iters + 1):
        walk = Pt @ x
        peak = x.max()
        y = np.exp(cfg.reweight_strength * x / peak) if peak > 0 else np.ones(m)
        y = _sinkhorn_project(y, rows, cols, nq, nd, cfg.sinkhorn_iters)
        total = y.sum()
        if total > 0:
            y = y / total
        x_new = cfg.rw_mix * walk + (1.0 - cfg.rw_mix) * y
        delta = float(np.abs(x_new - x).sum())
        x = x_new
        if delta < cfg.tol:
            converged = True
            break
    total = x.sum()
    if total > 0:
        x = x / total
    return SolverResult(soft_scores=x, iterations=iterations, converged=converged, degenerate=False)


def _padded_lap_value(weights: np.ndarray) -> float:
    """Max-weight bipartite matching value; unmatched rows cost nothing."""
    nr, nc = weights.shape
    if nr == 0:
        return 0.0
    padded = np.concatenate([weights, np.zeros((nr, nr))], axis=1)
    r, c = linear_sum_assignment(padded, maximize=True)
    return float(padded[r, c].sum())


def discretize(
    soft_scores: np.ndarray | Sequence[float],
    candidates: Sequence[Candidate],
    nq: int | None = None,
    nd: int | None = None,
) -> Assignment:
    """Maximum-weight one-to-one selection over the candidate grid.

    Ties are resolved toward the lexicographically smallest assignment by
    greedily fixing candidates in (query, db) order whenever doing so still
    attains the optimum. The scene pair is always selected.
    """
    soft = np.asarray(soft_scores, dtype=np.float64)
    locals_ = [(c, float(soft[i])) for i, c in enumerate(candidates) if not c.is_global]
    if any(s < 0 for _, s in locals_):
        raise ValueError("soft scores must be non-negative")
    soft_map = {c: float(soft[i]) for i, c in enumerate(candidates)}

    if nq is None:
        nq = 1 + max((c.query for c, _ in locals_), default=-1)
    if nd is None:
        nd = 1 + max((c.db for c, _ in locals_), default=-1)

    # score grid; -1 marks forbidden pairs (worse than leaving a row unmatched)
    grid = np.full((nq, nd), -1.0)
    for c, s in locals_:
        grid[c.query, c.db] = s

    def best_value(used_q: set[int], used_d: set[int]) -> float:
        keep_r = [i for i in range(nq) if i not in used_q]
        keep_c = [j for j in range(nd) if j not in used_d]
        return _padded_lap_value(grid[np.ix_(keep_r, keep_c)])

    target = best_value(set(), set())
    chosen: list[Candidate] = []
    used_q: set[int] = set()
    used_d: set[int] = set()
    base = 0.0
    for c, s in sorted(locals_, key=lambda t: (t[0].query, t[0].db)):
        if c.query in used_q or c.db in used_d:
            continue
        trial = base + s + best_value(used_q | {c.query}, used_d | {c.db})
        if trial >= target - _TIE_EPS:
            chosen.append(c)
            used_q.add(c.query)
            used_d.add(c.db)
            base += s

    pairs = tuple(chosen) + ((Candidate(None, None),) if Candidate(None, None) in soft_map else ())
    return Assignment(pairs=pairs, soft_scores=soft_map)


def assignment_objective(assignment: Assignment, candidates: Sequence[Candidate], W: np.ndarray) -> float:
    """Quadratic objective x'Wx of the binary selection indicated by the pairs."""
    index = {c: i for i, c in enumerate(candidates)}
    sel = np.array([index[c] for c in assignment.pairs if c in index], dtype=int)
    if sel.size == 0:
        return 0.0
    sub = W[np.ix_(sel, sel)]
    return float(sub.sum())


class EnumerationCapExceeded(RuntimeError):
    """Brute-force oracle refused: too many injective mappings."""


def brute_force_match(
    q: AttributeGraph,
    d: AttributeGraph,
    wts: np.ndarray | None = None,
    cfg: MatcherConfig | None = None,
    cap: int = 10**6,
) -> tuple[Assignment, float]:
    """Exhaustive optimum over all constraint-respecting mappings.

    Enumerates every injective class-consistent mapping of query objects to
    db objects (objects may stay unmatched), always including the scene
    pair, and maximizes x'Wx. Ties resolve to the lexicographically
    smallest pair tuple. Independent of the walk-based solver by design.
    """
    cfg = cfg or MatcherConfig()
    candidates = candidate_correspondences(q, d)
    W = build_affinity_matrix(q, d, candidates, wts, cfg)

    options: list[list[int | None]] = []
    for qi, qn in enumerate(q.local_nodes):
        compat = [di for di, dn in enumerate(d.local_nodes) if dn.class_label == qn.class_label]
        options.append(compat + [None])
    count = 1
    for opts in options:
        count *= len(opts)
        if count > cap:
            raise EnumerationCapExceeded(
                f"mapping count exceeds cap ({count} > {cap}); oracle refuses"
            )

    index = {c: i for i, c in enumerate(candidates)}
    gidx = index[Candidate(None, None)]

    best_obj = -math.inf
    best_pairs: tuple[Candidate, ...] | None = None
    for combo in itertools.product(*options):
        used: set[int] = set()
        ok = True
        for di in combo:
            if di is None:
                continue
            if di in used:
                ok = False
                break
            used.add(di)
        if not ok:
            continue
        sel = [index[Candidate(qi, di)] for qi, di in enumerate(combo) if di is not None]
        sel.append(gidx)
        arr = np.array(sel, dtype=int)
        obj = float(W[np.ix_(arr, arr)].sum())
        pairs = tuple(
            sorted(
                [Candidate(qi, di) for qi, di in enumerate(combo) if di is not None],
                key=Candidate.sort_key,
            )
        ) + (Candidate(None, None),)
        if obj > best_obj + _TIE_EPS:
            best_obj = obj
            best_pairs = pairs
        elif best_pairs is not None and abs(obj - best_obj) <= _TIE_EPS:
            if tuple(c.sort_key() for c in pairs) < tuple(c.sort_key() for c in best_pairs):
                best_pairs = pairs
    assert best_pairs is not None
    return Assignment(pairs=best_pairs), best_obj


def decompose_scores(
    assignment: Assignment,
    q: AttributeGraph,
    d: AttributeGraph,
    wts: np.ndarray | None = None,
    cfg: MatcherConfig | None = None,
    drop_global_node: bool = False,
    drop_edges: bool = False,
) -> tuple[float, float, float]:
    """Split match quality into (object, scene, edge) scores, each in [0, 1].

    Object score: query-weight-weighted node affinities over matched object
    pairs. Scene score: affinity of the two scene attribute vectors. Edge
    score: mean edge affinity over query edges whose endpoints are both
    matched; unmatched structure contributes zero.
    """
    cfg = cfg or MatcherConfig()
    wts = _query_weight_lookup(q, wts)
    mapping = assignment.local_mapping()

    s_lcl = 0.0
    for qi, di in mapping.items():
        s_lcl += wts[qi] * node_affinity(
            q.local_nodes[qi].attributes, d.local_nodes[di].attributes, cfg
        )

    s_gbl = 0.0
    if not drop_global_node:
        s_gbl = node_affinity(q.global_node.attributes, d.global_node.attributes, cfg)

    s_edge = 0.0
    if not drop_edges:
        total_edges = len(q.local_edges) + (0 if drop_global_node else len(q.global_edges))
        acc = 0.0
        for (i, j), eq in q.local_edges.items():
            if i in mapping and j in mapping:
                acc += edge_affinity(eq, d.local_edge(mapping[i], mapping[j]), cfg)
        if not drop_global_node:
            for i, eq in q.global_edges.items():
                if i in mapping:
                    acc += edge_affinity(eq, d.global_edges[mapping[i]], cfg)
        s_edge = acc / total_edges if total_edges else 0.0

    clamp = lambda v: float(min(1.0, max(0.0, v)))
    return clamp(s_lcl), clamp(s_gbl), clamp(s_edge)


def match_graphs(
    q: AttributeGraph,
    d: AttributeGraph,
    wts: np.ndarray | None = None,
    cfg: MatcherConfig | None = None,
    alpha: float = 0.4,
    beta: float = 0.4,
    drop_global_node: bool = False,
    drop_edges: bool = False,
) -> MatchResult:
    """Full matching pipeline for one (query, database-image) pair."""
    cfg = cfg or MatcherConfig()
    wts = _query_weight_lookup(q, wts)
    candidates = candidate_correspondences(q, d, include_global=not drop_global_node)
    nq, nd = q.num_local, d.num_local

    if not candidates:
        assignment = Assignment(pairs=())
        s_lcl, s_gbl, s_edge = decompose_scores(
            assignment, q, d, wts, cfg, drop_global_node=drop_global_node, drop_edges=drop_edges
        )
        fused = alpha * s_lcl + beta * s_gbl + (1.0 - alpha - beta) * s_edge
        return MatchResult(assignment, s_lcl, s_gbl, s_edge, fused, degenerate=True)

    W = build_affinity_matrix(q, d, candidates, wts, cfg, drop_edges=drop_edges)
    solved = rrwm_solve(W, candidates, nq, nd, cfg)
    assignment = discretize(solved.soft_scores, candidates, nq, nd)
    s_lcl, s_gbl, s_edge = decompose_scores(
        assignment, q, d, wts, cfg, drop_global_node=drop_global_node, drop_edges=drop_edges
    )
    fused = alpha * s_lcl + beta * s_gbl + (1.0 - alpha - beta) * s_edge
    return MatchResult(
        assignment=assignment,
        s_lcl=s_lcl,
        s_gbl=s_gbl,
        s_edge=s_edge,
        fused=fused,
        degenerate=solved.degenerate,
    )
