"""Attribute-graph image ranking toolkit.

Represents each image as a fully connected graph: one node per detected
object (carrying per-object attribute scores), plus a single scene node
(carrying whole-image attribute scores). Edges carry geometric features.
Ranking a database against a query reduces to constrained graph matching
scored per query image.
"""

from agrank.records import (
    BoundingBox,
    Detection,
    ImageRecord,
    ManifestError,
    parse_manifest,
    serialize_manifest,
    validate_record,
    write_manifest,
)
from agrank.graph import (
    AttributeGraph,
    EdgeFeature,
    GlobalNode,
    LocalNode,
    build_graph,
    canonical_angle,
    global_centroid,
    node_weights,
    overlap,
    read_graph_cache,
    write_graph_cache,
)
from agrank.matching import (
    Assignment,
    Candidate,
    MatcherConfig,
    MatchResult,
    brute_force_match,
    build_affinity_matrix,
    candidate_correspondences,
    decompose_scores,
    discretize,
    edge_affinity,
    match_graphs,
    node_affinity,
    rrwm_solve,
)
from agrank.ranking import (
    RankEntry,
    RankList,
    RankParams,
    combine_score,
    precompute_graphs,
    rank,
    read_ranklist,
    write_ranklist,
)
from agrank.evaluation import (
    RelevanceAnnotations,
    baseline_common_objects,
    dcg_at_k,
    evaluate_ranklists,
    ndcg_at_k,
)
from agrank.synthetic import SynthParams, synth_generate

__version__ = "0.1.0"
