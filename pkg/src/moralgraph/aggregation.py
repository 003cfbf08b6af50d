"""Votes -> moral graph: edge acceptance, cycle breaking, PageRank, winners,
context derivation/matching, value retrieval, and alignment-target export.

Mass flows along edges from less-wise to wiser values, so PageRank
concentrates score on values that sit downstream of broadly-affirmed
transitions. PageRank runs on the global accepted DAG; winners are then
restricted per context.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import prompts
from .gateway import LLMGateway, chat_request
from .model import (
    AggregationResult,
    MoralContext,
    MoralGraph,
    WisdomEdge,
    normalize_context_text,
)


class AggregationError(Exception):
    pass


@dataclass(frozen=True)
class EdgeAcceptancePolicy:
    min_votes: int = 3
    min_wiser_ratio: float = 0.66
    count_unsure: bool = False

    def __post_init__(self):
        if self.min_votes <= 0:
            raise AggregationError("min_votes must be positive")
        if not 0.5 < self.min_wiser_ratio <= 1.0:
            raise AggregationError("min_wiser_ratio must be in (0.5, 1]")

    def to_json(self) -> dict:
        return {"min_votes": self.min_votes,
                "min_wiser_ratio": self.min_wiser_ratio,
                "count_unsure": self.count_unsure}


@dataclass(frozen=True)
class PageRankParams:
    damping: float = 0.85
    tolerance: float = 1e-9
    max_iterations: int = 200
    # "uniform" spreads dangling-node mass evenly; "drop" discards it, which
    # makes raw scores monotone in upstream support (see normalize).
    dangling: str = "uniform"
    # Normalized scores sum to 1; raw scores keep absolute mass comparable
    # across graphs that differ only by added edges.
    normalize: bool = True

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise AggregationError("damping must be in (0, 1)")
        if self.tolerance <= 0:
            raise AggregationError("tolerance must be positive")
        if self.max_iterations <= 0:
            raise AggregationError("max_iterations must be positive")
        if self.dangling not in ("uniform", "drop"):
            raise AggregationError('dangling must be "uniform" or "drop"')

    def to_json(self) -> dict:
        return {"damping": self.damping, "tolerance": self.tolerance,
                "max_iterations": self.max_iterations,
                "dangling": self.dangling, "normalize": self.normalize}


@dataclass(frozen=True)
class AlignmentTargetRecord:
    context: str
    preferred: str
    dispreferred: str
    provenance: tuple[str, ...]

    def __post_init__(self):
        if self.preferred == self.dispreferred:
            raise AggregationError("preferred and dispreferred must differ")
        if not self.provenance:
            raise AggregationError("provenance must be nonempty")

    def to_json(self) -> dict:
        return {"context": self.context, "preferred": self.preferred,
                "dispreferred": self.dispreferred,
                "provenance": list(self.provenance)}


@dataclass
class PageRankResult:
    scores: dict[str, float]
    iterations: int
    converged: bool


@dataclass
class Retrieval:
    guidance: bool
    context: str | None = None
    card: str | None = None
    rationale: dict = field(default_factory=dict)


# --- edge acceptance ---

def accept_edges(edges: list[WisdomEdge],
                 policy: EdgeAcceptancePolicy) -> list[WisdomEdge]:
    """Assign accepted/rejected/omitted/candidate per the vote thresholds.

    An edge with enough votes is accepted when the wiser ratio clears the
    threshold, rejected when it falls below the mirrored threshold, and
    omitted (a genuine contest, excluded from recommendations) in between.
    """
    out = []
    for edge in edges:
        t = edge.tallies
        considered = t.wiser + t.not_wiser + (t.unsure if policy.count_unsure else 0)
        decided = t.wiser + t.not_wiser
        ratio = t.wiser / decided if decided else 0.0
        if considered < policy.min_votes:
            status = "candidate"
        elif ratio >= policy.min_wiser_ratio:
            status = "accepted"
        elif ratio > 1.0 - policy.min_wiser_ratio:
            status = "omitted"
        else:
            status = "rejected"
        out.append(edge.with_status(status))
    return out


# --- cycle handling ---

def detect_and_break_cycles(edges: list[WisdomEdge], *,
                            drop_entire_cycle: bool = False
                            ) -> tuple[list[WisdomEdge], list[WisdomEdge], int]:
    """Return (acyclic edge set, removed edges, number of cycles found).

    Default removes, per detected cycle, the edge with the fewest wiser votes
    (ties: lowest wiser ratio, then edge id). drop_entire_cycle instead
    ignores every edge of each detected cycle.
    """
    graph = nx.MultiDiGraph()
    by_id = {}
    for edge in edges:
        by_id[edge.id] = edge
        graph.add_edge(edge.from_value, edge.to_value, key=edge.id)
    removed: list[WisdomEdge] = []
    cycles = 0
    while True:
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            break
        cycles += 1
        cycle_edges = [by_id[key] for _, _, key in cycle]
        if drop_entire_cycle:
            doomed = cycle_edges
        else:
            doomed = [min(cycle_edges, key=_support_key)]
        for edge in doomed:
            graph.remove_edge(edge.from_value, edge.to_value, key=edge.id)
            removed.append(edge)
    removed_ids = {e.id for e in removed}
    kept = [e for e in edges if e.id not in removed_ids]
    return kept, removed, cycles


def _support_key(edge: WisdomEdge):
    t = edge.tallies
    decided = t.wiser + t.not_wiser
    ratio = t.wiser / decided if decided else 0.0
    return (t.wiser, ratio, edge.id)


# --- pagerank ---

def pagerank(value_ids: list[str], edges: list[WisdomEdge],
             params: PageRankParams | None = None) -> PageRankResult:
    """Power iteration with uniform teleport; dangling mass spread uniformly.

    Parallel edges count as extra weight. Scores sum to 1 within 1e-9.
    """
    params = params or PageRankParams()
    ids = list(value_ids)
    if not ids:
        return PageRankResult({}, 0, True)
    index = {vid: i for i, vid in enumerate(ids)}
    n = len(ids)
    weights: dict[tuple[int, int], float] = {}
    out_weight = np.zeros(n)
    for edge in edges:
        if edge.from_value not in index or edge.to_value not in index:
            raise AggregationError(f"edge {edge.id} references unknown value")
        key = (index[edge.from_value], index[edge.to_value])
        weights[key] = weights.get(key, 0.0) + 1.0
        out_weight[key[0]] += 1.0
    src = np.array([k[0] for k in weights], dtype=int)
    dst = np.array([k[1] for k in weights], dtype=int)
    wgt = np.array([weights[k] for k in weights])
    dangling = out_weight == 0
    d = params.damping
    v = np.full(n, 1.0 / n)
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        nxt = np.full(n, (1.0 - d) / n)
        if len(src):
            flows = v[src] / out_weight[src] * wgt
            np.add.at(nxt, dst, d * flows)
        if params.dangling == "uniform":
            nxt += d * v[dangling].sum() / n
        delta = np.abs(nxt - v).sum()
        v = nxt
        if delta <= params.tolerance:
            converged = True
            break
    if params.normalize:
        v = v / v.sum()
    return PageRankResult({vid: float(v[index[vid]]) for vid in ids},
                          iterations, converged)


# --- winners ---

def winners_by_context(graph: MoralGraph, scores: dict[str, float]) -> dict[str, str]:
    """Per context: argmax score over values incident to accepted edges; if a
    context has no accepted edges, fall back to cards articulated for its
    scenario. Ties break by card id."""
    winners = {}
    for ctx_id, ctx in graph.contexts.items():
        incident = set()
        for edge in graph.edges.values():
            if edge.status == "accepted" and edge.context == ctx_id:
                incident.update((edge.from_value, edge.to_value))
        if not incident:
            incident = {
                cid for cid, scen_ids in graph.card_scenarios.items()
                if ctx.source_scenario in scen_ids and cid in graph.values
            }
        incident &= set(graph.values)
        if not incident:
            continue
        winners[ctx_id] = min(incident, key=lambda cid: (-scores.get(cid, 0.0), cid))
    return winners


# --- contexts ---

def context_id_for(text: str) -> str:
    digest = hashlib.sha1(text.lower().encode()).hexdigest()[:10]
    return f"ctx-{digest}"


def derive_contexts(text: str, gateway: LLMGateway,
                    source_scenario: str = "") -> list[MoralContext]:
    if not text or not text.strip():
        raise AggregationError("cannot derive contexts from empty input")
    reply = gateway.complete_chat(chat_request(
        "context-derivation", prompts.REGISTRY["context-derivation/derive@v1"], text))
    contexts = []
    seen = set()
    for line in reply.splitlines():
        line = line.strip().lstrip("-• ").strip()
        if not line:
            continue
        normalized = normalize_context_text(line)
        if normalized.lower() in seen:
            continue
        seen.add(normalized.lower())
        contexts.append(MoralContext(
            id=context_id_for(normalized), text=normalized,
            source_scenario=source_scenario))
        if len(contexts) == 5:
            break
    if not contexts:
        raise AggregationError(f"no contexts derivable from gateway reply {reply!r}")
    return contexts


def match_context(candidate: str, contexts: dict[str, MoralContext],
                  gateway: LLMGateway, threshold: float = 0.75) -> str | None:
    if not contexts:
        return None
    query = gateway.embed(candidate)
    best_id, best_sim = None, -1.0
    for ctx_id in sorted(contexts):
        sim = float(np.dot(query, gateway.embed(contexts[ctx_id].text)))
        if sim > best_sim:
            best_id, best_sim = ctx_id, sim
    return best_id if best_sim >= threshold else None


def retrieve_value_for_state(state: str, graph: MoralGraph,
                             gateway: LLMGateway,
                             threshold: float = 0.75) -> Retrieval:
    """derive_contexts -> match_context -> winners. Returns explicit
    no-guidance rather than fabricating a value."""
    if graph.aggregation is None:
        raise AggregationError("graph is not aggregated")
    if not graph.contexts:
        return Retrieval(guidance=False, rationale={"reason": "empty graph"})
    winners = graph.aggregation.winners
    for candidate in derive_contexts(state, gateway):
        matched = match_context(candidate.text, graph.contexts, gateway, threshold)
        if matched is not None and matched in winners:
            card = graph.values[winners[matched]]
            return Retrieval(
                guidance=True, context=matched, card=card.id,
                rationale={
                    "matched_context": graph.contexts[matched].text,
                    "winner": card.title,
                    "policies": [p.text for p in card.policies],
                })
    return Retrieval(guidance=False, rationale={"reason": "no context matched"})


# --- alignment target ---

def export_alignment_target(graph: MoralGraph,
                            include_transitive: bool = False
                            ) -> list[AlignmentTargetRecord]:
    if graph.aggregation is None:
        raise AggregationError("graph is not aggregated")
    removed = set(graph.aggregation.removed_cycle_edges)
    accepted = [e for e in graph.edges.values()
                if e.status == "accepted" and e.id not in removed]
    records = [
        AlignmentTargetRecord(e.context, e.to_value, e.from_value, (e.id,))
        for e in sorted(accepted, key=lambda e: e.id)
    ]
    if include_transitive:
        by_context: dict[str, list[WisdomEdge]] = {}
        for e in accepted:
            by_context.setdefault(e.context, []).append(e)
        direct = {(r.context, r.preferred, r.dispreferred) for r in records}
        for ctx_id in sorted(by_context):
            records.extend(
                r for r in _transitive_records(ctx_id, by_context[ctx_id])
                if (r.context, r.preferred, r.dispreferred) not in direct)
    return records


def _transitive_records(ctx_id: str, edges: list[WisdomEdge]):
    graph = nx.DiGraph()
    for e in edges:
        graph.add_edge(e.from_value, e.to_value, edge_id=e.id)
    out = []
    for source in sorted(graph.nodes):
        paths = nx.single_source_shortest_path(graph, source)
        for target in sorted(paths):
            path = paths[target]
            if len(path) <= 2:
                continue  # self or direct edge
            provenance = tuple(
                graph.edges[u, v]["edge_id"] for u, v in zip(path, path[1:]))
            out.append(AlignmentTargetRecord(ctx_id, target, source, provenance))
    return out


# --- orchestration ---

def aggregate(graph: MoralGraph,
              policy: EdgeAcceptancePolicy | None = None,
              params: PageRankParams | None = None,
              drop_entire_cycle: bool = False) -> AggregationResult:
    """Full pipeline over the graph's edges; updates edge statuses and
    graph.aggregation in place."""
    policy = policy or EdgeAcceptancePolicy()
    params = params or PageRankParams()
    statused = accept_edges(list(graph.edges.values()), policy)
    for edge in statused:
        graph.edges[edge.id] = edge
    accepted = [e for e in statused if e.status == "accepted"]
    kept, removed, _ = detect_and_break_cycles(
        accepted, drop_entire_cycle=drop_entire_cycle)
    result = pagerank(sorted(graph.values), kept, params)
    agg = AggregationResult(
        scores=result.scores,
        winners={},
        removed_cycle_edges=[e.id for e in removed],
        omissions=[e.id for e in statused if e.status == "omitted"],
        converged=result.converged,
        iterations=result.iterations,
        params={"acceptance": policy.to_json(), "pagerank": params.to_json(),
                "drop_entire_cycle": drop_entire_cycle},
    )
    graph.aggregation = agg
    agg.winners = winners_by_context(graph, agg.scores)
    return agg
