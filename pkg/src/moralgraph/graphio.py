"""Graph export/import: a single JSON document with a stable schema.

Export is deterministic (sorted keys, id-sorted lists) so equal graphs give
byte-identical documents. Import validates against a JSON schema and reports
violations with their paths; import(export(g)) == g field for field.
"""

from __future__ import annotations

import json

import jsonschema

from .model import (
    AggregationResult,
    MoralContext,
    MoralGraph,
    Participant,
    Scenario,
    card_from_json,
    card_to_json,
    edge_from_json,
    edge_to_json,
)


class GraphSchemaError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid graph document: " + "; ".join(problems))
        self.problems = problems


_CARD_SCHEMA = {
    "type": "object",
    "required": ["id", "title", "summary", "policies", "origin", "canonical_of"],
    "properties": {
        "id": {"type": "string"},
        "title": {"type": "string"},
        "summary": {"type": "string"},
        "policies": {"type": "array", "items": {
            "type": "object", "required": ["text"],
            "properties": {"text": {"type": "string"}},
        }},
        "origin": {"anyOf": [
            {"const": "canonical"},
            {"type": "object",
             "required": ["participant_id", "scenario_id", "session_id"]},
        ]},
        "canonical_of": {"type": "array", "items": {"type": "string"}},
    },
}

_EDGE_SCHEMA = {
    "type": "object",
    "required": ["id", "from_value", "to_value", "context", "story",
                 "tallies", "status"],
    "properties": {
        "tallies": {"type": "object",
                    "required": ["wiser", "not_wiser", "unsure"],
                    "properties": {k: {"type": "integer", "minimum": 0}
                                   for k in ("wiser", "not_wiser", "unsure")}},
        "status": {"enum": ["candidate", "accepted", "rejected", "omitted"]},
    },
}

GRAPH_SCHEMA = {
    "type": "object",
    "required": ["scenarios", "contexts", "participants", "values", "edges",
                 "card_scenarios", "aggregation"],
    "properties": {
        "scenarios": {"type": "array", "items": {
            "type": "object", "required": ["id", "prompt", "tag"]}},
        "contexts": {"type": "array", "items": {
            "type": "object", "required": ["id", "text", "source_scenario"]}},
        "participants": {"type": "array", "items": {
            "type": "object", "required": ["id", "chosen_scenario"]}},
        "values": {"type": "array", "items": _CARD_SCHEMA},
        "edges": {"type": "array", "items": _EDGE_SCHEMA},
        "card_scenarios": {"type": "object"},
        "aggregation": {"anyOf": [
            {"type": "null"},
            {"type": "object",
             "required": ["scores", "winners", "removed_cycle_edges",
                          "omissions", "converged", "iterations", "params"]},
        ]},
    },
}


def graph_to_doc(graph: MoralGraph) -> dict:
    agg = graph.aggregation
    return {
        "scenarios": [
            {"id": s.id, "prompt": s.prompt, "tag": s.tag}
            for s in sorted(graph.scenarios.values(), key=lambda s: s.id)],
        "contexts": [
            {"id": c.id, "text": c.text, "source_scenario": c.source_scenario}
            for c in sorted(graph.contexts.values(), key=lambda c: c.id)],
        "participants": [
            {"id": p.id, "chosen_scenario": p.chosen_scenario,
             "demographics": p.demographics_dict()}
            for p in sorted(graph.participants.values(), key=lambda p: p.id)],
        "values": [card_to_json(graph.values[cid]) for cid in sorted(graph.values)],
        "edges": [edge_to_json(graph.edges[eid]) for eid in sorted(graph.edges)],
        "card_scenarios": {cid: sorted(graph.card_scenarios[cid])
                           for cid in sorted(graph.card_scenarios)},
        "aggregation": None if agg is None else {
            "scores": {k: agg.scores[k] for k in sorted(agg.scores)},
            "winners": {k: agg.winners[k] for k in sorted(agg.winners)},
            "removed_cycle_edges": sorted(agg.removed_cycle_edges),
            "omissions": sorted(agg.omissions),
            "converged": agg.converged,
            "iterations": agg.iterations,
            "params": agg.params,
        },
    }


def export_graph(graph: MoralGraph) -> str:
    return json.dumps(graph_to_doc(graph), indent=2, sort_keys=True) + "\n"


def import_graph(text_or_doc) -> MoralGraph:
    doc = json.loads(text_or_doc) if isinstance(text_or_doc, str) else text_or_doc
    validator = jsonschema.Draft202012Validator(GRAPH_SCHEMA)
    problems = [
        f"{'/'.join(str(p) for p in err.absolute_path) or '<root>'}: {err.message}"
        for err in sorted(validator.iter_errors(doc), key=str)
    ]
    if problems:
        raise GraphSchemaError(problems)
    graph = MoralGraph()
    for s in doc["scenarios"]:
        graph.scenarios[s["id"]] = Scenario(s["id"], s["prompt"], s["tag"])
    for c in doc["contexts"]:
        graph.contexts[c["id"]] = MoralContext(c["id"], c["text"], c["source_scenario"])
    for p in doc["participants"]:
        graph.participants[p["id"]] = Participant(
            p["id"], p["chosen_scenario"],
            tuple(sorted(p.get("demographics", {}).items())))
    for v in doc["values"]:
        graph.values[v["id"]] = card_from_json(v)
    for e in doc["edges"]:
        graph.edges[e["id"]] = edge_from_json(e)
    graph.card_scenarios = {
        cid: tuple(scens) for cid, scens in doc["card_scenarios"].items()}
    agg = doc["aggregation"]
    if agg is not None:
        graph.aggregation = AggregationResult(
            scores=dict(agg["scores"]),
            winners=dict(agg["winners"]),
            removed_cycle_edges=list(agg["removed_cycle_edges"]),
            omissions=list(agg["omissions"]),
            converged=agg["converged"],
            iterations=agg["iterations"],
            params=dict(agg["params"]),
        )
    integrity = graph.check_referential_integrity()
    if integrity:
        raise GraphSchemaError(integrity)
    return graph


def alignment_target_to_jsonl(records) -> str:
    return "".join(
        json.dumps(r.to_json(), sort_keys=True, separators=(",", ":")) + "\n"
        for r in records)
