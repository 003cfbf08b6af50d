"""Command-line entry points: serve the API, run simulations, aggregate and
export graphs, produce reports, and verify event-log replays.

Environment variables (flags take precedence):

    MORALGRAPH_STORAGE   event-log path for `serve`
    MORALGRAPH_MODE      gateway mode: live | replay | scripted
    MORALGRAPH_ENDPOINT  chat-completions URL for live mode
    MORALGRAPH_FIXTURES  fixture directory for replay mode
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .aggregation import EdgeAcceptancePolicy, PageRankParams, aggregate
from .analytics import generalizability_report, report_to_json, survey_report
from .gateway import GatewayConfig, LLMGateway
from .graphio import alignment_target_to_jsonl, export_graph, import_graph
from .model import Scenario
from .storage import EventLog, fold_events


@click.group()
def main():
    """Moral-graph deliberation engine."""


def _gateway_from_env(mode, endpoint, fixtures) -> LLMGateway:
    import os
    mode = mode or os.environ.get("MORALGRAPH_MODE", "scripted")
    endpoint = endpoint or os.environ.get("MORALGRAPH_ENDPOINT")
    fixtures = fixtures or os.environ.get("MORALGRAPH_FIXTURES")
    return LLMGateway(GatewayConfig(mode=mode, endpoint=endpoint,
                                    fixture_dir=fixtures))


def _load_scenarios(path) -> dict[str, Scenario]:
    doc = json.loads(Path(path).read_text())
    return {s["id"]: Scenario(s["id"], s["prompt"], s["tag"])
            for s in doc["scenarios"]}


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--scenario-file", required=True, type=click.Path(exists=True),
              help='JSON file: {"scenarios": [{"id", "prompt", "tag"}, ...]}')
@click.option("--storage", envvar="MORALGRAPH_STORAGE", default=None,
              help="Event-log path (default: in-memory only).")
@click.option("--mode", default=None, help="Gateway mode: live|replay|scripted.")
@click.option("--endpoint", default=None, help="Chat endpoint URL (live mode).")
@click.option("--fixtures", default=None, help="Fixture dir (replay mode).")
def serve(host, port, scenario_file, storage, mode, endpoint, fixtures):
    """Run the HTTP API."""
    import uvicorn

    from .api import create_app
    from .platform import Deployment

    gateway = _gateway_from_env(mode, endpoint, fixtures)
    if gateway.config.mode == "scripted":
        from .simulation import (
            SyntheticPopulationConfig,
            build_scripted_gateway,
            default_contexts,
            default_scenarios,
        )
        # Scripted serving is for demos/tests: built-in scenarios + scripts.
        scenarios = {**default_scenarios(), **_load_scenarios(scenario_file)}
        gateway = build_scripted_gateway(
            SyntheticPopulationConfig(), default_contexts(), scenarios)
    else:
        scenarios = _load_scenarios(scenario_file)
    deployment = Deployment(scenarios=scenarios, gateway=gateway,
                            storage_path=storage)
    uvicorn.run(create_app(deployment), host=host, port=port, log_level="warning")


@main.command()
@click.option("--seed", default=1, show_default=True)
@click.option("--participants", "-n", default=500, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Directory for events.jsonl, graph.json and reports.")
@click.option("--config", type=click.Path(exists=True), default=None,
              help="JSON population config overriding the defaults.")
def simulate(seed, participants, out, config):
    """Run a seeded synthetic deployment end to end."""
    from dataclasses import replace

    from .simulation import SyntheticPopulationConfig, run_simulation

    cfg = (SyntheticPopulationConfig.from_json(config) if config
           else SyntheticPopulationConfig())
    cfg = replace(cfg, seed=seed, n_participants=participants)
    result = run_simulation(cfg, out_dir=out)
    last = result.trajectory.steps[-1] if result.trajectory.steps else None
    click.echo(json.dumps({
        "seed": seed,
        "participants": participants,
        "sessions_done": result.sessions_done,
        "sessions_abandoned": result.sessions_abandoned,
        "canonical_values": len(result.deployment.pool),
        "edges": len(result.deployment.ledger.edges),
        "expert_card": result.expert_card,
        "final_ranks": last,
    }, indent=2, sort_keys=True))


@main.command("aggregate")
@click.argument("graph_file", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Output path (default: overwrite input).")
@click.option("--min-votes", default=3, show_default=True)
@click.option("--min-wiser-ratio", default=0.66, show_default=True)
@click.option("--count-unsure", is_flag=True, default=False)
@click.option("--damping", default=0.85, show_default=True)
@click.option("--tolerance", default=1e-9, show_default=True)
@click.option("--drop-entire-cycle", is_flag=True, default=False)
def aggregate_cmd(graph_file, out, min_votes, min_wiser_ratio, count_unsure,
                  damping, tolerance, drop_entire_cycle):
    """Re-run edge acceptance, cycle breaking, PageRank and winners."""
    graph = import_graph(Path(graph_file).read_text())
    result = aggregate(
        graph,
        EdgeAcceptancePolicy(min_votes=min_votes,
                             min_wiser_ratio=min_wiser_ratio,
                             count_unsure=count_unsure),
        PageRankParams(damping=damping, tolerance=tolerance),
        drop_entire_cycle=drop_entire_cycle)
    Path(out or graph_file).write_text(export_graph(graph))
    click.echo(f"aggregated: {len(result.scores)} values, "
               f"{len(result.winners)} contexts with winners, "
               f"{len(result.removed_cycle_edges)} cycle edges removed")


@main.command("export")
@click.argument("graph_file", type=click.Path(exists=True))
@click.option("--what", type=click.Choice(["graph", "alignment-target"]),
              default="alignment-target", show_default=True)
@click.option("--transitive", is_flag=True, default=False,
              help="Include transitively implied preference pairs.")
@click.option("--out", type=click.Path(), default=None,
              help="Output path (default: stdout).")
def export_cmd(graph_file, what, transitive, out):
    """Export a graph document or its alignment-target JSON lines."""
    from .aggregation import export_alignment_target

    graph = import_graph(Path(graph_file).read_text())
    if what == "graph":
        text = export_graph(graph)
    else:
        records = export_alignment_target(graph, include_transitive=transitive)
        text = alignment_target_to_jsonl(records)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("events_file", type=click.Path(exists=True))
def report(events_file):
    """Summarize an event log: votes, surveys and generalizability."""
    log = EventLog(events_file)
    state = fold_events(log.events)
    by_question: dict[str, list[int]] = {}
    for s in state.surveys:
        by_question.setdefault(s["question"], []).append(s["score"])
    click.echo(report_to_json({
        "events": len(log.events),
        "sessions": len(state.sessions),
        "custom_cards": len(state.custom_cards),
        "canonical_values": len(state.canonical_of),
        "coalesced": state.coalesce_count,
        "stories": len(state.stories),
        "edges": len(state.edges),
        "story_votes": len(state.story_votes),
        "generalizability": generalizability_report(log.events),
        "survey_agree_rates": survey_report(by_question),
    }), nl=False)


@main.command()
@click.argument("events_file", type=click.Path(exists=True))
@click.option("--verify", is_flag=True, default=False,
              help="Re-append every event into a fresh log and byte-compare.")
def replay(events_file, verify):
    """Fold an event log into derived state (optionally verifying determinism)."""
    import tempfile

    log = EventLog(events_file)
    state = fold_events(log.events)
    if verify:
        with tempfile.TemporaryDirectory() as tmp:
            copy_path = Path(tmp) / "copy.jsonl"
            copy = EventLog(copy_path)
            for event in log.events:
                copy.append(event.kind, event.payload, timestamp=event.timestamp)
            copy.close()
            original = Path(events_file).read_bytes()
            replayed = copy_path.read_bytes()
        if original != replayed:
            click.echo("replay MISMATCH: re-appended log differs byte-for-byte",
                       err=True)
            sys.exit(1)
        refolded = fold_events(EventLog(events_file).events)
        if json.dumps(state.to_json(), sort_keys=True) != \
                json.dumps(refolded.to_json(), sort_keys=True):
            click.echo("replay MISMATCH: folded state differs", err=True)
            sys.exit(1)
        click.echo("replay OK: byte-identical log and state")
        return
    click.echo(json.dumps(state.to_json(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
