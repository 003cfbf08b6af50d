"""Evaluation machinery: ideology rating, experience detection, scaling
trajectories, generalizability accounting and survey aggregation.

Everything here is a pure function of the event log plus judge fixtures;
re-running yields identical output.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from . import prompts
from .aggregation import (
    EdgeAcceptancePolicy,
    PageRankParams,
    accept_edges,
    detect_and_break_cycles,
    pagerank,
)
from .gateway import LLMGateway, chat_request
from .model import Tallies, WisdomEdge
from .storage import FoldedState, fold_events


class AnalyticsError(Exception):
    pass


@dataclass(frozen=True)
class IdeologyRating:
    score: int
    bucket: str

    def __post_init__(self):
        if not 1 <= self.score <= 5:
            raise AnalyticsError("ideology score must be in 1..5")
        expected = ideology_bucket(self.score)
        if self.bucket != expected:
            raise AnalyticsError(
                f"bucket {self.bucket!r} does not match score {self.score}")


def ideology_bucket(score: int) -> str:
    if score <= 2:
        return "not"
    if score == 3:
        return "slightly"
    return "very"


@dataclass
class RankTrajectory:
    target: str
    steps: list[dict] = field(default_factory=list)  # events_processed, ranks

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["events_processed", "pagerank_rank", "direct_vote_rank"])
        for step in self.steps:
            writer.writerow([step["events_processed"], step["pagerank_rank"],
                             step["direct_vote_rank"]])
        return out.getvalue()


def rate_ideology(message: str, question: str, gateway: LLMGateway) -> IdeologyRating:
    if not message.strip():
        raise AnalyticsError("cannot rate an empty message")
    system = prompts.REGISTRY["ideology-judge/rate@v1"].format(question=question)
    reply = None
    for _ in range(2):  # one retry on a non-numeric judge reply
        reply = gateway.complete_chat(
            chat_request("ideology-judge", system, message)).strip()
        digits = [ch for ch in reply if ch.isdigit()]
        if digits and 1 <= int(digits[0]) <= 5:
            score = int(digits[0])
            return IdeologyRating(score, ideology_bucket(score))
    raise AnalyticsError(f"non-numeric ideology judge reply: {reply!r}")


def detect_experience(transcript: list[dict], gateway: LLMGateway,
                      judge_prompt: str | None = None) -> bool:
    if not transcript:
        raise AnalyticsError("transcript is empty")
    system = judge_prompt or prompts.REGISTRY["experience-judge/abortion@v1"]
    text = "\n".join(f"{t['role']}: {t['content']}" for t in transcript)
    reply = gateway.complete_chat(
        chat_request("experience-judge", system, text)).strip().lower()
    if reply.startswith("yes"):
        return True
    if reply.startswith("no"):
        return False
    raise AnalyticsError(f"ambiguous experience judge reply: {reply!r}")


def _ranks(state: FoldedState, prefix_events, value_ids: list[str],
           policy: EdgeAcceptancePolicy,
           params: PageRankParams) -> tuple[dict, dict]:
    """(pagerank rank, direct-vote rank) per card at this event prefix."""
    tallies: dict[str, dict] = {eid: {"wiser": 0, "not_wiser": 0, "unsure": 0}
                                for eid in state.edges}
    votes: dict[tuple[str, str], str] = {}
    for event in prefix_events:
        if event.kind == "vote" and event.payload.get("target_kind") == "story":
            votes[(event.payload["participant_id"], event.payload["edge_id"])] = \
                event.payload["choice"]
    for (_, eid), choice in votes.items():
        if eid in tallies:
            tallies[eid][choice] += 1
    edges = [
        WisdomEdge(id=eid,
                   from_value=state.edges[eid]["from_value"],
                   to_value=state.edges[eid]["to_value"],
                   context=state.edges[eid]["context"],
                   story=state.edges[eid].get("story", ""),
                   tallies=Tallies(**tallies[eid]))
        for eid in sorted(state.edges)
    ]
    accepted = [e for e in accept_edges(edges, policy) if e.status == "accepted"]
    kept, _, _ = detect_and_break_cycles(accepted)
    scores = pagerank(value_ids, kept, params).scores
    direct = {vid: 0 for vid in value_ids}
    for edge in edges:
        if edge.to_value in direct:
            direct[edge.to_value] += edge.tallies.wiser
    pr_order = sorted(value_ids, key=lambda vid: (-scores[vid], vid))
    dv_order = sorted(value_ids, key=lambda vid: (-direct[vid], vid))
    return ({vid: i + 1 for i, vid in enumerate(pr_order)},
            {vid: i + 1 for i, vid in enumerate(dv_order)})


def scaling_trajectory(events, target_card: str, value_ids: list[str],
                       stride: int = 50,
                       policy: EdgeAcceptancePolicy | None = None,
                       params: PageRankParams | None = None) -> RankTrajectory:
    """Rank of the target card by PageRank and by direct wiser-votes, at
    successive prefixes of the vote events."""
    if target_card not in value_ids:
        raise AnalyticsError(f"unknown target card {target_card!r}")
    policy = policy or EdgeAcceptancePolicy()
    params = params or PageRankParams()
    state = fold_events(events)
    vote_offsets = [e.offset for e in events
                    if e.kind == "vote" and e.payload.get("target_kind") == "story"]
    checkpoints = sorted({0, *vote_offsets[stride - 1::stride],
                          vote_offsets[-1] if vote_offsets else 0})
    trajectory = RankTrajectory(target_card)
    for checkpoint in checkpoints:
        prefix = [e for e in events if e.offset <= checkpoint]
        pr_rank, dv_rank = _ranks(state, prefix, value_ids, policy, params)
        trajectory.steps.append({
            "events_processed": checkpoint,
            "pagerank_rank": pr_rank[target_card],
            "direct_vote_rank": dv_rank[target_card],
        })
    return trajectory


def generalizability_report(events) -> dict:
    """Vote/impression rates split by same- vs cross-scenario cards."""
    stats = {"same": {"impressions": 0, "votes": 0},
             "cross": {"impressions": 0, "votes": 0}}
    for event in events:
        if event.kind not in ("impression", "vote"):
            continue
        p = event.payload
        if p.get("target_kind") != "card":
            continue
        scenarios = p.get("card_scenarios") or []
        voter = p.get("voter_scenario")
        bucket = "same" if voter in scenarios else "cross"
        key = "impressions" if event.kind == "impression" else "votes"
        stats[bucket][key] += 1
    report = {}
    for bucket, name in (("same", "same_scenario_rate"),
                         ("cross", "cross_scenario_rate")):
        imp = stats[bucket]["impressions"]
        report[name] = stats[bucket]["votes"] / imp if imp else None
    return report


def survey_report(responses_by_question: dict[str, list[int]]) -> dict[str, float]:
    """Agree-rate per question: fraction of responses scoring 4 or above."""
    report = {}
    for question, responses in responses_by_question.items():
        for score in responses:
            if not 1 <= score <= 5:
                raise AnalyticsError(
                    f"survey response out of range for {question!r}: {score}")
        report[question] = (
            sum(1 for s in responses if s >= 4) / len(responses)
            if responses else 0.0)
    return report


def robustness_table(ratings: dict[str, IdeologyRating],
                     endorsement_scores: dict[str, int]) -> dict[str, dict]:
    """Bucket -> count and mean "expressed what you care about" score."""
    table = {b: {"count": 0, "mean_endorsement": None, "_sum": 0}
             for b in ("not", "slightly", "very")}
    for participant, rating in ratings.items():
        if participant not in endorsement_scores:
            continue
        entry = table[rating.bucket]
        entry["count"] += 1
        entry["_sum"] += endorsement_scores[participant]
    for entry in table.values():
        if entry["count"]:
            entry["mean_endorsement"] = entry["_sum"] / entry["count"]
        del entry["_sum"]
    return table


def report_to_json(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
