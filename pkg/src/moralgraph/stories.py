"""Wisdom-upgrade stories: generation chain, selection, and vote recording.

A story narrates a purported transition from one canonical value to a wiser
one for a specific moral context. Stories drive edge votes: each persisted
story has a candidate edge, and participant votes fold into that edge's
tallies. Generation runs as an explicit cycle (invoked by the scheduler, CLI
or simulation), keeping runs deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import prompts
from .gateway import GatewayError, LLMGateway, chat_request
from .model import (
    MoralContext,
    Tallies,
    ValuesCard,
    WisdomEdge,
    WisdomVote,
)


class StoryError(Exception):
    pass


class VoteError(Exception):
    pass


@dataclass(frozen=True)
class PolicyMapping:
    old_policy: str
    change: str


@dataclass(frozen=True)
class TransitionStory:
    id: str
    from_value: str
    to_value: str
    context: str
    shared_good: str
    clarification: str
    policy_mappings: tuple[PolicyMapping, ...]
    final_story: str

    def check(self, from_card: ValuesCard):
        missing = []
        for name in ("shared_good", "clarification", "final_story"):
            if not getattr(self, name).strip():
                missing.append(name)
        mapped = {m.old_policy for m in self.policy_mappings}
        for p in from_card.policies:
            if p.text not in mapped:
                missing.append(f"mapping for policy {p.text!r}")
        if missing:
            raise StoryError("incomplete story chain: " + "; ".join(missing))

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "from_value": self.from_value,
            "to_value": self.to_value,
            "context": self.context,
            "shared_good": self.shared_good,
            "clarification": self.clarification,
            "policy_mappings": [
                {"old_policy": m.old_policy, "change": m.change}
                for m in self.policy_mappings
            ],
            "final_story": self.final_story,
        }


@dataclass
class ImpressionLog:
    """Card-level impressions and votes from the card-voting step."""
    counts: dict[str, dict] = field(default_factory=dict)

    def record_impression(self, card_id: str):
        entry = self.counts.setdefault(card_id, {"impressions": 0, "votes": 0})
        entry["impressions"] += 1

    def record_vote(self, card_id: str):
        entry = self.counts.get(card_id)
        if entry is None or entry["votes"] >= entry["impressions"]:
            raise VoteError(f"card vote without matching impression: {card_id}")
        entry["votes"] += 1

    def hotness(self, card_id: str) -> float:
        entry = self.counts.get(card_id)
        if not entry or entry["impressions"] == 0:
            return 0.0
        return entry["votes"] / entry["impressions"]


@dataclass
class VoteLedger:
    """Story impressions, per-participant edge votes, and derived tallies."""
    edges: dict[str, WisdomEdge] = field(default_factory=dict)
    stories: dict[str, TransitionStory] = field(default_factory=dict)
    story_edge: dict[str, str] = field(default_factory=dict)
    votes: dict[tuple[str, str], WisdomVote] = field(default_factory=dict)
    shown: set = field(default_factory=set)  # (participant_id, story_id)

    def add_story(self, story: TransitionStory) -> WisdomEdge:
        edge = WisdomEdge(
            id=f"edge-{len(self.edges):04d}",
            from_value=story.from_value,
            to_value=story.to_value,
            context=story.context,
            story=story.id,
        )
        self.stories[story.id] = story
        self.edges[edge.id] = edge
        self.story_edge[story.id] = edge.id
        return edge

    def record_impression(self, participant_id: str, story_id: str):
        if story_id not in self.stories:
            raise VoteError(f"unknown story {story_id!r}")
        self.shown.add((participant_id, story_id))

    def record_story_vote(self, participant_id: str, story_id: str,
                          choice: str, timestamp: float = 0.0) -> WisdomEdge:
        if (participant_id, story_id) not in self.shown:
            raise VoteError(
                f"participant {participant_id} was never shown story {story_id}")
        edge_id = self.story_edge[story_id]
        vote = WisdomVote(participant_id, edge_id, choice, timestamp)
        self.votes[(participant_id, edge_id)] = vote  # upsert: later replaces earlier
        return self._refold(edge_id)

    def _refold(self, edge_id: str) -> WisdomEdge:
        counts = {"wiser": 0, "not_wiser": 0, "unsure": 0}
        for (_, eid), vote in self.votes.items():
            if eid == edge_id:
                counts[vote.choice] += 1
        edge = self.edges[edge_id].with_tallies(Tallies(**counts))
        self.edges[edge_id] = edge
        return edge

    def tallies_consistent(self) -> bool:
        for edge_id, edge in self.edges.items():
            counts = {"wiser": 0, "not_wiser": 0, "unsure": 0}
            for (_, eid), vote in self.votes.items():
                if eid == edge_id:
                    counts[vote.choice] += 1
            if Tallies(**counts) != edge.tallies:
                return False
        return True


class StoryEngine:
    def __init__(self, gateway: LLMGateway):
        self.gateway = gateway
        self._story_counter = 0

    # --- generation ---

    def cluster_upgrade_pairs(self, cards: list[ValuesCard], context: MoralContext,
                              existing_edges: list[WisdomEdge]) -> list[tuple[str, str]]:
        if len(cards) < 2:
            return []
        listing = "\n\n".join(f"[{c.id}] {c.title}\n{c.policy_text()}" for c in cards)
        system = prompts.REGISTRY["story-chain-step/cluster@v1"].format(context=context.text)
        try:
            reply = self.gateway.complete_chat(
                chat_request("story-chain-step", system, listing))
        except GatewayError:
            return []  # skip this cycle; nothing persisted
        doc = _parse_json(reply)
        known = {c.id for c in cards}
        edged = {(e.from_value, e.to_value) for e in existing_edges
                 if e.context == context.id}
        pairs = []
        for raw in doc.get("pairs", ()):
            pair = (raw[0], raw[1])
            if pair[0] == pair[1] or pair[0] not in known or pair[1] not in known:
                continue
            if pair in edged or pair in pairs:
                continue
            pairs.append(pair)
        return pairs

    def generate_story(self, pair: tuple[str, str], context: MoralContext,
                       cards: dict[str, ValuesCard]) -> TransitionStory:
        from_id, to_id = pair
        if from_id == to_id:
            raise StoryError("story endpoints must differ")
        from_card, to_card = cards[from_id], cards[to_id]
        header = (
            f"FROM VALUE: {from_card.title}\n{from_card.policy_text()}\n\n"
            f"TO VALUE: {to_card.title}\n{to_card.policy_text()}"
        )
        shared_good = self._step(
            "shared_good", context, header)
        clarification = self._step(
            "clarification", context, header + f"\n\nSHARED GOOD: {shared_good}")
        mappings = []
        for policy in from_card.policies:
            system = prompts.REGISTRY["story-chain-step/policy_mapping@v1"].format(
                policy=policy.text)
            reply = self.gateway.complete_chat(chat_request(
                "story-chain-step", system,
                header + f"\n\nSHARED GOOD: {shared_good}\nCLARIFICATION: {clarification}"))
            mappings.append(PolicyMapping(policy.text, reply.strip()))
        chain_text = "\n".join(
            [header, f"SHARED GOOD: {shared_good}", f"CLARIFICATION: {clarification}"]
            + [f"POLICY CHANGE ({m.old_policy}): {m.change}" for m in mappings])
        final_story = self._step("final", context, chain_text)
        story = TransitionStory(
            id=f"story-{self._story_counter:04d}",
            from_value=from_id,
            to_value=to_id,
            context=context.id,
            shared_good=shared_good,
            clarification=clarification,
            policy_mappings=tuple(mappings),
            final_story=final_story,
        )
        story.check(from_card)
        self._story_counter += 1
        return story

    def _step(self, step: str, context: MoralContext, user: str) -> str:
        template = prompts.REGISTRY[f"story-chain-step/{step}@v1"]
        system = template.format(context=context.text) if "{context}" in template else template
        return self.gateway.complete_chat(
            chat_request("story-chain-step", system, user)).strip()

    # --- selection ---

    def select_stories(self, participant_card: ValuesCard,
                       stories: list[TransitionStory],
                       cards: dict[str, ValuesCard], k: int = 3) -> list[TransitionStory]:
        if participant_card is None:
            raise StoryError("participant has no articulated card")
        query = self.gateway.embed(participant_card.policy_text())
        scored = []
        for story in stories:
            vec = self.gateway.embed(cards[story.from_value].policy_text())
            distance = 1.0 - float(np.dot(query, vec))
            scored.append((distance, story.id, story))
        scored.sort(key=lambda item: (item[0], item[1]))
        return [story for _, _, story in scored[:min(k, len(scored))]]

    def select_vote_candidates(self, participant_card: ValuesCard,
                               pool_cards: list[ValuesCard],
                               creation_order: list[str],
                               log: ImpressionLog, k: int = 6,
                               shortlist: int = 12) -> list[ValuesCard]:
        by_id = {c.id: c for c in pool_cards}
        hottest = sorted(
            by_id, key=lambda cid: (-log.hotness(cid), cid))[:shortlist]
        newest = [cid for cid in reversed(creation_order) if cid in by_id][:shortlist]
        candidates = sorted(set(hottest) | set(newest))
        if participant_card is not None and candidates:
            query = self.gateway.embed(participant_card.policy_text())
            candidates.sort(key=lambda cid: (
                1.0 - float(np.dot(query, self.gateway.embed(by_id[cid].policy_text()))),
                cid))
        return [by_id[cid] for cid in candidates[:min(k, len(candidates))]]


def _parse_json(text: str) -> dict:
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < 0:
        raise StoryError(f"expected JSON from gateway, got {text!r}")
    return json.loads(text[start:end + 1])
