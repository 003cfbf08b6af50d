"""Deployment orchestrator: wires elicitation, dedup, stories and aggregation
over the event log. The HTTP API and the CLI are thin layers over this.

Every externally visible mutation is appended to the event log before the
call returns, so derived state is always reconstructible from the log.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .aggregation import (
    EdgeAcceptancePolicy,
    PageRankParams,
    aggregate,
    derive_contexts,
    export_alignment_target,
    retrieve_value_for_state,
)
from .dedup import CanonicalPool
from .elicitation import ElicitationEngine, ElicitationSession
from .gateway import LLMGateway
from .graphio import alignment_target_to_jsonl, export_graph
from .model import (
    MoralContext,
    MoralGraph,
    Participant,
    Scenario,
    ValuesCard,
    card_to_json,
)
from .stories import ImpressionLog, StoryEngine, VoteLedger
from .storage import EventLog


class PlatformError(Exception):
    pass


@dataclass
class Deployment:
    scenarios: dict[str, Scenario]
    gateway: LLMGateway
    storage_path: str | None = None
    acceptance: EdgeAcceptancePolicy = field(default_factory=EdgeAcceptancePolicy)
    pagerank_params: PageRankParams = field(default_factory=PageRankParams)
    drop_entire_cycle: bool = False

    def __post_init__(self):
        self.log = EventLog(self.storage_path)
        self.engine = ElicitationEngine(self.gateway, self.scenarios)
        self.pool = CanonicalPool(self.gateway)
        self.story_engine = StoryEngine(self.gateway)
        self.ledger = VoteLedger()
        self.impressions = ImpressionLog()
        self.participants: dict[str, Participant] = {}
        self.sessions: dict[str, ElicitationSession] = {}
        self.custom_cards: dict[str, ValuesCard] = {}
        self.participant_custom: dict[str, str] = {}
        self.participant_canonical: dict[str, str] = {}
        self.contexts: dict[str, MoralContext] = {}
        self._scenario_contexts: dict[str, list[str]] = {}
        self._session_seq = 0
        self.graph: MoralGraph | None = None

    # --- participants & sessions ---

    def create_session(self, participant_id: str, scenario_id: str,
                       demographics: dict | None = None) -> ElicitationSession:
        if scenario_id not in self.scenarios:
            raise PlatformError(f"unknown scenario {scenario_id!r}")
        if participant_id not in self.participants:
            self.participants[participant_id] = Participant(
                participant_id, scenario_id,
                tuple(sorted((demographics or {}).items())))
        session_id = f"session-{self._session_seq:05d}"
        self._session_seq += 1
        session = self.engine.start_session(participant_id, scenario_id, session_id)
        self.sessions[session_id] = session
        self._emit_turn(session, "assistant", session.transcript[-1].content)
        return session

    def post_message(self, session_id: str, message: str) -> str:
        session = self._session(session_id)
        reply = self.engine.advance(session, message)
        self._emit_turn(session, "user", message)
        self._emit_turn(session, "assistant", reply)
        return reply

    def confirm_card(self, session_id: str) -> dict:
        """Finalize the session's card and run it through deduplication."""
        session = self._session(session_id)
        card = self.engine.finalize_card(session)
        self.custom_cards[card.id] = card
        self.participant_custom[session.participant_id] = card.id
        self.log.append("card_created", {
            "card_id": card.id, "card": card_to_json(card),
            "session_id": session_id, "participant_id": session.participant_id})
        result = self.pool.canonicalize(card)
        self.participant_canonical[session.participant_id] = result.canonical_id
        self.log.append("card_canonicalized", {
            "card_id": card.id, "canonical_id": result.canonical_id,
            "coalesced": result.coalesced,
            "participant_id": session.participant_id})
        return {"card_id": card.id, "canonical_id": result.canonical_id,
                "coalesced": result.coalesced}

    def abandon_session(self, session_id: str):
        self.engine.abandon(self._session(session_id))

    def record_endorsement(self, participant_id: str, approved: bool):
        canonical_id = self.participant_canonical.get(participant_id)
        if canonical_id is None:
            raise PlatformError(f"participant {participant_id} has no canonical card")
        self.pool.record_endorsement(canonical_id, participant_id, approved)
        self.record_survey(participant_id, "deduplicated value represents me well",
                           5 if approved else 2)

    def record_survey(self, participant_id: str, question: str, score: int):
        if not 1 <= int(score) <= 5:
            raise PlatformError("survey score must be in 1..5")
        self.log.append("survey_response", {
            "participant_id": participant_id, "question": question,
            "score": int(score)})

    # --- contexts ---

    def contexts_for_scenario(self, scenario_id: str) -> list[MoralContext]:
        if scenario_id not in self._scenario_contexts:
            derived = derive_contexts(
                self.scenarios[scenario_id].prompt, self.gateway,
                source_scenario=scenario_id)
            self._scenario_contexts[scenario_id] = [c.id for c in derived]
            for ctx in derived:
                self.contexts.setdefault(ctx.id, ctx)
        return [self.contexts[cid] for cid in self._scenario_contexts[scenario_id]]

    # --- stories & votes ---

    def generation_cycle(self) -> int:
        """Generate stories for newly clustered upgrade pairs; returns count."""
        created = 0
        for scenario_id in sorted(self.scenarios):
            cards = self._scenario_canonicals(scenario_id)
            if len(cards) < 2:
                continue
            for context in self.contexts_for_scenario(scenario_id):
                pairs = self.story_engine.cluster_upgrade_pairs(
                    cards, context, list(self.ledger.edges.values()))
                for pair in pairs:
                    story = self.story_engine.generate_story(
                        pair, context, self.pool.cards)
                    edge = self.ledger.add_story(story)
                    self.log.append("story_created", {
                        "story_id": story.id, "story": story.to_json(),
                        "edge": {"id": edge.id, "from_value": edge.from_value,
                                 "to_value": edge.to_value,
                                 "context": edge.context}})
                    created += 1
        return created

    def next_stories(self, participant_id: str, k: int = 3):
        card = self._participant_card(participant_id)
        voted_edges = {eid for (pid, eid) in self.ledger.votes
                       if pid == participant_id}
        available = [s for s in self.ledger.stories.values()
                     if self.ledger.story_edge[s.id] not in voted_edges]
        stories = self.story_engine.select_stories(
            card, available, self.pool.cards, k=k)
        for story in stories:
            self.ledger.record_impression(participant_id, story.id)
            self.log.append("impression", {
                "participant_id": participant_id, "target_kind": "story",
                "target_id": story.id})
        return stories

    def vote_story(self, participant_id: str, story_id: str, choice: str):
        edge = self.ledger.record_story_vote(participant_id, story_id, choice)
        self.log.append("vote", {
            "participant_id": participant_id, "target_kind": "story",
            "target_id": story_id, "edge_id": edge.id, "choice": choice})
        return edge

    def card_slate(self, participant_id: str, k: int = 6):
        card = self._participant_card(participant_id)
        slate = self.story_engine.select_vote_candidates(
            card, list(self.pool.cards.values()), self.pool.creation_order,
            self.impressions, k=k)
        voter_scenario = self.participants[participant_id].chosen_scenario
        for c in slate:
            self.impressions.record_impression(c.id)
            self.log.append("impression", {
                "participant_id": participant_id, "target_kind": "card",
                "target_id": c.id,
                "card_scenarios": sorted(self._card_scenarios().get(c.id, ())),
                "voter_scenario": voter_scenario})
        return slate

    def vote_card(self, participant_id: str, card_id: str):
        self.impressions.record_vote(card_id)
        voter_scenario = self.participants[participant_id].chosen_scenario
        self.log.append("vote", {
            "participant_id": participant_id, "target_kind": "card",
            "target_id": card_id,
            "card_scenarios": sorted(self._card_scenarios().get(card_id, ())),
            "voter_scenario": voter_scenario})

    # --- aggregation & export ---

    def build_graph(self) -> MoralGraph:
        graph = MoralGraph()
        graph.scenarios = dict(self.scenarios)
        graph.contexts = dict(self.contexts)
        graph.participants = dict(self.participants)
        graph.values = dict(self.pool.cards)
        graph.edges = dict(self.ledger.edges)
        graph.card_scenarios = {
            cid: tuple(sorted(scens))
            for cid, scens in self._card_scenarios().items()}
        self.graph = graph
        return graph

    def run_aggregation(self):
        graph = self.build_graph()
        result = aggregate(graph, self.acceptance, self.pagerank_params,
                           drop_entire_cycle=self.drop_entire_cycle)
        self.log.append("aggregation_run", {"params": result.params})
        return graph, result

    def export_graph_text(self) -> str:
        if self.graph is None or self.graph.aggregation is None:
            self.run_aggregation()
        return export_graph(self.graph)

    def export_alignment_text(self, include_transitive: bool = False) -> str:
        if self.graph is None or self.graph.aggregation is None:
            self.run_aggregation()
        records = export_alignment_target(self.graph, include_transitive)
        return alignment_target_to_jsonl(records)

    def retrieve(self, state_text: str):
        if self.graph is None or self.graph.aggregation is None:
            self.run_aggregation()
        return retrieve_value_for_state(state_text, self.graph, self.gateway)

    def provenance(self, card_id: str) -> dict:
        """Trace a canonical card back to edges, stories, votes and sessions."""
        if card_id not in self.pool.cards:
            raise PlatformError(f"unknown canonical card {card_id!r}")
        canonical = self.pool.cards[card_id]
        edges = [e for e in self.ledger.edges.values()
                 if card_id in (e.from_value, e.to_value)]
        sessions = []
        for custom_id in canonical.canonical_of:
            custom = self.custom_cards.get(custom_id)
            if custom is not None and custom.origin is not None:
                sessions.append(custom.origin.session_id)
        return {
            "card": card_to_json(canonical),
            "edges": [{
                "id": e.id, "from_value": e.from_value, "to_value": e.to_value,
                "context": e.context, "status": e.status, "story": e.story,
                "tallies": {"wiser": e.tallies.wiser,
                            "not_wiser": e.tallies.not_wiser,
                            "unsure": e.tallies.unsure},
                "votes": [
                    {"participant_id": pid, "choice": vote.choice}
                    for (pid, eid), vote in sorted(self.ledger.votes.items())
                    if eid == e.id],
            } for e in sorted(edges, key=lambda e: e.id)],
            "sessions": sorted(sessions),
        }

    # --- internals ---

    def _session(self, session_id: str) -> ElicitationSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise PlatformError(f"unknown session {session_id!r}")
        return session

    def _participant_card(self, participant_id: str) -> ValuesCard:
        canonical_id = self.participant_canonical.get(participant_id)
        if canonical_id is None:
            raise PlatformError(
                f"participant {participant_id} has no articulated card")
        return self.pool.cards[canonical_id]

    def _emit_turn(self, session: ElicitationSession, role: str, content: str):
        self.log.append("session_turn", {
            "session_id": session.id, "participant_id": session.participant_id,
            "scenario_id": session.scenario_id, "role": role, "content": content})

    def _card_scenarios(self) -> dict[str, set]:
        mapping: dict[str, set] = {}
        for canonical_id, canonical in self.pool.cards.items():
            scens = set()
            for custom_id in canonical.canonical_of:
                custom = self.custom_cards.get(custom_id)
                if custom is not None and custom.origin is not None:
                    scens.add(custom.origin.scenario_id)
            mapping[canonical_id] = scens
        return mapping

    def _scenario_canonicals(self, scenario_id: str) -> list[ValuesCard]:
        mapping = self._card_scenarios()
        return [self.pool.cards[cid] for cid in self.pool.creation_order
                if scenario_id in mapping.get(cid, ())]
