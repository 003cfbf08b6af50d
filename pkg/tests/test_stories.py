import json
import random
from pathlib import Path

import pytest

from moralgraph.aggregation import context_id_for
from moralgraph.gateway import GatewayConfig, LLMGateway
from moralgraph.model import MoralContext
from moralgraph.stories import (
    ImpressionLog,
    PolicyMapping,
    StoryEngine,
    StoryError,
    TransitionStory,
    VoteError,
    VoteLedger,
)
from tests.conftest import make_card, scripted_gateway
from tests.oracles import cosine_rank

FIXTURES = Path(__file__).parent / "fixtures"


def story_script(req):
    system = req.messages[0]["content"]
    if system.startswith("Given values cards relevant"):
        return json.dumps({"pairs": [["card-a", "card-b"]]})
    if "shared meaningful thing" in system:
        return "Both values serve the child's own growth."
    if "what was clarified" in system:
        return "The first value was scaffolding for the second."
    if "attentional policy" in system:
        return "I shifted what I watch for."
    if "final first-person story" in system:
        return "I used to push; now I watch for the spark."
    raise AssertionError(f"unexpected prompt: {system[:50]}")


def simple_context():
    return MoralContext("ctx-1", "When motivation is an issue", "parenting")


def make_story(story_id, from_value, to_value, from_card, context="ctx-1"):
    return TransitionStory(
        id=story_id, from_value=from_value, to_value=to_value, context=context,
        shared_good="g", clarification="c",
        policy_mappings=tuple(PolicyMapping(p.text, "changed")
                              for p in from_card.policies),
        final_story="f")


class TestChainFidelity:
    def test_vendored_replay_chain(self, discipline_card, curiosity_card):
        """The discipline -> curiosity transition replays hermetically and
        yields a complete chain with one mapping per source policy."""
        gateway = LLMGateway(GatewayConfig(
            mode="replay", fixture_dir=str(FIXTURES / "story_chain")))
        engine = StoryEngine(gateway)
        context_text = "When motivation is an issue"
        context = MoralContext(context_id_for(context_text), context_text,
                               "parenting")
        story = engine.generate_story(
            (discipline_card.id, curiosity_card.id), context,
            {c.id: c for c in (discipline_card, curiosity_card)})
        assert story.from_value == "card-discipline"
        assert story.to_value == "card-curiosity"
        assert story.context == context.id
        assert story.shared_good.strip()
        assert story.clarification.strip()
        assert story.final_story.strip()
        assert len(story.policy_mappings) == 3
        mapped = {m.old_policy for m in story.policy_mappings}
        assert mapped == {p.text for p in discipline_card.policies}
        assert all(m.change.strip() for m in story.policy_mappings)

    def test_incomplete_chain_rejected(self, discipline_card):
        story = make_story("s", "card-discipline", "card-curiosity", discipline_card)
        broken = TransitionStory(
            **{**story.to_json(), "policy_mappings": story.policy_mappings[:2],
               "shared_good": story.shared_good,
               "clarification": story.clarification,
               "final_story": story.final_story})
        with pytest.raises(StoryError):
            broken.check(discipline_card)

    def test_blank_field_rejected(self, discipline_card):
        story = make_story("s", "card-discipline", "card-curiosity", discipline_card)
        doc = story.to_json()
        doc["shared_good"] = "   "
        doc["policy_mappings"] = story.policy_mappings
        with pytest.raises(StoryError):
            TransitionStory(**doc).check(discipline_card)

    def test_self_transition_rejected(self):
        engine = StoryEngine(scripted_gateway({"story-chain-step": story_script}))
        with pytest.raises(StoryError):
            engine.generate_story(("card-a", "card-a"), simple_context(), {})


class TestClustering:
    def test_pairs_filtered(self):
        a = make_card("card-a", "A", ["THINGS one"])
        b = make_card("card-b", "B", ["THINGS two"])

        def script(req):
            return json.dumps({"pairs": [
                ["card-a", "card-b"], ["card-a", "card-a"],
                ["card-a", "ghost"], ["card-a", "card-b"]]})

        engine = StoryEngine(scripted_gateway({"story-chain-step": script}))
        pairs = engine.cluster_upgrade_pairs([a, b], simple_context(), [])
        assert pairs == [("card-a", "card-b")]

    def test_already_edged_pairs_skipped(self):
        from tests.conftest import make_edge
        a = make_card("card-a", "A", ["THINGS one"])
        b = make_card("card-b", "B", ["THINGS two"])
        engine = StoryEngine(scripted_gateway({"story-chain-step": story_script}))
        edge = make_edge("e1", "card-a", "card-b", context="ctx-1")
        assert engine.cluster_upgrade_pairs([a, b], simple_context(), [edge]) == []

    def test_gateway_failure_skips_cycle(self):
        a = make_card("card-a", "A", ["THINGS one"])
        b = make_card("card-b", "B", ["THINGS two"])
        engine = StoryEngine(LLMGateway(GatewayConfig(mode="scripted")))
        assert engine.cluster_upgrade_pairs([a, b], simple_context(), []) == []

    def test_fewer_than_two_cards(self):
        engine = StoryEngine(scripted_gateway({}))
        assert engine.cluster_upgrade_pairs(
            [make_card("card-a", "A", ["THINGS one"])], simple_context(), []) == []


class TestVoteLedger:
    def _setup(self, discipline_card):
        ledger = VoteLedger()
        story = make_story("story-1", "card-discipline", "card-curiosity",
                           discipline_card)
        edge = ledger.add_story(story)
        return ledger, story, edge

    def test_add_story_creates_candidate_edge(self, discipline_card):
        ledger, story, edge = self._setup(discipline_card)
        assert edge.status == "candidate"
        assert edge.from_value == story.from_value
        assert ledger.story_edge[story.id] == edge.id

    def test_vote_requires_impression(self, discipline_card):
        ledger, story, _ = self._setup(discipline_card)
        with pytest.raises(VoteError):
            ledger.record_story_vote("p1", story.id, "wiser")

    def test_votes_fold_into_tallies(self, discipline_card):
        ledger, story, edge = self._setup(discipline_card)
        for pid, choice in (("p1", "wiser"), ("p2", "wiser"), ("p3", "not_wiser"),
                            ("p4", "unsure")):
            ledger.record_impression(pid, story.id)
            edge = ledger.record_story_vote(pid, story.id, choice)
        assert (edge.tallies.wiser, edge.tallies.not_wiser, edge.tallies.unsure) \
            == (2, 1, 1)
        assert ledger.tallies_consistent()

    def test_revote_upserts(self, discipline_card):
        ledger, story, _ = self._setup(discipline_card)
        ledger.record_impression("p1", story.id)
        ledger.record_story_vote("p1", story.id, "wiser")
        edge = ledger.record_story_vote("p1", story.id, "not_wiser")
        assert edge.tallies.wiser == 0 and edge.tallies.not_wiser == 1
        assert ledger.tallies_consistent()

    def test_unknown_story_impression(self, discipline_card):
        ledger, _, _ = self._setup(discipline_card)
        with pytest.raises(VoteError):
            ledger.record_impression("p1", "ghost")


class TestImpressionLog:
    def test_hotness(self):
        log = ImpressionLog()
        for _ in range(4):
            log.record_impression("c1")
        log.record_vote("c1")
        assert log.hotness("c1") == 0.25
        assert log.hotness("unknown") == 0.0

    def test_vote_without_impression(self):
        log = ImpressionLog()
        with pytest.raises(VoteError):
            log.record_vote("c1")

    def test_votes_capped_by_impressions(self):
        log = ImpressionLog()
        log.record_impression("c1")
        log.record_vote("c1")
        with pytest.raises(VoteError):
            log.record_vote("c1")


class TestSelection:
    def test_select_stories_by_proximity_oracle(self):
        rng = random.Random(5)
        gateway = scripted_gateway({})
        engine = StoryEngine(gateway)
        cards = {}
        stories = []
        for i in range(12):
            words = rng.sample(["rules", "rewards", "curiosity", "trust",
                                "focus", "effort", "play", "order"], 3)
            card = make_card(f"card-{i}", f"V{i}",
                             [f"THINGS about {' and '.join(words)}"])
            cards[card.id] = card
            if i:
                stories.append(make_story(f"story-{i:02d}", card.id, "card-0", card))
        me = make_card("card-me", "Mine", ["THINGS about rules and focus"])
        cards["card-me"] = me
        picked = engine.select_stories(me, stories, cards, k=3)
        vectors = {s.id: gateway.embed(cards[s.from_value].policy_text())
                   for s in stories}
        oracle = cosine_rank(gateway.embed(me.policy_text()), vectors, 3)
        assert [s.id for s in picked] == [sid for sid, _ in oracle]

    def test_select_stories_min_three(self, discipline_card):
        engine = StoryEngine(scripted_gateway({}))
        cards = {"card-discipline": discipline_card,
                 "card-x": make_card("card-x", "X", ["THINGS other"])}
        stories = [make_story("story-1", "card-discipline", "card-x",
                              discipline_card)]
        assert len(engine.select_stories(discipline_card, stories, cards)) == 1

    def test_select_stories_requires_card(self):
        engine = StoryEngine(scripted_gateway({}))
        with pytest.raises(StoryError):
            engine.select_stories(None, [], {})

    def test_vote_candidates_mix_hot_and_new(self):
        gateway = scripted_gateway({})
        engine = StoryEngine(gateway)
        log = ImpressionLog()
        cards = [make_card(f"card-{i:02d}", f"V{i}",
                           [f"THINGS number {i} of interest"]) for i in range(20)]
        order = [c.id for c in cards]
        for c in cards[:5]:  # make the first five hot
            log.record_impression(c.id)
            log.record_vote(c.id)
        slate = engine.select_vote_candidates(cards[10], cards, order, log, k=6)
        assert len(slate) == 6
        assert len({c.id for c in slate}) == 6
