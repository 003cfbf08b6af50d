import json

import pytest

from moralgraph.gateway import GatewayConfig, LLMGateway
from moralgraph.model import (
    AttentionalPolicy,
    CardOrigin,
    MoralContext,
    Tallies,
    ValuesCard,
    WisdomEdge,
)


def make_card(card_id: str, title: str, policies, summary: str = "A summary.",
              origin: CardOrigin | None = None, canonical_of=()) -> ValuesCard:
    return ValuesCard(
        id=card_id, title=title, summary=summary,
        policies=tuple(AttentionalPolicy(p) for p in policies),
        origin=origin,
        canonical_of=tuple(canonical_of) or ((f"src-{card_id}",) if origin is None else ()))


def make_edge(edge_id: str, from_value: str, to_value: str,
              context: str = "ctx-1", wiser: int = 0, not_wiser: int = 0,
              unsure: int = 0, status: str = "candidate") -> WisdomEdge:
    return WisdomEdge(
        id=edge_id, from_value=from_value, to_value=to_value, context=context,
        story=f"story-for-{edge_id}",
        tallies=Tallies(wiser, not_wiser, unsure), status=status)


def make_context(ctx_id: str = "ctx-1", text: str = "When motivation is an issue",
                 source_scenario: str = "scenario-1") -> MoralContext:
    return MoralContext(id=ctx_id, text=text, source_scenario=source_scenario)


DISCIPLINE_POLICIES = (
    "EXAMPLES of discipline that can inspire the user",
    "STRATEGIES for instilling discipline",
    "SENSE OF ACHIEVEMENT that comes from disciplined actions",
)

CURIOSITY_POLICIES = (
    "SPARKS of genuine curiosity in the child",
    "QUESTIONS the child asks when truly interested",
    "SENSE OF ACHIEVEMENT that comes from following curiosity",
)


@pytest.fixture
def discipline_card():
    return make_card("card-discipline", "Inspiring Discipline", DISCIPLINE_POLICIES,
                     summary="Show the child discipline worth admiring.")


@pytest.fixture
def curiosity_card():
    return make_card("card-curiosity", "Igniting Curiosity", CURIOSITY_POLICIES,
                     summary="Let the child's own interest drive the work.")


def scripted_gateway(scripts: dict, **config_kwargs) -> LLMGateway:
    return LLMGateway(GatewayConfig(mode="scripted", **config_kwargs),
                      scripted=scripts)


def json_script(payload):
    """A script that always replies with the given JSON payload."""
    text = json.dumps(payload)
    return lambda req: text
