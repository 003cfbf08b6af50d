"""Interview state machine: scenario prompt -> validated custom values card.

Phases move strictly forward through
opening -> probing -> policy_gathering -> constitutive_check -> card_drafting
-> card_editing -> done, except that editing may loop back to drafting.
Strategy selection happens by classifying the participant's latest message
through the gateway; the mapping is:

    concrete_attention  -> similar_choices
    slogan_or_rule      -> underlying_good
    stuck_no_story      -> user_history
    stuck_no_experience -> role_models
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import prompts
from .gateway import ChatRequest, LLMGateway, chat_request
from .model import (
    AttentionalPolicy,
    CardOrigin,
    Scenario,
    ValuesCard,
    render_card,
    validate_card,
)

PHASES = (
    "opening", "probing", "policy_gathering", "constitutive_check",
    "card_drafting", "card_editing", "done", "abandoned",
)

STRATEGIES = ("similar_choices", "underlying_good", "user_history", "role_models")

_KIND_TO_STRATEGY = {
    "concrete_attention": "similar_choices",
    "slogan_or_rule": "underlying_good",
    "stuck_no_story": "user_history",
    "stuck_no_experience": "role_models",
}

# Forward-only transitions, plus the editing -> drafting loop.
_ALLOWED = {
    "opening": {"probing", "abandoned"},
    "probing": {"probing", "policy_gathering", "constitutive_check", "abandoned"},
    "policy_gathering": {"policy_gathering", "constitutive_check", "abandoned"},
    "constitutive_check": {"constitutive_check", "card_drafting", "abandoned"},
    "card_drafting": {"card_editing", "abandoned"},
    "card_editing": {"card_editing", "card_drafting", "done", "abandoned"},
}

MAX_EDIT_ROUNDS = 5

OPENING_TEMPLATE = (
    "Help us figure out how a conversational assistant should respond to "
    "questions like this one:\n\n“{prompt}”\n\n"
    "Everyone's input helps! Say what you think should be considered in the response."
)

CLOSING_TURN = (
    "Thank you for submitting your value. Your input helps us understand how "
    "an assistant should respond in morally complex situations."
)


class ElicitationError(Exception):
    pass


class UnknownScenarioError(ElicitationError):
    pass


class EmptyMessageError(ElicitationError):
    pass


class SessionStateError(ElicitationError):
    pass


class NotConfirmedError(ElicitationError):
    pass


class CardValidationError(ElicitationError):
    def __init__(self, errors):
        super().__init__("card failed validation: " + "; ".join(errors))
        self.errors = list(errors)


@dataclass
class Turn:
    role: str  # "assistant" | "user"
    content: str


@dataclass
class ElicitationSession:
    id: str
    participant_id: str
    scenario_id: str
    transcript: list[Turn] = field(default_factory=list)
    phase: str = "opening"
    draft_policies: list[AttentionalPolicy] = field(default_factory=list)
    draft_card: ValuesCard | None = None
    strategy_history: list[str] = field(default_factory=list)
    confirmed: bool = False
    edit_rounds: int = 0

    def last_user_message(self) -> str:
        for turn in reversed(self.transcript):
            if turn.role == "user":
                return turn.content
        return ""

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "participant_id": self.participant_id,
            "scenario_id": self.scenario_id,
            "phase": self.phase,
            "strategy_history": list(self.strategy_history),
            "transcript": [{"role": t.role, "content": t.content} for t in self.transcript],
        }


class ElicitationEngine:
    def __init__(self, gateway: LLMGateway, scenarios: dict[str, Scenario]):
        self.gateway = gateway
        self.scenarios = scenarios

    # --- session lifecycle ---

    def start_session(self, participant_id: str, scenario_id: str,
                      session_id: str) -> ElicitationSession:
        scenario = self.scenarios.get(scenario_id)
        if scenario is None:
            raise UnknownScenarioError(f"unknown scenario {scenario_id!r}")
        session = ElicitationSession(
            id=session_id, participant_id=participant_id, scenario_id=scenario_id)
        opening = OPENING_TEMPLATE.format(prompt=scenario.prompt)
        session.transcript.append(Turn("assistant", opening))
        return session

    def advance(self, session: ElicitationSession, user_message: str) -> str:
        if session.phase in ("done", "abandoned"):
            raise SessionStateError(f"session is {session.phase}")
        if not user_message.strip():
            raise EmptyMessageError("empty user message")
        session.transcript.append(Turn("user", user_message))
        if session.phase in ("opening", "probing", "policy_gathering"):
            reply = self._advance_probing(session, user_message)
        elif session.phase == "constitutive_check":
            reply = self._advance_constitutive(session, user_message)
        elif session.phase == "card_drafting":
            reply = self._draft_card(session)
        else:  # card_editing
            reply = self._advance_editing(session, user_message)
        session.transcript.append(Turn("assistant", reply))
        return reply

    def finalize_card(self, session: ElicitationSession) -> ValuesCard:
        if session.phase != "card_editing" or not session.confirmed:
            raise NotConfirmedError("participant has not confirmed the card")
        card = ValuesCard(
            id=f"card-{session.id}",
            title=session.draft_card.title,
            summary=session.draft_card.summary,
            policies=session.draft_card.policies,
            origin=CardOrigin(
                participant_id=session.participant_id,
                scenario_id=session.scenario_id,
                session_id=session.id,
            ),
        )
        report = validate_card(card)
        if report.errors:
            self._set_phase(session, "card_drafting")
            session.confirmed = False
            raise CardValidationError(report.errors)
        self._set_phase(session, "done")
        return card

    def abandon(self, session: ElicitationSession):
        if session.phase in ("done", "abandoned"):
            raise SessionStateError(f"session is {session.phase}")
        self._set_phase(session, "abandoned")

    # --- phase handlers ---

    def _advance_probing(self, session: ElicitationSession, message: str) -> str:
        kind, policies, complete = self._classify(session, message)
        strategy = _KIND_TO_STRATEGY.get(kind, "similar_choices")
        session.strategy_history.append(strategy)
        self._merge_policies(session, policies)
        if session.phase == "opening":
            self._set_phase(session, "probing")
        if session.phase == "probing" and session.draft_policies:
            self._set_phase(session, "policy_gathering")
        if len(session.draft_policies) >= 2 and complete:
            self._set_phase(session, "constitutive_check")
            return self._constitutive_turn(session)
        return self._strategy_turn(session, strategy, message)

    def _advance_constitutive(self, session: ElicitationSession, message: str) -> str:
        _, policies, _ = self._classify(session, message)
        if policies:
            # New policies surfaced during the check; confirm again.
            self._merge_policies(session, policies)
            return self._constitutive_turn(session)
        self._set_phase(session, "card_drafting")
        return self._draft_card(session)

    def _draft_card(self, session: ElicitationSession) -> str:
        policy_lines = "\n".join(p.text for p in session.draft_policies)
        scenario = self.scenarios[session.scenario_id]
        reply = self._chat(
            session, prompts.REGISTRY["elicitation/draft_card@v1"],
            f"Scenario: {scenario.prompt}\nPolicies:\n{policy_lines}")
        doc = _parse_json(reply)
        session.draft_card = ValuesCard(
            id=f"draft-{session.id}",
            title=doc.get("title", ""),
            summary=doc.get("summary", ""),
            policies=tuple(AttentionalPolicy(p) for p in doc.get("policies", ())),
            origin=CardOrigin(session.participant_id, session.scenario_id, session.id),
        )
        self._set_phase(session, "card_editing")
        return (
            "Here is a values card drafted from what you shared:\n\n"
            + _render_draft(session.draft_card)
            + "\nDoes this capture what you care about? You can ask for changes."
        )

    def _advance_editing(self, session: ElicitationSession, message: str) -> str:
        reply = self._chat(
            session, prompts.REGISTRY["elicitation/edit@v1"],
            "Current card:\n" + _render_draft(session.draft_card)
            + "\nParticipant reply: " + message)
        doc = _parse_json(reply)
        if doc.get("abandon"):
            self._set_phase(session, "abandoned")
            return "No problem - we've set this session aside. Thank you for your time."
        if doc.get("confirmed"):
            session.confirmed = True
            return CLOSING_TURN
        if session.edit_rounds >= MAX_EDIT_ROUNDS:
            return (
                "We've been through several rounds of edits. If the card still "
                "doesn't fit, you can say so and we'll set this session aside."
            )
        session.edit_rounds += 1
        session.draft_card = ValuesCard(
            id=f"draft-{session.id}",
            title=doc.get("title", session.draft_card.title),
            summary=doc.get("summary", session.draft_card.summary),
            policies=tuple(AttentionalPolicy(p) for p in doc.get("policies", ()))
            or session.draft_card.policies,
            origin=session.draft_card.origin,
        )
        return (
            "Here is the revised card:\n\n" + _render_draft(session.draft_card)
            + "\nDoes this capture it now?"
        )

    # --- gateway helpers ---

    def _chat(self, session: ElicitationSession, system: str, user: str) -> str:
        req = chat_request("elicitation", system, user, session_id=session.id)
        return self.gateway.complete_chat(req)

    def _classify(self, session, message) -> tuple[str, list[AttentionalPolicy], bool]:
        gathered = "\n".join(p.text for p in session.draft_policies)
        reply = self._chat(
            session, prompts.REGISTRY["elicitation/classify@v1"],
            f"GATHERED POLICIES:\n{gathered}\n\nLATEST MESSAGE:\n{message}")
        doc = _parse_json(reply)
        policies = [AttentionalPolicy(p) for p in doc.get("policies", ()) if p.strip()]
        return doc.get("kind", "concrete_attention"), policies, bool(doc.get("complete"))

    def _strategy_turn(self, session, strategy: str, message: str) -> str:
        system = prompts.REGISTRY["elicitation/reply@v1"].format(strategy=strategy)
        return self._chat(session, system, message)

    def _constitutive_turn(self, session) -> str:
        policy_lines = "\n".join(p.text for p in session.draft_policies)
        return self._chat(
            session, prompts.REGISTRY["elicitation/constitutive@v1"], policy_lines)

    # --- internals ---

    @staticmethod
    def _merge_policies(session: ElicitationSession, policies):
        seen = {p.text.lower() for p in session.draft_policies}
        for p in policies:
            if p.text.lower() not in seen:
                session.draft_policies.append(p)
                seen.add(p.text.lower())

    @staticmethod
    def _set_phase(session: ElicitationSession, phase: str):
        allowed = _ALLOWED.get(session.phase, set())
        if phase != session.phase and phase not in allowed:
            raise SessionStateError(
                f"illegal phase transition {session.phase} -> {phase}")
        session.phase = phase


def _render_draft(card: ValuesCard) -> str:
    report = validate_card(card)
    if report.errors:
        # Draft may be structurally incomplete; show a permissive rendering.
        lines = [f"# {card.title}", "", card.summary, ""]
        lines.extend(f"- {p.text}" for p in card.policies)
        return "\n".join(lines) + "\n"
    return render_card(card)


def _parse_json(text: str) -> dict:
    text = text.strip()
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < 0:
        raise ElicitationError(f"expected JSON from gateway, got {text!r}")
    return json.loads(text[start:end + 1])
