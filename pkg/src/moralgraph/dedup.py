"""Canonical card pool and deduplication.

Each new custom card is matched against nearby canonical cards in embedding
space (policies only, never title or summary) and a judge decides whether the
two express the same value. No match means the card itself becomes canonical.
The pool only ever grows; coalescing never deletes canonicals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import prompts
from .gateway import GatewayError, LLMGateway, chat_request
from .model import ValuesCard, card_to_json, render_card


class DedupError(Exception):
    pass


class JudgmentDeferred(DedupError):
    """Gateway failed mid-judgment; the card stays custom for now."""


@dataclass
class DedupDecision:
    same_value: bool
    rationale: str


@dataclass
class CanonicalizeResult:
    canonical_id: str
    coalesced: bool  # True when merged into an existing canonical


@dataclass
class CanonicalPool:
    gateway: LLMGateway
    similarity_threshold: float = 0.85
    judge_k: int = 5
    cards: dict[str, ValuesCard] = field(default_factory=dict)
    endorsements: dict[str, list[dict]] = field(default_factory=dict)
    creation_order: list[str] = field(default_factory=list)
    _vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.cards)

    def _embed_card(self, card: ValuesCard) -> np.ndarray:
        return self.gateway.embed(card.policy_text())

    # --- operations ---

    def nearest_canonical(self, card: ValuesCard, k: int) -> list[tuple[str, float]]:
        """Top-k canonical candidates by cosine over policy-text embeddings."""
        if not self.cards:
            return []
        query = self._embed_card(card)
        scored = [
            (cid, float(np.dot(query, vec)))
            for cid, vec in self._vectors.items()
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]

    def judge_duplicate(self, card_a: ValuesCard, card_b: ValuesCard) -> DedupDecision:
        if card_a.content_key() == card_b.content_key():
            return DedupDecision(True, "byte-identical cards")
        user = (
            "CARD A:\n" + _loose_render(card_a)
            + "\nCARD B:\n" + _loose_render(card_b)
        )
        req = chat_request("dedup-judge", prompts.REGISTRY["dedup-judge/criteria@v1"], user)
        try:
            reply = self.gateway.complete_chat(req)
        except GatewayError as exc:
            raise JudgmentDeferred(str(exc)) from exc
        try:
            doc = json.loads(reply[reply.find("{"):reply.rfind("}") + 1])
        except (ValueError, json.JSONDecodeError) as exc:
            raise JudgmentDeferred(f"unparseable judge reply: {reply!r}") from exc
        return DedupDecision(bool(doc.get("same_value")), doc.get("rationale", ""))

    def canonicalize(self, card: ValuesCard) -> CanonicalizeResult:
        """Coalesce into an existing canonical, or insert the card as a new one."""
        for cid, similarity in self.nearest_canonical(card, self.judge_k):
            canonical = self.cards[cid]
            if canonical.content_key() == card.content_key():
                self._record_coalesce(cid, card)
                return CanonicalizeResult(cid, True)
            if similarity < self.similarity_threshold:
                break  # candidates are sorted; the rest are farther
            decision = self.judge_duplicate(card, canonical)
            if decision.same_value:
                self._record_coalesce(cid, card)
                return CanonicalizeResult(cid, True)
        return CanonicalizeResult(self._insert(card), False)

    def record_endorsement(self, canonical_id: str, participant_id: str, approved: bool):
        if canonical_id not in self.cards:
            raise DedupError(f"unknown canonical card {canonical_id!r}")
        self.endorsements.setdefault(canonical_id, []).append(
            {"participant": participant_id, "approved": bool(approved)})

    def export(self) -> list[dict]:
        return [card_to_json(self.cards[cid]) for cid in self.creation_order]

    # --- internals ---

    def _record_coalesce(self, canonical_id: str, card: ValuesCard):
        canonical = self.cards[canonical_id]
        if card.id not in canonical.canonical_of:
            self.cards[canonical_id] = ValuesCard(
                id=canonical.id,
                title=canonical.title,
                summary=canonical.summary,
                policies=canonical.policies,
                origin=None,
                canonical_of=canonical.canonical_of + (card.id,),
            )

    def _insert(self, card: ValuesCard) -> str:
        canonical_id = f"canon-{len(self.creation_order):04d}"
        canonical = ValuesCard(
            id=canonical_id,
            title=card.title,
            summary=card.summary,
            policies=card.policies,
            origin=None,
            canonical_of=(card.id,),
        )
        self.cards[canonical_id] = canonical
        self.creation_order.append(canonical_id)
        self._vectors[canonical_id] = self._embed_card(canonical)
        return canonical_id


def _loose_render(card: ValuesCard) -> str:
    try:
        return render_card(card)
    except Exception:  # invalid drafts still need to be shown to the judge
        lines = [f"# {card.title}", "", card.summary, ""]
        lines.extend(f"- {p.text}" for p in card.policies)
        return "\n".join(lines) + "\n"
