"""Domain types for scenarios, participants, contexts, values cards, edges and votes.

Everything here is a plain value type: no I/O, no globals. Validation is
report-returning (errors + warnings) rather than exception-driven, so callers
can show problems to participants instead of crashing mid-interview.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

MAX_CONTEXT_LEN = 120
MAX_POLICIES = 10

VOTE_CHOICES = ("wiser", "not_wiser", "unsure")
EDGE_STATUSES = ("candidate", "accepted", "rejected", "omitted")

_ATTENTION_TARGET_RE = re.compile(r"^((?:[A-Z][A-Z'\-]+\s*)+)")


class ModelError(ValueError):
    """Raised for structurally invalid domain objects."""


@dataclass(frozen=True)
class Scenario:
    id: str
    prompt: str
    tag: str

    def __post_init__(self):
        if not self.prompt.strip():
            raise ModelError("scenario prompt must be nonempty")
        if not self.tag.strip():
            raise ModelError("scenario tag must be nonempty")


@dataclass(frozen=True)
class Participant:
    id: str
    chosen_scenario: str
    demographics: tuple = ()  # tuple of (key, value) pairs; hashable

    def demographics_dict(self) -> dict:
        return dict(self.demographics)


def normalize_context_text(text: str) -> str:
    """Normalize a moral-context string so it starts with "When"."""
    t = " ".join(text.split())
    if not t:
        raise ModelError("context text must be nonempty")
    if not t.lower().startswith("when"):
        t = "When " + t[0].lower() + t[1:]
    elif not t.startswith("When"):
        t = "When" + t[4:]
    if len(t) > MAX_CONTEXT_LEN:
        t = t[:MAX_CONTEXT_LEN].rstrip()
    return t


@dataclass(frozen=True)
class MoralContext:
    id: str
    text: str
    source_scenario: str

    def __post_init__(self):
        if not self.text.strip():
            raise ModelError("context text must be nonempty")
        if len(self.text) > MAX_CONTEXT_LEN:
            raise ModelError(f"context text exceeds {MAX_CONTEXT_LEN} characters")
        if not self.text.startswith("When"):
            raise ModelError('context text must start with "When"')


def parse_attention_target(text: str) -> str:
    """Extract the leading capitalized noun phrase from a policy line.

    Policy lines look like "EXAMPLES of discipline that can inspire the user":
    the target is the leading run of all-caps words. Returns "" if absent.
    """
    m = _ATTENTION_TARGET_RE.match(text.strip())
    return m.group(1).strip() if m else ""


@dataclass(frozen=True)
class AttentionalPolicy:
    text: str

    @property
    def attention_target(self) -> str:
        return parse_attention_target(self.text)


@dataclass(frozen=True)
class CardOrigin:
    participant_id: str
    scenario_id: str
    session_id: str


@dataclass(frozen=True)
class ValuesCard:
    id: str
    title: str
    summary: str
    policies: tuple[AttentionalPolicy, ...]
    origin: CardOrigin | None = None  # None means canonical
    canonical_of: tuple[str, ...] = ()

    @property
    def is_canonical(self) -> bool:
        return self.origin is None

    def policy_text(self) -> str:
        """Concatenated policy lines; the only text we ever embed."""
        return "\n".join(p.text for p in self.policies)

    def content_key(self) -> tuple:
        """Identity of the card's visible content, ignoring ids and provenance."""
        return (self.title, self.summary, tuple(p.text for p in self.policies))


@dataclass(frozen=True)
class Tallies:
    wiser: int = 0
    not_wiser: int = 0
    unsure: int = 0

    def __post_init__(self):
        if min(self.wiser, self.not_wiser, self.unsure) < 0:
            raise ModelError("tallies must be non-negative")

    def total(self) -> int:
        return self.wiser + self.not_wiser + self.unsure


@dataclass(frozen=True)
class WisdomVote:
    participant_id: str
    edge_id: str
    choice: str
    timestamp: float = 0.0

    def __post_init__(self):
        if self.choice not in VOTE_CHOICES:
            raise ModelError(f"unknown vote choice {self.choice!r}")


@dataclass(frozen=True)
class WisdomEdge:
    id: str
    from_value: str
    to_value: str
    context: str
    story: str
    tallies: Tallies = field(default_factory=Tallies)
    status: str = "candidate"

    def __post_init__(self):
        if self.from_value == self.to_value:
            raise ModelError("edge endpoints must differ")
        if self.status not in EDGE_STATUSES:
            raise ModelError(f"unknown edge status {self.status!r}")

    def with_tallies(self, tallies: Tallies) -> "WisdomEdge":
        return replace(self, tallies=tallies)

    def with_status(self, status: str) -> "WisdomEdge":
        return replace(self, status=status)


@dataclass
class AggregationResult:
    scores: dict[str, float]
    winners: dict[str, str]
    removed_cycle_edges: list[str]
    omissions: list[str] = field(default_factory=list)
    converged: bool = True
    iterations: int = 0
    params: dict = field(default_factory=dict)


@dataclass
class MoralGraph:
    scenarios: dict[str, Scenario] = field(default_factory=dict)
    contexts: dict[str, MoralContext] = field(default_factory=dict)
    participants: dict[str, Participant] = field(default_factory=dict)
    values: dict[str, ValuesCard] = field(default_factory=dict)
    edges: dict[str, WisdomEdge] = field(default_factory=dict)
    # canonical card id -> scenario ids its origin cards were articulated for
    card_scenarios: dict[str, tuple[str, ...]] = field(default_factory=dict)
    aggregation: AggregationResult | None = None

    def check_referential_integrity(self) -> list[str]:
        problems = []
        for e in self.edges.values():
            if e.from_value not in self.values:
                problems.append(f"edge {e.id}: unknown from_value {e.from_value}")
            if e.to_value not in self.values:
                problems.append(f"edge {e.id}: unknown to_value {e.to_value}")
            if e.context not in self.contexts:
                problems.append(f"edge {e.id}: unknown context {e.context}")
        return problems


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _single_line(text: str) -> bool:
    # The "+ x" guard catches strings *ending* in a break character, which
    # splitlines() alone would still report as one segment.
    return len((text + "x").splitlines()) == 1


def validate_card(card: ValuesCard) -> ValidationReport:
    """Check a values card against the structural invariants.

    Missing attention targets are warnings, not errors: generated policy lines
    drift from the leading-capitals format and we tolerate that.
    """
    report = ValidationReport()
    if not card.title.strip():
        report.errors.append("title is empty")
    elif not _single_line(card.title):
        report.errors.append("title must be a single line")
    if not card.policies:
        report.errors.append("no policies")
    if len(card.policies) > MAX_POLICIES:
        report.errors.append(f"more than {MAX_POLICIES} policies")
    for i, p in enumerate(card.policies):
        if not p.text.strip():
            report.errors.append(f"policy {i} is empty")
        elif not _single_line(p.text):
            report.errors.append(f"policy {i} spans multiple lines")
        elif not p.attention_target:
            report.warnings.append(f"policy {i} has no attention target: {p.text!r}")
    for line in card.summary.splitlines():
        if not line.strip() or line.lstrip().startswith("- "):
            report.errors.append("summary contains a blank or bullet-like line")
            break
    if card.summary and len((card.summary + "x").splitlines()) \
            != len(card.summary.splitlines()):
        report.errors.append("summary ends with a line break")
    if card.is_canonical and not (card.canonical_of or ()):
        report.errors.append("canonical card has no provenance")
    return report


def render_card(card: ValuesCard) -> str:
    """Canonical plain-text block for a card: title, summary, bulleted policies.

    Deterministic and order-preserving; round-trips through parse_card.
    """
    report = validate_card(card)
    if not report.ok:
        raise ModelError("cannot render invalid card: " + "; ".join(report.errors))
    lines = [f"# {card.title}", "", card.summary, ""]
    lines.extend(f"- {p.text}" for p in card.policies)
    return "\n".join(lines) + "\n"


def parse_card(text: str) -> tuple[str, str, tuple[AttentionalPolicy, ...]]:
    """Inverse of render_card; returns (title, summary, policies)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ModelError("card text must start with a '# ' title line")
    title = lines[0][2:]
    summary_lines, policies = [], []
    for line in lines[1:]:
        if line.startswith("- "):
            policies.append(AttentionalPolicy(line[2:]))
        elif line.strip():
            summary_lines.append(line)
    return title, "\n".join(summary_lines), tuple(policies)


# --- JSON wire forms (stable field names) ---

def card_to_json(card: ValuesCard) -> dict:
    return {
        "id": card.id,
        "title": card.title,
        "summary": card.summary,
        "policies": [
            {"text": p.text, "attention_target": p.attention_target}
            for p in card.policies
        ],
        "origin": "canonical" if card.is_canonical else {
            "participant_id": card.origin.participant_id,
            "scenario_id": card.origin.scenario_id,
            "session_id": card.origin.session_id,
        },
        "canonical_of": list(card.canonical_of),
    }


def card_from_json(doc: dict) -> ValuesCard:
    origin = doc.get("origin", "canonical")
    return ValuesCard(
        id=doc["id"],
        title=doc["title"],
        summary=doc["summary"],
        policies=tuple(AttentionalPolicy(p["text"]) for p in doc["policies"]),
        origin=None if origin == "canonical" else CardOrigin(
            participant_id=origin["participant_id"],
            scenario_id=origin["scenario_id"],
            session_id=origin["session_id"],
        ),
        canonical_of=tuple(doc.get("canonical_of", ())),
    )


def edge_to_json(edge: WisdomEdge) -> dict:
    return {
        "id": edge.id,
        "from_value": edge.from_value,
        "to_value": edge.to_value,
        "context": edge.context,
        "story": edge.story,
        "tallies": {
            "wiser": edge.tallies.wiser,
            "not_wiser": edge.tallies.not_wiser,
            "unsure": edge.tallies.unsure,
        },
        "status": edge.status,
    }


def edge_from_json(doc: dict) -> WisdomEdge:
    t = doc["tallies"]
    return WisdomEdge(
        id=doc["id"],
        from_value=doc["from_value"],
        to_value=doc["to_value"],
        context=doc["context"],
        story=doc["story"],
        tallies=Tallies(t["wiser"], t["not_wiser"], t["unsure"]),
        status=doc["status"],
    )
