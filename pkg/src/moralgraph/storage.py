"""Append-only event log with snapshots and a pure replay fold.

Events are JSON lines with dense, strictly increasing offsets. Appends are
atomic: the line is written, flushed and fsynced before the offset is
returned. Derived state is a pure fold over the log, so replaying a log into
a fresh store reproduces identical state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

EVENT_KINDS = (
    "session_turn",
    "card_created",
    "card_canonicalized",
    "story_created",
    "impression",
    "vote",
    "survey_response",
    "aggregation_run",
)

_REQUIRED = {
    "session_turn": {"session_id", "participant_id", "scenario_id", "role", "content"},
    "card_created": {"card_id", "card", "session_id", "participant_id"},
    "card_canonicalized": {"card_id", "canonical_id", "coalesced", "participant_id"},
    "story_created": {"story_id", "story", "edge"},
    "impression": {"participant_id", "target_kind", "target_id"},
    "vote": {"participant_id", "target_kind", "target_id"},
    "survey_response": {"participant_id", "question", "score"},
    "aggregation_run": {"params"},
}


class StorageError(Exception):
    pass


@dataclass(frozen=True)
class Event:
    offset: int
    kind: str
    payload: dict
    timestamp: float

    def to_json(self) -> dict:
        return {"offset": self.offset, "kind": self.kind,
                "payload": self.payload, "timestamp": self.timestamp}


def validate_event(kind: str, payload: dict):
    if kind not in EVENT_KINDS:
        raise StorageError(f"unknown event kind {kind!r}")
    missing = _REQUIRED[kind] - set(payload)
    if missing:
        raise StorageError(
            f"event kind {kind} missing payload fields: {sorted(missing)}")
    if kind == "vote" and payload["target_kind"] == "story" \
            and "choice" not in payload:
        raise StorageError("story vote requires a choice")


class EventLog:
    """File-backed (or in-memory) append-only log."""

    def __init__(self, path: str | os.PathLike | None = None,
                 snapshot_every: int = 1000):
        self.path = Path(path) if path else None
        self.snapshot_every = snapshot_every
        self.events: list[Event] = []
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.path.exists():
                for line in self.path.read_text().splitlines():
                    doc = json.loads(line)
                    self.events.append(Event(
                        doc["offset"], doc["kind"], doc["payload"], doc["timestamp"]))
            self._fh = open(self.path, "a")

    def append(self, kind: str, payload: dict,
               timestamp: float | None = None) -> int:
        validate_event(kind, payload)
        offset = len(self.events)
        # Logical clock default keeps replays byte-identical.
        event = Event(offset, kind, payload,
                      float(offset) if timestamp is None else timestamp)
        if self._fh is not None:
            line = json.dumps(event.to_json(), sort_keys=True,
                              separators=(",", ":"))
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        self.events.append(event)
        if self.path and offset and offset % self.snapshot_every == 0:
            self.write_snapshot()
        return offset

    def write_snapshot(self):
        if not self.path:
            return
        snap = self.path.with_suffix(".snapshot.json")
        state = fold_events(self.events)
        snap.write_text(json.dumps(
            {"offset": len(self.events), "state": state.to_json()},
            sort_keys=True, separators=(",", ":")))

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __len__(self):
        return len(self.events)


@dataclass
class FoldedState:
    """Derived state reconstructed purely from events."""
    sessions: dict[str, list[dict]] = field(default_factory=dict)
    session_meta: dict[str, dict] = field(default_factory=dict)
    custom_cards: dict[str, dict] = field(default_factory=dict)
    canonical_of: dict[str, list[str]] = field(default_factory=dict)
    coalesce_count: int = 0
    stories: dict[str, dict] = field(default_factory=dict)
    edges: dict[str, dict] = field(default_factory=dict)
    story_votes: dict[tuple[str, str], dict] = field(default_factory=dict)
    card_impressions: dict[str, int] = field(default_factory=dict)
    card_votes: dict[str, int] = field(default_factory=dict)
    surveys: list[dict] = field(default_factory=list)
    aggregation_runs: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "sessions": self.sessions,
            "session_meta": self.session_meta,
            "custom_cards": self.custom_cards,
            "canonical_of": self.canonical_of,
            "coalesce_count": self.coalesce_count,
            "stories": self.stories,
            "edges": self.edges,
            "story_votes": {f"{p}|{e}": v for (p, e), v in self.story_votes.items()},
            "card_impressions": self.card_impressions,
            "card_votes": self.card_votes,
            "surveys": self.surveys,
            "aggregation_runs": self.aggregation_runs,
        }

    def edge_tallies(self) -> dict[str, dict]:
        tallies = {eid: {"wiser": 0, "not_wiser": 0, "unsure": 0}
                   for eid in self.edges}
        for (_, eid), vote in self.story_votes.items():
            if eid in tallies:
                tallies[eid][vote["choice"]] += 1
        return tallies


def fold_events(events) -> FoldedState:
    state = FoldedState()
    for event in events:
        p = event.payload
        if event.kind == "session_turn":
            state.sessions.setdefault(p["session_id"], []).append(
                {"role": p["role"], "content": p["content"]})
            state.session_meta.setdefault(p["session_id"], {
                "participant_id": p["participant_id"],
                "scenario_id": p["scenario_id"],
            })
        elif event.kind == "card_created":
            state.custom_cards[p["card_id"]] = p["card"]
        elif event.kind == "card_canonicalized":
            state.canonical_of.setdefault(p["canonical_id"], []).append(p["card_id"])
            if p["coalesced"]:
                state.coalesce_count += 1
        elif event.kind == "story_created":
            state.stories[p["story_id"]] = p["story"]
            state.edges[p["edge"]["id"]] = p["edge"]
        elif event.kind == "impression":
            if p["target_kind"] == "card":
                state.card_impressions[p["target_id"]] = \
                    state.card_impressions.get(p["target_id"], 0) + 1
        elif event.kind == "vote":
            if p["target_kind"] == "card":
                state.card_votes[p["target_id"]] = \
                    state.card_votes.get(p["target_id"], 0) + 1
            else:
                edge_id = p["edge_id"]
                state.story_votes[(p["participant_id"], edge_id)] = {
                    "choice": p["choice"], "timestamp": event.timestamp}
        elif event.kind == "survey_response":
            state.surveys.append({"participant_id": p["participant_id"],
                                  "question": p["question"], "score": p["score"]})
        elif event.kind == "aggregation_run":
            state.aggregation_runs.append(p)
    return state
