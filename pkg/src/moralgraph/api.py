"""HTTP API over a deployment. Thin layer: every route delegates to the
platform orchestrator and returns JSON-safe structures; no business logic
lives here."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .aggregation import AggregationError
from .dedup import DedupError
from .elicitation import ElicitationError
from .gateway import GatewayError
from .model import ModelError, card_to_json
from .platform import Deployment, PlatformError
from .stories import StoryError, VoteError

_DOMAIN_ERRORS = (PlatformError, ElicitationError, DedupError, StoryError,
                  VoteError, AggregationError, ModelError, GatewayError)


class CreateSessionBody(BaseModel):
    participant_id: str
    scenario_id: str
    demographics: dict[str, str] = Field(default_factory=dict)


class MessageBody(BaseModel):
    message: str


class VoteBody(BaseModel):
    participant_id: str
    kind: str  # "story" | "card"
    target_id: str
    choice: str | None = None  # story votes only


class SurveyBody(BaseModel):
    participant_id: str
    question: str
    score: int


class EndorsementBody(BaseModel):
    participant_id: str
    approved: bool


class RetrieveBody(BaseModel):
    state: str


def create_app(deployment: Deployment) -> FastAPI:
    app = FastAPI(title="moralgraph", version="0.1.0")
    app.state.deployment = deployment

    @app.exception_handler(Exception)
    async def _domain_error(request, exc):  # pragma: no cover - FastAPI wiring
        raise exc

    def _guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"not found: {exc}") from exc

    @app.get("/health")
    def health():
        return {"status": "ok", "events": len(deployment.log)}

    @app.get("/scenarios")
    def scenarios():
        return [{"id": s.id, "prompt": s.prompt, "tag": s.tag}
                for s in sorted(deployment.scenarios.values(), key=lambda s: s.id)]

    # --- elicitation ---

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        session = _guard(deployment.create_session, body.participant_id,
                         body.scenario_id, body.demographics or None)
        return {"session_id": session.id, "phase": session.phase,
                "opening": session.transcript[-1].content}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = _guard(deployment._session, session_id)
        return session.to_json()

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        reply = _guard(deployment.post_message, session_id, body.message)
        return {"reply": reply,
                "phase": deployment.sessions[session_id].phase}

    @app.post("/sessions/{session_id}/card/confirm")
    def confirm_card(session_id: str):
        return _guard(deployment.confirm_card, session_id)

    @app.post("/sessions/{session_id}/abandon")
    def abandon(session_id: str):
        _guard(deployment.abandon_session, session_id)
        return {"phase": "abandoned"}

    # --- cards, stories, votes ---

    @app.get("/cards")
    def cards():
        return deployment.pool.export()

    @app.get("/cards/slate")
    def card_slate(participant_id: str, k: int = 6):
        slate = _guard(deployment.card_slate, participant_id, k)
        return [card_to_json(c) for c in slate]

    @app.get("/stories/next")
    def next_stories(participant_id: str, k: int = 3):
        stories = _guard(deployment.next_stories, participant_id, k)
        return [s.to_json() for s in stories]

    @app.post("/votes")
    def vote(body: VoteBody):
        if body.kind == "story":
            if body.choice is None:
                raise HTTPException(status_code=422,
                                    detail="story votes require a choice")
            edge = _guard(deployment.vote_story, body.participant_id,
                          body.target_id, body.choice)
            return {"edge_id": edge.id,
                    "tallies": {"wiser": edge.tallies.wiser,
                                "not_wiser": edge.tallies.not_wiser,
                                "unsure": edge.tallies.unsure}}
        if body.kind == "card":
            _guard(deployment.vote_card, body.participant_id, body.target_id)
            return {"ok": True}
        raise HTTPException(status_code=422, detail=f"unknown vote kind {body.kind!r}")

    @app.post("/survey")
    def survey(body: SurveyBody):
        _guard(deployment.record_survey, body.participant_id,
               body.question, body.score)
        return {"ok": True}

    @app.post("/endorsements")
    def endorsement(body: EndorsementBody):
        _guard(deployment.record_endorsement, body.participant_id, body.approved)
        return {"ok": True}

    # --- graph ---

    @app.post("/generation-cycle")
    def generation_cycle():
        return {"stories_created": _guard(deployment.generation_cycle)}

    @app.post("/aggregation")
    def run_aggregation():
        _, result = _guard(deployment.run_aggregation)
        return {"converged": result.converged, "iterations": result.iterations,
                "winners": result.winners,
                "removed_cycle_edges": result.removed_cycle_edges,
                "omissions": result.omissions}

    @app.get("/graph")
    def graph():
        return Response(content=_guard(deployment.export_graph_text),
                        media_type="application/json")

    @app.get("/graph/winners")
    def winners(context: str | None = None):
        _guard(deployment.export_graph_text)  # ensure aggregated
        agg = deployment.graph.aggregation
        if context is None:
            return agg.winners
        if context not in deployment.graph.contexts:
            raise HTTPException(status_code=404,
                                detail=f"unknown context {context!r}")
        if context not in agg.winners:
            return {"context": context, "winner": None}
        return {"context": context, "winner": agg.winners[context]}

    @app.get("/graph/provenance")
    def provenance(card: str):
        return _guard(deployment.provenance, card)

    @app.get("/export/alignment-target")
    def alignment_target(transitive: bool = False):
        return Response(
            content=_guard(deployment.export_alignment_text, transitive),
            media_type="application/jsonl")

    @app.post("/retrieve")
    def retrieve(body: RetrieveBody):
        result = _guard(deployment.retrieve, body.state)
        return {"guidance": result.guidance, "context": result.context,
                "card": result.card, "rationale": result.rationale}

    # Read-only event stream for debugging and frontend inspection.
    @app.get("/events")
    def events(offset: int = 0, limit: int = 100):
        window = deployment.log.events[offset:offset + limit]
        return {"total": len(deployment.log),
                "events": [e.to_json() for e in window]}

    return app
