import { ApiClient } from "./api.js";
import type {
  Aggregation,
  GraphDoc,
  Story,
  StoryVoteResult,
  Tallies,
  ValuesCard,
} from "./types.js";

export type FlowStep =
  | "chat"
  | "card_review"
  | "card_vote"
  | "story_vote"
  | "survey"
  | "position_review"
  | "done";

const STEP_ORDER: FlowStep[] = [
  "chat",
  "card_review",
  "card_vote",
  "story_vote",
  "survey",
  "position_review",
  "done",
];

export class FlowOrderError extends Error {}

export interface ChatTurn {
  role: "assistant" | "participant";
  text: string;
}

export interface PositionView {
  card: ValuesCard;
  /** Score as reported by the server's aggregation; never recomputed here. */
  score: number;
  wiserNeighbor: ValuesCard | null;
  lessWiseNeighbor: ValuesCard | null;
}

/** Drives a participant through the deliberation process one screen at a
 * time: chat -> card_review -> card_vote -> story_vote -> survey ->
 * position_review -> done. Steps only ever advance in that order, every
 * screen round-trips through the HTTP API, and nothing is computed
 * client-side from raw tallies or scores. */
export class ParticipantFlow {
  step: FlowStep = "chat";
  transcript: ChatTurn[] = [];
  /** Participant-facing actions taken so far; the process is budgeted by
   * step count rather than wall time. */
  interactionSteps = 0;

  private sessionId: string | null = null;
  private serverPhase = "";
  canonicalId: string | null = null;
  coalesced = false;

  constructor(
    private readonly api: ApiClient,
    readonly participantId: string,
  ) {}

  private require(step: FlowStep): void {
    if (this.step !== step) {
      throw new FlowOrderError(
        `action belongs to step '${step}' but flow is at '${this.step}'`,
      );
    }
  }

  private advance(to: FlowStep): void {
    if (STEP_ORDER.indexOf(to) !== STEP_ORDER.indexOf(this.step) + 1) {
      throw new FlowOrderError(`cannot jump from '${this.step}' to '${to}'`);
    }
    this.step = to;
  }

  // --- chat ---

  async begin(scenarioId: string): Promise<string> {
    this.require("chat");
    if (this.sessionId !== null) {
      throw new FlowOrderError("session already started");
    }
    const created = await this.api.createSession(this.participantId, scenarioId);
    this.sessionId = created.session_id;
    this.serverPhase = created.phase;
    this.transcript.push({ role: "assistant", text: created.opening });
    this.interactionSteps += 1;
    return created.opening;
  }

  /** Send one chat message. When the server reaches its card-editing phase a
   * draft card exists and the flow moves to card_review. */
  async say(message: string): Promise<string> {
    this.require("chat");
    const reply = await this.send(message);
    if (this.serverPhase === "card_editing") {
      this.advance("card_review");
    }
    return reply;
  }

  // --- card review / edit ---

  /** Ask for a change to the drafted card. Edits are free-text requests the
   * server applies and re-validates; the client never mutates the card. */
  async requestEdit(message: string): Promise<string> {
    this.require("card_review");
    return this.send(message);
  }

  /** Approve the card, finalize it server-side, and answer the endorsement
   * prompt for the deduplicated value. */
  async approveCard(approvalMessage = "Looks good."): Promise<void> {
    this.require("card_review");
    await this.send(approvalMessage);
    if (this.sessionId === null) throw new FlowOrderError("no session");
    const confirmed = await this.api.confirmCard(this.sessionId);
    this.canonicalId = confirmed.canonical_id;
    this.coalesced = confirmed.coalesced;
    await this.api.recordEndorsement(this.participantId, true);
    this.interactionSteps += 1;
    this.advance("card_vote");
  }

  // --- card voting ---

  async cardSlate(): Promise<ValuesCard[]> {
    this.require("card_vote");
    return this.api.cardSlate(this.participantId);
  }

  async voteForCard(cardId: string): Promise<void> {
    this.require("card_vote");
    await this.api.voteCard(this.participantId, cardId);
    this.interactionSteps += 1;
  }

  finishCardVoting(): void {
    this.require("card_vote");
    this.advance("story_vote");
  }

  // --- story voting ---

  /** The screen shows exactly what the server serves: at most three stories,
   * fewer when fewer are available. */
  async storiesToReview(): Promise<Story[]> {
    this.require("story_vote");
    return this.api.nextStories(this.participantId, 3);
  }

  async voteOnStory(
    storyId: string,
    choice: "wiser" | "not_wiser" | "unsure",
  ): Promise<Tallies> {
    this.require("story_vote");
    const result: StoryVoteResult = await this.api.voteStory(
      this.participantId,
      storyId,
      choice,
    );
    this.interactionSteps += 1;
    return result.tallies;
  }

  finishStoryVoting(): void {
    this.require("story_vote");
    this.advance("survey");
  }

  // --- survey ---

  async answerSurvey(question: string, score: number): Promise<void> {
    this.require("survey");
    await this.api.submitSurvey(this.participantId, question, score);
    this.interactionSteps += 1;
  }

  finishSurvey(): void {
    this.require("survey");
    this.advance("position_review");
  }

  // --- position review ---

  /** Show the participant's value in the aggregated graph, with one wiser and
   * one less-wise neighbor when the graph has them. Requires an aggregated
   * graph; everything shown comes from the server's export. */
  async reviewPosition(): Promise<PositionView> {
    this.require("position_review");
    if (this.canonicalId === null) {
      throw new FlowOrderError("no canonical card to locate in the graph");
    }
    const doc = JSON.parse(await this.api.graphText()) as GraphDoc;
    const aggregation: Aggregation | null = doc.aggregation;
    if (aggregation === null) {
      throw new FlowOrderError("graph is not aggregated yet");
    }
    const byId = new Map(doc.values.map((card) => [card.id, card]));
    const card = byId.get(this.canonicalId);
    if (card === undefined) {
      throw new FlowOrderError(`card ${this.canonicalId} missing from export`);
    }
    const removed = new Set(aggregation.removed_cycle_edges);
    const accepted = doc.edges.filter(
      (e) => e.status === "accepted" && !removed.has(e.id),
    );
    const wiser = accepted.find((e) => e.from_value === card.id);
    const lessWise = accepted.find((e) => e.to_value === card.id);
    this.interactionSteps += 1;
    this.advance("done");
    return {
      card,
      score: aggregation.scores[card.id] ?? 0,
      wiserNeighbor: wiser ? byId.get(wiser.to_value) ?? null : null,
      lessWiseNeighbor: lessWise ? byId.get(lessWise.from_value) ?? null : null,
    };
  }

  // --- internals ---

  private async send(message: string): Promise<string> {
    if (this.sessionId === null) {
      throw new FlowOrderError("session not started");
    }
    const response = await this.api.sendMessage(this.sessionId, message);
    this.transcript.push({ role: "participant", text: message });
    this.transcript.push({ role: "assistant", text: response.reply });
    this.serverPhase = response.phase;
    this.interactionSteps += 1;
    return response.reply;
  }
}
