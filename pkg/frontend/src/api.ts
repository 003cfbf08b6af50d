import type {
  CardConfirmed,
  EventWindow,
  MessageReply,
  Provenance,
  Scenario,
  SessionCreated,
  Story,
  StoryVoteResult,
  ValuesCard,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    /** Re-runs the failed request; screens surface this as a Retry button. */
    readonly retry: () => Promise<unknown>,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

/** Thin typed wrapper over the deliberation HTTP API. Holds no state beyond
 * the base URL; every number shown in the UI comes from these responses. */
export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    asText = false,
  ): Promise<T> {
    const run = async (): Promise<T> => {
      const response = await fetch(this.baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
      if (!response.ok) {
        let detail = response.statusText;
        try {
          const doc = (await response.json()) as { detail?: unknown };
          if (doc.detail !== undefined) detail = JSON.stringify(doc.detail);
        } catch {
          /* non-JSON error body: keep the status text */
        }
        throw new ApiError(response.status, detail, run);
      }
      return (asText ? response.text() : response.json()) as Promise<T>;
    };
    return run();
  }

  health(): Promise<{ status: string; events: number }> {
    return this.request("GET", "/health");
  }

  scenarios(): Promise<Scenario[]> {
    return this.request("GET", "/scenarios");
  }

  createSession(participantId: string, scenarioId: string): Promise<SessionCreated> {
    return this.request("POST", "/sessions", {
      participant_id: participantId,
      scenario_id: scenarioId,
    });
  }

  sendMessage(sessionId: string, message: string): Promise<MessageReply> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { message });
  }

  confirmCard(sessionId: string): Promise<CardConfirmed> {
    return this.request("POST", `/sessions/${sessionId}/card/confirm`);
  }

  abandonSession(sessionId: string): Promise<{ phase: string }> {
    return this.request("POST", `/sessions/${sessionId}/abandon`);
  }

  cards(): Promise<ValuesCard[]> {
    return this.request("GET", "/cards");
  }

  cardSlate(participantId: string, k = 6): Promise<ValuesCard[]> {
    return this.request(
      "GET",
      `/cards/slate?participant_id=${encodeURIComponent(participantId)}&k=${k}`,
    );
  }

  nextStories(participantId: string, k = 3): Promise<Story[]> {
    return this.request(
      "GET",
      `/stories/next?participant_id=${encodeURIComponent(participantId)}&k=${k}`,
    );
  }

  voteStory(
    participantId: string,
    storyId: string,
    choice: "wiser" | "not_wiser" | "unsure",
  ): Promise<StoryVoteResult> {
    return this.request("POST", "/votes", {
      participant_id: participantId,
      kind: "story",
      target_id: storyId,
      choice,
    });
  }

  voteCard(participantId: string, cardId: string): Promise<{ ok: boolean }> {
    return this.request("POST", "/votes", {
      participant_id: participantId,
      kind: "card",
      target_id: cardId,
    });
  }

  submitSurvey(
    participantId: string,
    question: string,
    score: number,
  ): Promise<{ ok: boolean }> {
    return this.request("POST", "/survey", {
      participant_id: participantId,
      question,
      score,
    });
  }

  recordEndorsement(participantId: string, approved: boolean): Promise<{ ok: boolean }> {
    return this.request("POST", "/endorsements", {
      participant_id: participantId,
      approved,
    });
  }

  runGenerationCycle(): Promise<{ stories_created: number }> {
    return this.request("POST", "/generation-cycle");
  }

  runAggregation(): Promise<{ converged: boolean; winners: Record<string, string> }> {
    return this.request("POST", "/aggregation");
  }

  graphText(): Promise<string> {
    return this.request("GET", "/graph", undefined, true);
  }

  winners(): Promise<Record<string, string>> {
    return this.request("GET", "/graph/winners");
  }

  provenance(cardId: string): Promise<Provenance> {
    return this.request("GET", `/graph/provenance?card=${encodeURIComponent(cardId)}`);
  }

  events(offset = 0, limit = 10_000): Promise<EventWindow> {
    return this.request("GET", `/events?offset=${offset}&limit=${limit}`);
  }
}
