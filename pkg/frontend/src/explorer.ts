import { ApiClient } from "./api.js";
import type {
  GraphDoc,
  GraphEdge,
  LoggedEvent,
  Provenance,
  ValuesCard,
} from "./types.js";

export type ExplorerState =
  | { kind: "empty" }
  | { kind: "schema_error"; problems: string[] }
  | { kind: "loaded"; doc: GraphDoc };

export interface WinnerSelection {
  contextText: string;
  card: ValuesCard;
  /** Accepted, surviving edges incident to the winner, with server tallies. */
  edges: GraphEdge[];
}

export class ExplorerError extends Error {}

const REQUIRED_KEYS: (keyof GraphDoc)[] = [
  "scenarios",
  "contexts",
  "values",
  "edges",
  "card_scenarios",
  "aggregation",
];

/** Read-only moral-graph explorer. Loading parses a graph export; drilling
 * down is click-counted: (1) pick a winner to see its card and voted edges,
 * (2) open provenance to list originating sessions, (3) open a session to see
 * its raw interview events. Nothing is recomputed from votes client-side. */
export class GraphExplorer {
  state: ExplorerState = { kind: "empty" };
  clicks = 0;

  private selection: WinnerSelection | null = null;
  private provenance: Provenance | null = null;

  constructor(private readonly api: ApiClient) {}

  loadFromText(text: string): ExplorerState {
    let doc: unknown;
    try {
      doc = JSON.parse(text);
    } catch (error) {
      this.state = { kind: "schema_error", problems: [String(error)] };
      return this.state;
    }
    const problems = REQUIRED_KEYS.filter(
      (key) => typeof doc !== "object" || doc === null || !(key in doc),
    ).map((key) => `missing field: ${key}`);
    if (problems.length > 0) {
      this.state = { kind: "schema_error", problems };
      return this.state;
    }
    const parsed = doc as GraphDoc;
    this.state =
      parsed.values.length === 0 ? { kind: "empty" } : { kind: "loaded", doc: parsed };
    this.clicks = 0;
    this.selection = null;
    this.provenance = null;
    return this.state;
  }

  /** Overview panel: contexts, winners, removed cycles — straight from the
   * export's aggregation section. */
  overview(): {
    contexts: string[];
    winners: Record<string, string>;
    removedCycleEdges: string[];
    cardCount: number;
    edgeCount: number;
  } {
    const doc = this.loadedDoc();
    return {
      contexts: doc.contexts.map((c) => c.text),
      winners: doc.aggregation?.winners ?? {},
      removedCycleEdges: doc.aggregation?.removed_cycle_edges ?? [],
      cardCount: doc.values.length,
      edgeCount: doc.edges.length,
    };
  }

  /** Click 1: select the winning value of a context. */
  clickWinner(contextId: string): WinnerSelection {
    const doc = this.loadedDoc();
    const winnerId = doc.aggregation?.winners[contextId];
    if (winnerId === undefined) {
      throw new ExplorerError(`context ${contextId} has no winner`);
    }
    const card = doc.values.find((v) => v.id === winnerId);
    if (card === undefined) {
      throw new ExplorerError(`winner ${winnerId} missing from export`);
    }
    const removed = new Set(doc.aggregation?.removed_cycle_edges ?? []);
    const context = doc.contexts.find((c) => c.id === contextId);
    this.selection = {
      contextText: context?.text ?? contextId,
      card,
      edges: doc.edges.filter(
        (e) =>
          e.status === "accepted" &&
          !removed.has(e.id) &&
          (e.from_value === winnerId || e.to_value === winnerId),
      ),
    };
    this.clicks += 1;
    return this.selection;
  }

  /** Click 2: open the provenance panel — stories, per-vote records and the
   * originating sessions, fetched from the server. */
  async clickProvenance(): Promise<Provenance> {
    if (this.selection === null) {
      throw new ExplorerError("select a winner first");
    }
    this.provenance = await this.api.provenance(this.selection.card.id);
    this.clicks += 1;
    return this.provenance;
  }

  /** Click 3: open one originating session and show its interview events. */
  async clickSession(sessionId: string): Promise<LoggedEvent[]> {
    if (this.provenance === null) {
      throw new ExplorerError("open provenance first");
    }
    if (!this.provenance.sessions.includes(sessionId)) {
      throw new ExplorerError(`session ${sessionId} is not in the provenance`);
    }
    const window = await this.api.events(0, 100_000);
    this.clicks += 1;
    return window.events.filter(
      (e) => e.kind === "session_turn" && e.payload["session_id"] === sessionId,
    );
  }

  private loadedDoc(): GraphDoc {
    if (this.state.kind !== "loaded") {
      throw new ExplorerError(`no graph loaded (state: ${this.state.kind})`);
    }
    return this.state.doc;
  }
}

/** Layered DAG layout: every card gets a layer equal to its longest accepted
 * path from a graph source, so wiser values sit on higher layers. Pure
 * presentation geometry — derived from edge direction only, never from
 * scores or tallies. */
export function layerByWisdom(
  cardIds: string[],
  edges: { from_value: string; to_value: string; status: string }[],
): Map<string, number> {
  const accepted = edges.filter((e) => e.status === "accepted");
  const incoming = new Map<string, number>(cardIds.map((id) => [id, 0]));
  const out = new Map<string, string[]>(cardIds.map((id) => [id, []]));
  for (const edge of accepted) {
    out.get(edge.from_value)?.push(edge.to_value);
    incoming.set(edge.to_value, (incoming.get(edge.to_value) ?? 0) + 1);
  }
  const layer = new Map<string, number>(cardIds.map((id) => [id, 0]));
  const queue = cardIds.filter((id) => (incoming.get(id) ?? 0) === 0);
  while (queue.length > 0) {
    const node = queue.shift()!;
    for (const next of out.get(node) ?? []) {
      layer.set(next, Math.max(layer.get(next) ?? 0, (layer.get(node) ?? 0) + 1));
      const remaining = (incoming.get(next) ?? 0) - 1;
      incoming.set(next, remaining);
      if (remaining === 0) queue.push(next);
    }
  }
  return layer;
}
