/** Wire types for the deliberation API. The client never derives numbers or
 * statuses from these; it only displays what the server sent. */

export interface AttentionalPolicy {
  text: string;
  attention_target: string;
}

export interface CardOrigin {
  participant_id: string;
  scenario_id: string;
  session_id: string;
}

export interface ValuesCard {
  id: string;
  title: string;
  summary: string;
  policies: AttentionalPolicy[];
  origin: "canonical" | CardOrigin;
  canonical_of: string[];
}

export interface Scenario {
  id: string;
  prompt: string;
  tag: string;
}

export interface SessionCreated {
  session_id: string;
  phase: string;
  opening: string;
}

export interface MessageReply {
  reply: string;
  phase: string;
}

export interface CardConfirmed {
  card_id: string;
  canonical_id: string;
  coalesced: boolean;
}

export interface PolicyMapping {
  old_policy: string;
  change: string;
}

export interface Story {
  id: string;
  from_value: string;
  to_value: string;
  context: string;
  shared_good: string;
  clarification: string;
  policy_mappings: PolicyMapping[];
  final_story: string;
}

export interface Tallies {
  wiser: number;
  not_wiser: number;
  unsure: number;
}

export interface StoryVoteResult {
  edge_id: string;
  tallies: Tallies;
}

export interface GraphEdge {
  id: string;
  from_value: string;
  to_value: string;
  context: string;
  story: string;
  status: string;
  tallies: Tallies;
}

export interface GraphContext {
  id: string;
  text: string;
  source_scenario: string;
}

export interface Aggregation {
  scores: Record<string, number>;
  winners: Record<string, string>;
  removed_cycle_edges: string[];
  omissions: string[];
  converged: boolean;
  iterations: number;
  params: Record<string, unknown>;
}

export interface GraphDoc {
  scenarios: Scenario[];
  contexts: GraphContext[];
  participants: { id: string; chosen_scenario: string }[];
  values: ValuesCard[];
  edges: GraphEdge[];
  card_scenarios: Record<string, string[]>;
  aggregation: Aggregation | null;
}

export interface ProvenanceEdge extends GraphEdge {
  votes: { participant_id: string; choice: string }[];
}

export interface Provenance {
  card: ValuesCard;
  edges: ProvenanceEdge[];
  sessions: string[];
}

export interface LoggedEvent {
  offset: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface EventWindow {
  total: number;
  events: LoggedEvent[];
}
