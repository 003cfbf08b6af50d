/** End-to-end walkthrough against a real local API server: five scripted
 * participants complete the whole flow (chat → card → votes → survey →
 * position review), the event log shows exactly the expected kinds, and the
 * explorer resolves a winner's provenance to session events in three clicks.
 */
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { GraphExplorer, layerByWisdom } from "../src/explorer.js";
import { ParticipantFlow, type PositionView } from "../src/flow.js";
import type { GraphDoc } from "../src/types.js";
import { CONSTITUTIVE_YES, PERSONAS, attentionMessage } from "./personas.js";

const PORT = 8731;
const SURVEY_EXPRESSED =
  "The values I submitted and voted for express what I care about";
const SURVEY_FAIR = "My value ended up in a fair position in the moral graph";
/** Design budget: a human pace of 45s per interaction step, 15 minutes total. */
const SECONDS_PER_STEP = 45;
const BUDGET_SECONDS = 15 * 60;

let server: ChildProcess;
const api = new ApiClient(`http://127.0.0.1:${PORT}`);

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      await api.health();
      return;
    } catch {
      if (Date.now() > deadline) throw new Error("server did not come up");
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "moralgraph-web-"));
  const scenarioFile = join(dir, "scenarios.json");
  writeFileSync(scenarioFile, JSON.stringify({ scenarios: [] }));
  server = spawn(
    "python3",
    [
      "-m",
      "moralgraph.cli",
      "serve",
      "--host",
      "127.0.0.1",
      "--port",
      String(PORT),
      "--mode",
      "scripted",
      "--scenario-file",
      scenarioFile,
    ],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  await waitForHealth();
}, 40_000);

afterAll(() => {
  server?.kill();
});

describe("participant walkthrough", () => {
  const flows: ParticipantFlow[] = [];
  let position: PositionView;

  it("five participants reach their card through chat", async () => {
    for (const [i, persona] of PERSONAS.entries()) {
      const flow = new ParticipantFlow(api, `web-p${i}`);
      const opening = await flow.begin("parenting");
      expect(opening.length).toBeGreaterThan(0);
      await flow.say(persona.opener);
      await flow.say(attentionMessage(persona));
      const draft = await flow.say(CONSTITUTIVE_YES);
      expect(flow.step).toBe("card_review");
      expect(draft).toContain(persona.cardTitle);
      await flow.approveCard();
      expect(flow.step).toBe("card_vote");
      flows.push(flow);
    }
    expect((await api.cards()).length).toBe(PERSONAS.length);
  });

  it("card voting shows the served slate only", async () => {
    await api.runGenerationCycle();
    for (const flow of flows) {
      const slate = await flow.cardSlate();
      expect(slate.length).toBeGreaterThan(0);
      expect(slate.length).toBeLessThanOrEqual(6);
      const first = slate[0];
      expect(first).toBeDefined();
      await flow.voteForCard(first!.id);
      flow.finishCardVoting();
    }
  });

  it("story voting shows exactly min(3, available) stories", async () => {
    for (const flow of flows) {
      let screen = 0;
      for (;;) {
        const stories = await flow.storiesToReview();
        expect(stories.length).toBeLessThanOrEqual(3);
        if (screen === 0) expect(stories.length).toBeGreaterThan(0);
        if (stories.length === 0) break;
        for (const story of stories) {
          expect(story.shared_good.length).toBeGreaterThan(0);
          expect(story.final_story.length).toBeGreaterThan(0);
          const tallies = await flow.voteOnStory(story.id, "wiser");
          expect(tallies.wiser).toBeGreaterThan(0);
        }
        screen += 1;
      }
      flow.finishStoryVoting();
    }
  });

  it("surveys record and the flow reaches position review", async () => {
    for (const flow of flows) {
      await flow.answerSurvey(SURVEY_EXPRESSED, 5);
      await flow.answerSurvey(SURVEY_FAIR, 4);
      flow.finishSurvey();
      expect(flow.step).toBe("position_review");
    }
  });

  it("position review shows the value with its graph neighbors", async () => {
    await api.runAggregation();
    const midFlow = flows[3]; // inspiring-discipline sits mid-chain
    expect(midFlow).toBeDefined();
    position = await midFlow!.reviewPosition();
    expect(position.card.title).toBe("Inspiring Discipline");
    expect(position.wiserNeighbor?.title).toBe("Igniting Curiosity");
    expect(position.lessWiseNeighbor).not.toBeNull();
    expect(midFlow!.step).toBe("done");
    for (const flow of flows) {
      if (flow === midFlow) continue;
      await flow.reviewPosition();
      expect(flow.step).toBe("done");
    }
  });

  it("stays within the interaction-step budget", () => {
    for (const flow of flows) {
      expect(flow.interactionSteps * SECONDS_PER_STEP).toBeLessThanOrEqual(
        BUDGET_SECONDS,
      );
    }
  });

  it("emits exactly the expected event kinds", async () => {
    const window = await api.events();
    const kinds = new Set(window.events.map((e) => e.kind));
    expect([...kinds].sort()).toEqual(
      [
        "aggregation_run",
        "card_canonicalized",
        "card_created",
        "impression",
        "session_turn",
        "story_created",
        "survey_response",
        "vote",
      ].sort(),
    );
  });
});

describe("graph explorer", () => {
  it("resolves a winner's provenance to session events in 3 clicks", async () => {
    const explorer = new GraphExplorer(api);
    const state = explorer.loadFromText(await api.graphText());
    expect(state.kind).toBe("loaded");
    const overview = explorer.overview();
    expect(overview.cardCount).toBe(PERSONAS.length);
    const contextId = Object.keys(overview.winners)[0];
    expect(contextId).toBeDefined();

    const selection = explorer.clickWinner(contextId!); // click 1
    expect(selection.edges.length).toBeGreaterThan(0);
    for (const edge of selection.edges) {
      const total =
        edge.tallies.wiser + edge.tallies.not_wiser + edge.tallies.unsure;
      expect(total).toBeGreaterThan(0);
    }

    const provenance = await explorer.clickProvenance(); // click 2
    expect(provenance.sessions.length).toBeGreaterThan(0);
    for (const edge of provenance.edges) {
      expect(edge.votes.length).toBe(
        edge.tallies.wiser + edge.tallies.not_wiser + edge.tallies.unsure,
      );
    }

    const firstSession = provenance.sessions[0];
    const turns = await explorer.clickSession(firstSession!); // click 3
    expect(turns.length).toBeGreaterThan(0);
    expect(turns.every((e) => e.kind === "session_turn")).toBe(true);
    expect(explorer.clicks).toBe(3);
  });

  it("lays the referral chain out with wiser values higher", async () => {
    const doc = JSON.parse(await api.graphText()) as GraphDoc;
    const layers = layerByWisdom(
      doc.values.map((v) => v.id),
      doc.edges,
    );
    const byTitle = new Map(doc.values.map((v) => [v.title, v.id]));
    const layer = (title: string): number =>
      layers.get(byTitle.get(title) ?? "") ?? -1;
    expect(layer("Igniting Curiosity")).toBeGreaterThan(
      layer("Inspiring Discipline"),
    );
    expect(layer("Inspiring Discipline")).toBeGreaterThan(layer("Firm Rules"));
  });
});
