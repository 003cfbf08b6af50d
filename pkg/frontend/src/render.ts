import type { PositionView } from "./flow.js";
import type { Story, ValuesCard } from "./types.js";

/** Plain-text renderers for the screens. They are pure presentation: all
 * values, tallies and scores arrive pre-computed from the server. */

export function renderCard(card: ValuesCard): string {
  const lines = [card.title, "=".repeat(card.title.length), "", card.summary, ""];
  lines.push("Where your attention goes:");
  for (const policy of card.policies) {
    lines.push(`  • ${policy.text}`);
  }
  return lines.join("\n");
}

export function renderStory(story: Story): string {
  const lines = [
    `Context: ${story.context}`,
    "",
    story.shared_good,
    "",
    story.clarification,
    "",
  ];
  for (const mapping of story.policy_mappings) {
    lines.push(`  ${mapping.old_policy}`);
    lines.push(`    → ${mapping.change}`);
  }
  lines.push("", story.final_story);
  return lines.join("\n");
}

export function renderPosition(view: PositionView): string {
  const lines = [
    "Your value in the moral graph",
    "",
    renderCard(view.card),
    "",
    `Community score: ${view.score}`,
  ];
  if (view.wiserNeighbor !== null) {
    lines.push(`Voters found wiser: ${view.wiserNeighbor.title}`);
  }
  if (view.lessWiseNeighbor !== null) {
    lines.push(`Your value was found wiser than: ${view.lessWiseNeighbor.title}`);
  }
  if (view.wiserNeighbor === null && view.lessWiseNeighbor === null) {
    lines.push("Your value has no voted neighbors yet.");
  }
  return lines.join("\n");
}
