/** Teacher review queue: optimistic updates with rollback on conflicts.
 *
 * Every card shows the rule provenance (context + antecedent + consequent),
 * so a teacher always sees why the system proposed the activity. The queue
 * only ever sends decisions the item's reported state allows; when a
 * concurrent reviewer wins the race, the 409 response triggers a re-fetch
 * and the card shows the item's true state.
 */

import { ApiClient, ApiConflictError } from "./api.js";
import { allowedDecisions } from "./state.js";
import type { Decision, Recommendation, RecommendationState } from "./types.js";

export interface DecisionInput {
  rating?: number;
  note?: string;
  consequent?: string;
}

export interface QueueEvent {
  kind: "updated" | "conflict" | "error";
  recommendation?: Recommendation;
  message?: string;
}

export function explainRule(recommendation: Recommendation): string {
  const rule = recommendation.source_rule;
  const context = rule.context.length ? `learners with {${rule.context.join(", ")}}` : "all learners";
  return (
    `${context} who did <${rule.antecedent.join(", ")}> next did ${rule.consequent} ` +
    `(confidence ${(rule.confidence * 100).toFixed(0)}%, support ${rule.support})`
  );
}

export class RecommendationQueue {
  items: Recommendation[] = [];

  constructor(
    private api: ApiClient,
    private onEvent: (event: QueueEvent) => void = () => undefined,
  ) {}

  async load(filter: { learner?: string; state?: RecommendationState } = { state: "proposed" }) {
    this.items = await this.api.recommendations(filter);
    return this.items;
  }

  item(id: string): Recommendation | undefined {
    return this.items.find((r) => r.id === id);
  }

  /** Decisions this card may offer, straight from the item's reported state. */
  actionsFor(id: string): Decision[] {
    const item = this.item(id);
    return item ? allowedDecisions(item.state) : [];
  }

  async decide(id: string, decision: Decision, input: DecisionInput = {}): Promise<QueueEvent> {
    const index = this.items.findIndex((r) => r.id === id);
    if (index < 0) {
      return { kind: "error", message: `no item ${id} in the queue` };
    }
    const before = this.items[index]!;
    if (!allowedDecisions(before.state).includes(decision)) {
      return { kind: "error", message: `${decision} not allowed from ${before.state}` };
    }
    if (decision === "amend" && !input.consequent) {
      return { kind: "error", message: "amend needs a non-empty consequent" };
    }

    // optimistic: the card moves immediately, rolled back if the server says no
    const optimistic: Recommendation = {
      ...before,
      state: decision === "approve" ? "approved" : decision === "reject" ? "rejected" : decision === "deliver" ? "delivered" : "amended",
    };
    this.items[index] = optimistic;
    try {
      const confirmed = await this.api.decide(id, { decision, ...input });
      this.items[index] = confirmed;
      const event: QueueEvent = { kind: "updated", recommendation: confirmed };
      this.onEvent(event);
      return event;
    } catch (error) {
      if (error instanceof ApiConflictError) {
        // someone else got there first: show the item's true state
        const truth = await this.api.recommendation(id);
        if (truth) {
          this.items[index] = truth;
        } else {
          this.items.splice(index, 1);
        }
        const event: QueueEvent = { kind: "conflict", recommendation: truth, message: error.message };
        this.onEvent(event);
        return event;
      }
      this.items[index] = before; // network or validation problem: plain rollback
      const event: QueueEvent = { kind: "error", message: (error as Error).message };
      this.onEvent(event);
      return event;
    }
  }
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderQueueCard(recommendation: Recommendation): string {
  const actions = allowedDecisions(recommendation.state)
    .map((d) => `<button data-decision="${d}" data-id="${recommendation.id}">${d}</button>`)
    .join("");
  return (
    `<article class="rec-card" data-state="${recommendation.state}">` +
    `<header>${escapeHtml(recommendation.consequent)} for ${escapeHtml(recommendation.learner_id)}</header>` +
    `<p class="provenance">${escapeHtml(explainRule(recommendation))}</p>` +
    `<footer>${actions}</footer></article>`
  );
}
