/** Dashboard view state and the client-side mirror of the review state machine. */

import type { Decision, RecommendationState } from "./types.js";

export interface DashboardViewState {
  selectedClass: string | null;
  selectedLearner: string | null;
  window: { from: string; to: string };
  queueFilter: RecommendationState;
  peerComparison: boolean; // learners fear peer comparison: default OFF
}

export function initialViewState(window: { from: string; to: string }): DashboardViewState {
  return {
    selectedClass: null,
    selectedLearner: null,
    window,
    queueFilter: "proposed",
    peerComparison: false,
  };
}

/**
 * Decisions the server will accept from a given state. The client derives
 * its buttons from this table and never issues anything else, so a
 * well-behaved UI cannot trigger ILLEGAL_TRANSITION except through a
 * concurrent reviewer.
 */
const ALLOWED: Record<RecommendationState, Decision[]> = {
  proposed: ["approve", "reject", "amend"],
  amended: ["approve"],
  approved: ["deliver"],
  rejected: [],
  delivered: [],
};

export function allowedDecisions(state: RecommendationState): Decision[] {
  return [...ALLOWED[state]];
}

export function isTerminal(state: RecommendationState): boolean {
  return ALLOWED[state].length === 0;
}
