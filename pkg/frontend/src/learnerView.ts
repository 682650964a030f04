/** Present-moment learner view: today's pulse, current engagement, delivered
 * recommendations. No historical trend charts; peer comparison stays behind
 * an explicit opt-in, and while it is off the view never requests any
 * class-level aggregate at all.
 */

import { ApiClient } from "./api.js";
import { renderPulseRow } from "./pulse.js";
import type { ClassIndicators, LearnerIndicators, Recommendation } from "./types.js";

export interface LearnerViewData {
  indicators: LearnerIndicators;
  delivered: Recommendation[];
  peers: ClassIndicators | null;
}

export class LearnerView {
  constructor(
    private api: ApiClient,
    private learnerId: string,
    private classId: string,
    public peerComparison = false, // default OFF
  ) {}

  async load(todayWindow: { from: string; to: string }): Promise<LearnerViewData> {
    const [indicators, delivered] = await Promise.all([
      this.api.learnerIndicators(this.learnerId, todayWindow),
      this.api.delivered(this.learnerId),
    ]);
    // the peer aggregate request only exists when the learner opted in
    const peers = this.peerComparison
      ? await this.api.classIndicators(this.classId, todayWindow)
      : null;
    return { indicators, delivered, peers };
  }
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function deliveredCard(recommendation: Recommendation): string {
  const resources = recommendation.materialized_resources
    .map((rid) => `<li>${escapeHtml(rid)}</li>`)
    .join("");
  return (
    `<article class="delivered-card" data-id="${recommendation.id}">` +
    `<header>${escapeHtml(recommendation.consequent)}</header>` +
    `<ul class="resources">${resources}</ul></article>`
  );
}

export function renderLearnerView(data: LearnerViewData): string {
  const pulse = renderPulseRow(data.indicators.pulse.points, "today");
  const engagement =
    data.indicators.engagement !== undefined
      ? `<div class="engagement">engagement ${(data.indicators.engagement * 100).toFixed(0)}%</div>`
      : "";
  const cards = data.delivered.map(deliveredCard).join("") || '<p class="no-recs">nothing new</p>';
  const peers = data.peers
    ? `<div class="peer-panel">class activity: ${data.peers.learners.length} learners</div>`
    : "";
  return (
    `<section class="learner-view"><h2>right now</h2>${pulse}${engagement}` +
    `<div class="delivered">${cards}</div>${peers}</section>`
  );
}
