/** Class overview: one pulse row per learner plus simple skill line plots. */

import { renderLinePlot, NO_DATA_HTML } from "./lineplot.js";
import { renderPulseRow } from "./pulse.js";
import type { ClassIndicators } from "./types.js";

export function renderErrorBanner(message: string, retryAction: string): string {
  // API failures always leave something actionable on screen, never a blank panel
  return (
    `<div class="error-banner" role="alert">${message} ` +
    `<button data-action="${retryAction}">retry</button></div>`
  );
}

export function renderClassOverview(data: ClassIndicators): string {
  if (data.learners.length === 0) {
    return `<section class="class-overview">${NO_DATA_HTML}</section>`;
  }
  const rows = data.learners
    .map((entry) => renderPulseRow(entry.pulse.points, entry.learner_id))
    .join("");
  const skills = data.skill_evolution
    ? `<div class="skill-panel">${renderLinePlot(data.skill_evolution)}</div>`
    : "";
  return `<section class="class-overview"><div class="pulse-grid">${rows}</div>${skills}</section>`;
}
