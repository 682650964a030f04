/** Activity pulse rendering: one ellipse per bucket, size straight from the API.
 *
 * The radius field arrives normalized to [0, 1]; the ellipse x-radius is
 * exactly `radius * MAX_RX`, so on-screen widths keep the API's ratios. No
 * value is recomputed client-side.
 */

import type { PulsePoint } from "./types.js";

export const MAX_RX = 18;
export const MAX_RY = 12;
const CELL = 40;
const ROW_HEIGHT = 30;

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function pulseEllipse(point: PulsePoint, index: number): string {
  const cx = CELL / 2 + index * CELL;
  const rx = point.value * MAX_RX;
  const ry = point.value * MAX_RY;
  const title = `${point.bucket_start}: ${point.count} activities`;
  return (
    `<ellipse cx="${cx}" cy="${ROW_HEIGHT / 2}" rx="${rx}" ry="${ry}" ` +
    `class="pulse" data-count="${point.count}"><title>${escapeXml(title)}</title></ellipse>`
  );
}

export function renderPulseRow(points: PulsePoint[], label: string): string {
  const width = Math.max(points.length, 1) * CELL;
  const ellipses = points.map(pulseEllipse).join("");
  return (
    `<div class="pulse-row"><span class="pulse-label">${escapeXml(label)}</span>` +
    `<svg role="img" aria-label="activity pulse of ${escapeXml(label)}" ` +
    `width="${width}" height="${ROW_HEIGHT}" viewBox="0 0 ${width} ${ROW_HEIGHT}">${ellipses}</svg></div>`
  );
}
