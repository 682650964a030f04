/** Plain line plots for skill evolution: the one chart type teachers kept.
 *
 * Buckets the API omitted stay gaps; the plot never interpolates across them.
 */

import type { IndicatorSeries } from "./types.js";

const WIDTH = 320;
const HEIGHT = 120;
const PAD = 10;

export const NO_DATA_HTML = '<div class="no-data">no data</div>';

export function renderLinePlot(series: IndicatorSeries | undefined): string {
  if (!series || series.points.length === 0) {
    return NO_DATA_HTML;
  }
  const points = series.points;
  const times = points.map((p) => Date.parse(p.bucket_start));
  const min = Math.min(...times);
  const span = Math.max(Math.max(...times) - min, 1);

  const coordinates = points.map((p, i) => {
    const x = PAD + ((times[i]! - min) / span) * (WIDTH - 2 * PAD);
    const y = HEIGHT - PAD - p.value * (HEIGHT - 2 * PAD); // values are in [0, 1]
    return { x, y, t: times[i]! };
  });

  // split into segments at gaps larger than the smallest bucket step
  const steps = times.slice(1).map((t, i) => t - times[i]!);
  const unit = steps.length ? Math.min(...steps) : 0;
  const segments: string[][] = [[]];
  coordinates.forEach((c, i) => {
    if (i > 0 && unit > 0 && c.t - coordinates[i - 1]!.t > unit) {
      segments.push([]);
    }
    segments[segments.length - 1]!.push(`${c.x.toFixed(1)},${c.y.toFixed(1)}`);
  });

  const paths = segments
    .filter((s) => s.length > 0)
    .map((s) =>
      s.length === 1
        ? `<circle cx="${s[0]!.split(",")[0]}" cy="${s[0]!.split(",")[1]}" r="2" class="skill-point"/>`
        : `<polyline fill="none" class="skill-line" points="${s.join(" ")}"/>`,
    )
    .join("");
  return (
    `<svg role="img" aria-label="${series.indicator}" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}">${paths}</svg>`
  );
}
