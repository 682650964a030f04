import { describe, expect, it } from "vitest";

import { renderClassOverview, renderErrorBanner } from "../src/classOverview.js";
import { NO_DATA_HTML, renderLinePlot } from "../src/lineplot.js";
import { allowedDecisions, initialViewState, isTerminal } from "../src/state.js";
import type { ClassIndicators, IndicatorSeries } from "../src/types.js";

const WINDOW = { from: "2018-11-01T00:00:00+00:00", to: "2018-11-08T00:00:00+00:00" };

function series(days: number[]): IndicatorSeries {
  return {
    subject_id: "C1",
    indicator: "skill_evolution:SK-frac",
    points: days.map((d) => ({
      bucket_start: `2018-11-0${d}T00:00:00+00:00`,
      value: d / 10,
    })),
  };
}

describe("line plot", () => {
  it("renders no-data state for an empty series", () => {
    expect(renderLinePlot(series([]))).toBe(NO_DATA_HTML);
    expect(renderLinePlot(undefined)).toBe(NO_DATA_HTML);
  });

  it("splits at omitted buckets instead of interpolating", () => {
    const svg = renderLinePlot(series([1, 2, 5, 6]));
    const polylines = [...svg.matchAll(/<polyline/g)];
    expect(polylines).toHaveLength(2); // gap between day 2 and day 5
  });

  it("draws one continuous line without gaps", () => {
    const svg = renderLinePlot(series([1, 2, 3]));
    expect([...svg.matchAll(/<polyline/g)]).toHaveLength(1);
  });

  it("an isolated bucket becomes a point", () => {
    const svg = renderLinePlot(series([1, 2, 9]));
    expect(svg).toContain("<circle");
  });
});

describe("class overview", () => {
  it("renders a no-data state for an empty class", () => {
    const data: ClassIndicators = { class_id: "C1", window: WINDOW, learners: [] };
    expect(renderClassOverview(data)).toContain("no data");
  });

  it("renders one pulse row per learner", () => {
    const data: ClassIndicators = {
      class_id: "C1",
      window: WINDOW,
      learners: ["L1", "L2", "L3"].map((lid) => ({
        learner_id: lid,
        pulse: {
          subject_id: lid,
          indicator: "activity_pulse",
          points: [{ bucket_start: WINDOW.from, value: 0.5, count: 1 }],
        },
      })),
    };
    const html = renderClassOverview(data);
    expect([...html.matchAll(/pulse-row/g)]).toHaveLength(3);
  });

  it("error banner offers a retry, never a blank panel", () => {
    const html = renderErrorBanner("could not reach the API", "reload-overview");
    expect(html).toContain("retry");
    expect(html).toContain('data-action="reload-overview"');
  });
});

describe("view state", () => {
  it("peer comparison defaults off", () => {
    expect(initialViewState(WINDOW).peerComparison).toBe(false);
  });

  it("mirrors the server state machine", () => {
    expect(allowedDecisions("proposed").sort()).toEqual(["amend", "approve", "reject"]);
    expect(allowedDecisions("amended")).toEqual(["approve"]);
    expect(allowedDecisions("approved")).toEqual(["deliver"]);
    expect(isTerminal("rejected")).toBe(true);
    expect(isTerminal("delivered")).toBe(true);
  });
});
