/** In-memory stand-in for the metal-lrs API with the same review state
 * machine and conflict semantics, plus a full traffic log so tests can
 * assert which endpoints were (not) called.
 */

import type { FetchLike } from "../src/api.js";
import type {
  ClassIndicators,
  Decision,
  LearnerIndicators,
  Recommendation,
  RecommendationState,
} from "../src/types.js";

const TRANSITIONS: Record<Decision, Partial<Record<RecommendationState, RecommendationState>>> = {
  approve: { proposed: "approved", amended: "approved" },
  reject: { proposed: "rejected" },
  amend: { proposed: "amended" },
  deliver: { approved: "delivered" },
};

export function makeRecommendation(over: Partial<Recommendation> = {}): Recommendation {
  return {
    id: "rec-1",
    learner_id: "L1",
    consequent: "attr:subject=Mathematics",
    source_rule: {
      context: ["age=14", "sex=M", "Mathematics-grade-9"],
      antecedent: ["id:R-15", "id:R-42"],
      consequent: "attr:subject=Mathematics",
      confidence: 1.0,
      support: 2,
    },
    state: "proposed",
    teacher_rating: null,
    teacher_note: null,
    original_consequent: null,
    materialized_resources: ["R-15", "R-42", "R-77", "R-88"],
    transitions: [{ state: "proposed", at: "2018-11-01T10:00:00+00:00" }],
    ...over,
  };
}

export function makeLearnerIndicators(over: Partial<LearnerIndicators> = {}): LearnerIndicators {
  return {
    learner_id: "L1",
    window: { from: "2018-11-01T00:00:00+00:00", to: "2018-11-02T00:00:00+00:00" },
    pulse: {
      subject_id: "L1",
      indicator: "activity_pulse",
      points: [{ bucket_start: "2018-11-01T00:00:00+00:00", value: 1.0, count: 4 }],
    },
    effort_minutes: 12.0,
    engagement: 1.0,
    ...over,
  };
}

export class FakeServer {
  recommendations = new Map<string, Recommendation>();
  requests: Array<{ method: string; path: string }> = [];
  failNextDecision: number | null = null; // force a status once, e.g. 500

  seed(recommendation: Recommendation) {
    this.recommendations.set(recommendation.id, recommendation);
  }

  classIndicators: ClassIndicators = {
    class_id: "C1",
    window: { from: "2018-11-01T00:00:00+00:00", to: "2018-11-02T00:00:00+00:00" },
    learners: [
      { learner_id: "L1", pulse: { subject_id: "L1", indicator: "activity_pulse", points: [] } },
      { learner_id: "L2", pulse: { subject_id: "L2", indicator: "activity_pulse", points: [] } },
    ],
  };

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const parsed = new URL(url, "http://fake");
    const path = parsed.pathname;
    this.requests.push({ method, path });

    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), { status, headers: { "content-type": "application/json" } });

    if (method === "GET" && path === "/recommendations") {
      let items = [...this.recommendations.values()];
      const learner = parsed.searchParams.get("learner");
      const state = parsed.searchParams.get("state");
      if (learner) items = items.filter((r) => r.learner_id === learner);
      if (state) items = items.filter((r) => r.state === state);
      return json({ recommendations: items });
    }

    const decisionMatch = path.match(/^\/recommendations\/([^/]+)\/decision$/);
    if (method === "POST" && decisionMatch) {
      if (this.failNextDecision !== null) {
        const status = this.failNextDecision;
        this.failNextDecision = null;
        return json({ error: { code: "BOOM", message: "injected failure" } }, status);
      }
      const item = this.recommendations.get(decisionMatch[1]!);
      if (!item) {
        return json({ error: { code: "UNKNOWN_RECOMMENDATION", message: "missing" } }, 404);
      }
      const body = JSON.parse(String(init?.body ?? "{}"));
      const next = TRANSITIONS[body.decision as Decision]?.[item.state];
      if (!next) {
        return json(
          { error: { code: "ILLEGAL_TRANSITION", message: `cannot ${body.decision} from ${item.state}` } },
          409,
        );
      }
      const updated: Recommendation = {
        ...item,
        state: next,
        teacher_rating: body.rating ?? item.teacher_rating,
        teacher_note: body.note ?? item.teacher_note,
        consequent: body.decision === "amend" ? body.consequent : item.consequent,
        original_consequent: body.decision === "amend" ? item.consequent : item.original_consequent,
        transitions: [...item.transitions, { state: next, at: "2018-11-01T11:00:00+00:00", decision: body.decision }],
      };
      this.recommendations.set(updated.id, updated);
      return json(updated);
    }

    const deliveredMatch = path.match(/^\/learners\/([^/]+)\/delivered$/);
    if (method === "GET" && deliveredMatch) {
      const items = [...this.recommendations.values()].filter(
        (r) => r.learner_id === deliveredMatch[1] && r.state === "delivered",
      );
      return json({ recommendations: items });
    }

    if (method === "GET" && path.startsWith("/indicators/learners/")) {
      return json(makeLearnerIndicators({ learner_id: decodeURIComponent(path.split("/")[3]!) }));
    }
    if (method === "GET" && path.startsWith("/indicators/classes/")) {
      return json(this.classIndicators);
    }
    return json({ error: { code: "NOT_FOUND", message: path } }, 404);
  };

  peerAggregateRequests(): number {
    return this.requests.filter((r) => r.path.startsWith("/indicators/classes/")).length;
  }
}
