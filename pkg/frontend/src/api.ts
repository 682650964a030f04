/** Thin typed client over an injectable fetch, so tests can capture traffic. */

import type {
  ClassIndicators,
  DecisionBody,
  LearnerIndicators,
  Recommendation,
  RecommendationState,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiConflictError extends Error {
  constructor(public code: string, message: string) {
    super(message);
  }
}

export class ApiRequestError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export interface IndicatorWindow {
  from: string;
  to: string;
  bucket?: string;
  skill?: string;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private authToken?: string,
  ) {}

  private headers(): Record<string, string> {
    const out: Record<string, string> = { "content-type": "application/json" };
    if (this.authToken) out["authorization"] = `Bearer ${this.authToken}`;
    return out;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      ...init,
      headers: { ...this.headers(), ...(init?.headers ?? {}) },
    });
    if (response.status === 409) {
      const body = await response.json();
      throw new ApiConflictError(body.error?.code ?? "CONFLICT", body.error?.message ?? "conflict");
    }
    if (!response.ok) {
      let message = `request failed with ${response.status}`;
      try {
        const body = await response.json();
        message = body.error?.message ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiRequestError(response.status, message);
    }
    return (await response.json()) as T;
  }

  classIndicators(classId: string, window: IndicatorWindow): Promise<ClassIndicators> {
    const params = new URLSearchParams({ from: window.from, to: window.to });
    if (window.bucket) params.set("bucket", window.bucket);
    if (window.skill) params.set("skill", window.skill);
    return this.request(`/indicators/classes/${encodeURIComponent(classId)}?${params}`);
  }

  learnerIndicators(learnerId: string, window: IndicatorWindow): Promise<LearnerIndicators> {
    const params = new URLSearchParams({ from: window.from, to: window.to });
    if (window.bucket) params.set("bucket", window.bucket);
    if (window.skill) params.set("skill", window.skill);
    return this.request(`/indicators/learners/${encodeURIComponent(learnerId)}?${params}`);
  }

  recommendations(filter: { learner?: string; state?: RecommendationState }): Promise<Recommendation[]> {
    const params = new URLSearchParams();
    if (filter.learner) params.set("learner", filter.learner);
    if (filter.state) params.set("state", filter.state);
    const query = params.toString();
    return this.request<{ recommendations: Recommendation[] }>(
      `/recommendations${query ? `?${query}` : ""}`,
    ).then((body) => body.recommendations);
  }

  recommendation(id: string): Promise<Recommendation | undefined> {
    return this.request<{ recommendations: Recommendation[] }>("/recommendations").then((body) =>
      body.recommendations.find((r) => r.id === id),
    );
  }

  decide(id: string, body: DecisionBody): Promise<Recommendation> {
    return this.request(`/recommendations/${encodeURIComponent(id)}/decision`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  delivered(learnerId: string): Promise<Recommendation[]> {
    return this.request<{ recommendations: Recommendation[] }>(
      `/learners/${encodeURIComponent(learnerId)}/delivered`,
    ).then((body) => body.recommendations);
  }
}
