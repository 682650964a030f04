/** Payload shapes of the metal-lrs HTTP API consumed by the dashboard. */

export interface PulsePoint {
  bucket_start: string;
  value: number; // radius in [0, 1], already normalized by the API
  count: number;
}

export interface IndicatorSeries {
  subject_id: string;
  indicator: string;
  points: Array<{ bucket_start: string; value: number; [extra: string]: unknown }>;
}

export interface LearnerIndicators {
  learner_id: string;
  window: { from: string; to: string };
  pulse: { subject_id: string; indicator: string; points: PulsePoint[] };
  effort_minutes: number;
  engagement?: number;
  skill_evolution?: IndicatorSeries;
}

export interface ClassLearnerEntry {
  learner_id: string;
  pulse: { subject_id: string; indicator: string; points: PulsePoint[] };
  engagement?: number;
}

export interface ClassIndicators {
  class_id: string;
  window: { from: string; to: string };
  learners: ClassLearnerEntry[];
  skill_evolution?: IndicatorSeries;
}

export type RecommendationState =
  | "proposed"
  | "approved"
  | "rejected"
  | "amended"
  | "delivered";

export interface SourceRule {
  context: string[];
  antecedent: string[];
  consequent: string;
  confidence: number;
  support: number;
}

export interface Recommendation {
  id: string;
  learner_id: string;
  consequent: string;
  source_rule: SourceRule;
  state: RecommendationState;
  teacher_rating: number | null;
  teacher_note: string | null;
  original_consequent: string | null;
  materialized_resources: string[];
  transitions: Array<{ state: string; at: string; decision?: string }>;
}

export type Decision = "approve" | "reject" | "amend" | "deliver";

export interface DecisionBody {
  decision: Decision;
  rating?: number;
  note?: string;
  consequent?: string;
}

export interface ApiError {
  error: { code: string; message: string };
}
