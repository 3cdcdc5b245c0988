/**
 * Payload types mirroring the irforge service JSON exactly.
 *
 * The console never derives domain values itself: everything rendered
 * comes from these payloads as the server returned them.
 */

export type SessionState = "created" | "briefing" | "in-event" | "debrief" | "closed";

export interface QuestionRef {
  id: string;
  prompt: string;
}

export interface EventQuestion extends QuestionRef {
  /** "primary" for the thread question, otherwise the inject id it came from. */
  source: string;
}

export interface AvailableInject {
  id: string;
  narrative: string;
  condition_note: string;
  question: QuestionRef | null;
}

export interface EventView {
  synopsis: number;
  narrative: string;
  questions: EventQuestion[];
  available_injects: AvailableInject[];
}

export interface ResponseRecord {
  question_id: string;
  respondent: string;
  text: string;
  seq: number;
}

export interface MeasureScore {
  measure_id: string;
  rating: "yes" | "partial" | "no";
  note: string;
}

export interface ActionItem {
  text: string;
  owner: string;
  objective_refs: string[];
}

export interface TraceEntry {
  objective: string;
  label: string;
  triggers: string[];
  threads: number[];
}

export interface Measure {
  id: string;
  attached_to: string;
  target_response: string;
  objective_refs: string[];
}

export interface SessionView {
  id: string;
  scenario_id: string;
  scenario_title: string;
  scenario_digest: string;
  state: SessionState;
  thread_index: number | null;
  thread_count: number;
  roster: string[];
  clock: number;
  fired_injects: string[];
  responses: ResponseRecord[];
  scores: MeasureScore[];
  action_items: ActionItem[];
  objective_trace: TraceEntry[];
  event: EventView | null;
  measures: Measure[];
}

export interface ObjectiveDebrief {
  objective: string;
  label: string;
  threads: number[];
  measures: string[];
  mean_score: number | "unscored";
  unanswered_questions: string[];
  unfired_injects: string[];
}

export interface DebriefReport {
  session_id: string;
  scenario_title: string;
  state: SessionState;
  objectives: ObjectiveDebrief[];
  action_items: ActionItem[];
  questions_total: number;
  questions_answered: number;
  injects_total: number;
  injects_fired: number;
}

export interface ServiceError {
  error: string;
  detail: string;
}
