export type AspectName = 'naturalness' | 'consistency' | 'usefulness';

export const ASPECTS: AspectName[] = ['naturalness', 'consistency', 'usefulness'];

/** Rater-facing hints; the scale anchors 1..5 label every radio group. */
export const ASPECT_HINTS: Record<AspectName, string> = {
  naturalness: 'Is the comment fluent, readable English?',
  consistency: 'Does the comment mean what the code does?',
  usefulness: 'Would this comment actually help a developer?',
};

export const SCALE_ANCHORS = ['poor', 'marginal', 'acceptable', 'good', 'excellent'];

/** Task as served by GET /api/raters/{id}/next; never names a system. */
export interface ApiTask {
  task_id: string;
  snippet_id: string;
  code: string;
  comment: string;
  blind_slot: number;
  slot_count: number;
  status: string;
  is_escalation: boolean;
}

export interface Scores {
  naturalness: number;
  consistency: number;
  usefulness: number;
}

export interface RatingSubmission extends Scores {
  task_id: string;
  rater_id: string;
}

export interface Ack {
  accepted: boolean;
  conflict_escalated: boolean;
}

export interface Progress {
  open: number;
  rated: number;
  escalated: number;
  resolved: number;
}

export interface RatingApi {
  nextTask(raterId: string): Promise<ApiTask | null>;
  submitRating(submission: RatingSubmission): Promise<Ack>;
  progress(): Promise<Progress>;
}
