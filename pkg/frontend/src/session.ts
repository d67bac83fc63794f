import { ApiError } from './api.js';
import type { Ack, ApiTask, AspectName, Progress, RatingApi, RatingSubmission } from './types.js';
import { ASPECTS } from './types.js';

export type Phase = 'login' | 'loading' | 'rating' | 'submitting' | 'error' | 'done';

export interface SessionState {
  phase: Phase;
  raterId: string | null;
  task: ApiTask | null;
  scores: Partial<Record<AspectName, number>>;
  activeAspect: AspectName;
  submittedCount: number;
  lastAck: Ack | null;
  progress: Progress | null;
  errorMessage: string | null;
}

function initialState(): SessionState {
  return {
    phase: 'login',
    raterId: null,
    task: null,
    scores: {},
    activeAspect: 'naturalness',
    submittedCount: 0,
    lastAck: null,
    progress: null,
    errorMessage: null,
  };
}

/**
 * The rating loop: fetch next -> collect three scores -> submit -> repeat,
 * with one request in flight at a time. A network failure parks the unsent
 * rating behind a retry banner; a 409 (someone already rated it) skips
 * forward; 204 ends the session with a completion screen.
 */
export class RatingSession {
  private state: SessionState = initialState();
  private pendingSubmission: RatingSubmission | null = null;
  private inFlight = false;

  constructor(
    private api: RatingApi,
    private onChange: (state: SessionState) => void = () => {},
  ) {}

  getState(): SessionState {
    return this.state;
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  async begin(raterId: string): Promise<void> {
    if (!raterId.trim()) {
      return;
    }
    this.update({ ...initialState(), raterId: raterId.trim() });
    await this.fetchNext();
  }

  /** All three aspects chosen? Submission stays disabled until then. */
  allChosen(): boolean {
    return ASPECTS.every((aspect) => typeof this.state.scores[aspect] === 'number');
  }

  setScore(aspect: AspectName, value: number): void {
    if (this.state.phase !== 'rating' || value < 1 || value > 5) {
      return;
    }
    const scores = { ...this.state.scores, [aspect]: value };
    // advance the keyboard focus to the next unscored aspect
    const next = ASPECTS.find((a) => a !== aspect && typeof scores[a] !== 'number');
    this.update({ scores, activeAspect: next ?? aspect });
  }

  setActiveAspect(aspect: AspectName): void {
    if (this.state.phase === 'rating') {
      this.update({ activeAspect: aspect });
    }
  }

  /** Keystroke entry point: digits 1..5 score the active aspect. */
  pressKey(key: string): void {
    if (this.state.phase !== 'rating') {
      return;
    }
    if (key >= '1' && key <= '5') {
      this.setScore(this.state.activeAspect, Number(key));
    }
  }

  async submit(): Promise<void> {
    if (this.state.phase !== 'rating' || !this.allChosen() || this.inFlight) {
      return;
    }
    const task = this.state.task!;
    const submission: RatingSubmission = {
      task_id: task.task_id,
      rater_id: this.state.raterId!,
      naturalness: this.state.scores.naturalness!,
      consistency: this.state.scores.consistency!,
      usefulness: this.state.scores.usefulness!,
    };
    await this.send(submission);
  }

  /** After a network failure: resubmit the parked rating, or refetch. */
  async retry(): Promise<void> {
    if (this.state.phase !== 'error' || this.inFlight) {
      return;
    }
    if (this.pendingSubmission) {
      await this.send(this.pendingSubmission);
    } else {
      await this.fetchNext();
    }
  }

  private async send(submission: RatingSubmission): Promise<void> {
    this.inFlight = true;
    this.pendingSubmission = submission;
    this.update({ phase: 'submitting', errorMessage: null });
    try {
      const ack = await this.api.submitRating(submission);
      this.pendingSubmission = null;
      this.inFlight = false;
      this.update({
        lastAck: ack,
        submittedCount: this.state.submittedCount + 1,
      });
      await this.fetchNext(); // submit completed before the next fetch
    } catch (err) {
      this.inFlight = false;
      if (err instanceof ApiError && err.status === 409) {
        // duplicate: someone already rated this slot; skip forward
        this.pendingSubmission = null;
        await this.fetchNext();
        return;
      }
      // keep the unsent rating; the banner offers a retry
      this.update({
        phase: 'error',
        errorMessage: err instanceof Error ? err.message : String(err),
      });
    }
  }

  private async fetchNext(): Promise<void> {
    if (this.inFlight) {
      return;
    }
    this.inFlight = true;
    this.update({ phase: 'loading', task: null, scores: {}, activeAspect: 'naturalness' });
    try {
      const task = await this.api.nextTask(this.state.raterId!);
      this.inFlight = false;
      if (task === null) {
        let progress: Progress | null = null;
        try {
          progress = await this.api.progress();
        } catch {
          // completion screen still renders without totals
        }
        this.update({ phase: 'done', progress });
        return;
      }
      this.update({ phase: 'rating', task });
    } catch (err) {
      this.inFlight = false;
      this.pendingSubmission = null;
      this.update({
        phase: 'error',
        errorMessage: err instanceof Error ? err.message : String(err),
      });
    }
  }
}
