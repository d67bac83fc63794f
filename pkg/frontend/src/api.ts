import type { Ack, ApiTask, Progress, RatingApi, RatingSubmission } from './types.js';

export type ApiErrorKind = 'network' | 'http';

export class ApiError extends Error {
  kind: ApiErrorKind;
  status: number | null;

  constructor(kind: ApiErrorKind, message: string, status: number | null = null) {
    super(message);
    this.kind = kind;
    this.status = status;
  }
}

async function request(base: string, path: string, init?: RequestInit): Promise<Response> {
  let response: Response;
  try {
    response = await fetch(base + path, init);
  } catch (err) {
    throw new ApiError('network', `network failure: ${String(err)}`);
  }
  return response;
}

/** Thin typed client over the three rater-facing endpoints. */
export class HttpRatingApi implements RatingApi {
  constructor(private base: string = '') {}

  async nextTask(raterId: string): Promise<ApiTask | null> {
    const response = await request(this.base, `/api/raters/${encodeURIComponent(raterId)}/next`);
    if (response.status === 204) {
      return null;
    }
    if (!response.ok) {
      throw new ApiError('http', `next-task failed with ${response.status}`, response.status);
    }
    return (await response.json()) as ApiTask;
  }

  async submitRating(submission: RatingSubmission): Promise<Ack> {
    const response = await request(this.base, '/api/ratings', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(submission),
    });
    if (!response.ok) {
      throw new ApiError('http', `rating rejected with ${response.status}`, response.status);
    }
    return (await response.json()) as Ack;
  }

  async progress(): Promise<Progress> {
    const response = await request(this.base, '/api/progress');
    if (!response.ok) {
      throw new ApiError('http', `progress failed with ${response.status}`, response.status);
    }
    return (await response.json()) as Progress;
  }
}
