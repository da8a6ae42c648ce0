/** Typed client for the review service consumed by this UI. */

export interface Counts {
  false_prediction: number;
  omission: number;
  wrong_location: number;
  wrong_severity: number;
  absent_comparison: number;
}

export const COUNT_FIELDS: (keyof Counts)[] = [
  'false_prediction',
  'omission',
  'wrong_location',
  'wrong_severity',
  'absent_comparison',
];

export interface Progress {
  annotator_id?: string;
  done: number;
  total: number;
}

export interface ItemPayload {
  item_id: string;
  candidate_text: string;
  references: string[];
  image_url: string | null;
  progress: Progress;
}

export interface DonePayload {
  done: true;
  progress: Progress;
}

export type NextResponse = ItemPayload | DonePayload;

export interface BlindingTerms {
  model_names: string[];
  method_labels: string[];
}

export type SubmitOutcome = 'stored' | 'duplicate';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export function isDone(payload: NextResponse): payload is DonePayload {
  return (payload as DonePayload).done === true;
}

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  private async requestJson(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(this.url(path), init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return response.json();
  }

  async blindingTerms(): Promise<BlindingTerms> {
    return (await this.requestJson('/registry/blinding-terms')) as BlindingTerms;
  }

  async fetchNext(sessionId: string, annotatorId: string): Promise<NextResponse> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/next?annotator=${encodeURIComponent(annotatorId)}`;
    return (await this.requestJson(path)) as NextResponse;
  }

  async progress(sessionId: string, annotatorId: string): Promise<Progress> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/progress?annotator=${encodeURIComponent(annotatorId)}`;
    return (await this.requestJson(path)) as Progress;
  }

  /** POST the record; a 409 means someone (or we) already stored it. */
  async submit(
    sessionId: string,
    annotatorId: string,
    itemId: string,
    counts: Counts,
  ): Promise<SubmitOutcome> {
    let response: Response;
    try {
      response = await this.fetchFn(
        this.url(`/sessions/${encodeURIComponent(sessionId)}/annotations`),
        {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify({ annotator_id: annotatorId, item_id: itemId, counts }),
        },
      );
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    if (response.status === 201) return 'stored';
    if (response.status === 409) return 'duplicate';
    throw new ApiError(response.status, await response.text());
  }

  imageUrl(relative: string): string {
    return this.url(relative);
  }
}
