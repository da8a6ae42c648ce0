/** Review session driver: fetch next item, validate, submit, advance.
 *
 * The flow refuses to render any payload the blinding guard flags, submits
 * at most once per item (in-flight and already-stored guards), treats a
 * 409 as "someone already stored this" and moves on, and surfaces network
 * failures with a retry affordance.
 */

import {
  AnnotationApi,
  ApiError,
  isDone,
  type BlindingTerms,
  type Counts,
  type ItemPayload,
} from './api.js';
import { findLeaks } from './blinding.js';
import { parseCounts } from './validation.js';
import { renderBlocked, renderDone, renderError, renderItem, type FormHandles } from './view.js';

export type FlowState = 'idle' | 'item' | 'done' | 'blocked' | 'error';

export class AnnotationFlow {
  private terms: BlindingTerms | null = null;
  private current: ItemPayload | null = null;
  private handles: FormHandles | null = null;
  private inflight = false;
  private readonly submitted = new Set<string>();
  state: FlowState = 'idle';

  constructor(
    private readonly api: AnnotationApi,
    private readonly sessionId: string,
    private readonly annotatorId: string,
    private readonly root: HTMLElement,
    private readonly doc: Document,
  ) {}

  async start(): Promise<void> {
    try {
      this.terms = await this.api.blindingTerms();
    } catch (err) {
      this.fail(`could not load the blinding lexicon: ${String(err)}`, () => void this.start());
      return;
    }
    await this.next();
  }

  async next(): Promise<void> {
    let payload;
    try {
      payload = await this.api.fetchNext(this.sessionId, this.annotatorId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.fail('session closed or unknown; nothing further to review', null);
      } else {
        this.fail(`could not fetch the next item: ${String(err)}`, () => void this.next());
      }
      return;
    }
    if (isDone(payload)) {
      this.current = null;
      this.state = 'done';
      renderDone(this.doc, this.root, payload.progress);
      return;
    }
    const leaks = findLeaks(payload, this.terms ?? { model_names: [], method_labels: [] });
    if (leaks.length > 0) {
      this.current = null;
      this.state = 'blocked';
      renderBlocked(this.doc, this.root, leaks);
      return;
    }
    this.current = payload;
    this.state = 'item';
    const imageSrc = payload.image_url ? this.api.imageUrl(payload.image_url) : null;
    this.handles = renderItem(this.doc, this.root, payload, imageSrc, () => void this.submit());
  }

  /** Read the five counts from the form; render problems when invalid. */
  readCounts(): Counts | null {
    if (!this.handles) return null;
    const { counts, problems } = parseCounts(this.handles.readRaw());
    this.handles.problemsBox.textContent = problems.join('; ');
    return counts;
  }

  async submit(): Promise<void> {
    if (!this.current || !this.handles || this.inflight) return;
    if (this.submitted.has(this.current.item_id)) return;
    const counts = this.readCounts();
    if (counts === null) return; // invalid entries are unsubmittable
    this.inflight = true;
    this.handles.submitButton.disabled = true;
    try {
      const outcome = await this.api.submit(
        this.sessionId,
        this.annotatorId,
        this.current.item_id,
        counts,
      );
      this.submitted.add(this.current.item_id);
      if (outcome === 'duplicate') {
        this.handles.noticeBox.textContent = 'Already annotated; moving on.';
      }
      await this.next();
    } catch (err) {
      this.handles.noticeBox.textContent = `submit failed: ${String(err)}`;
      this.handles.submitButton.disabled = false;
    } finally {
      this.inflight = false;
    }
  }

  private fail(message: string, retry: (() => void) | null): void {
    this.state = 'error';
    this.current = null;
    renderError(this.doc, this.root, message, retry);
  }
}
