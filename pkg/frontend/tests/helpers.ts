/** In-memory stand-in for the review service, driving the flow in unit tests. */

import type { BlindingTerms, Counts, ItemPayload } from '../src/api.js';

export const CLEAN_TERMS: BlindingTerms = {
  model_names: ['CXR-LLaVA', 'MAIRA2', 'LLaVA-Med', 'Llama3.2V', 'LLaVA-OV', 'Qwen2.5VL'],
  method_labels: ['L', 'M', 'L&M', 'I', 'I&L', 'I&M', 'I&L&M'],
};

export function makeItem(index: number, total: number, done: number): ItemPayload {
  return {
    item_id: `item-${String(index).padStart(4, '0')}`,
    candidate_text: `candidate report number ${index} with clear lungs`,
    references: [`reference a for ${index}`, `reference b for ${index}`],
    image_url: null,
    progress: { annotator_id: 'tester', done, total },
  };
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export interface FakeServiceOptions {
  items?: ItemPayload[];
  terms?: BlindingTerms;
  corruptPayload?: unknown; // served from /next instead of the queue
  submitLatencyMs?: number;
  failSubmissions?: number; // first N submissions answer 500
}

export class FakeService {
  submissions: { item_id: string; counts: Counts }[] = [];
  postCount = 0;
  private stored = new Set<string>();
  private readonly items: ItemPayload[];
  private readonly terms: BlindingTerms;
  private readonly options: FakeServiceOptions;

  constructor(options: FakeServiceOptions = {}) {
    this.items = options.items ?? [makeItem(0, 2, 0), makeItem(1, 2, 1)];
    this.terms = options.terms ?? CLEAN_TERMS;
    this.options = options;
  }

  get fetch(): typeof fetch {
    return (input: RequestInfo | URL, init?: RequestInit) => this.route(String(input), init);
  }

  private async route(url: string, init?: RequestInit): Promise<Response> {
    if (url.includes('/registry/blinding-terms')) {
      return jsonResponse(200, this.terms);
    }
    if (url.includes('/next')) {
      if (this.options.corruptPayload !== undefined) {
        return jsonResponse(200, this.options.corruptPayload);
      }
      const pending = this.items.filter((i) => !this.stored.has(i.item_id));
      if (pending.length === 0) {
        return jsonResponse(200, {
          done: true,
          progress: { annotator_id: 'tester', done: this.stored.size, total: this.items.length },
        });
      }
      const item = pending[0]!;
      return jsonResponse(200, {
        ...item,
        progress: { annotator_id: 'tester', done: this.stored.size, total: this.items.length },
      });
    }
    if (url.includes('/annotations') && init?.method === 'POST') {
      this.postCount += 1;
      if (this.options.submitLatencyMs) {
        await new Promise((resolve) => setTimeout(resolve, this.options.submitLatencyMs));
      }
      if (this.options.failSubmissions && this.postCount <= this.options.failSubmissions) {
        return jsonResponse(500, { detail: 'scripted failure' });
      }
      const body = JSON.parse(String(init.body)) as { item_id: string; counts: Counts };
      if (this.stored.has(body.item_id)) {
        return jsonResponse(409, { detail: 'duplicate' });
      }
      this.stored.add(body.item_id);
      this.submissions.push({ item_id: body.item_id, counts: body.counts });
      return jsonResponse(201, { stored: true });
    }
    return jsonResponse(404, { detail: `no route for ${url}` });
  }
}

export function setCountInputs(scope: ParentNode, values: Partial<Record<string, string>>): void {
  for (const [field, value] of Object.entries(values)) {
    const input = scope.querySelector<HTMLInputElement>(`[data-field="${field}"]`);
    if (!input) throw new Error(`no input for ${field}`);
    input.value = value ?? '';
  }
}

/** Mount a fresh root, detaching any earlier test's DOM first. */
export function freshRoot(doc: Document): HTMLElement {
  doc.body.textContent = '';
  const root = doc.createElement('div');
  doc.body.appendChild(root);
  return root;
}
