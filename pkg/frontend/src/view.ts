/** DOM construction for the one-item-at-a-time review flow. */

import { COUNT_FIELDS, type Counts, type ItemPayload, type Progress } from './api.js';
import { attachPanZoom } from './panzoom.js';

export const COUNT_LABELS: Record<keyof Counts, string> = {
  false_prediction: 'False prediction of finding',
  omission: 'Omission of finding',
  wrong_location: 'Incorrect location/position of finding',
  wrong_severity: 'Incorrect severity of finding',
  absent_comparison: 'Mention of comparison that is not present',
};

export interface FormHandles {
  inputs: Record<keyof Counts, HTMLInputElement>;
  submitButton: HTMLButtonElement;
  problemsBox: HTMLElement;
  noticeBox: HTMLElement;
  readRaw(): Record<keyof Counts, string>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderProgress(doc: Document, progress: Progress): HTMLElement {
  const box = el(doc, 'div', 'progress');
  box.setAttribute('data-role', 'progress');
  box.textContent = `${progress.done} / ${progress.total} reviewed`;
  return box;
}

export function renderItem(
  doc: Document,
  root: HTMLElement,
  item: ItemPayload,
  imageSrc: string | null,
  onSubmit: () => void,
): FormHandles {
  root.textContent = '';
  const page = el(doc, 'div', 'review-page');
  page.appendChild(renderProgress(doc, item.progress));

  if (imageSrc) {
    const frame = el(doc, 'div', 'image-frame');
    const img = el(doc, 'img', 'study-image');
    img.src = imageSrc;
    img.alt = 'study image';
    img.draggable = false;
    frame.appendChild(img);
    page.appendChild(frame);
    attachPanZoom(img);
  }

  const candidate = el(doc, 'section', 'candidate');
  candidate.appendChild(el(doc, 'h2', undefined, 'Report under review'));
  const candidateText = el(doc, 'p', 'candidate-text', item.candidate_text);
  candidateText.setAttribute('data-role', 'candidate');
  candidate.appendChild(candidateText);
  page.appendChild(candidate);

  const refs = el(doc, 'section', 'references');
  refs.appendChild(el(doc, 'h2', undefined, 'Reference reports'));
  for (const reference of item.references) {
    refs.appendChild(el(doc, 'p', 'reference-text', reference));
  }
  page.appendChild(refs);

  const form = el(doc, 'form', 'counts-form');
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    onSubmit();
  });
  const inputs = {} as Record<keyof Counts, HTMLInputElement>;
  COUNT_FIELDS.forEach((field, index) => {
    const row = el(doc, 'label', 'count-row');
    row.appendChild(el(doc, 'span', undefined, COUNT_LABELS[field]));
    const input = el(doc, 'input');
    input.type = 'number';
    input.min = '0';
    input.step = '1';
    input.value = '0';
    input.name = field;
    input.tabIndex = index + 1;
    input.setAttribute('data-field', field);
    row.appendChild(input);
    form.appendChild(row);
    inputs[field] = input;
  });

  const problemsBox = el(doc, 'div', 'problems');
  problemsBox.setAttribute('data-role', 'problems');
  form.appendChild(problemsBox);

  const noticeBox = el(doc, 'div', 'notice');
  noticeBox.setAttribute('data-role', 'notice');
  form.appendChild(noticeBox);

  const submitButton = el(doc, 'button', 'submit', 'Submit and continue');
  submitButton.type = 'submit';
  submitButton.tabIndex = COUNT_FIELDS.length + 1;
  submitButton.setAttribute('data-role', 'submit');
  form.appendChild(submitButton);
  page.appendChild(form);
  root.appendChild(page);

  return {
    inputs,
    submitButton,
    problemsBox,
    noticeBox,
    readRaw: () => {
      const raw = {} as Record<keyof Counts, string>;
      for (const field of COUNT_FIELDS) raw[field] = inputs[field].value;
      return raw;
    },
  };
}

export function renderDone(doc: Document, root: HTMLElement, progress: Progress): void {
  root.textContent = '';
  const box = el(doc, 'div', 'done');
  box.setAttribute('data-role', 'done');
  box.appendChild(el(doc, 'h2', undefined, 'Queue complete'));
  box.appendChild(renderProgress(doc, progress));
  box.appendChild(el(doc, 'p', undefined, 'All assigned reports have been reviewed. Thank you.'));
  root.appendChild(box);
}

export function renderBlocked(doc: Document, root: HTMLElement, leaks: string[]): void {
  root.textContent = '';
  const box = el(doc, 'div', 'blocked');
  box.setAttribute('data-role', 'blocked');
  box.appendChild(el(doc, 'h2', undefined, 'Item withheld'));
  box.appendChild(
    el(
      doc,
      'p',
      undefined,
      `The server payload contained ${leaks.length} identifying term(s); ` +
        'rendering it would break the blind protocol. Contact the study coordinator.',
    ),
  );
  root.appendChild(box);
}

export function renderError(
  doc: Document,
  root: HTMLElement,
  message: string,
  onRetry: (() => void) | null,
): void {
  root.textContent = '';
  const box = el(doc, 'div', 'error');
  box.setAttribute('data-role', 'error');
  box.appendChild(el(doc, 'h2', undefined, 'Something went wrong'));
  box.appendChild(el(doc, 'p', undefined, message));
  if (onRetry) {
    const retry = el(doc, 'button', 'retry', 'Retry');
    retry.setAttribute('data-role', 'retry');
    retry.addEventListener('click', onRetry);
    box.appendChild(retry);
  }
  root.appendChild(box);
}
