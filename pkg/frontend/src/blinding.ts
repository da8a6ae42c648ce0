/** Client-side blinding guard.
 *
 * The review must stay blind even if the server misbehaves, so every
 * payload is scanned before anything reaches the DOM. Model names match as
 * case-insensitive substrings; method labels only as standalone tokens
 * (so the label "L" trips on " L " or "(L)" but not on "Lungs").
 */

import type { BlindingTerms } from './api.js';

function escapeRegExp(term: string): string {
  return term.replace(/[.*+?^${}()|[\]\\]/g, '\\$&');
}

function tokenPattern(label: string): RegExp {
  return new RegExp(`(^|[^A-Za-z0-9])${escapeRegExp(label)}([^A-Za-z0-9]|$)`);
}

export function findLeaks(payload: unknown, terms: BlindingTerms): string[] {
  const text = JSON.stringify(payload) ?? '';
  const lower = text.toLowerCase();
  const leaks: string[] = [];
  for (const name of terms.model_names) {
    if (lower.includes(name.toLowerCase())) leaks.push(name);
  }
  for (const label of terms.method_labels) {
    if (tokenPattern(label).test(text)) leaks.push(label);
  }
  return leaks;
}

export function scanRendered(html: string, terms: BlindingTerms): string[] {
  return findLeaks(html, terms);
}
