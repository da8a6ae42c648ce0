/** Count-entry validation: five fields, each a non-negative integer. */

import { COUNT_FIELDS, type Counts } from './api.js';

export interface CountReading {
  counts: Counts | null;
  problems: string[];
}

export function parseCounts(raw: Record<keyof Counts, string>): CountReading {
  const problems: string[] = [];
  const values: Partial<Counts> = {};
  for (const field of COUNT_FIELDS) {
    const text = raw[field].trim();
    if (text === '') {
      problems.push(`${field}: required (enter 0 if none)`);
      continue;
    }
    const value = Number(text);
    if (!Number.isInteger(value)) {
      problems.push(`${field}: must be a whole number`);
    } else if (value < 0) {
      problems.push(`${field}: must not be negative`);
    } else {
      values[field] = value;
    }
  }
  if (problems.length > 0) return { counts: null, problems };
  return { counts: values as Counts, problems: [] };
}
