import { describe, expect, it } from 'vitest';

import { AnnotationApi } from '../src/api.js';
import { AnnotationFlow } from '../src/flow.js';
import { parseCounts } from '../src/validation.js';
import { FakeService, freshRoot, setCountInputs } from './helpers.js';

const ZERO = {
  false_prediction: '0',
  omission: '0',
  wrong_location: '0',
  wrong_severity: '0',
  absent_comparison: '0',
};

describe('parseCounts', () => {
  it('accepts all zeros (no errors is a valid review)', () => {
    const { counts, problems } = parseCounts(ZERO);
    expect(problems).toEqual([]);
    expect(counts).toEqual({
      false_prediction: 0,
      omission: 0,
      wrong_location: 0,
      wrong_severity: 0,
      absent_comparison: 0,
    });
  });

  it('rejects negatives, non-integers, and blanks', () => {
    expect(parseCounts({ ...ZERO, omission: '-1' }).counts).toBeNull();
    expect(parseCounts({ ...ZERO, omission: '1.5' }).counts).toBeNull();
    expect(parseCounts({ ...ZERO, omission: 'two' }).counts).toBeNull();
    expect(parseCounts({ ...ZERO, omission: '' }).counts).toBeNull();
    const { problems } = parseCounts({ ...ZERO, omission: '-1', wrong_severity: 'x' });
    expect(problems).toHaveLength(2);
  });
});

describe('client-side validation in the flow', () => {
  async function startFlow() {
    const service = new FakeService();
    const root = freshRoot(document);
    const flow = new AnnotationFlow(
      new AnnotationApi('http://fake', service.fetch),
      'sess',
      'tester',
      root,
      document,
    );
    await flow.start();
    return { service, root, flow };
  }

  it('invalid counts are unsubmittable and surfaced', async () => {
    const { service, root, flow } = await startFlow();
    setCountInputs(root, { omission: '-3' });
    await flow.submit();
    expect(service.postCount).toBe(0);
    expect(root.querySelector('[data-role="problems"]')?.textContent).toContain('negative');
    setCountInputs(root, { omission: '2.5' });
    await flow.submit();
    expect(service.postCount).toBe(0);
    expect(root.querySelector('[data-role="problems"]')?.textContent).toContain('whole number');
  });

  it('zero counts submit successfully', async () => {
    const { service, flow } = await startFlow();
    await flow.submit();
    expect(service.postCount).toBe(1);
    expect(service.submissions[0]?.counts.false_prediction).toBe(0);
  });
});
