import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

import { describe, expect, it } from 'vitest';

import { loadTrainingFile, parseTrainingPairs } from '../src/data.js';
import { DataFormatError } from '../src/errors.js';

const here = path.dirname(fileURLToPath(import.meta.url));
const warmupPath = path.join(here, 'fixtures', 'warmup10.jsonl');

describe('training file parsing', () => {
  it('loads the warm-up fixture exported by the primary pipeline', () => {
    const { pairs, sha256 } = loadTrainingFile(warmupPath);
    expect(pairs).toHaveLength(10);
    expect(pairs.every((p) => p.source === 'human')).toBe(true);
    expect(pairs[0].input).toContain('Output the reasoning chain.');
    expect(pairs[0].output).toContain('Status:');
    expect(sha256).toMatch(/^[0-9a-f]{64}$/);
  });

  it('rejects an empty file', () => {
    expect(() => parseTrainingPairs('')).toThrow(DataFormatError);
    expect(() => parseTrainingPairs('\n\n')).toThrow(DataFormatError);
  });

  it('rejects malformed JSON with the line number', () => {
    expect(() => parseTrainingPairs('{"id": "a"')).toThrow(/line 1/);
  });

  it('rejects missing keys and unknown sources', () => {
    const missing = JSON.stringify({ id: 'a', source: 'd1', input: 'x' });
    expect(() => parseTrainingPairs(missing)).toThrow(/output/);
    const unknown = JSON.stringify({ id: 'a', source: 'd3', input: 'x', output: 'y' });
    expect(() => parseTrainingPairs(unknown)).toThrow(/unknown source/);
  });

  it('keeps pair order and content byte-exact', () => {
    const lines = [
      { id: 'a', source: 'd1', input: 'in a', output: 'out a' },
      { id: 'b', source: 'human', input: 'in b', output: 'out b\nwith newline' },
    ];
    const pairs = parseTrainingPairs(lines.map((l) => JSON.stringify(l)).join('\n'));
    expect(pairs.map((p) => p.id)).toEqual(['a', 'b']);
    expect(pairs[1].output).toBe('out b\nwith newline');
  });
});
