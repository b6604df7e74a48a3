/**
 * Loader for the primary pipeline's training-pair files: one JSON object
 * per line with id / source / input / output, where source is one of
 * "human", "d1", "d2". The file is hashed as raw bytes so the manifest's
 * data hash is reproducible bit for bit.
 */

import { createHash } from 'node:crypto';
import * as fs from 'node:fs';

import { DataFormatError } from './errors.js';

export type PairSource = 'human' | 'd1' | 'd2';

export interface TrainingPair {
  id: string;
  source: PairSource;
  input: string;
  output: string;
}

const SOURCES = new Set<string>(['human', 'd1', 'd2']);

export function parseTrainingPairs(content: string): TrainingPair[] {
  const pairs: TrainingPair[] = [];
  const lines = content.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let data: unknown;
    try {
      data = JSON.parse(line);
    } catch {
      throw new DataFormatError(`line ${i + 1}: invalid JSON`);
    }
    const record = data as Record<string, unknown>;
    for (const key of ['id', 'source', 'input', 'output']) {
      if (typeof record[key] !== 'string') {
        throw new DataFormatError(`line ${i + 1}: missing or non-string '${key}'`);
      }
    }
    if (!SOURCES.has(record.source as string)) {
      throw new DataFormatError(`line ${i + 1}: unknown source '${record.source}'`);
    }
    pairs.push({
      id: record.id as string,
      source: record.source as PairSource,
      input: record.input as string,
      output: record.output as string,
    });
  }
  if (pairs.length === 0) {
    throw new DataFormatError('training file holds no pairs');
  }
  return pairs;
}

export function loadTrainingFile(path: string): { pairs: TrainingPair[]; sha256: string } {
  const raw = fs.readFileSync(path);
  const pairs = parseTrainingPairs(raw.toString('utf-8'));
  const sha256 = createHash('sha256').update(raw).digest('hex');
  return { pairs, sha256 };
}
