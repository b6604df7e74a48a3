/**
 * Entry point: `train` fine-tunes an adapter on a training-pair file,
 * `serve` exposes a trained artifact over the chat-completion protocol.
 */

import * as path from 'node:path';

import { DataFormatError, OutOfMemoryError, PortInUseError } from './errors.js';
import { defaultSpec, loadModel, train } from './train.js';
import { serve } from './serve.js';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith('--') || value === undefined) {
      throw new DataFormatError(`malformed arguments near '${key ?? ''}'`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

function numberFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) throw new DataFormatError(`--${name} must be a number`);
  return value;
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === 'train') {
    const flags = parseFlags(rest);
    const dataPath = flags.get('data');
    const outDir = flags.get('out');
    if (!dataPath || !outDir) {
      throw new DataFormatError('train needs --data <pairs.jsonl> and --out <dir>');
    }
    const spec = defaultSpec({
      dataPath,
      outDir,
      baseModel: flags.get('base-model') ?? 'tinylm-base-v1',
      epochs: numberFlag(flags, 'epochs', 10),
      learningRate: numberFlag(flags, 'lr', 0.05),
      rank: numberFlag(flags, 'rank', 1),
      alpha: numberFlag(flags, 'alpha', 2),
      seed: numberFlag(flags, 'seed', 7),
    });
    const result = train(spec);
    console.log(JSON.stringify({ artifact: result.artifactPath, manifest: result.manifestPath }));
    console.error(
      `trainable fraction ${(result.manifest.trainable_fraction * 100).toFixed(4)}%`
    );
    return;
  }
  if (command === 'serve') {
    const flags = parseFlags(rest);
    const artifactDir = flags.get('artifact');
    if (!artifactDir) throw new DataFormatError('serve needs --artifact <dir>');
    const port = numberFlag(flags, 'port', 8350);
    const model = loadModel(path.join(artifactDir, 'adapter.json'));
    await serve(model, port, { maxConcurrent: numberFlag(flags, 'max-concurrent', 4) });
    console.error(`serving ${model.baseModel}+adapter on http://127.0.0.1:${port}`);
    return;
  }
  console.error('usage: cli.js train --data pairs.jsonl --out dir | cli.js serve --artifact dir');
  process.exitCode = 2;
}

main().catch((err) => {
  if (err instanceof DataFormatError) {
    console.error(`data error: ${err.message}`);
    process.exitCode = 2;
  } else if (err instanceof PortInUseError || err instanceof OutOfMemoryError) {
    console.error(`error: ${err.message}`);
    process.exitCode = 1;
  } else {
    console.error(err);
    process.exitCode = 1;
  }
});
