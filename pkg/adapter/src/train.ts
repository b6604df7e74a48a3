/**
 * Supervised fine-tuning of the adapter on a training-pair file.
 *
 * Each pair becomes one character sequence (tail of the prompt, a
 * separator, the target chain, EOS); the loss is taken on the completion
 * side only. Base weights never change: the optimizer state covers just
 * the adapter matrices. The artifact directory holds adapter.json (the
 * trained deltas plus dims) and manifest.json (data hash, config echo,
 * per-epoch loss, parameter accounting).
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { loadTrainingFile, TrainingPair } from './data.js';
import { DataFormatError } from './errors.js';
import {
  Adapter,
  adapterParameterCount,
  baseParameterCount,
  CTX,
  encode,
  EOS,
  HIDDEN,
  initAdapter,
  rng,
  TinyLm,
  VOCAB,
} from './model.js';

export interface TrainSpec {
  baseModel: string;
  dataPath: string;
  outDir: string;
  epochs: number;
  learningRate: number;
  rank: number;
  alpha: number;
  seed: number;
  maxPromptChars: number;
  maxOutputChars: number;
}

export const WARMUP_EPOCHS = 10;
export const FINAL_EPOCHS = 2;

export function defaultSpec(overrides: Partial<TrainSpec> = {}): TrainSpec {
  return {
    baseModel: 'tinylm-base-v1',
    dataPath: '',
    outDir: '',
    epochs: WARMUP_EPOCHS,
    learningRate: 0.05,
    rank: 1,
    alpha: 2,
    seed: 7,
    maxPromptChars: 64,
    maxOutputChars: 192,
    ...overrides,
  };
}

export interface Manifest {
  base_model: string;
  data_path: string;
  data_sha256: string;
  pairs: number;
  epochs: number;
  learning_rate: number;
  rank: number;
  alpha: number;
  seed: number;
  total_params: number;
  trainable_params: number;
  trainable_fraction: number;
  loss_per_epoch: number[];
}

interface Sample {
  codes: number[]; // full sequence, EOS-terminated
  lossFrom: number; // first position whose TARGET contributes to the loss
}

function buildSamples(pairs: TrainingPair[], spec: TrainSpec): Sample[] {
  return pairs.map((pair) => {
    const promptTail = pair.input.slice(-spec.maxPromptChars);
    const completion = pair.output.slice(0, spec.maxOutputChars);
    const promptCodes = encode(promptTail + '\n');
    const codes = [...promptCodes, ...encode(completion), EOS];
    return { codes, lossFrom: promptCodes.length };
  });
}

function contextAt(codes: number[], position: number): number[] {
  const context: number[] = [];
  for (let i = position - CTX; i < position; i++) {
    context.push(i >= 0 ? codes[i] : EOS);
  }
  return context;
}

class Adam {
  private readonly m: Float32Array;
  private readonly v: Float32Array;
  private step = 0;

  constructor(size: number, private readonly lr: number) {
    this.m = new Float32Array(size);
    this.v = new Float32Array(size);
  }

  apply(params: Float32Array, grads: Float32Array): void {
    this.step += 1;
    const beta1 = 0.9;
    const beta2 = 0.999;
    const correction1 = 1 - Math.pow(beta1, this.step);
    const correction2 = 1 - Math.pow(beta2, this.step);
    for (let i = 0; i < params.length; i++) {
      this.m[i] = beta1 * this.m[i] + (1 - beta1) * grads[i];
      this.v[i] = beta2 * this.v[i] + (1 - beta2) * grads[i] * grads[i];
      const mHat = this.m[i] / correction1;
      const vHat = this.v[i] / correction2;
      params[i] -= (this.lr * mHat) / (Math.sqrt(vHat) + 1e-8);
    }
  }
}

export interface TrainResult {
  manifest: Manifest;
  artifactPath: string;
  manifestPath: string;
}

export function train(spec: TrainSpec, log: (line: string) => void = console.error): TrainResult {
  if (spec.epochs < 1) throw new DataFormatError('epochs must be >= 1');
  const { pairs, sha256 } = loadTrainingFile(spec.dataPath);
  const samples = buildSamples(pairs, spec);

  const adapter = initAdapter(spec.rank, spec.alpha, spec.seed);
  const model = new TinyLm(spec.baseModel, adapter);
  const optimA = new Adam(adapter.a.length, spec.learningRate);
  const optimB = new Adam(adapter.b.length, spec.learningRate);
  const gradA = new Float32Array(adapter.a.length);
  const gradB = new Float32Array(adapter.b.length);
  const shuffle = rng(spec.seed ^ 0x2545f491);

  const lossPerEpoch: number[] = [];
  const order = samples.map((_, i) => i);
  for (let epoch = 1; epoch <= spec.epochs; epoch++) {
    // Fisher-Yates with the run's own RNG keeps epochs deterministic.
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(shuffle() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let total = 0;
    let count = 0;
    for (const index of order) {
      const sample = samples[index];
      gradA.fill(0);
      gradB.fill(0);
      let sampleLoss = 0;
      let steps = 0;
      for (let pos = sample.lossFrom; pos < sample.codes.length; pos++) {
        sampleLoss += model.lossAndGrads(
          contextAt(sample.codes, pos),
          sample.codes[pos],
          gradA,
          gradB
        );
        steps += 1;
      }
      if (steps > 0) {
        for (let i = 0; i < gradA.length; i++) gradA[i] /= steps;
        for (let i = 0; i < gradB.length; i++) gradB[i] /= steps;
        optimA.apply(adapter.a, gradA);
        optimB.apply(adapter.b, gradB);
        total += sampleLoss / steps;
        count += 1;
      }
    }
    const epochLoss = total / count;
    lossPerEpoch.push(epochLoss);
    log(`epoch ${epoch}/${spec.epochs} loss ${epochLoss.toFixed(4)}`);
  }

  const totalParams = baseParameterCount() + adapterParameterCount(spec.rank);
  const manifest: Manifest = {
    base_model: spec.baseModel,
    data_path: spec.dataPath,
    data_sha256: sha256,
    pairs: pairs.length,
    epochs: spec.epochs,
    learning_rate: spec.learningRate,
    rank: spec.rank,
    alpha: spec.alpha,
    seed: spec.seed,
    total_params: totalParams,
    trainable_params: adapterParameterCount(spec.rank),
    trainable_fraction: adapterParameterCount(spec.rank) / totalParams,
    loss_per_epoch: lossPerEpoch,
  };

  fs.mkdirSync(spec.outDir, { recursive: true });
  const artifactPath = path.join(spec.outDir, 'adapter.json');
  const manifestPath = path.join(spec.outDir, 'manifest.json');
  fs.writeFileSync(artifactPath, JSON.stringify(serializeAdapter(spec.baseModel, adapter)));
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
  return { manifest, artifactPath, manifestPath };
}

interface AdapterArtifact {
  format: 'verichain-adapter-v1';
  base_model: string;
  vocab: number;
  hidden: number;
  rank: number;
  alpha: number;
  a: number[];
  b: number[];
}

function serializeAdapter(baseModel: string, adapter: Adapter): AdapterArtifact {
  return {
    format: 'verichain-adapter-v1',
    base_model: baseModel,
    vocab: VOCAB,
    hidden: HIDDEN,
    rank: adapter.rank,
    alpha: adapter.alpha,
    a: Array.from(adapter.a),
    b: Array.from(adapter.b),
  };
}

export function loadModel(artifactPath: string): TinyLm {
  const raw = JSON.parse(fs.readFileSync(artifactPath, 'utf-8')) as AdapterArtifact;
  if (raw.format !== 'verichain-adapter-v1') {
    throw new DataFormatError(`unsupported artifact format: ${raw.format}`);
  }
  if (raw.vocab !== VOCAB || raw.hidden !== HIDDEN) {
    throw new DataFormatError('artifact dims do not match this build');
  }
  const adapter: Adapter = {
    rank: raw.rank,
    alpha: raw.alpha,
    a: Float32Array.from(raw.a),
    b: Float32Array.from(raw.b),
  };
  return new TinyLm(raw.base_model, adapter);
}
