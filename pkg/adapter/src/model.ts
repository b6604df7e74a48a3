/**
 * A small character-level language model with LoRA-style adapters.
 *
 * The base network (embedding, hidden projection, output projection) is
 * generated deterministically from the base-model identifier and stays
 * frozen; training only updates a rank-r delta on the output projection,
 * so the trainable-parameter fraction sits around 0.1% of the model.
 * Artifacts therefore store just the adapter matrices plus the dims
 * needed to regenerate the base.
 *
 * Layout per step, with a fixed context window of CTX characters:
 *
 *   x      = concat(E[c] for c in context)            (CTX*DIM)
 *   h      = relu(W1 x + b1)                          (HIDDEN)
 *   logits = W2 h + b2 + (alpha/r) * B (A h)          (VOCAB)
 *
 * Only A and B receive gradients; backpropagation stops at h because
 * nothing upstream is trainable.
 */

import { OutOfMemoryError } from './errors.js';

export const VOCAB = 97; // EOS + newline + printable ASCII 32..126
export const DIM = 128;
export const CTX = 16;
export const HIDDEN = 128;

export const EOS = 0;
const NEWLINE = 1;
const PRINTABLE_START = 32;

export function encodeChar(ch: string): number {
  const code = ch.charCodeAt(0);
  if (ch === '\n') return NEWLINE;
  if (code >= PRINTABLE_START && code <= 126) return code - PRINTABLE_START + 2;
  return ' '.charCodeAt(0) - PRINTABLE_START + 2; // anything exotic maps to space
}

export function decodeChar(code: number): string {
  if (code === EOS) return '';
  if (code === NEWLINE) return '\n';
  return String.fromCharCode(code - 2 + PRINTABLE_START);
}

export function encode(text: string): number[] {
  return Array.from(text, encodeChar);
}

/** Deterministic 32-bit PRNG (mulberry32). */
export function rng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

function alloc(size: number): Float32Array {
  try {
    return new Float32Array(size);
  } catch (err) {
    throw new OutOfMemoryError(
      `cannot allocate ${size} floats; shrink the model dims or free memory (${err})`
    );
  }
}

function fillUniform(arr: Float32Array, scale: number, next: () => number): void {
  for (let i = 0; i < arr.length; i++) arr[i] = (next() * 2 - 1) * scale;
}

export interface BaseWeights {
  embed: Float32Array; // VOCAB x DIM
  w1: Float32Array; // HIDDEN x (CTX*DIM)
  b1: Float32Array; // HIDDEN
  w2: Float32Array; // VOCAB x HIDDEN
  b2: Float32Array; // VOCAB
}

export function baseParameterCount(): number {
  return VOCAB * DIM + HIDDEN * CTX * DIM + HIDDEN + VOCAB * HIDDEN + VOCAB;
}

export function adapterParameterCount(rank: number): number {
  return rank * HIDDEN + VOCAB * rank;
}

/** Regenerate the frozen base network from its identifier. */
export function buildBase(baseModel: string): BaseWeights {
  const next = rng(fnv1a(baseModel));
  const embed = alloc(VOCAB * DIM);
  const w1 = alloc(HIDDEN * CTX * DIM);
  const b1 = alloc(HIDDEN);
  const w2 = alloc(VOCAB * HIDDEN);
  const b2 = alloc(VOCAB);
  fillUniform(embed, 0.1, next);
  fillUniform(w1, Math.sqrt(2 / (CTX * DIM)), next);
  fillUniform(b1, 0.01, next);
  fillUniform(w2, Math.sqrt(1 / HIDDEN), next);
  fillUniform(b2, 0.01, next);
  return { embed, w1, b1, w2, b2 };
}

export interface Adapter {
  rank: number;
  alpha: number;
  a: Float32Array; // rank x HIDDEN
  b: Float32Array; // VOCAB x rank
}

export function initAdapter(rank: number, alpha: number, seed: number): Adapter {
  const next = rng(seed ^ 0x5f3759df);
  const a = alloc(rank * HIDDEN);
  const b = alloc(VOCAB * rank); // zero: the adapter starts as a no-op
  fillUniform(a, 0.05, next);
  return { rank, alpha, a, b };
}

export class TinyLm {
  readonly baseModel: string;
  readonly base: BaseWeights;
  readonly adapter: Adapter;

  private readonly x = new Float32Array(CTX * DIM);
  private readonly h = new Float32Array(HIDDEN);
  private readonly ah: Float32Array;
  private readonly logits = new Float32Array(VOCAB);
  private readonly probs = new Float32Array(VOCAB);

  constructor(baseModel: string, adapter: Adapter) {
    this.baseModel = baseModel;
    this.base = buildBase(baseModel);
    this.adapter = adapter;
    this.ah = new Float32Array(adapter.rank);
  }

  /** Forward pass over a CTX-length context (codes, EOS-padded on the left). */
  forward(context: number[]): Float32Array {
    const { embed, w1, b1, w2, b2 } = this.base;
    const { rank, alpha, a, b } = this.adapter;
    const x = this.x;
    for (let i = 0; i < CTX; i++) {
      const offset = context[i] * DIM;
      x.set(embed.subarray(offset, offset + DIM), i * DIM);
    }
    const h = this.h;
    const inDim = CTX * DIM;
    for (let j = 0; j < HIDDEN; j++) {
      let sum = b1[j];
      const row = j * inDim;
      for (let k = 0; k < inDim; k++) sum += w1[row + k] * x[k];
      h[j] = sum > 0 ? sum : 0;
    }
    const ah = this.ah;
    for (let r = 0; r < rank; r++) {
      let sum = 0;
      const row = r * HIDDEN;
      for (let j = 0; j < HIDDEN; j++) sum += a[row + j] * h[j];
      ah[r] = sum;
    }
    const scale = alpha / rank;
    const logits = this.logits;
    for (let v = 0; v < VOCAB; v++) {
      let sum = b2[v];
      const row = v * HIDDEN;
      for (let j = 0; j < HIDDEN; j++) sum += w2[row + j] * h[j];
      const brow = v * rank;
      for (let r = 0; r < rank; r++) sum += scale * b[brow + r] * ah[r];
      logits[v] = sum;
    }
    return logits;
  }

  softmax(temperature = 1.0): Float32Array {
    const logits = this.logits;
    const probs = this.probs;
    const t = Math.max(temperature, 1e-6);
    let max = -Infinity;
    for (let v = 0; v < VOCAB; v++) max = Math.max(max, logits[v] / t);
    let total = 0;
    for (let v = 0; v < VOCAB; v++) {
      probs[v] = Math.exp(logits[v] / t - max);
      total += probs[v];
    }
    for (let v = 0; v < VOCAB; v++) probs[v] /= total;
    return probs;
  }

  /**
   * Cross-entropy loss and adapter gradients for one (context, target)
   * step. Gradients accumulate into the provided buffers.
   */
  lossAndGrads(
    context: number[],
    target: number,
    gradA: Float32Array,
    gradB: Float32Array
  ): number {
    this.forward(context);
    const probs = this.softmax(1.0);
    const { rank, alpha, a, b } = this.adapter;
    const scale = alpha / rank;
    const h = this.h;
    const ah = this.ah;

    // dlogits = probs - onehot(target); dB = scale * dlogits (x) ah
    for (let v = 0; v < VOCAB; v++) {
      const d = probs[v] - (v === target ? 1 : 0);
      const brow = v * rank;
      for (let r = 0; r < rank; r++) gradB[brow + r] += scale * d * ah[r];
    }
    // dA = scale * (B^T dlogits) (x) h
    for (let r = 0; r < rank; r++) {
      let bd = 0;
      for (let v = 0; v < VOCAB; v++) bd += b[v * rank + r] * (probs[v] - (v === target ? 1 : 0));
      const arow = r * HIDDEN;
      const factor = scale * bd;
      for (let j = 0; j < HIDDEN; j++) gradA[arow + j] += factor * h[j];
    }
    return -Math.log(Math.max(probs[target], 1e-12));
  }

  /**
   * Generate up to maxTokens characters for a prompt. Sampling is seeded
   * by the prompt text, so identical prompts give identical output.
   */
  generate(prompt: string, maxTokens: number, temperature: number): {
    text: string;
    finishReason: 'stop' | 'length';
  } {
    const context = encode(prompt).slice(-CTX);
    while (context.length < CTX) context.unshift(EOS);
    const next = rng(fnv1a(prompt) ^ 0x9e3779b9);
    const out: string[] = [];
    for (let step = 0; step < maxTokens; step++) {
      this.forward(context);
      let chosen: number;
      if (temperature < 0.05) {
        const logits = this.logits;
        chosen = 0;
        for (let v = 1; v < VOCAB; v++) if (logits[v] > logits[chosen]) chosen = v;
      } else {
        const probs = this.softmax(temperature);
        let roll = next();
        chosen = VOCAB - 1;
        for (let v = 0; v < VOCAB; v++) {
          roll -= probs[v];
          if (roll <= 0) {
            chosen = v;
            break;
          }
        }
      }
      if (chosen === EOS) {
        return { text: out.join(''), finishReason: 'stop' };
      }
      out.push(decodeChar(chosen));
      context.shift();
      context.push(chosen);
    }
    return { text: out.join(''), finishReason: 'length' };
  }
}
