/** Seeded synthetic checkpoints shaped exactly like the public ones. */

import { buildSafetensors, parseSafetensors, TensorMap } from '../src/safetensors.js';
import { MODEL_TABLES, convEntries } from '../src/models.js';

/** mulberry32: tiny deterministic PRNG, good enough for fixtures */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianArray(n: number, sigma: number, rand: () => number): Float32Array {
  const out = new Float32Array(n);
  for (let i = 0; i < n; i += 2) {
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    const r = Math.sqrt(-2 * Math.log(u)) * sigma;
    out[i] = r * Math.cos(2 * Math.PI * v);
    if (i + 1 < n) out[i + 1] = r * Math.sin(2 * Math.PI * v);
  }
  return out;
}

export interface FixtureEntry {
  name: string;
  shape: number[];
  data: Float32Array;
}

/** Random weights with the exact tensor names and shapes of `modelId`. */
export function syntheticCheckpointEntries(modelId: string, seed = 1): FixtureEntry[] {
  const table = MODEL_TABLES[modelId];
  const rand = rng(seed);
  const entries: FixtureEntry[] = [];
  for (const conv of convEntries(table)) {
    const fanIn = conv.inChannels * conv.kernel * conv.kernel;
    const wShape = [conv.outChannels, conv.inChannels, conv.kernel, conv.kernel];
    const n = wShape.reduce((a, b) => a * b, 1);
    entries.push({
      name: `${conv.sourceKey}.weight`,
      shape: wShape,
      data: gaussianArray(n, 1.0 / Math.sqrt(fanIn), rand),
    });
    entries.push({
      name: `${conv.sourceKey}.bias`,
      shape: [conv.outChannels],
      data: gaussianArray(conv.outChannels, 0.05, rand),
    });
  }
  // a classifier head the exporter must silently drop
  entries.push({
    name: 'classifier.0.weight',
    shape: [10, 32],
    data: gaussianArray(320, 0.1, rand),
  });
  entries.push({ name: 'classifier.0.bias', shape: [10],
                 data: gaussianArray(10, 0.1, rand) });
  return entries;
}

export function syntheticCheckpoint(modelId: string, seed = 1): Buffer {
  return buildSafetensors(syntheticCheckpointEntries(modelId, seed));
}

export function parsedSyntheticCheckpoint(modelId: string, seed = 1): TensorMap {
  return parseSafetensors(syntheticCheckpoint(modelId, seed));
}
