/**
 * Checkpoint -> ELFW conversion.
 *
 * Reads a safetensors checkpoint of a supported sequential model, validates
 * every conv tensor against the layer table, folds the source framework's
 * input normalisation into the first convolution, and emits the ELFW archive
 * (f32) together with the architecture text the engine parses.
 *
 * Normalisation folding: frameworks that feed (x/255 - mean) / std into the
 * first conv are reproduced exactly by an engine that computes x - 255*mean,
 * provided the first conv's weights are divided by 255*std per input
 * channel. The fold keeps one forward pass bit-comparable to the source up
 * to f32 rounding. Checkpoints that already subtract a 0..255 mean (and use
 * no std) export with 'caffe' preprocessing and untouched weights.
 */

import { ConvEntry, ModelTable, convEntries, formatArch } from './models.js';
import { ElfwTensor, writeElfw } from './elfw.js';
import { TensorMap } from './safetensors.js';

export interface Preprocess {
  /** per-channel mean, 0..1 scale for 'torchvision', 0..255 for 'caffe' */
  mean: number[];
  /** per-channel std on 0..1 scale; null disables folding */
  std: number[] | null;
}

export const TORCHVISION_DEFAULT: Preprocess = {
  mean: [0.485, 0.456, 0.406],
  std: [0.229, 0.224, 0.225],
};

export interface ExportResult {
  elfw: Buffer;
  arch: string;
  convCount: number;
  /** channel chain through the conv trunk, starting at the input */
  channels: number[];
}

export class UnsupportedLayerError extends Error {}
export class CheckpointShapeError extends Error {}

function expectTensor(tensors: TensorMap, key: string, shape: number[]): Float64Array {
  const rec = tensors.get(key);
  if (!rec) {
    throw new CheckpointShapeError(`checkpoint is missing tensor ${key} [${shape}]`);
  }
  const same = rec.shape.length === shape.length
    && rec.shape.every((d, i) => d === shape[i]);
  if (!same) {
    throw new CheckpointShapeError(
      `tensor ${key}: checkpoint shape [${rec.shape}] does not match the ` +
      `${shape.length === 1 ? 'bias' : 'weight'} table shape [${shape}]`);
  }
  return rec.data;
}

/** Trunk keys not claimed by the table mean an architecture we cannot map. */
function rejectUnknownTrunkLayers(tensors: TensorMap, table: ModelTable): void {
  const claimed = new Set(convEntries(table).map((c) => c.sourceKey));
  const offenders = new Set<string>();
  for (const key of tensors.keys()) {
    const m = key.match(/^(features\.\d+)\./);
    if (m && !claimed.has(m[1])) offenders.add(m[1]);
  }
  if (offenders.size > 0) {
    throw new UnsupportedLayerError(
      `unsupported trunk layer(s): ${[...offenders].sort().join(', ')} ` +
      `(only the ${table.id} conv/relu/maxpool chain is exportable)`);
  }
}

function foldedConvWeights(conv: ConvEntry, weights: Float64Array,
                           std: number[] | null): Float32Array {
  const out = new Float32Array(weights.length);
  if (std === null) {
    for (let i = 0; i < weights.length; i++) out[i] = weights[i];
    return out;
  }
  const { outChannels, inChannels, kernel } = conv;
  const perChannel = kernel * kernel;
  let i = 0;
  for (let o = 0; o < outChannels; o++) {
    for (let c = 0; c < inChannels; c++) {
      const scale = 1.0 / (255.0 * std[c]);
      for (let k = 0; k < perChannel; k++, i++) out[i] = weights[i] * scale;
    }
  }
  return out;
}

export function exportModel(tensors: TensorMap, table: ModelTable,
                            pre: Preprocess = TORCHVISION_DEFAULT): ExportResult {
  if (pre.mean.length !== table.inputChannels
      || (pre.std !== null && pre.std.length !== table.inputChannels)) {
    throw new CheckpointShapeError(
      `preprocessing expects ${table.inputChannels} channel values`);
  }
  rejectUnknownTrunkLayers(tensors, table);

  const convs = convEntries(table);
  const out: ElfwTensor[] = [];
  const channels = [table.inputChannels];
  convs.forEach((conv, idx) => {
    const wShape = [conv.outChannels, conv.inChannels, conv.kernel, conv.kernel];
    const w = expectTensor(tensors, `${conv.sourceKey}.weight`, wShape);
    const b = expectTensor(tensors, `${conv.sourceKey}.bias`, [conv.outChannels]);
    const folded = idx === 0 ? foldedConvWeights(conv, w, pre.std)
                             : Float32Array.from(w);
    out.push({ name: `${conv.name}.weight`, shape: wShape, data: folded });
    out.push({ name: `${conv.name}.bias`, shape: [conv.outChannels],
               data: Float32Array.from(b) });
    channels.push(conv.outChannels);
  });

  const mean255 = pre.std === null ? pre.mean : pre.mean.map((m) => 255.0 * m);
  return {
    elfw: writeElfw(out),
    arch: formatArch(table, mean255),
    convCount: convs.length,
    channels,
  };
}
