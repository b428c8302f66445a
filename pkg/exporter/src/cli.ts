#!/usr/bin/env node
/**
 * Usage:
 *   elfw-export <checkpoint.safetensors> --model vgg16|alexnet -o <outdir>
 *               [--name base] [--preprocess torchvision|caffe]
 *               [--mean a,b,c] [--std a,b,c]
 *
 * Writes <outdir>/<base>.elfw and <outdir>/<base>.arch (base defaults to the
 * model id). Exit codes: 0 success, 2 bad input or unsupported checkpoint.
 */

import { mkdirSync, readFileSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';
import { MODEL_TABLES } from './models.js';
import { Preprocess, TORCHVISION_DEFAULT, exportModel } from './export.js';
import { parseSafetensors } from './safetensors.js';

interface Args {
  checkpoint: string;
  model: string;
  outDir: string;
  name: string | null;
  preprocess: 'torchvision' | 'caffe';
  mean: number[] | null;
  std: number[] | null;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    checkpoint: '', model: '', outDir: '', name: null,
    preprocess: 'torchvision', mean: null, std: null,
  };
  const floats = (s: string) => s.split(',').map(Number);
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === '--model') args.model = argv[++i];
    else if (a === '-o' || a === '--out') args.outDir = argv[++i];
    else if (a === '--name') args.name = argv[++i];
    else if (a === '--preprocess') args.preprocess = argv[++i] as Args['preprocess'];
    else if (a === '--mean') args.mean = floats(argv[++i]);
    else if (a === '--std') args.std = floats(argv[++i]);
    else if (!a.startsWith('-') && !args.checkpoint) args.checkpoint = a;
    else throw new Error(`unknown argument ${a}`);
  }
  if (!args.checkpoint || !args.model || !args.outDir) {
    throw new Error('need <checkpoint.safetensors> --model <id> -o <outdir>');
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }

  const table = MODEL_TABLES[args.model];
  if (!table) {
    console.error(`error: unknown model ${args.model}; supported: ` +
                  Object.keys(MODEL_TABLES).join(', '));
    return 2;
  }

  let pre: Preprocess;
  if (args.preprocess === 'caffe') {
    pre = { mean: args.mean ?? [123.68, 116.779, 103.939], std: null };
  } else {
    pre = {
      mean: args.mean ?? TORCHVISION_DEFAULT.mean,
      std: args.std ?? TORCHVISION_DEFAULT.std,
    };
  }

  try {
    const tensors = parseSafetensors(readFileSync(args.checkpoint));
    const result = exportModel(tensors, table, pre);
    mkdirSync(args.outDir, { recursive: true });
    const base = args.name ?? table.id;
    const elfwPath = join(args.outDir, `${base}.elfw`);
    const archPath = join(args.outDir, `${base}.arch`);
    writeFileSync(elfwPath, result.elfw);
    writeFileSync(archPath, result.arch, 'utf-8');
    console.log(`${result.convCount} conv layers, channels ` +
                `${result.channels.join(' -> ')}`);
    console.log(`wrote ${elfwPath} (${result.elfw.length} bytes)`);
    console.log(`wrote ${archPath}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

const invokedDirectly = process.argv[1] &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
