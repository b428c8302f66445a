/**
 * Layer tables for the supported sequential checkpoints, keyed by the
 * torchvision-style tensor names found in public safetensors files, plus
 * emission of the engine's architecture text format.
 */

export interface ConvEntry {
  /** name the engine's presets use */
  name: string;
  /** checkpoint key prefix, e.g. "features.0" */
  sourceKey: string;
  outChannels: number;
  inChannels: number;
  kernel: number;
  stride: number;
  pad: number;
}

export interface PoolEntry {
  name: string;
  k: number;
  stride: number;
}

export type ChainEntry =
  | { kind: 'conv'; conv: ConvEntry }
  | { kind: 'relu'; name: string }
  | { kind: 'maxpool'; pool: PoolEntry };

export interface ModelTable {
  id: string;
  inputChannels: number;
  chain: ChainEntry[];
}

function conv(name: string, sourceKey: string, outC: number, inC: number,
              k: number, stride: number, pad: number): ChainEntry {
  return {
    kind: 'conv',
    conv: { name, sourceKey, outChannels: outC, inChannels: inC, kernel: k, stride, pad },
  };
}
const relu = (name: string): ChainEntry => ({ kind: 'relu', name });
const pool = (name: string, k: number, stride: number): ChainEntry =>
  ({ kind: 'maxpool', pool: { name, k, stride } });

/** VGG-16 trunk: 13 convs in five blocks, channels 3 -> 64 ... -> 512. */
const VGG16: ModelTable = {
  id: 'vgg16',
  inputChannels: 3,
  chain: [
    conv('conv1_1', 'features.0', 64, 3, 3, 1, 1), relu('relu1_1'),
    conv('conv1_2', 'features.2', 64, 64, 3, 1, 1), relu('relu1_2'),
    pool('pool1', 2, 2),
    conv('conv2_1', 'features.5', 128, 64, 3, 1, 1), relu('relu2_1'),
    conv('conv2_2', 'features.7', 128, 128, 3, 1, 1), relu('relu2_2'),
    pool('pool2', 2, 2),
    conv('conv3_1', 'features.10', 256, 128, 3, 1, 1), relu('relu3_1'),
    conv('conv3_2', 'features.12', 256, 256, 3, 1, 1), relu('relu3_2'),
    conv('conv3_3', 'features.14', 256, 256, 3, 1, 1), relu('relu3_3'),
    pool('pool3', 2, 2),
    conv('conv4_1', 'features.17', 512, 256, 3, 1, 1), relu('relu4_1'),
    conv('conv4_2', 'features.19', 512, 512, 3, 1, 1), relu('relu4_2'),
    conv('conv4_3', 'features.21', 512, 512, 3, 1, 1), relu('relu4_3'),
    pool('pool4', 2, 2),
    conv('conv5_1', 'features.24', 512, 512, 3, 1, 1), relu('relu5_1'),
    conv('conv5_2', 'features.26', 512, 512, 3, 1, 1), relu('relu5_2'),
    conv('conv5_3', 'features.28', 512, 512, 3, 1, 1), relu('relu5_3'),
    pool('pool5', 2, 2),
  ],
};

/** AlexNet trunk: 5 convs, 3 pools. */
const ALEXNET: ModelTable = {
  id: 'alexnet',
  inputChannels: 3,
  chain: [
    conv('conv1', 'features.0', 64, 3, 11, 4, 2), relu('relu1'),
    pool('pool1', 3, 2),
    conv('conv2', 'features.3', 192, 64, 5, 1, 2), relu('relu2'),
    pool('pool2', 3, 2),
    conv('conv3', 'features.6', 384, 192, 3, 1, 1), relu('relu3'),
    conv('conv4', 'features.8', 256, 384, 3, 1, 1), relu('relu4'),
    conv('conv5', 'features.10', 256, 256, 3, 1, 1), relu('relu5'),
    pool('pool5', 3, 2),
  ],
};

export const MODEL_TABLES: Record<string, ModelTable> = {
  vgg16: VGG16,
  alexnet: ALEXNET,
};

export function convEntries(table: ModelTable): ConvEntry[] {
  return table.chain.flatMap((e) => (e.kind === 'conv' ? [e.conv] : []));
}

/** Architecture text the engine parses, with the recorded preprocessing. */
export function formatArch(table: ModelTable, mean255: number[]): string {
  const lines = [
    `# ${table.id} trunk exported from a pretrained checkpoint; fully-connected head dropped.`,
    `input_channels ${table.inputChannels}`,
    `mean ${mean255.map((v) => String(v)).join(' ')}`,
    'scale 1.0',
  ];
  for (const entry of table.chain) {
    if (entry.kind === 'conv') {
      const c = entry.conv;
      lines.push(`${c.name} conv ${c.outChannels} ${c.kernel} ${c.kernel} ${c.stride} ${c.pad}`);
    } else if (entry.kind === 'relu') {
      lines.push(`${entry.name} relu`);
    } else {
      lines.push(`${entry.pool.name} maxpool ${entry.pool.k} ${entry.pool.stride}`);
    }
  }
  return lines.join('\n') + '\n';
}
