/**
 * Minimal safetensors reader: little-endian u64 header length, a JSON header
 * mapping tensor names to {dtype, shape, data_offsets}, then the raw data
 * section. Only F32 and F64 payloads are needed here.
 */

export interface TensorRecord {
  dtype: 'F32' | 'F64';
  shape: number[];
  /** values widened to f64 for lossless downstream arithmetic */
  data: Float64Array;
}

export type TensorMap = Map<string, TensorRecord>;

const DTYPE_BYTES: Record<string, number> = { F32: 4, F64: 8 };

export function parseSafetensors(buf: Buffer): TensorMap {
  if (buf.length < 8) {
    throw new Error('safetensors: file shorter than the header length field');
  }
  const headerLen = Number(buf.readBigUInt64LE(0));
  if (8 + headerLen > buf.length) {
    throw new Error('safetensors: truncated header');
  }
  const header = JSON.parse(buf.subarray(8, 8 + headerLen).toString('utf-8'));
  const dataStart = 8 + headerLen;
  const tensors: TensorMap = new Map();

  for (const [name, info] of Object.entries<any>(header)) {
    if (name === '__metadata__') continue;
    const { dtype, shape, data_offsets: offsets } = info;
    if (!(dtype in DTYPE_BYTES)) {
      throw new Error(`safetensors: tensor ${name} has unsupported dtype ${dtype}`);
    }
    const [start, end] = offsets;
    const count = shape.reduce((a: number, b: number) => a * b, 1);
    if (end - start !== count * DTYPE_BYTES[dtype]) {
      throw new Error(`safetensors: tensor ${name} byte span does not match its shape`);
    }
    if (dataStart + end > buf.length) {
      throw new Error(`safetensors: tensor ${name} payload is truncated`);
    }
    const raw = buf.subarray(dataStart + start, dataStart + end);
    const data = new Float64Array(count);
    if (dtype === 'F32') {
      for (let i = 0; i < count; i++) data[i] = raw.readFloatLE(i * 4);
    } else {
      for (let i = 0; i < count; i++) data[i] = raw.readDoubleLE(i * 8);
    }
    tensors.set(name, { dtype: dtype as 'F32' | 'F64', shape, data });
  }
  return tensors;
}

/** Serialise tensors into a safetensors buffer (test fixtures, round-trips). */
export function buildSafetensors(
  entries: Array<{ name: string; shape: number[]; data: Float32Array }>,
): Buffer {
  const header: Record<string, unknown> = {};
  let offset = 0;
  const chunks: Buffer[] = [];
  for (const { name, shape, data } of entries) {
    const bytes = Buffer.from(data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength));
    header[name] = {
      dtype: 'F32',
      shape,
      data_offsets: [offset, offset + bytes.length],
    };
    offset += bytes.length;
    chunks.push(bytes);
  }
  const headerBuf = Buffer.from(JSON.stringify(header), 'utf-8');
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(headerBuf.length));
  return Buffer.concat([lenBuf, headerBuf, ...chunks]);
}
