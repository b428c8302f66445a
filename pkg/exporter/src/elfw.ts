/**
 * ELFW v1 writer (and a reader for verification): the portable binary weight
 * archive the detection engine loads.
 *
 * Layout, little-endian: magic "ELFW", u32 version = 1, u32 tensor count;
 * per tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32, 1 = f64),
 * u8 ndim, u32 extents, then the payload row-major.
 */

export interface ElfwTensor {
  name: string;
  shape: number[];
  /** stored as f32 (dtype code 0); exports never need f64 payloads */
  data: Float32Array;
}

const MAGIC = Buffer.from('ELFW', 'ascii');
const VERSION = 1;

export function writeElfw(tensors: ElfwTensor[]): Buffer {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(12);
  MAGIC.copy(head, 0);
  head.writeUInt32LE(VERSION, 4);
  head.writeUInt32LE(tensors.length, 8);
  chunks.push(head);

  for (const { name, shape, data } of tensors) {
    const count = shape.reduce((a, b) => a * b, 1);
    if (count !== data.length) {
      throw new Error(`tensor ${name}: ${data.length} values for shape [${shape}]`);
    }
    const nameBuf = Buffer.from(name, 'utf-8');
    const meta = Buffer.alloc(2 + nameBuf.length + 2 + 4 * shape.length);
    let off = 0;
    meta.writeUInt16LE(nameBuf.length, off); off += 2;
    nameBuf.copy(meta, off); off += nameBuf.length;
    meta.writeUInt8(0, off); off += 1;            // dtype 0 = f32
    meta.writeUInt8(shape.length, off); off += 1;
    for (const d of shape) { meta.writeUInt32LE(d, off); off += 4; }
    chunks.push(meta);

    const payload = Buffer.alloc(4 * count);
    for (let i = 0; i < count; i++) payload.writeFloatLE(data[i], 4 * i);
    chunks.push(payload);
  }
  return Buffer.concat(chunks);
}

export function readElfw(buf: Buffer): ElfwTensor[] {
  let off = 0;
  const take = (n: number, what: string): Buffer => {
    if (off + n > buf.length) throw new Error(`truncated archive while reading ${what}`);
    const out = buf.subarray(off, off + n);
    off += n;
    return out;
  };
  if (!take(4, 'magic').equals(MAGIC)) throw new Error('bad magic, not an ELFW archive');
  const version = take(4, 'version').readUInt32LE(0);
  if (version !== VERSION) throw new Error(`unsupported ELFW version ${version}`);
  const count = take(4, 'count').readUInt32LE(0);

  const tensors: ElfwTensor[] = [];
  for (let t = 0; t < count; t++) {
    const nameLen = take(2, 'name length').readUInt16LE(0);
    const name = take(nameLen, 'name').toString('utf-8');
    const dtype = take(1, 'dtype').readUInt8(0);
    if (dtype !== 0 && dtype !== 1) throw new Error(`tensor ${name}: unknown dtype code ${dtype}`);
    const ndim = take(1, 'ndim').readUInt8(0);
    const shape: number[] = [];
    for (let i = 0; i < ndim; i++) shape.push(take(4, 'dims').readUInt32LE(0));
    const n = shape.reduce((a, b) => a * b, 1);
    const itemSize = dtype === 0 ? 4 : 8;
    const raw = take(n * itemSize, `payload of ${name}`);
    const data = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      data[i] = dtype === 0 ? raw.readFloatLE(4 * i) : raw.readDoubleLE(8 * i);
    }
    tensors.push({ name, shape, data });
  }
  return tensors;
}
