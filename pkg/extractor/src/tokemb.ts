/**
 * Binary .tokemb serialization, bit-compatible with the scoring engine:
 * magic "TOKEMB01", N as u64 LE, L and d as u32 LE, N*L*d float32 LE values
 * (image-major, token-major, dimension-minor), then one u32-length-prefixed
 * UTF-8 entry per image id.
 */

export const TOKEMB_MAGIC = 'TOKEMB01';

export interface TokenEmbeddingFile {
  tokensPerImage: number;
  dim: number;
  /** Flattened N*L*d values. */
  data: Float32Array;
  imageIds: string[];
}

export function encodeTokemb(file: TokenEmbeddingFile): Buffer {
  const { tokensPerImage: l, dim: d, data, imageIds } = file;
  const n = imageIds.length;
  if (n < 1 || l < 1 || d < 1) {
    throw new Error(`need N, L, d >= 1, got (${n}, ${l}, ${d})`);
  }
  if (data.length !== n * l * d) {
    throw new Error(`payload holds ${data.length} values, header claims ${n * l * d}`);
  }
  if (new Set(imageIds).size !== n) {
    throw new Error('image ids are not unique');
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new Error(`non-finite token value at flat index ${i}`);
    }
  }

  const header = Buffer.alloc(8 + 8 + 4 + 4);
  header.write(TOKEMB_MAGIC, 0, 'ascii');
  header.writeBigUInt64LE(BigInt(n), 8);
  header.writeUInt32LE(l, 16);
  header.writeUInt32LE(d, 20);

  const payload = Buffer.alloc(data.length * 4);
  for (let i = 0; i < data.length; i++) {
    payload.writeFloatLE(data[i], i * 4);
  }

  const idChunks: Buffer[] = [];
  for (const id of imageIds) {
    const raw = Buffer.from(id, 'utf-8');
    const len = Buffer.alloc(4);
    len.writeUInt32LE(raw.length, 0);
    idChunks.push(len, raw);
  }
  return Buffer.concat([header, payload, ...idChunks]);
}

export function decodeTokemb(buf: Buffer): TokenEmbeddingFile {
  if (buf.length < 24) {
    throw new Error(`stream too short for a header: ${buf.length} bytes`);
  }
  const magic = buf.subarray(0, 8).toString('ascii');
  if (magic !== TOKEMB_MAGIC) {
    throw new Error(`bad magic: expected ${TOKEMB_MAGIC}, got ${magic}`);
  }
  const n = Number(buf.readBigUInt64LE(8));
  const l = buf.readUInt32LE(16);
  const d = buf.readUInt32LE(20);
  const values = n * l * d;
  const payloadEnd = 24 + values * 4;
  if (buf.length < payloadEnd) {
    throw new Error(`token data truncated: expected ${values * 4} bytes, got ${buf.length - 24}`);
  }
  const data = new Float32Array(values);
  for (let i = 0; i < values; i++) {
    data[i] = buf.readFloatLE(24 + i * 4);
  }
  const imageIds: string[] = [];
  let offset = payloadEnd;
  for (let i = 0; i < n; i++) {
    if (offset + 4 > buf.length) {
      throw new Error(`id block truncated at image ${i}`);
    }
    const len = buf.readUInt32LE(offset);
    offset += 4;
    if (offset + len > buf.length) {
      throw new Error(`id of image ${i} truncated`);
    }
    imageIds.push(buf.subarray(offset, offset + len).toString('utf-8'));
    offset += len;
  }
  if (offset !== buf.length) {
    throw new Error('trailing bytes after image id block');
  }
  return { tokensPerImage: l, dim: d, data, imageIds };
}
