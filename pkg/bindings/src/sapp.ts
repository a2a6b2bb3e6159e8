/**
 * Reader/writer for the little-endian "SAPP" tensor container.
 *
 * 24-byte header (magic, version, C, T, F, dtype code 1 = float32) followed
 * by the row-major float32 payload; bit-identical across platforms.
 */

import type { Dims } from "./masking.js";

export const SAPP_MAGIC = "SAPP";
export const SAPP_VERSION = 1;
export const SAPP_DTYPE_F32 = 1;
export const HEADER_SIZE = 24;

export interface SappTensor {
  dims: Dims;
  data: Float32Array;
}

export function encodeSapp(dims: Dims, data: Float32Array): Buffer {
  const length = dims.c * dims.t * dims.f;
  if (data.length !== length) {
    throw new RangeError(`payload has ${data.length} floats, dims need ${length}`);
  }
  const buf = Buffer.alloc(HEADER_SIZE + length * 4);
  buf.write(SAPP_MAGIC, 0, "ascii");
  buf.writeUInt32LE(SAPP_VERSION, 4);
  buf.writeUInt32LE(dims.c, 8);
  buf.writeUInt32LE(dims.t, 12);
  buf.writeUInt32LE(dims.f, 16);
  buf.writeUInt32LE(SAPP_DTYPE_F32, 20);
  for (let i = 0; i < length; i++) {
    buf.writeFloatLE(data[i], HEADER_SIZE + i * 4);
  }
  return buf;
}

export function decodeSapp(raw: Buffer): SappTensor {
  if (raw.length < HEADER_SIZE) {
    throw new RangeError(`truncated header at offset ${raw.length}`);
  }
  if (raw.toString("ascii", 0, 4) !== SAPP_MAGIC) {
    throw new RangeError("bad magic at offset 0");
  }
  if (raw.readUInt32LE(4) !== SAPP_VERSION) {
    throw new RangeError(`unsupported version ${raw.readUInt32LE(4)} at offset 4`);
  }
  const dims: Dims = { c: raw.readUInt32LE(8), t: raw.readUInt32LE(12), f: raw.readUInt32LE(16) };
  if (raw.readUInt32LE(20) !== SAPP_DTYPE_F32) {
    throw new RangeError(`unsupported dtype code ${raw.readUInt32LE(20)} at offset 20`);
  }
  const length = dims.c * dims.t * dims.f;
  if (raw.length !== HEADER_SIZE + length * 4) {
    throw new RangeError(
      `truncated payload at offset ${HEADER_SIZE}: expected ${length * 4} bytes, got ${raw.length - HEADER_SIZE}`,
    );
  }
  const data = new Float32Array(length);
  for (let i = 0; i < length; i++) {
    data[i] = raw.readFloatLE(HEADER_SIZE + i * 4);
  }
  return { dims, data };
}
