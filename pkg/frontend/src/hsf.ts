// One float32 matrix per file: "HSF1", three little-endian uint32
// (version, rows, cols), then rows*cols little-endian float32 row major.

import { endianness } from "node:os";
import { readFileSync, writeFileSync } from "node:fs";

export const HSF_MAGIC = "HSF1";
export const HSF_VERSION = 1;
export const HSF_HEADER_SIZE = 16;

export class HsfFormatError extends Error {}

export function encodeHsf(rows: number, cols: number, data: Float32Array): Buffer {
  if (rows < 1 || cols < 1) {
    throw new HsfFormatError(`matrix must be non-empty, got ${rows}x${cols}`);
  }
  if (data.length !== rows * cols) {
    throw new HsfFormatError(`payload length ${data.length} != ${rows}x${cols}`);
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new HsfFormatError(`non-finite value at index ${i}`);
    }
  }
  const buf = Buffer.alloc(HSF_HEADER_SIZE + 4 * data.length);
  buf.write(HSF_MAGIC, 0, "ascii");
  buf.writeUInt32LE(HSF_VERSION, 4);
  buf.writeUInt32LE(rows, 8);
  buf.writeUInt32LE(cols, 12);
  if (endianness() === "LE") {
    // typed arrays are platform endian; on LE a plain copy is the format
    buf.set(new Uint8Array(data.buffer, data.byteOffset, 4 * data.length), HSF_HEADER_SIZE);
  } else {
    for (let i = 0; i < data.length; i++) {
      buf.writeFloatLE(data[i], HSF_HEADER_SIZE + 4 * i);
    }
  }
  return buf;
}

export function writeHsf(path: string, rows: number, cols: number, data: Float32Array): void {
  writeFileSync(path, encodeHsf(rows, cols, data));
}

export function readHsf(path: string): { rows: number; cols: number; data: Float32Array } {
  const buf = readFileSync(path);
  if (buf.length < HSF_HEADER_SIZE) {
    throw new HsfFormatError(`${path}: ${buf.length} bytes, header needs ${HSF_HEADER_SIZE}`);
  }
  if (buf.toString("ascii", 0, 4) !== HSF_MAGIC) {
    throw new HsfFormatError(`${path}: bad magic`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== HSF_VERSION) {
    throw new HsfFormatError(`${path}: unsupported version ${version}`);
  }
  const rows = buf.readUInt32LE(8);
  const cols = buf.readUInt32LE(12);
  const expected = HSF_HEADER_SIZE + 4 * rows * cols;
  if (rows < 1 || cols < 1 || buf.length !== expected) {
    throw new HsfFormatError(`${path}: size ${buf.length} bytes, header implies ${expected}`);
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(HSF_HEADER_SIZE + 4 * i);
  }
  return { rows, cols, data };
}
