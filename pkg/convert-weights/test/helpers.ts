/** Shared test fixtures: an in-memory safetensors writer and temp dirs. */

import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export interface FixtureTensor {
  dtype: 'F32' | 'F16';
  shape: number[];
  /** raw little-endian payload at the stated dtype */
  data: Buffer;
}

export function tempDir(prefix = 'convert-weights-'): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeSafetensors(path: string, tensors: Record<string, FixtureTensor>): void {
  const header: Record<string, unknown> = {};
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const [name, t] of Object.entries(tensors)) {
    header[name] = {
      dtype: t.dtype,
      shape: t.shape,
      data_offsets: [offset, offset + t.data.length],
    };
    chunks.push(t.data);
    offset += t.data.length;
  }
  const headerBytes = Buffer.from(JSON.stringify(header), 'utf-8');
  const sizeField = Buffer.alloc(8);
  sizeField.writeBigUInt64LE(BigInt(headerBytes.length), 0);
  writeFileSync(path, Buffer.concat([sizeField, headerBytes, ...chunks]));
}

export function f32Buffer(values: number[]): Buffer {
  const out = Buffer.alloc(values.length * 4);
  values.forEach((v, i) => out.writeFloatLE(v, i * 4));
  return out;
}

export function f16Buffer(halfBits: number[]): Buffer {
  const out = Buffer.alloc(halfBits.length * 2);
  halfBits.forEach((v, i) => out.writeUInt16LE(v, i * 2));
  return out;
}
