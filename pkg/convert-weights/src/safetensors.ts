/**
 * Minimal safetensors reader.
 *
 * Layout: u64 LE header length, JSON header, then one flat byte buffer.
 * Header entries map tensor names to { dtype, shape, data_offsets } with
 * offsets relative to the start of the byte buffer. Only F32 and F16
 * tensors are supported here; F16 values are upcast to F32 exactly
 * (every half-precision value is representable in single precision).
 */

import { readFileSync } from 'node:fs';

export interface TensorView {
  name: string;
  dtype: 'F32' | 'F16';
  shape: number[];
  /** float32 little-endian bytes, after any upcast */
  data: Buffer;
}

export class SafetensorsError extends Error {}

interface HeaderEntry {
  dtype: string;
  shape: number[];
  data_offsets: [number, number];
}

const DTYPE_BYTES: Record<string, number> = { F32: 4, F16: 2 };

function numel(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

/** Upcast IEEE 754 half-precision bits to single precision, bit-exactly. */
export function halfToFloatBits(h: number): number {
  const sign = (h & 0x8000) << 16;
  const exponent = (h >> 10) & 0x1f;
  const mantissa = h & 0x3ff;
  if (exponent === 0x1f) {
    // inf / NaN: keep the mantissa payload
    return sign | 0x7f800000 | (mantissa << 13);
  }
  if (exponent === 0) {
    if (mantissa === 0) return sign; // signed zero
    // subnormal half: normalize into a float exponent
    let e = -1;
    let m = mantissa;
    do {
      e++;
      m <<= 1;
    } while ((m & 0x400) === 0);
    return sign | ((127 - 15 - e) << 23) | ((m & 0x3ff) << 13);
  }
  return sign | ((exponent - 15 + 127) << 23) | (mantissa << 13);
}

function upcastF16(raw: Buffer): Buffer {
  const out = Buffer.alloc(raw.length * 2);
  for (let i = 0; i * 2 < raw.length; i++) {
    out.writeUInt32LE(halfToFloatBits(raw.readUInt16LE(i * 2)) >>> 0, i * 4);
  }
  return out;
}

export function parseSafetensors(path: string): Map<string, TensorView> {
  const blob = readFileSync(path);
  if (blob.length < 8) {
    throw new SafetensorsError(`${path}: too short for a safetensors header`);
  }
  const headerLen = Number(blob.readBigUInt64LE(0));
  if (8 + headerLen > blob.length) {
    throw new SafetensorsError(`${path}: header length ${headerLen} exceeds file size`);
  }
  let header: Record<string, HeaderEntry>;
  try {
    header = JSON.parse(blob.subarray(8, 8 + headerLen).toString('utf-8'));
  } catch (err) {
    throw new SafetensorsError(`${path}: malformed JSON header: ${err}`);
  }
  const body = blob.subarray(8 + headerLen);
  const tensors = new Map<string, TensorView>();
  for (const [name, entry] of Object.entries(header)) {
    if (name === '__metadata__') continue;
    const { dtype, shape, data_offsets: offsets } = entry;
    const bytes = DTYPE_BYTES[dtype];
    if (bytes === undefined) {
      throw new SafetensorsError(`${path}: tensor ${name}: unsupported dtype ${dtype}`);
    }
    const [begin, end] = offsets;
    if (begin < 0 || end > body.length || end < begin) {
      throw new SafetensorsError(`${path}: tensor ${name}: offsets [${begin}, ${end}] out of range`);
    }
    if (end - begin !== numel(shape) * bytes) {
      throw new SafetensorsError(
        `${path}: tensor ${name}: ${end - begin} bytes does not match shape [${shape}] of ${dtype}`,
      );
    }
    const raw = body.subarray(begin, end);
    tensors.set(name, {
      name,
      dtype: dtype as 'F32' | 'F16',
      shape: [...shape],
      data: dtype === 'F16' ? upcastF16(raw) : Buffer.from(raw),
    });
  }
  return tensors;
}
