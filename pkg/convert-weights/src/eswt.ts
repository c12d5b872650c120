/**
 * ESWT weight container writer/reader.
 *
 * Wire format (all integers little-endian, no padding):
 *   "ESWT" | u32 version=1 | u64 entry count
 *   per entry: u32 name length | UTF-8 name | u32 ndim | u64 dims[ndim]
 *              | raw float32 data
 */

import { readFileSync, writeFileSync } from 'node:fs';

export const ESWT_MAGIC = 'ESWT';
export const ESWT_VERSION = 1;

export interface EswtEntry {
  name: string;
  dims: number[];
  /** float32 little-endian bytes */
  data: Buffer;
}

export class EswtError extends Error {}

export function writeEswt(path: string, entries: EswtEntry[]): void {
  const seen = new Set<string>();
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(16);
  head.write(ESWT_MAGIC, 0, 'ascii');
  head.writeUInt32LE(ESWT_VERSION, 4);
  head.writeBigUInt64LE(BigInt(entries.length), 8);
  chunks.push(head);
  for (const entry of entries) {
    if (seen.has(entry.name)) {
      throw new EswtError(`duplicate weight name ${entry.name}`);
    }
    seen.add(entry.name);
    const elements = entry.dims.reduce((a, b) => a * b, 1);
    if (entry.data.length !== elements * 4) {
      throw new EswtError(
        `${entry.name}: ${entry.data.length} data bytes does not match dims [${entry.dims}]`,
      );
    }
    const nameBytes = Buffer.from(entry.name, 'utf-8');
    const meta = Buffer.alloc(4 + nameBytes.length + 4 + 8 * entry.dims.length);
    let at = meta.writeUInt32LE(nameBytes.length, 0);
    at += nameBytes.copy(meta, at);
    at = meta.writeUInt32LE(entry.dims.length, at);
    for (const dim of entry.dims) {
      at = meta.writeBigUInt64LE(BigInt(dim), at);
    }
    chunks.push(meta, entry.data);
  }
  writeFileSync(path, Buffer.concat(chunks));
}

export function readEswt(path: string): EswtEntry[] {
  const blob = readFileSync(path);
  let at = 0;
  const take = (n: number, what: string): Buffer => {
    if (at + n > blob.length) {
      throw new EswtError(`${path}: truncated while reading ${what}`);
    }
    const out = blob.subarray(at, at + n);
    at += n;
    return out;
  };
  if (take(4, 'magic').toString('ascii') !== ESWT_MAGIC) {
    throw new EswtError(`${path}: bad magic, not an ESWT file`);
  }
  const version = take(4, 'version').readUInt32LE(0);
  if (version !== ESWT_VERSION) {
    throw new EswtError(`${path}: unsupported version ${version}`);
  }
  const count = Number(take(8, 'entry count').readBigUInt64LE(0));
  const entries: EswtEntry[] = [];
  for (let i = 0; i < count; i++) {
    const nameLen = take(4, 'name length').readUInt32LE(0);
    const name = take(nameLen, 'name').toString('utf-8');
    const ndim = take(4, 'ndim').readUInt32LE(0);
    const dims: number[] = [];
    for (let d = 0; d < ndim; d++) {
      dims.push(Number(take(8, 'dims').readBigUInt64LE(0)));
    }
    const elements = dims.reduce((a, b) => a * b, 1);
    entries.push({ name, dims, data: Buffer.from(take(elements * 4, `data of ${name}`)) });
  }
  if (at !== blob.length) {
    throw new EswtError(`${path}: ${blob.length - at} trailing bytes after last entry`);
  }
  return entries;
}
