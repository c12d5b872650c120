/**
 * Checkpoint-to-ESWT conversion driven by an explicit name map.
 *
 * The map is a JSON list of { src, dst, dims } rows: src names a tensor in
 * the checkpoint, dst the ESWT entry to emit, dims the expected shape.
 * Every dst must be produced exactly once and every row is dim-verified
 * before anything is written; unknown upstream names never get guessed.
 */

import { readFileSync } from 'node:fs';

import { writeEswt, type EswtEntry } from './eswt.js';
import { parseSafetensors, type TensorView } from './safetensors.js';

export interface MapRow {
  src: string;
  dst: string;
  dims: number[];
}

export interface ConvertSummary {
  converted: number;
  upcastFromF16: string[];
  unmatchedCheckpointKeys: string[];
}

export class ConvertError extends Error {}

export function loadNameMap(path: string): MapRow[] {
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(path, 'utf-8'));
  } catch (err) {
    throw new ConvertError(`${path}: not valid JSON: ${err}`);
  }
  if (!Array.isArray(doc)) {
    throw new ConvertError(`${path}: name map must be a JSON list of {src, dst, dims}`);
  }
  const rows: MapRow[] = [];
  const seenDst = new Set<string>();
  for (const [i, raw] of doc.entries()) {
    const row = raw as Partial<MapRow>;
    if (
      typeof row.src !== 'string' ||
      typeof row.dst !== 'string' ||
      !Array.isArray(row.dims) ||
      row.dims.some((d) => typeof d !== 'number' || !Number.isInteger(d) || d < 1)
    ) {
      throw new ConvertError(`${path}: row ${i} is not a valid {src, dst, dims} entry`);
    }
    if (seenDst.has(row.dst)) {
      throw new ConvertError(`${path}: duplicate destination ${row.dst}`);
    }
    seenDst.add(row.dst);
    rows.push({ src: row.src, dst: row.dst, dims: [...row.dims] });
  }
  return rows;
}

function sameDims(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

export function convert(checkpointPath: string, mapPath: string, outPath: string): ConvertSummary {
  const tensors = parseSafetensors(checkpointPath);
  const rows = loadNameMap(mapPath);

  const problems: string[] = [];
  const entries: EswtEntry[] = [];
  const upcast: string[] = [];
  const consumed = new Set<string>();
  for (const row of rows) {
    const tensor: TensorView | undefined = tensors.get(row.src);
    if (tensor === undefined) {
      problems.push(`missing checkpoint key ${row.src} (wanted for ${row.dst})`);
      continue;
    }
    consumed.add(row.src);
    if (!sameDims(tensor.shape, row.dims)) {
      problems.push(
        `dim mismatch for ${row.src} -> ${row.dst}: checkpoint [${tensor.shape}], map [${row.dims}]`,
      );
      continue;
    }
    if (tensor.dtype === 'F16') {
      upcast.push(row.dst);
    }
    entries.push({ name: row.dst, dims: row.dims, data: tensor.data });
  }
  if (problems.length > 0) {
    throw new ConvertError(problems.join('\n'));
  }
  writeEswt(outPath, entries);
  const unmatched = [...tensors.keys()].filter((k) => !consumed.has(k)).sort();
  return {
    converted: entries.length,
    upcastFromF16: upcast,
    unmatchedCheckpointKeys: unmatched,
  };
}
