/**
 * End-to-end CLI tests against the built dist/cli.js, plus an integration
 * check against the segmentation engine through its public surfaces only:
 * `volseg inspect --json` for the canonical entry list and the ESWT file
 * format for the payload.
 */

import { spawnSync } from 'node:child_process';
import { existsSync, writeFileSync } from 'node:fs';
import { dirname, join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';

import { readEswt } from '../src/eswt.js';
import { f32Buffer, tempDir, writeSafetensors, type FixtureTensor } from './helpers.js';

const HERE = dirname(fileURLToPath(import.meta.url));
const CLI = resolve(HERE, '..', 'dist', 'cli.js');

function runCli(args: string[]) {
  return spawnSync('node', [CLI, ...args], { encoding: 'utf-8' });
}

describe('convert-weights CLI', () => {
  it.skipIf(!existsSync(CLI))('converts and prints a summary', () => {
    const dir = tempDir();
    const ckpt = join(dir, 'c.safetensors');
    writeSafetensors(ckpt, {
      w: { dtype: 'F32', shape: [2, 1, 3, 3, 3], data: f32Buffer(Array(54).fill(0.5)) },
    });
    const mapPath = join(dir, 'map.json');
    writeFileSync(
      mapPath,
      JSON.stringify([{ src: 'w', dst: 'stem.conv.weight', dims: [2, 1, 3, 3, 3] }]),
    );
    const out = join(dir, 'o.eswt');
    const res = runCli(['--checkpoint', ckpt, '--map', mapPath, '--out', out]);
    expect(res.status).toBe(0);
    const summary = JSON.parse(res.stdout);
    expect(summary.converted).toBe(1);
    expect(readEswt(out)).toHaveLength(1);
  });

  it.skipIf(!existsSync(CLI))('exits 1 on dim mismatch naming the key', () => {
    const dir = tempDir();
    const ckpt = join(dir, 'c.safetensors');
    writeSafetensors(ckpt, { w: { dtype: 'F32', shape: [4], data: f32Buffer([1, 2, 3, 4]) } });
    const mapPath = join(dir, 'map.json');
    writeFileSync(mapPath, JSON.stringify([{ src: 'w', dst: 'head.conv.bias', dims: [5] }]));
    const res = runCli(['--checkpoint', ckpt, '--map', mapPath, '--out', join(dir, 'o.eswt')]);
    expect(res.status).toBe(1);
    expect(res.stderr).toContain('w');
    expect(res.stderr).toContain('[5]');
  });

  it.skipIf(!existsSync(CLI))('exits 2 on bad usage', () => {
    const res = runCli(['--checkpoint', 'x']);
    expect(res.status).toBe(2);
    expect(res.stderr).toContain('usage');
  });

  it.skipIf(!existsSync(CLI))('exits 1 on a missing checkpoint file', () => {
    const dir = tempDir();
    const mapPath = join(dir, 'map.json');
    writeFileSync(mapPath, JSON.stringify([]));
    const res = runCli(['--checkpoint', join(dir, 'nope.safetensors'), '--map', mapPath, '--out', join(dir, 'o.eswt')]);
    expect(res.status).toBe(1);
  });
});

function inspectEntries(): { name: string; dims: number[] }[] | null {
  // the engine's canonical entry list via its CLI; skip if unavailable
  const probe = spawnSync(
    'python3',
    ['-m', 'volseg', 'inspect', '--model', 'fine', '--levels', '2', '--base-channels', '4',
     '--input-size', '16', '16', '16', '--json', '--entries'],
    { encoding: 'utf-8' },
  );
  if (probe.status !== 0) return null;
  const doc = JSON.parse(probe.stdout);
  return doc.entries;
}

describe('integration with the segmentation engine', () => {
  it.skipIf(!existsSync(CLI))('a full synthetic checkpoint converts and matches the entry list', () => {
    const entries = inspectEntries();
    if (entries === null) {
      console.warn('volseg CLI not available; skipping integration check');
      return;
    }
    const dir = tempDir();
    const tensors: Record<string, FixtureTensor> = {};
    const map: { src: string; dst: string; dims: number[] }[] = [];
    let total = 0;
    for (const [i, entry] of entries.entries()) {
      const n = entry.dims.reduce((a, b) => a * b, 1);
      total += n;
      const values = Array.from({ length: n }, (_, k) => Math.fround((i + 1) * 0.01 + k * 1e-6));
      const src = `upstream.layer${i}.param`;
      tensors[src] = { dtype: 'F32', shape: entry.dims, data: f32Buffer(values) };
      map.push({ src, dst: entry.name, dims: entry.dims });
    }
    const ckpt = join(dir, 'full.safetensors');
    const mapPath = join(dir, 'map.json');
    const out = join(dir, 'full.eswt');
    writeSafetensors(ckpt, tensors);
    writeFileSync(mapPath, JSON.stringify(map));

    const res = runCli(['--checkpoint', ckpt, '--map', mapPath, '--out', out]);
    expect(res.status).toBe(0);

    const converted = readEswt(out);
    expect(converted).toHaveLength(entries.length);
    const elementCount = converted.reduce(
      (acc, e) => acc + e.dims.reduce((a, b) => a * b, 1),
      0,
    );
    expect(elementCount).toBe(total);
    // byte-exact value preservation, spot-checked end to end
    expect(Buffer.compare(converted[0].data, tensors['upstream.layer0.param'].data)).toBe(0);
    const last = converted.length - 1;
    expect(
      Buffer.compare(converted[last].data, tensors[`upstream.layer${last}.param`].data),
    ).toBe(0);
  });
});
