import { promises as fs } from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { afterEach, beforeEach, describe, expect, it } from 'vitest';

import { PatchStatsEncoder } from '../src/encoders.js';
import { extractDirectory, listImageFiles } from '../src/extract.js';
import { centerCrop, decodePng, resizeBilinear } from '../src/image.js';
import { decodeTokemb } from '../src/tokemb.js';
import { discPng, writeImageDir } from './fixtures.js';

let workDir: string;

beforeEach(async () => {
  workDir = await fs.mkdtemp(path.join(os.tmpdir(), 'extract-'));
});

afterEach(async () => {
  await fs.rm(workDir, { recursive: true, force: true });
});

describe('image preprocessing', () => {
  it('decodes png fixtures into unit-range rgb', () => {
    const img = decodePng(discPng({ discRadius: 10, discX: 48, discY: 48, seed: 3 }));
    expect(img.width).toBe(96);
    expect(img.height).toBe(96);
    let lo = 1;
    let hi = 0;
    for (const v of img.pixels) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
    expect(lo).toBeGreaterThanOrEqual(0);
    expect(hi).toBeLessThanOrEqual(1);
    expect(hi).toBeGreaterThan(0.5); // the disc is bright
  });

  it('center-crops to the short side', () => {
    const wide = { width: 10, height: 4, pixels: new Float32Array(10 * 4 * 3) };
    const cropped = centerCrop(wide);
    expect(cropped.width).toBe(4);
    expect(cropped.height).toBe(4);
  });

  it('bilinear resize preserves a constant image exactly', () => {
    const flat = { width: 8, height: 8, pixels: new Float32Array(8 * 8 * 3).fill(0.25) };
    const resized = resizeBilinear(flat, 5);
    for (const v of resized.pixels) {
      expect(v).toBeCloseTo(0.25, 12);
    }
  });
});

describe('patch-stats encoder', () => {
  it('emits a fixed grid with 12 features per patch', async () => {
    const encoder = new PatchStatsEncoder(7, 8);
    const img = decodePng(discPng({ discRadius: 12, discX: 40, discY: 40, seed: 1 }));
    const batch = await encoder.encodeBatch([img]);
    expect(batch.tokensPerImage).toBe(49);
    expect(batch.dim).toBe(12);
    expect(batch.tokens[0]).toHaveLength(49 * 12);
    for (const v of batch.tokens[0]) {
      expect(Number.isFinite(v)).toBe(true);
    }
  });

  it('is deterministic', async () => {
    const encoder = new PatchStatsEncoder();
    const img = decodePng(discPng({ discRadius: 20, discX: 50, discY: 40, seed: 9 }));
    const a = await encoder.encodeBatch([img]);
    const b = await encoder.encodeBatch([img]);
    expect(Buffer.from(a.tokens[0].buffer).equals(Buffer.from(b.tokens[0].buffer))).toBe(true);
  });
});

describe('directory extraction', () => {
  it('orders ids lexicographically, including subdirectories', async () => {
    await writeImageDir(workDir, 2);
    await writeImageDir(path.join(workDir, 'sub'), 1);
    const files = await listImageFiles(workDir);
    expect(files).toEqual(['img_00.png', 'img_01.png', path.join('sub', 'img_00.png')]);
  });

  it('skips corrupt files and records them in the manifest', async () => {
    await writeImageDir(workDir, 3);
    await fs.writeFile(path.join(workDir, 'img_99.png'), Buffer.from('this is not a png'));
    const out = path.join(workDir, 'out.tokemb');
    const result = await extractDirectory({
      imagesDir: workDir,
      outPath: out,
      variant: 'patch-stats',
    });
    expect(result.nImages).toBe(3);
    expect(result.skipped).toHaveLength(1);
    expect(result.skipped[0].path).toBe('img_99.png');
    const manifest = JSON.parse(await fs.readFile(result.manifestPath!, 'utf-8'));
    expect(manifest[0].path).toBe('img_99.png');
    const file = decodeTokemb(await fs.readFile(out));
    expect(file.imageIds).toEqual(['img_00.png', 'img_01.png', 'img_02.png']);
  });

  it('writes a header consistent with the payload', async () => {
    await writeImageDir(workDir, 4);
    const out = path.join(workDir, 'out.tokemb');
    const result = await extractDirectory({
      imagesDir: workDir,
      outPath: out,
      variant: 'patch-stats',
      batchSize: 3,
    });
    const file = decodeTokemb(await fs.readFile(out));
    expect(file.imageIds).toHaveLength(result.nImages);
    expect(file.data).toHaveLength(result.nImages * result.tokensPerImage * result.dim);
    expect(result.tokensPerImage).toBe(14 * 14);
    expect(result.dim).toBe(12);
  });

  it('is deterministic across runs', async () => {
    await writeImageDir(workDir, 3);
    const outA = path.join(workDir, 'a.tokemb');
    const outB = path.join(workDir, 'b.tokemb');
    await extractDirectory({ imagesDir: workDir, outPath: outA, variant: 'patch-stats' });
    await extractDirectory({ imagesDir: workDir, outPath: outB, variant: 'patch-stats' });
    expect((await fs.readFile(outA)).equals(await fs.readFile(outB))).toBe(true);
  });

  it('fails when nothing is decodable', async () => {
    await fs.writeFile(path.join(workDir, 'junk.png'), Buffer.from('junk'));
    await expect(
      extractDirectory({
        imagesDir: workDir,
        outPath: path.join(workDir, 'out.tokemb'),
        variant: 'patch-stats',
      }),
    ).rejects.toThrow(/no decodable/);
  });

  it('explains how to proceed when pretrained weights are unavailable', async () => {
    await writeImageDir(workDir, 1);
    await expect(
      extractDirectory({
        imagesDir: workDir,
        outPath: path.join(workDir, 'out.tokemb'),
        variant: 'dinov2-small',
      }),
    ).rejects.toThrow(/patch-stats/);
  });
});
