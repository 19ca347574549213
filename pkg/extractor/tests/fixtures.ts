/** Deterministic PNG fixtures: bright discs over dark noisy backgrounds. */

import { promises as fs } from 'node:fs';
import * as path from 'node:path';

import { PNG } from 'pngjs';

/** Tiny deterministic PRNG (mulberry32). */
export function prng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface DiscSpec {
  size?: number;
  discRadius: number;
  discX: number;
  discY: number;
  seed: number;
}

export function discPng(spec: DiscSpec): Buffer {
  const size = spec.size ?? 96;
  const rand = prng(spec.seed);
  const png = new PNG({ width: size, height: size });
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const i = (y * size + x) * 4;
      const inDisc =
        (x - spec.discX) ** 2 + (y - spec.discY) ** 2 <= spec.discRadius ** 2;
      if (inDisc) {
        png.data[i] = 200 + Math.floor(rand() * 55);
        png.data[i + 1] = 160 + Math.floor(rand() * 40);
        png.data[i + 2] = 40 + Math.floor(rand() * 40);
      } else {
        const noise = Math.floor(rand() * 40);
        png.data[i] = 10 + noise;
        png.data[i + 1] = 20 + noise;
        png.data[i + 2] = 30 + noise;
      }
      png.data[i + 3] = 255;
    }
  }
  return PNG.sync.write(png);
}

export async function writeImageDir(dir: string, count: number): Promise<string[]> {
  await fs.mkdir(dir, { recursive: true });
  const names: string[] = [];
  for (let i = 0; i < count; i++) {
    const name = `img_${String(i).padStart(2, '0')}.png`;
    const radius = 8 + i * 5;
    await fs.writeFile(
      path.join(dir, name),
      discPng({ discRadius: radius, discX: 30 + i * 6, discY: 40 + (i % 3) * 8, seed: 1000 + i }),
    );
    names.push(name);
  }
  return names;
}
