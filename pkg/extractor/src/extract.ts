/**
 * Directory extraction: scan images in deterministic order, encode each
 * into spatial tokens, and write one .tokemb file whose ids are the
 * relative file paths. Undecodable files are skipped with a warning and
 * recorded in a skip manifest next to the output.
 */

import { promises as fs } from 'node:fs';
import * as path from 'node:path';

import { createEncoder, SpatialEncoder } from './encoders.js';
import { decodePng, RgbImage } from './image.js';
import { encodeTokemb } from './tokemb.js';

const IMAGE_EXTENSIONS = new Set(['.png']);

export interface ExtractOptions {
  imagesDir: string;
  outPath: string;
  variant: string;
  batchSize?: number;
}

export interface SkipRecord {
  path: string;
  reason: string;
}

export interface ExtractResult {
  outPath: string;
  manifestPath: string | null;
  nImages: number;
  tokensPerImage: number;
  dim: number;
  skipped: SkipRecord[];
}

export async function listImageFiles(imagesDir: string): Promise<string[]> {
  const found: string[] = [];
  async function walk(dir: string): Promise<void> {
    const entries = await fs.readdir(dir, { withFileTypes: true });
    for (const entry of entries) {
      const full = path.join(dir, entry.name);
      if (entry.isDirectory()) {
        await walk(full);
      } else if (IMAGE_EXTENSIONS.has(path.extname(entry.name).toLowerCase())) {
        found.push(path.relative(imagesDir, full));
      }
    }
  }
  await walk(imagesDir);
  found.sort(); // lexicographic: run-to-run order is stable
  return found;
}

export async function extractDirectory(options: ExtractOptions): Promise<ExtractResult> {
  const batchSize = options.batchSize ?? 64;
  if (batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${batchSize}`);
  }
  const relPaths = await listImageFiles(options.imagesDir);
  if (relPaths.length === 0) {
    throw new Error(`no image files found under ${options.imagesDir}`);
  }

  const encoder: SpatialEncoder = await createEncoder(options.variant);
  const skipped: SkipRecord[] = [];
  const usable: { relPath: string; image: RgbImage }[] = [];
  for (const relPath of relPaths) {
    const full = path.join(options.imagesDir, relPath);
    try {
      usable.push({ relPath, image: decodePng(await fs.readFile(full)) });
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      console.warn(`skipping ${relPath}: ${reason}`);
      skipped.push({ path: relPath, reason });
    }
  }
  if (usable.length === 0) {
    throw new Error(`no decodable images under ${options.imagesDir} (${skipped.length} skipped)`);
  }

  let tokensPerImage = 0;
  let dim = 0;
  const perImage: Float32Array[] = [];
  for (let start = 0; start < usable.length; start += batchSize) {
    const batch = usable.slice(start, start + batchSize);
    const encoded = await encoder.encodeBatch(batch.map((u) => u.image));
    if (perImage.length === 0) {
      tokensPerImage = encoded.tokensPerImage;
      dim = encoded.dim;
    } else if (encoded.tokensPerImage !== tokensPerImage || encoded.dim !== dim) {
      throw new Error(
        `encoder emitted inconsistent shapes: (${encoded.tokensPerImage}, ${encoded.dim}) ` +
        `vs (${tokensPerImage}, ${dim})`,
      );
    }
    perImage.push(...encoded.tokens);
  }

  const data = new Float32Array(usable.length * tokensPerImage * dim);
  perImage.forEach((tokens, i) => data.set(tokens, i * tokensPerImage * dim));
  const payload = encodeTokemb({
    tokensPerImage,
    dim,
    data,
    imageIds: usable.map((u) => u.relPath),
  });
  await fs.mkdir(path.dirname(path.resolve(options.outPath)), { recursive: true });
  await fs.writeFile(options.outPath, payload);

  let manifestPath: string | null = null;
  if (skipped.length > 0) {
    manifestPath = `${options.outPath}.skip.json`;
    await fs.writeFile(manifestPath, JSON.stringify(skipped, null, 2) + '\n');
  }
  return {
    outPath: options.outPath,
    manifestPath,
    nImages: usable.length,
    tokensPerImage,
    dim,
    skipped,
  };
}
