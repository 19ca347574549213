/**
 * Spatial token encoders.
 *
 * `dinov2-*` runs a pretrained vision transformer via @xenova/transformers
 * and emits its patch tokens (the class token is dropped: it has no
 * location). `patch-stats` is a weight-free fallback that computes local
 * color/gradient statistics per patch; it needs no downloads, so tests and
 * air-gapped environments can exercise the full extraction path.
 */

import { prepare, RgbImage } from './image.js';

export interface EncodedBatch {
  tokensPerImage: number;
  dim: number;
  tokens: Float32Array[];
}

export interface SpatialEncoder {
  readonly name: string;
  encodeBatch(images: RgbImage[]): Promise<EncodedBatch>;
}

const DINO_MODELS: Record<string, string> = {
  'dinov2-small': 'Xenova/dinov2-small',
  'dinov2-base': 'Xenova/dinov2-base',
  'dinov2-large': 'Xenova/dinov2-large',
};

export const DEFAULT_VARIANT = 'dinov2-small';

export async function createEncoder(variant: string): Promise<SpatialEncoder> {
  if (variant === 'patch-stats') {
    return new PatchStatsEncoder();
  }
  const modelId = DINO_MODELS[variant] ?? (variant.includes('/') ? variant : undefined);
  if (!modelId) {
    throw new Error(
      `unknown variant ${variant}; use patch-stats, one of ` +
      `${Object.keys(DINO_MODELS).join(', ')}, or a full model id`,
    );
  }
  return PretrainedEncoder.load(variant, modelId);
}

/** Patch tokens from a pretrained ViT-style encoder. */
class PretrainedEncoder implements SpatialEncoder {
  private constructor(
    readonly name: string,
    private readonly processor: any,
    private readonly model: any,
    private readonly rawImageCtor: any,
  ) {}

  static async load(name: string, modelId: string): Promise<PretrainedEncoder> {
    let transformers: any;
    try {
      transformers = await import('@xenova/transformers');
    } catch (err) {
      throw new Error(
        `variant ${name} needs the optional @xenova/transformers package ` +
        `(npm install @xenova/transformers), or use --variant patch-stats: ${err}`,
      );
    }
    const { AutoProcessor, AutoModel, RawImage } = transformers;
    try {
      const processor = await AutoProcessor.from_pretrained(modelId);
      const model = await AutoModel.from_pretrained(modelId);
      return new PretrainedEncoder(name, processor, model, RawImage);
    } catch (err) {
      throw new Error(
        `could not load pretrained weights for ${modelId} ` +
        `(no model cache or network?); use --variant patch-stats instead: ${err}`,
      );
    }
  }

  private toRawImage(image: RgbImage) {
    const bytes = new Uint8ClampedArray(image.width * image.height * 3);
    for (let i = 0; i < image.pixels.length; i++) {
      bytes[i] = Math.round(image.pixels[i] * 255);
    }
    return new this.rawImageCtor(bytes, image.width, image.height, 3);
  }

  async encodeBatch(images: RgbImage[]): Promise<EncodedBatch> {
    const raw = images.map((img) => this.toRawImage(img));
    const inputs = await this.processor(raw);
    const output = await this.model(inputs);
    const hidden = output.last_hidden_state;
    const [batch, tokensWithClass, dim] = hidden.dims as [number, number, number];
    const perImage = tokensWithClass - 1; // drop the class token
    const all = hidden.data as Float32Array;
    const tokens: Float32Array[] = [];
    for (let b = 0; b < batch; b++) {
      const start = (b * tokensWithClass + 1) * dim;
      tokens.push(Float32Array.from(all.subarray(start, start + perImage * dim)));
    }
    return { tokensPerImage: perImage, dim, tokens };
  }
}

const LUMA = [0.299, 0.587, 0.114];

/**
 * Weight-free per-patch statistics: channel means/stds, luminance
 * mean/std, axis gradient means, gradient magnitude, and Laplacian
 * energy. 12 values per patch on a fixed grid.
 */
export class PatchStatsEncoder implements SpatialEncoder {
  readonly name = 'patch-stats';
  readonly dim = 12;

  constructor(readonly gridSize = 14, readonly patchPixels = 16) {}

  get inputSize(): number {
    return this.gridSize * this.patchPixels;
  }

  get tokensPerImage(): number {
    return this.gridSize * this.gridSize;
  }

  async encodeBatch(images: RgbImage[]): Promise<EncodedBatch> {
    const tokens = images.map((img) => this.encodeOne(img));
    return { tokensPerImage: this.tokensPerImage, dim: this.dim, tokens };
  }

  private encodeOne(image: RgbImage): Float32Array {
    const size = this.inputSize;
    const img = prepare(image, size);
    const luma = new Float32Array(size * size);
    for (let i = 0; i < size * size; i++) {
      luma[i] =
        img.pixels[i * 3] * LUMA[0] + img.pixels[i * 3 + 1] * LUMA[1] + img.pixels[i * 3 + 2] * LUMA[2];
    }
    const at = (x: number, y: number) =>
      luma[Math.min(size - 1, Math.max(0, y)) * size + Math.min(size - 1, Math.max(0, x))];

    const out = new Float32Array(this.tokensPerImage * this.dim);
    const p = this.patchPixels;
    for (let gy = 0; gy < this.gridSize; gy++) {
      for (let gx = 0; gx < this.gridSize; gx++) {
        const sums = new Float64Array(this.dim);
        const sq = new Float64Array(4); // r, g, b, luma second moments
        for (let dy = 0; dy < p; dy++) {
          for (let dx = 0; dx < p; dx++) {
            const x = gx * p + dx;
            const y = gy * p + dy;
            const base = (y * size + x) * 3;
            const r = img.pixels[base];
            const g = img.pixels[base + 1];
            const b = img.pixels[base + 2];
            const l = luma[y * size + x];
            sums[0] += r;
            sums[1] += g;
            sums[2] += b;
            sums[6] += l;
            sq[0] += r * r;
            sq[1] += g * g;
            sq[2] += b * b;
            sq[3] += l * l;
            const gxv = (at(x + 1, y) - at(x - 1, y)) / 2;
            const gyv = (at(x, y + 1) - at(x, y - 1)) / 2;
            sums[8] += Math.abs(gxv);
            sums[9] += Math.abs(gyv);
            sums[10] += Math.sqrt(gxv * gxv + gyv * gyv);
            sums[11] += Math.abs(4 * l - at(x + 1, y) - at(x - 1, y) - at(x, y + 1) - at(x, y - 1));
          }
        }
        const count = p * p;
        const token = (gy * this.gridSize + gx) * this.dim;
        const variance = (total: number, sumSq: number) =>
          Math.sqrt(Math.max(0, sumSq / count - (total / count) ** 2));
        out[token] = sums[0] / count;
        out[token + 1] = sums[1] / count;
        out[token + 2] = sums[2] / count;
        out[token + 3] = variance(sums[0], sq[0]);
        out[token + 4] = variance(sums[1], sq[1]);
        out[token + 5] = variance(sums[2], sq[2]);
        out[token + 6] = sums[6] / count;
        out[token + 7] = variance(sums[6], sq[3]);
        out[token + 8] = sums[8] / count;
        out[token + 9] = sums[9] / count;
        out[token + 10] = sums[10] / count;
        out[token + 11] = sums[11] / count;
      }
    }
    return out;
  }
}
