/** PNG decoding plus the center-crop / bilinear-resize policy. */

import { PNG } from 'pngjs';

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB triplets in [0, 1]. */
  pixels: Float32Array;
}

export function decodePng(buffer: Buffer): RgbImage {
  const png = PNG.sync.read(buffer);
  const pixels = new Float32Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    pixels[i * 3] = png.data[i * 4] / 255;
    pixels[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    pixels[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { width: png.width, height: png.height, pixels };
}

export function centerCrop(image: RgbImage): RgbImage {
  const side = Math.min(image.width, image.height);
  const x0 = Math.floor((image.width - side) / 2);
  const y0 = Math.floor((image.height - side) / 2);
  if (side === image.width && side === image.height) {
    return image;
  }
  const pixels = new Float32Array(side * side * 3);
  for (let y = 0; y < side; y++) {
    for (let x = 0; x < side; x++) {
      const src = ((y + y0) * image.width + (x + x0)) * 3;
      const dst = (y * side + x) * 3;
      pixels[dst] = image.pixels[src];
      pixels[dst + 1] = image.pixels[src + 1];
      pixels[dst + 2] = image.pixels[src + 2];
    }
  }
  return { width: side, height: side, pixels };
}

export function resizeBilinear(image: RgbImage, size: number): RgbImage {
  if (image.width === size && image.height === size) {
    return image;
  }
  const pixels = new Float32Array(size * size * 3);
  const sx = image.width / size;
  const sy = image.height / size;
  for (let y = 0; y < size; y++) {
    const fy = Math.min((y + 0.5) * sy - 0.5, image.height - 1);
    const y0 = Math.max(0, Math.floor(fy));
    const y1 = Math.min(image.height - 1, y0 + 1);
    const wy = Math.max(0, fy - y0);
    for (let x = 0; x < size; x++) {
      const fx = Math.min((x + 0.5) * sx - 0.5, image.width - 1);
      const x0 = Math.max(0, Math.floor(fx));
      const x1 = Math.min(image.width - 1, x0 + 1);
      const wx = Math.max(0, fx - x0);
      for (let c = 0; c < 3; c++) {
        const p00 = image.pixels[(y0 * image.width + x0) * 3 + c];
        const p01 = image.pixels[(y0 * image.width + x1) * 3 + c];
        const p10 = image.pixels[(y1 * image.width + x0) * 3 + c];
        const p11 = image.pixels[(y1 * image.width + x1) * 3 + c];
        const top = p00 + (p01 - p00) * wx;
        const bottom = p10 + (p11 - p10) * wx;
        pixels[(y * size + x) * 3 + c] = top + (bottom - top) * wy;
      }
    }
  }
  return { width: size, height: size, pixels };
}

/** The extractor's standard preprocessing: square center crop, then resize. */
export function prepare(image: RgbImage, size: number): RgbImage {
  return resizeBilinear(centerCrop(image), size);
}
