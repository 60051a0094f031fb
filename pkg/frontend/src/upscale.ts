/** Pixel-buffer helpers. Desk-scale outputs are tiny (32x32), so the UI shows
 * them nearest-neighbor upscaled; each source pixel becomes an exact block. */

export interface RawImage {
  width: number;
  height: number;
  data: Uint8ClampedArray<ArrayBuffer>; // RGBA, row-major
}

export const DISPLAY_SCALE = 8;

export function nearestUpscale(img: RawImage, factor: number): RawImage {
  if (!Number.isInteger(factor) || factor < 1) {
    throw new Error(`upscale factor must be a positive integer, got ${factor}`);
  }
  const w = img.width * factor;
  const h = img.height * factor;
  const out = new Uint8ClampedArray(w * h * 4);
  for (let y = 0; y < h; y++) {
    const sy = Math.floor(y / factor);
    for (let x = 0; x < w; x++) {
      const sx = Math.floor(x / factor);
      const src = (sy * img.width + sx) * 4;
      const dst = (y * w + x) * 4;
      out[dst] = img.data[src];
      out[dst + 1] = img.data[src + 1];
      out[dst + 2] = img.data[src + 2];
      out[dst + 3] = img.data[src + 3];
    }
  }
  return { width: w, height: h, data: out };
}
