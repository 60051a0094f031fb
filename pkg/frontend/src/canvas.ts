/** Browser-only glue between base64 PNGs and canvases. Kept free of logic so
 * everything interesting lives in testable modules. */

import { DISPLAY_SCALE, RawImage, nearestUpscale } from "./upscale";

export function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => {
      const url = reader.result as string;
      resolve(url.slice(url.indexOf(",") + 1)); // strip the data: prefix
    };
    reader.readAsDataURL(file);
  });
}

export function pngToRaw(b64: string): Promise<RawImage> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onerror = () => reject(new Error("could not decode the image"));
    img.onload = () => {
      const canvas = document.createElement("canvas");
      canvas.width = img.naturalWidth;
      canvas.height = img.naturalHeight;
      const ctx = canvas.getContext("2d");
      if (ctx === null) {
        reject(new Error("2d canvas is unavailable"));
        return;
      }
      ctx.drawImage(img, 0, 0);
      const data = ctx.getImageData(0, 0, canvas.width, canvas.height);
      resolve({ width: data.width, height: data.height, data: data.data });
    };
    img.src = "data:image/png;base64," + b64;
  });
}

export function drawRaw(canvas: HTMLCanvasElement, raw: RawImage): void {
  canvas.width = raw.width;
  canvas.height = raw.height;
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  ctx.putImageData(new ImageData(raw.data, raw.width, raw.height), 0, 0);
}

/** Decode, upscale nearest-neighbor, and draw; the standard display path. */
export async function showImage(
  canvas: HTMLCanvasElement,
  b64: string,
  factor: number = DISPLAY_SCALE,
): Promise<void> {
  drawRaw(canvas, nearestUpscale(await pngToRaw(b64), factor));
}
