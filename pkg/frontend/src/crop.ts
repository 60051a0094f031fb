/** Crop rectangle model for the diffusion tool. Coordinates are source pixels. */

export interface CropRect {
  top: number;
  left: number;
  height: number;
  width: number;
}

/** Turn two drag corners (any orientation) into a normalized rectangle. */
export function rectFromDrag(x0: number, y0: number, x1: number, y1: number): CropRect {
  const left = Math.round(Math.min(x0, x1));
  const top = Math.round(Math.min(y0, y1));
  return {
    top,
    left,
    width: Math.round(Math.abs(x1 - x0)),
    height: Math.round(Math.abs(y1 - y0)),
  };
}

export function fullFrame(resolution: number): CropRect {
  return { top: 0, left: 0, height: resolution, width: resolution };
}

/**
 * Why the rectangle cannot be submitted, or null if it can. Keeping this
 * client-side means a bad drag never reaches the server.
 */
export function cropProblem(rect: CropRect, resolution: number): string | null {
  if (![rect.top, rect.left, rect.height, rect.width].every(Number.isInteger)) {
    return "crop coordinates must be whole pixels";
  }
  if (rect.height <= 0 || rect.width <= 0) {
    return "crop area is empty";
  }
  if (rect.top < 0 || rect.left < 0) {
    return "crop starts outside the image";
  }
  if (rect.top + rect.height > resolution || rect.left + rect.width > resolution) {
    return `crop exceeds the ${resolution}px frame`;
  }
  return null;
}

export function pasteProblem(
  rect: CropRect,
  paste: [number, number],
  resolution: number,
): string | null {
  const [top, left] = paste;
  if (!Number.isInteger(top) || !Number.isInteger(left)) {
    return "paste coordinates must be whole pixels";
  }
  if (top < 0 || left < 0 || top + rect.height > resolution || left + rect.width > resolution) {
    return `paste position puts the crop outside the ${resolution}px frame`;
  }
  return null;
}
