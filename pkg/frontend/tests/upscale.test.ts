import { describe, expect, it } from "vitest";

import { nearestUpscale } from "../src/upscale";

function rgba(...pixels: number[][]): Uint8ClampedArray {
  return new Uint8ClampedArray(pixels.flat());
}

describe("nearestUpscale", () => {
  const src = {
    width: 2,
    height: 2,
    data: rgba([255, 0, 0, 255], [0, 255, 0, 255], [0, 0, 255, 255], [9, 9, 9, 255]),
  };

  it("turns each source pixel into an exact uniform block", () => {
    const out = nearestUpscale(src, 3);
    expect(out.width).toBe(6);
    expect(out.height).toBe(6);
    const px = (x: number, y: number) => Array.from(out.data.slice((y * 6 + x) * 4, (y * 6 + x) * 4 + 4));
    // every sample inside the top-left 3x3 block is the top-left source pixel
    for (const [x, y] of [[0, 0], [2, 2], [1, 0]]) {
      expect(px(x, y)).toEqual([255, 0, 0, 255]);
    }
    expect(px(3, 0)).toEqual([0, 255, 0, 255]);
    expect(px(0, 3)).toEqual([0, 0, 255, 255]);
    expect(px(5, 5)).toEqual([9, 9, 9, 255]);
  });

  it("is the identity at factor 1", () => {
    const out = nearestUpscale(src, 1);
    expect(out.width).toBe(2);
    expect(Array.from(out.data)).toEqual(Array.from(src.data));
    expect(out.data).not.toBe(src.data); // a copy, not the same buffer
  });

  it("rejects non-positive and fractional factors", () => {
    expect(() => nearestUpscale(src, 0)).toThrow("positive integer");
    expect(() => nearestUpscale(src, 1.5)).toThrow("positive integer");
  });
});
