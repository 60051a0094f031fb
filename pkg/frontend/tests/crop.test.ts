import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { cropProblem, fullFrame, pasteProblem, rectFromDrag } from "../src/crop";
import { EditorStore } from "../src/store";
import { flush, makeMockService } from "./mock";

describe("rectFromDrag", () => {
  it("normalizes any drag orientation", () => {
    const expected = { top: 2, left: 3, width: 7, height: 5 };
    expect(rectFromDrag(3, 2, 10, 7)).toEqual(expected);
    expect(rectFromDrag(10, 7, 3, 2)).toEqual(expected);
    expect(rectFromDrag(10, 2, 3, 7)).toEqual(expected);
  });

  it("rounds to whole pixels", () => {
    expect(rectFromDrag(1.2, 0.8, 4.9, 3.1)).toEqual({ top: 1, left: 1, width: 4, height: 2 });
  });
});

describe("cropProblem", () => {
  it("accepts in-bounds rectangles and the full frame", () => {
    expect(cropProblem({ top: 2, left: 2, height: 8, width: 8 }, 32)).toBeNull();
    expect(cropProblem(fullFrame(32), 32)).toBeNull();
  });

  it("rejects empty, negative, oversized, and fractional rectangles", () => {
    expect(cropProblem({ top: 0, left: 0, height: 0, width: 5 }, 32)).toMatch("empty");
    expect(cropProblem({ top: -1, left: 0, height: 4, width: 4 }, 32)).toMatch("outside");
    expect(cropProblem({ top: 30, left: 0, height: 4, width: 4 }, 32)).toMatch("exceeds");
    expect(cropProblem({ top: 0.5, left: 0, height: 4, width: 4 }, 32)).toMatch("whole pixels");
  });
});

describe("pasteProblem", () => {
  it("checks the pasted rectangle against the frame", () => {
    const rect = { top: 0, left: 0, height: 8, width: 8 };
    expect(pasteProblem(rect, [24, 24], 32)).toBeNull();
    expect(pasteProblem(rect, [25, 0], 32)).toMatch("outside");
    expect(pasteProblem(rect, [-1, 0], 32)).toMatch("outside");
  });
});

describe("diffusion submission", () => {
  it("submits exactly the previewed rectangle", async () => {
    const mock = makeMockService();
    const store = new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
    await store.init();
    store.setCrop({ top: 2, left: 3, height: 8, width: 9 });
    await store.diffuse("target-img", "context-img", [4, 5], 1);
    const call = mock.calls.find((c) => c.path === "/diffuse");
    expect(call?.body.crop).toEqual([2, 3, 8, 9]);
    expect(call?.body.paste).toEqual([4, 5]);
    expect(call?.body.feather).toBe(1);
    expect(store.displays.stitched).toBe("stitched-crop2,3,8,9");
    expect(store.displays.diffused).toBe("diffused-crop2,3,8,9");
  });

  it("blocks out-of-bounds crops before anything is sent", async () => {
    const mock = makeMockService();
    const store = new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
    await store.init(); // resolution 32 from /health
    store.setCrop({ top: 30, left: 0, height: 8, width: 8 });
    await store.diffuse("target-img", "context-img");
    await flush();
    expect(mock.calls.filter((c) => c.path === "/diffuse")).toHaveLength(0);
    expect(store.error).toMatch("exceeds the 32px frame");
  });

  it("requires a crop rectangle", async () => {
    const mock = makeMockService();
    const store = new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
    await store.init();
    await store.diffuse("target-img", "context-img");
    expect(mock.calls.filter((c) => c.path === "/diffuse")).toHaveLength(0);
    expect(store.error).toMatch("crop");
  });
});
