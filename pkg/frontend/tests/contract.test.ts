/** UI contract: what the editor displays for the identity positions, and that
 * out-of-order responses can never clobber newer ones. */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { EditorStore } from "../src/store";
import { flush, makeMockService } from "./mock";

function freshStore(mock: ReturnType<typeof makeMockService>): EditorStore {
  return new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
}

describe("slider alpha zero", () => {
  it("displays pixels identical to the reconstruction", async () => {
    const mock = makeMockService();
    const store = freshStore(mock);
    await store.init();
    const item = await store.invert("src-a");

    store.setSlider("size", 0);
    await flush();
    expect(store.displays.edited).toBe(item.reconstruction);
    // the identity edit never even needs the network
    expect(mock.calls.filter((c) => c.path === "/edit")).toHaveLength(0);

    store.setSlider("size", 2);
    await flush();
    expect(store.displays.edited).toBe("edit-1-alpha2");

    store.setSlider("size", 0);
    await flush();
    expect(store.displays.edited).toBe(item.reconstruction);
  });

  it("clamps alpha to the server-provided range", async () => {
    const mock = makeMockService();
    const store = freshStore(mock);
    await store.init();
    await store.invert("src-a");
    store.setSlider("size", 99);
    await flush();
    expect(store.sliders["size"]).toBe(5);
    expect(store.displays.edited).toBe("edit-1-alpha5");
  });

  it("does nothing before an inversion exists", async () => {
    const mock = makeMockService();
    const store = freshStore(mock);
    await store.init();
    store.setSlider("size", 1);
    await flush();
    expect(mock.calls.filter((c) => c.path === "/edit")).toHaveLength(0);
    expect(store.displays.edited).toBeNull();
  });
});

describe("interpolation scrubber", () => {
  it("endpoint positions display the two reconstructions", async () => {
    const mock = makeMockService();
    const store = freshStore(mock);
    await store.init();
    const a = await store.invert("src-a");
    const b = await store.invert("src-b");
    store.setPair(0, 1);

    store.setLam(0);
    await flush();
    expect(store.displays.interpolated).toBe(a.reconstruction);

    store.setLam(1);
    await flush();
    expect(store.displays.interpolated).toBe(b.reconstruction);

    store.setLam(0.5);
    await flush();
    expect(store.displays.interpolated).toBe("interp-1-2-0.5");
  });
});

describe("stale responses", () => {
  it("never overwrite newer ones, regardless of arrival order", async () => {
    const mock = makeMockService({ manualEdit: true });
    const store = freshStore(mock);
    await store.init();
    await store.invert("src-a");

    store.setSlider("size", 1);
    store.setSlider("size", 2);
    await flush();
    expect(mock.held).toHaveLength(2);
    expect(mock.held[0].body.alpha).toBe(1);
    expect(mock.held[1].body.alpha).toBe(2);

    // the newer request resolves first...
    mock.held[1].release();
    await flush();
    expect(store.displays.edited).toBe("edit-1-alpha2");

    // ...and the stale one arriving afterwards must be dropped
    mock.held[0].release();
    await flush();
    expect(store.displays.edited).toBe("edit-1-alpha2");
  });

  it("drops in-flight edits when the selection changes", async () => {
    const mock = makeMockService({ manualEdit: true });
    const store = freshStore(mock);
    await store.init();
    await store.invert("src-a");
    await store.invert("src-b");

    store.select(0);
    store.setSlider("size", 3);
    await flush();
    store.select(1); // invalidates the in-flight edit of item 0
    mock.held[0].release();
    await flush();
    expect(store.displays.edited).toBeNull();
  });
});

describe("loss panel", () => {
  it("holds exactly the numbers the server returned", async () => {
    const mock = makeMockService();
    const store = freshStore(mock);
    await store.init();
    const item = await store.invert("src-a");
    expect(item.losses).toEqual({ pixel: 1.5, perceptual: 220.0, domain: 0.4, total: 2.311 });
  });
});

describe("server errors", () => {
  it("surface the server's message", async () => {
    const mock = makeMockService({ failInvert: { status: 422, error: "mask is all zero" } });
    const store = freshStore(mock);
    await store.init();
    await expect(store.invert("src-a")).rejects.toThrow("mask is all zero");
    expect(store.error).toBe("mask is all zero");
  });
});
