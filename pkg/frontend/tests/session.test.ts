import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { EditorStore } from "../src/store";
import { flush, makeMockService } from "./mock";

describe("session round trip", () => {
  it("restore replays the stored requests and reproduces the displays", async () => {
    const mock = makeMockService();
    const store = new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
    await store.init();
    await store.invert("src-a", { steps: 120 });
    await store.invert("src-b");
    store.setSlider("shade", 1.5);
    store.setPair(0, 1);
    store.setLam(0.25);
    await flush();
    const snapshot = store.serialize();
    const before = { ...store.displays };

    // a brand-new store against a brand-new service connection
    const mock2 = makeMockService();
    const store2 = new EditorStore(new ApiClient("", mock2.fetchImpl), { debounceMs: 0 });
    await store2.init();
    await store2.restore(snapshot);
    await flush();

    expect(store2.displays.edited).toBe(before.edited);
    expect(store2.displays.interpolated).toBe(before.interpolated);
    expect(store2.items.map((it) => it.reconstruction)).toEqual(
      store.items.map((it) => it.reconstruction),
    );
    expect(store2.sliders["shade"]).toBe(1.5);
    expect(store2.lam).toBe(0.25);
    expect(mock2.calls.filter((c) => c.path === "/invert")).toHaveLength(2);
    // the replayed inversion carries its original parameters
    expect(mock2.calls.find((c) => c.path === "/invert")?.body.params).toEqual({ steps: 120 });
    // same checkpoint on both ends: no staleness notice
    expect(store2.error).toBeNull();
  });

  it("flags a session saved against a different checkpoint", async () => {
    const mock = makeMockService();
    const store = new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
    await store.init();
    await store.invert("src-a");
    const snapshot = store.serialize().replace("test-bundle", "old-bundle");

    const store2 = new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
    await store2.init();
    await store2.restore(snapshot);
    await flush();

    // still replays — codes are re-derived by the live server
    expect(store2.items).toHaveLength(1);
    expect(store2.error).toContain("old-bundle");
    expect(store2.error).toContain("test-bundle");
  });

  it("serialization survives a JSON round trip unchanged", async () => {
    const mock = makeMockService();
    const store = new EditorStore(new ApiClient("", mock.fetchImpl), { debounceMs: 0 });
    await store.init();
    await store.invert("src-a");
    store.setCrop({ top: 2, left: 3, height: 8, width: 9 });
    const one = store.serialize();
    expect(JSON.parse(one)).toEqual(JSON.parse(JSON.stringify(JSON.parse(one))));
    expect(JSON.parse(one).crop).toEqual({ top: 2, left: 3, height: 8, width: 9 });
  });
});
