import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { LatestOnly, throttleTrailing } from "../src/debounce";

describe("throttleTrailing", () => {
  beforeEach(() => {
    vi.useFakeTimers();
    vi.setSystemTime(0);
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("bounds a drag burst to the configured rate and keeps the last value", () => {
    const calls: number[] = [];
    const move = throttleTrailing((x: number) => calls.push(x), 200);
    // a 500ms drag emitting a position every 10ms
    for (let i = 0; i < 50; i++) {
      move(i);
      vi.advanceTimersByTime(10);
    }
    vi.advanceTimersByTime(400); // let the trailing call land
    expect(calls.length).toBeLessThanOrEqual(5); // <= 5 requests per second
    expect(calls[0]).toBe(0); // leading fire keeps the UI responsive
    expect(calls[calls.length - 1]).toBe(49); // final position always sent
  });

  it("fires immediately when calls are far apart", () => {
    const calls: number[] = [];
    const move = throttleTrailing((x: number) => calls.push(x), 200);
    move(1);
    vi.advanceTimersByTime(500);
    move(2);
    expect(calls).toEqual([1, 2]);
  });

  it("coalesces positions inside one window to the newest", () => {
    const calls: number[] = [];
    const move = throttleTrailing((x: number) => calls.push(x), 200);
    move(1);
    move(2);
    move(3);
    vi.advanceTimersByTime(200);
    expect(calls).toEqual([1, 3]);
  });
});

describe("LatestOnly", () => {
  it("applies only the newest dispatch", async () => {
    const gate = new LatestOnly<string>();
    const applied: string[] = [];
    let releaseOld: (v: string) => void = () => {};
    const oldDone = gate.dispatch(
      () => new Promise<string>((resolve) => (releaseOld = resolve)),
      (v) => applied.push(v),
    );
    const newDone = gate.dispatch(() => Promise.resolve("new"), (v) => applied.push(v));
    expect(await newDone).toBe(true);
    releaseOld("old");
    expect(await oldDone).toBe(false);
    expect(applied).toEqual(["new"]);
  });

  it("invalidate drops whatever is in flight", async () => {
    const gate = new LatestOnly<string>();
    const applied: string[] = [];
    const done = gate.dispatch(() => Promise.resolve("x"), (v) => applied.push(v));
    gate.invalidate();
    expect(await done).toBe(false);
    expect(applied).toEqual([]);
  });
});
