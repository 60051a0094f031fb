/** A fetch stub implementing the service's observable contract:
 * invert returns a reconstruction for a code, edit at alpha 0 and
 * interpolation endpoints return those exact reconstruction bytes
 * (the real server renders the same code to the same PNG). */

import { FetchLike } from "../src/api";

export interface RecordedCall {
  path: string;
  body: any;
}

export interface HeldResponse {
  body: any;
  release: () => void;
}

export interface MockOptions {
  /** Hold /edit responses so tests control their resolution order. */
  manualEdit?: boolean;
  /** Fail all /invert calls with this status and message. */
  failInvert?: { status: number; error: string };
}

export function makeMockService(opts: MockOptions = {}) {
  const calls: RecordedCall[] = [];
  const held: HeldResponse[] = [];
  const recs = new Map<number, string>();
  let nextCode = 1;

  const respond = (data: unknown, status = 200): Response =>
    ({ ok: status < 400, status, json: async () => data }) as unknown as Response;

  const route = (path: string, body: any): { data: unknown; status: number } => {
    if (path === "/health") {
      return {
        status: 200,
        data: {
          status: "ok", checkpoint: "test-bundle", resolution: 32, layers: 8,
          dim: 64, max_steps: 200, has_encoder: true, has_extractor: true,
        },
      };
    }
    if (path === "/boundaries") {
      return {
        status: 200,
        data: {
          alpha_range: [-5, 5],
          boundaries: [
            { attribute: "shade", dim: 64, train_accuracy: 0.9 },
            { attribute: "size", dim: 64, train_accuracy: 0.95 },
          ],
        },
      };
    }
    if (path === "/invert") {
      if (opts.failInvert !== undefined) {
        return { status: opts.failInvert.status, data: { error: opts.failInvert.error } };
      }
      const id = nextCode++;
      const rec = `rec-of-${body.image}`;
      recs.set(id, rec);
      return {
        status: 200,
        data: {
          image: rec,
          code: { space: "W", layers: 8, dim: 1, values: [id] },
          losses: { pixel: 1.5, perceptual: 220.0, domain: 0.4, total: 2.311 },
          best_step: 17,
          resolved: { steps: body.params?.steps ?? 200 },
          timing: { seconds: 0.01 },
        },
      };
    }
    if (path === "/edit") {
      const id = body.code.values[0];
      const image = body.alpha === 0 ? recs.get(id) : `edit-${id}-alpha${body.alpha}`;
      return {
        status: 200,
        data: { image, code: body.code, losses: null, resolved: {}, timing: { seconds: 0.01 } },
      };
    }
    if (path === "/interpolate") {
      const a = body.code_a.values[0];
      const b = body.code_b.values[0];
      const image =
        body.lam === 0 ? recs.get(a) : body.lam === 1 ? recs.get(b)
        : `interp-${a}-${b}-${body.lam}`;
      return {
        status: 200,
        data: { image, code: body.code_a, resolved: { lam: body.lam }, timing: { seconds: 0.01 } },
      };
    }
    if (path === "/diffuse") {
      return {
        status: 200,
        data: {
          image: `diffused-crop${body.crop.join(",")}`,
          stitched: `stitched-crop${body.crop.join(",")}`,
          code: { space: "W", layers: 8, dim: 1, values: [0] },
          losses: { pixel: 2.0, perceptual: 250.0, domain: 0.5, total: 3.0125 },
          resolved: { crop: body.crop, paste: body.paste, feather: body.feather },
          timing: { seconds: 0.02 },
        },
      };
    }
    return { status: 404, data: { error: `unknown path ${path}` } };
  };

  const fetchImpl: FetchLike = (url, init) => {
    const path = url.replace(/^https?:\/\/[^/]*/, "");
    const body = init?.body !== undefined ? JSON.parse(init.body as string) : null;
    calls.push({ path, body });
    const { data, status } = route(path, body);
    if (opts.manualEdit === true && path === "/edit") {
      return new Promise<Response>((resolve) => {
        held.push({ body, release: () => resolve(respond(data, status)) });
      });
    }
    return Promise.resolve(respond(data, status));
  };

  return { fetchImpl, calls, held, recs };
}

/** Let queued promise callbacks and zero-delay timers run. */
export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
