import { ApiClient } from "./api";
import { CropRect, cropProblem, pasteProblem } from "./crop";
import { LatestOnly, throttleTrailing } from "./debounce";
import {
  BoundaryInfo,
  CodeWire,
  InversionParams,
  LossBreakdown,
} from "./types";

/** One inverted image with everything needed to edit it and to replay it. */
export interface InvertedItem {
  id: number;
  source: string; // base64 PNG as uploaded
  reconstruction: string; // base64 PNG returned by the service
  code: CodeWire;
  losses: LossBreakdown;
  params: InversionParams;
}

export interface Displays {
  edited: string | null;
  interpolated: string | null;
  stitched: string | null;
  diffused: string | null;
}

/** Serializable session: enough to replay every displayed image. */
export interface SessionState {
  checkpoint: string | null;
  items: { source: string; params: InversionParams }[];
  sliders: Record<string, number>;
  selected: number | null;
  lastEdit: { attribute: string; alpha: number } | null;
  pair: [number, number] | null;
  lam: number;
  crop: CropRect | null;
}

export interface StoreOptions {
  /** Minimum interval between slider-driven requests (<= 5/s by default). */
  debounceMs?: number;
  now?: () => number;
}

const DEFAULT_ALPHA_RANGE: [number, number] = [-5, 5];

/**
 * View-model for the editor. All images shown in the UI are stored here as
 * the base64 payloads the service returned; the DOM layer only renders them.
 */
export class EditorStore {
  readonly api: ApiClient;

  items: InvertedItem[] = [];
  sliders: Record<string, number> = {};
  selected: number | null = null;
  lastEdit: { attribute: string; alpha: number } | null = null;
  pair: [number, number] | null = null;
  lam = 0;
  crop: CropRect | null = null;

  boundaries: BoundaryInfo[] = [];
  alphaRange: [number, number] = DEFAULT_ALPHA_RANGE;
  resolution = 32;
  checkpoint: string | null = null;

  displays: Displays = { edited: null, interpolated: null, stitched: null, diffused: null };
  error: string | null = null;
  busy = 0;

  private nextId = 1;
  private readonly debounceMs: number;
  private readonly now: () => number;
  private readonly editGate = new LatestOnly<string>();
  private readonly scrubGate = new LatestOnly<string>();
  private readonly editThrottles = new Map<string, (alpha: number) => void>();
  private scrubThrottle: ((lam: number) => void) | null = null;
  private listeners = new Set<() => void>();

  constructor(api: ApiClient, options: StoreOptions = {}) {
    this.api = api;
    this.debounceMs = options.debounceMs ?? 200;
    this.now = options.now ?? Date.now;
  }

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  private fail(err: unknown): void {
    this.error = err instanceof Error ? err.message : String(err);
    this.emit();
  }

  selectedItem(): InvertedItem | null {
    return this.selected === null ? null : this.items[this.selected] ?? null;
  }

  async init(): Promise<void> {
    const [health, bounds] = await Promise.all([this.api.health(), this.api.boundaries()]);
    this.resolution = health.resolution;
    this.checkpoint = health.checkpoint;
    this.boundaries = bounds.boundaries;
    this.alphaRange = bounds.alpha_range;
    for (const b of this.boundaries) {
      if (!(b.attribute in this.sliders)) this.sliders[b.attribute] = 0;
    }
    this.emit();
  }

  async invert(source: string, params: InversionParams = {}): Promise<InvertedItem> {
    this.busy++;
    this.emit();
    try {
      const resp = await this.api.invert({ image: source, params });
      const item: InvertedItem = {
        id: this.nextId++,
        source,
        reconstruction: resp.image,
        code: resp.code,
        losses: resp.losses,
        params,
      };
      this.items.push(item);
      this.selected = this.items.length - 1;
      this.error = null;
      return item;
    } catch (err) {
      this.fail(err);
      throw err;
    } finally {
      this.busy--;
      this.emit();
    }
  }

  select(index: number): void {
    if (index < 0 || index >= this.items.length) return;
    this.selected = index;
    this.editGate.invalidate(); // an in-flight edit belongs to the old item
    this.displays.edited = null;
    this.emit();
  }

  clampAlpha(alpha: number): number {
    const [lo, hi] = this.alphaRange;
    return Math.min(hi, Math.max(lo, alpha));
  }

  /**
   * Slider movement. Requests are throttled per attribute and the display is
   * last-write-wins: a slow response for an old position can never replace a
   * newer one (sequence-numbered by `editGate`).
   */
  setSlider(attribute: string, alpha: number): void {
    const item = this.selectedItem();
    if (item === null) return; // sliders are disabled until an inversion exists
    const clamped = this.clampAlpha(alpha);
    this.sliders[attribute] = clamped;
    this.lastEdit = { attribute, alpha: clamped };
    this.emit();
    let throttled = this.editThrottles.get(attribute);
    if (throttled === undefined) {
      throttled = throttleTrailing(
        (a: number) => this.requestEdit(attribute, a),
        this.debounceMs,
        this.now,
      );
      this.editThrottles.set(attribute, throttled);
    }
    throttled(clamped);
  }

  private requestEdit(attribute: string, alpha: number): void {
    const item = this.selectedItem();
    if (item === null) return;
    const work =
      alpha === 0
        ? // the zero edit is the identity, and the reconstruction is already
          // the service's rendering of this exact code
          () => Promise.resolve(item.reconstruction)
        : () => this.api.edit({ attribute, alpha, code: item.code }).then((r) => r.image);
    void this.editGate
      .dispatch(work, (image) => {
        this.displays.edited = image;
        this.error = null;
        this.emit();
      })
      .catch((err) => this.fail(err));
  }

  setPair(a: number, b: number): void {
    if (Math.min(a, b) < 0 || Math.max(a, b) >= this.items.length) return;
    this.pair = [a, b];
    this.scrubGate.invalidate();
    this.displays.interpolated = null;
    this.emit();
  }

  /** Scrubber movement; endpoints display the two stored reconstructions. */
  setLam(lam: number): void {
    if (this.pair === null) return;
    const clamped = Math.min(1, Math.max(0, lam));
    this.lam = clamped;
    this.emit();
    if (this.scrubThrottle === null) {
      this.scrubThrottle = throttleTrailing(
        (l: number) => this.requestInterpolation(l),
        this.debounceMs,
        this.now,
      );
    }
    this.scrubThrottle(clamped);
  }

  private requestInterpolation(lam: number): void {
    if (this.pair === null) return;
    const [ia, ib] = this.pair;
    const a = this.items[ia];
    const b = this.items[ib];
    if (a === undefined || b === undefined) return;
    let work: () => Promise<string>;
    if (lam === 0) {
      work = () => Promise.resolve(a.reconstruction);
    } else if (lam === 1) {
      work = () => Promise.resolve(b.reconstruction);
    } else {
      work = () =>
        this.api.interpolate({ code_a: a.code, code_b: b.code, lam }).then((r) => r.image);
    }
    void this.scrubGate
      .dispatch(work, (image) => {
        this.displays.interpolated = image;
        this.error = null;
        this.emit();
      })
      .catch((err) => this.fail(err));
  }

  setCrop(crop: CropRect | null): void {
    this.crop = crop;
    this.emit();
  }

  /**
   * Run diffusion of the crop of `target` into `context`. Bad rectangles are
   * rejected here, before anything is submitted.
   */
  async diffuse(
    target: string,
    context: string,
    paste: [number, number] = [0, 0],
    feather = 0,
    params: InversionParams = {},
  ): Promise<void> {
    if (this.crop === null) {
      this.error = "draw a crop rectangle first";
      this.emit();
      return;
    }
    const problem =
      cropProblem(this.crop, this.resolution) ??
      pasteProblem(this.crop, paste, this.resolution);
    if (problem !== null) {
      this.error = problem;
      this.emit();
      return;
    }
    this.busy++;
    this.emit();
    try {
      const resp = await this.api.diffuse({
        target,
        context,
        crop: [this.crop.top, this.crop.left, this.crop.height, this.crop.width],
        paste,
        feather,
        params,
      });
      this.displays.stitched = resp.stitched;
      this.displays.diffused = resp.image;
      this.error = null;
    } catch (err) {
      this.fail(err);
      return;
    } finally {
      this.busy--;
      this.emit();
    }
  }

  serialize(): string {
    const state: SessionState = {
      checkpoint: this.checkpoint,
      items: this.items.map((it) => ({ source: it.source, params: it.params })),
      sliders: { ...this.sliders },
      selected: this.selected,
      lastEdit: this.lastEdit,
      pair: this.pair,
      lam: this.lam,
      crop: this.crop,
    };
    return JSON.stringify(state);
  }

  /** Rebuild a session by replaying its stored requests against the service. */
  async restore(serialized: string): Promise<void> {
    const state = JSON.parse(serialized) as SessionState;
    this.items = [];
    this.displays = { edited: null, interpolated: null, stitched: null, diffused: null };
    for (const it of state.items) {
      await this.invert(it.source, it.params);
    }
    this.sliders = { ...this.sliders, ...state.sliders };
    this.selected = state.selected;
    this.crop = state.crop;
    if (state.lastEdit !== null && this.selectedItem() !== null) {
      this.setSlider(state.lastEdit.attribute, state.lastEdit.alpha);
    }
    if (state.pair !== null) {
      this.setPair(state.pair[0], state.pair[1]);
      this.setLam(state.lam);
    }
    if (state.checkpoint && this.checkpoint && state.checkpoint !== this.checkpoint) {
      // replayed codes come from the live models, so the session is usable —
      // but the images will differ from what was originally on screen
      this.error = `session was saved against checkpoint ${state.checkpoint}; server now runs ${this.checkpoint}`;
    }
    this.emit();
  }
}
