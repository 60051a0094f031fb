/** DOM wiring. Renders whatever the store holds; never talks to the service
 * directly and never computes pixels itself. */

import { fileToBase64, showImage } from "./canvas";
import { rectFromDrag } from "./crop";
import { EditorStore } from "./store";
import { DISPLAY_SCALE } from "./upscale";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function section(title: string): HTMLElement {
  const box = el("section", { class: "panel" });
  box.appendChild(el("h2", {}, title));
  return box;
}

export class EditorApp {
  private store: EditorStore;
  private root: HTMLElement;

  private status = el("div", { class: "status" });
  private errorLine = el("div", { class: "error" });
  private originalCanvas = el("canvas", { class: "pix" });
  private reconCanvas = el("canvas", { class: "pix" });
  private editedCanvas = el("canvas", { class: "pix" });
  private interpCanvas = el("canvas", { class: "pix" });
  private stitchedCanvas = el("canvas", { class: "pix" });
  private diffusedCanvas = el("canvas", { class: "pix" });
  private lossTable = el("table", { class: "losses" });
  private sliderBox = el("div", { class: "sliders" });
  private pairSelects: [HTMLSelectElement, HTMLSelectElement] = [el("select"), el("select")];
  private lamInput = el("input", { type: "range", min: "0", max: "1", step: "0.01", value: "0" });
  private cropLabel = el("span", {}, "no crop");
  private contextB64: string | null = null;
  private dragStart: [number, number] | null = null;

  // deduplicate canvas redraws: remember what each canvas currently shows
  private shown = new Map<HTMLCanvasElement, string>();

  constructor(root: HTMLElement, store: EditorStore) {
    this.root = root;
    this.store = store;
    this.build();
    store.subscribe(() => this.render());
    void store.init().then(() => this.buildSliders());
  }

  private build(): void {
    this.root.appendChild(this.status);
    this.root.appendChild(this.errorLine);

    const invertBox = section("Invert");
    const file = el("input", { type: "file", accept: "image/png" });
    const steps = el("input", { type: "number", value: "200", min: "0" });
    const run = el("button", {}, "Invert");
    run.addEventListener("click", () => {
      const picked = file.files?.[0];
      if (picked === undefined) return;
      void fileToBase64(picked).then((b64) =>
        this.store.invert(b64, { steps: Number(steps.value) }),
      );
    });
    const row = el("div", { class: "row" });
    for (const node of [file, el("label", {}, "steps"), steps, run]) row.appendChild(node);
    invertBox.appendChild(row);
    const pics = el("div", { class: "row" });
    pics.appendChild(this.captioned(this.originalCanvas, "original"));
    pics.appendChild(this.captioned(this.reconCanvas, "reconstruction"));
    invertBox.appendChild(pics);
    invertBox.appendChild(this.lossTable);
    this.root.appendChild(invertBox);

    const editBox = section("Attribute sliders");
    editBox.appendChild(this.sliderBox);
    editBox.appendChild(this.captioned(this.editedCanvas, "edited"));
    this.root.appendChild(editBox);

    const interpBox = section("Interpolate");
    const pairRow = el("div", { class: "row" });
    for (const sel of this.pairSelects) pairRow.appendChild(sel);
    const setPair = el("button", {}, "Set pair");
    setPair.addEventListener("click", () => {
      this.store.setPair(Number(this.pairSelects[0].value), Number(this.pairSelects[1].value));
      this.store.setLam(Number(this.lamInput.value));
    });
    pairRow.appendChild(setPair);
    interpBox.appendChild(pairRow);
    this.lamInput.addEventListener("input", () => this.store.setLam(Number(this.lamInput.value)));
    interpBox.appendChild(this.lamInput);
    interpBox.appendChild(this.captioned(this.interpCanvas, "blend"));
    this.root.appendChild(interpBox);

    const diffBox = section("Diffuse");
    const ctxFile = el("input", { type: "file", accept: "image/png" });
    ctxFile.addEventListener("change", () => {
      const picked = ctxFile.files?.[0];
      if (picked !== undefined) {
        void fileToBase64(picked).then((b64) => (this.contextB64 = b64));
      }
    });
    const pasteTop = el("input", { type: "number", value: "0" });
    const pasteLeft = el("input", { type: "number", value: "0" });
    const feather = el("input", { type: "number", value: "0", min: "0" });
    const runDiff = el("button", {}, "Diffuse crop into context");
    runDiff.addEventListener("click", () => {
      const item = this.store.selectedItem();
      if (item === null || this.contextB64 === null) return;
      void this.store.diffuse(
        item.source,
        this.contextB64,
        [Number(pasteTop.value), Number(pasteLeft.value)],
        Number(feather.value),
      );
    });
    const controls = el("div", { class: "row" });
    for (const node of [
      el("label", {}, "context"), ctxFile,
      el("label", {}, "paste top/left"), pasteTop, pasteLeft,
      el("label", {}, "feather"), feather,
      runDiff, this.cropLabel,
    ]) controls.appendChild(node);
    diffBox.appendChild(controls);
    const outRow = el("div", { class: "row" });
    outRow.appendChild(this.captioned(this.stitchedCanvas, "stitched"));
    outRow.appendChild(this.captioned(this.diffusedCanvas, "diffused"));
    diffBox.appendChild(outRow);
    this.root.appendChild(diffBox);

    // drag a rectangle on the original image to pick the diffusion crop
    this.originalCanvas.addEventListener("mousedown", (ev) => {
      this.dragStart = this.canvasPoint(ev);
    });
    this.originalCanvas.addEventListener("mouseup", (ev) => {
      if (this.dragStart === null) return;
      const [x0, y0] = this.dragStart;
      const [x1, y1] = this.canvasPoint(ev);
      this.dragStart = null;
      this.store.setCrop(rectFromDrag(x0, y0, x1, y1));
    });

    const sessionBox = section("Session");
    const save = el("button", {}, "Save session");
    save.addEventListener("click", () => {
      const blob = new Blob([this.store.serialize()], { type: "application/json" });
      const link = el("a", { href: URL.createObjectURL(blob), download: "session.json" });
      link.click();
    });
    const load = el("input", { type: "file", accept: "application/json" });
    load.addEventListener("change", () => {
      const picked = load.files?.[0];
      if (picked !== undefined) {
        void picked.text().then((text) => this.store.restore(text));
      }
    });
    const sessionRow = el("div", { class: "row" });
    sessionRow.appendChild(save);
    sessionRow.appendChild(load);
    sessionBox.appendChild(sessionRow);
    this.root.appendChild(sessionBox);
  }

  private captioned(canvas: HTMLCanvasElement, label: string): HTMLElement {
    const box = el("figure");
    box.appendChild(canvas);
    box.appendChild(el("figcaption", {}, label));
    return box;
  }

  private canvasPoint(ev: MouseEvent): [number, number] {
    const rect = this.originalCanvas.getBoundingClientRect();
    return [
      (ev.clientX - rect.left) / DISPLAY_SCALE,
      (ev.clientY - rect.top) / DISPLAY_SCALE,
    ];
  }

  private buildSliders(): void {
    this.sliderBox.textContent = "";
    const [lo, hi] = this.store.alphaRange;
    for (const b of this.store.boundaries) {
      const row = el("div", { class: "row" });
      const input = el("input", {
        type: "range",
        min: String(lo),
        max: String(hi),
        step: "0.1",
        value: "0",
        "data-attribute": b.attribute,
      });
      input.addEventListener("input", () =>
        this.store.setSlider(b.attribute, Number(input.value)),
      );
      const value = el("span", {}, "0");
      input.addEventListener("input", () => (value.textContent = input.value));
      row.appendChild(el("label", {}, `${b.attribute} (acc ${b.train_accuracy.toFixed(2)})`));
      row.appendChild(input);
      row.appendChild(value);
      this.sliderBox.appendChild(row);
    }
    this.render();
  }

  private show(canvas: HTMLCanvasElement, b64: string | null): void {
    if (b64 === null || this.shown.get(canvas) === b64) return;
    this.shown.set(canvas, b64);
    void showImage(canvas, b64);
  }

  private render(): void {
    const store = this.store;
    this.status.textContent =
      store.checkpoint === null
        ? "connecting..."
        : `checkpoint ${store.checkpoint} at ${store.resolution}px` +
          (store.busy > 0 ? " — working..." : "");
    this.errorLine.textContent = store.error ?? "";

    const item = store.selectedItem();
    if (item !== null) {
      this.show(this.originalCanvas, item.source);
      this.show(this.reconCanvas, item.reconstruction);
      this.lossTable.textContent = "";
      for (const [name, value] of Object.entries(item.losses)) {
        const tr = el("tr");
        tr.appendChild(el("td", {}, name));
        tr.appendChild(el("td", {}, value.toPrecision(5)));
        this.lossTable.appendChild(tr);
      }
    }
    for (const input of this.sliderBox.querySelectorAll("input")) {
      input.disabled = item === null;
    }

    for (const sel of this.pairSelects) {
      while (sel.options.length < store.items.length) {
        const idx = sel.options.length;
        sel.appendChild(el("option", { value: String(idx) }, `item ${idx + 1}`));
      }
    }
    this.show(this.editedCanvas, store.displays.edited);
    this.show(this.interpCanvas, store.displays.interpolated);
    this.show(this.stitchedCanvas, store.displays.stitched);
    this.show(this.diffusedCanvas, store.displays.diffused);
    this.cropLabel.textContent =
      store.crop === null
        ? "no crop"
        : `crop top ${store.crop.top} left ${store.crop.left} ` +
          `${store.crop.width}x${store.crop.height}`;
  }
}
