/**
 * DOM side panel: mode switch, category picker, box list, parameter fields,
 * progress indicator, cloud navigation, status line, FPS meter.
 *
 * Field edits never mutate boxes locally; the host wires them to the core's
 * transform endpoint and feeds the response back through `update`.
 */

import { normalizeDegrees } from "./math.js";
import type { BoxJson, CategoryJson, Progress } from "./protocol.js";
import type { Mode, ViewerState } from "./state.js";

export interface PanelCallbacks {
  onMode(mode: Mode): void;
  onCategory(name: string): void;
  onSelectBox(index: number | null): void;
  onDeleteBox(index: number): void;
  onFieldEdit(field: FieldName, value: number): void;
  onNavigate(step: 1 | -1): void;
  onSave(): void;
}

export type FieldName =
  | "cx" | "cy" | "cz"
  | "length" | "width" | "height"
  | "rx" | "ry" | "rz";

const FIELD_LABELS: [FieldName, string][] = [
  ["cx", "center x"], ["cy", "center y"], ["cz", "center z"],
  ["length", "length"], ["width", "width"], ["height", "height"],
  ["rx", "roll °"], ["ry", "pitch °"], ["rz", "yaw °"],
];

export function fieldValue(box: BoxJson, field: FieldName): number {
  switch (field) {
    case "cx": return box.centroid.x;
    case "cy": return box.centroid.y;
    case "cz": return box.centroid.z;
    case "length": return box.dimensions.length;
    case "width": return box.dimensions.width;
    case "height": return box.dimensions.height;
    case "rx": return box.rotations.x;
    case "ry": return box.rotations.y;
    case "rz": return box.rotations.z;
  }
}

/** Angle fields display normalized into (-180, 180], e.g. 370 shows as 10. */
export function displayValue(field: FieldName, value: number): string {
  const v = field.startsWith("r") ? normalizeDegrees(value) : value;
  return (Math.round(v * 1e4) / 1e4).toString();
}

export class Panels {
  private modeButtons = new Map<Mode, HTMLButtonElement>();
  private categorySelect: HTMLSelectElement;
  private boxList: HTMLElement;
  private fields = new Map<FieldName, HTMLInputElement>();
  private progressEl: HTMLElement;
  private cloudNameEl: HTMLElement;
  private statusEl: HTMLElement;
  private fpsEl: HTMLElement;

  constructor(
    root: HTMLElement,
    categories: CategoryJson[],
    private callbacks: PanelCallbacks,
  ) {
    root.innerHTML = "";

    const modeRow = el("div", "row");
    for (const mode of ["picking", "spanning", "correction"] as Mode[]) {
      const button = el("button") as HTMLButtonElement;
      button.textContent = mode;
      button.addEventListener("click", () => callbacks.onMode(mode));
      this.modeButtons.set(mode, button);
      modeRow.appendChild(button);
    }
    root.appendChild(section("Mode", modeRow));

    this.categorySelect = el("select") as HTMLSelectElement;
    for (const category of categories) {
      const option = document.createElement("option");
      option.value = category.name;
      option.textContent = category.name;
      this.categorySelect.appendChild(option);
    }
    this.categorySelect.addEventListener("change", () =>
      callbacks.onCategory(this.categorySelect.value),
    );
    root.appendChild(section("Category", this.categorySelect));

    this.boxList = el("div", "box-list");
    root.appendChild(section("Boxes", this.boxList));

    const grid = el("div", "field-grid");
    for (const [field, label] of FIELD_LABELS) {
      const wrap = el("label", "field");
      wrap.textContent = label;
      const input = el("input") as HTMLInputElement;
      input.type = "number";
      input.step = "0.01";
      input.addEventListener("change", () => {
        const value = parseFloat(input.value);
        if (Number.isFinite(value)) callbacks.onFieldEdit(field, value);
      });
      wrap.appendChild(input);
      this.fields.set(field, input);
      grid.appendChild(wrap);
    }
    root.appendChild(section("Parameters", grid));

    const nav = el("div", "row");
    const prev = el("button") as HTMLButtonElement;
    prev.textContent = "← prev";
    prev.addEventListener("click", () => callbacks.onNavigate(-1));
    const save = el("button") as HTMLButtonElement;
    save.textContent = "save";
    save.addEventListener("click", () => callbacks.onSave());
    const next = el("button") as HTMLButtonElement;
    next.textContent = "next →";
    next.addEventListener("click", () => callbacks.onNavigate(1));
    nav.append(prev, save, next);
    this.cloudNameEl = el("div", "cloud-name");
    this.progressEl = el("div", "progress");
    const navSection = section("Clouds", nav);
    navSection.append(this.cloudNameEl, this.progressEl);
    root.appendChild(navSection);

    this.statusEl = el("div", "status");
    this.fpsEl = el("div", "fps");
    root.append(this.statusEl, this.fpsEl);
  }

  update(
    state: ViewerState,
    cloudName: string,
    progress: Progress | null,
    fps: number,
  ): void {
    for (const [mode, button] of this.modeButtons) {
      button.classList.toggle("active", state.mode === mode);
    }
    this.categorySelect.value = state.category.name;

    this.boxList.innerHTML = "";
    state.boxes.forEach((box, index) => {
      const row = el("div", "box-row");
      row.classList.toggle("selected", state.selectedBox === index);
      const label = el("span");
      label.textContent = `${index}: ${box.name}`;
      label.addEventListener("click", () => this.callbacks.onSelectBox(index));
      const remove = el("button") as HTMLButtonElement;
      remove.textContent = "×";
      remove.addEventListener("click", () => this.callbacks.onDeleteBox(index));
      row.append(label, remove);
      this.boxList.appendChild(row);
    });

    const box = state.selectedBox !== null ? state.boxes[state.selectedBox] : null;
    for (const [field, input] of this.fields) {
      input.disabled = box === null;
      if (document.activeElement !== input) {
        input.value = box === null ? "" : displayValue(field, fieldValue(box, field));
      }
    }

    this.cloudNameEl.textContent = cloudName + (state.dirty ? " *" : "");
    if (progress) {
      this.progressEl.textContent =
        `${progress.labeled_clouds}/${progress.total_clouds} labeled ` +
        `(${Math.round(progress.fraction * 100)}%)`;
    }
    this.statusEl.textContent = state.status;
    this.fpsEl.textContent = fps > 0 ? `${fps.toFixed(0)} fps` : "";
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

function section(title: string, content: HTMLElement): HTMLElement {
  const wrap = el("section");
  const heading = el("h3");
  heading.textContent = title;
  wrap.append(heading, content);
  return wrap;
}
