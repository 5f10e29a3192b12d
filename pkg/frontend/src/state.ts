/**
 * Viewer state: active mode, category, boxes, draft mirror, status line.
 *
 * Boxes are held in the centered cloud frame (the frame the point stream is
 * served in); labels arrive/leave in absolute coordinates and are shifted by
 * the cloud's center offset on the way through. Mode transitions mirror the
 * core's legality rules: switching modes drops any partial draft, finalize
 * is only reachable through a complete draft, and all finished box geometry
 * comes from core responses verbatim.
 */

import type { FaceName, Vec3 } from "./math.js";
import { normalizeDegrees } from "./math.js";
import type { BoxJson, CategoryJson, LabelsJson } from "./protocol.js";

export type Mode = "picking" | "spanning" | "correction";

export interface SpanningDraft {
  kind: "spanning";
  picks: Vec3[];
  preview: BoxJson | null; // core-computed partial preview
}

export interface PickingDraft {
  kind: "picking";
  yawDeg: number; // accumulated scroll, applied by the core on commit
  hover: Vec3 | null;
}

export type Draft = SpanningDraft | PickingDraft;

export class ViewerState {
  mode: Mode = "picking";
  category: CategoryJson;
  boxes: BoxJson[] = [];
  selectedBox: number | null = null;
  hoveredFace: FaceName | null = null;
  draft: Draft = { kind: "picking", yawDeg: 0, hover: null };
  status = "";
  dirty = false; // unsaved label edits

  constructor(readonly categories: CategoryJson[]) {
    if (categories.length === 0) {
      throw new Error("need at least one category");
    }
    this.category = categories[0];
  }

  setMode(mode: Mode): void {
    if (mode === this.mode) return;
    this.mode = mode;
    this.resetDraft();
    this.hoveredFace = null;
    if (mode !== "correction") this.selectedBox = null;
  }

  setCategory(name: string): void {
    const found = this.categories.find((c) => c.name === name);
    if (!found) return;
    this.category = found;
    this.resetDraft();
  }

  resetDraft(): void {
    this.draft =
      this.mode === "spanning"
        ? { kind: "spanning", picks: [], preview: null }
        : { kind: "picking", yawDeg: this.pickingYaw(), hover: null };
  }

  private pickingYaw(): number {
    // yaw survives across picking commits, like the core's method state
    return this.draft.kind === "picking" ? this.draft.yawDeg : 0;
  }

  spanningPickCount(): number {
    return this.draft.kind === "spanning" ? this.draft.picks.length : 0;
  }

  addSpanPick(point: Vec3): void {
    if (this.draft.kind !== "spanning") {
      throw new Error("not in spanning mode");
    }
    if (this.draft.picks.length >= 4) {
      throw new Error("span already has four picks");
    }
    this.draft.picks.push(point);
  }

  setSpanPreview(preview: BoxJson | null): void {
    if (this.draft.kind === "spanning") this.draft.preview = preview;
  }

  scrollYaw(notches: number, stepDeg: number): void {
    if (this.draft.kind !== "picking") return;
    this.draft.yawDeg = normalizeDegrees(this.draft.yawDeg + notches * stepDeg);
  }

  /** Append a finished box exactly as the core returned it. */
  commitBox(box: BoxJson): number {
    this.boxes.push(box);
    this.dirty = true;
    this.resetDraft();
    return this.boxes.length - 1;
  }

  replaceBox(index: number, box: BoxJson): void {
    if (index < 0 || index >= this.boxes.length) {
      throw new Error(`no box at index ${index}`);
    }
    this.boxes[index] = box;
    this.dirty = true;
  }

  removeBox(index: number): void {
    this.boxes.splice(index, 1);
    if (this.selectedBox !== null) {
      if (this.selectedBox === index) this.selectedBox = null;
      else if (this.selectedBox > index) this.selectedBox -= 1;
    }
    this.dirty = true;
  }

  setStatus(text: string): void {
    this.status = text;
  }

  colorFor(box: BoxJson): string {
    return (
      this.categories.find((c) => c.name === box.name)?.color ?? "#999999"
    );
  }
}

// --- label frame conversion (wire = absolute, viewer = centered) --------------

function shiftBox(box: BoxJson, offset: number[], sign: 1 | -1): BoxJson {
  return {
    ...box,
    centroid: {
      x: box.centroid.x + sign * offset[0],
      y: box.centroid.y + sign * offset[1],
      z: box.centroid.z + sign * offset[2],
    },
  };
}

export function boxesFromWire(labels: LabelsJson): BoxJson[] {
  const offset = labels.center_offset ?? [0, 0, 0];
  return labels.objects.map((box) => shiftBox(box, offset, -1));
}

export function boxesToWire(
  boxes: BoxJson[],
  cloudName: string,
  cloudPath: string,
  offset: number[],
): LabelsJson {
  return {
    cloud_name: cloudName,
    path: cloudPath,
    center_offset: offset,
    objects: boxes.map((box) => {
      const { complete, clamped, ...clean } = shiftBox(box, offset, +1);
      return clean;
    }),
  };
}
