/**
 * Application wiring: canvas, pointer/keyboard input, protocol round trips.
 *
 * Navigation: left-drag orbits, right-drag pans, wheel zooms.
 * Wheel is context-sensitive: in picking mode it yaws the draft box, in
 * correction mode over a hovered face it pushes/pulls that side through the
 * core; otherwise it zooms.
 * Clicks read the local depth patch back from the renderer and POST it to
 * the selection endpoint; the returned 3D point feeds the active mode.
 * At most one mutating request is in flight; later ones queue.
 */

import {
  clampCamera,
  defaultCamera,
  pixelRay,
  rayBoxFace,
  type OrbitCamera,
  type Vec3,
} from "./math.js";
import { Panels, type FieldName } from "./panels.js";
import {
  ProtocolClient,
  ProtocolError,
  type BoxJson,
  type ConfigJson,
  type Progress,
  type SessionInfo,
  type TransformOp,
} from "./protocol.js";
import { PointRenderer, parseHexColor, type DrawableBox } from "./renderer.js";
import { depthPatch as softwareDepthPatch } from "./software_depth.js";
import { boxesFromWire, boxesToWire, ViewerState } from "./state.js";

const ORBIT_RATE_DEG = 0.57; // degrees per pixel of drag (~0.01 rad)

class App {
  private camera: OrbitCamera;
  private state!: ViewerState;
  private renderer!: PointRenderer;
  private panels!: Panels;
  private config!: ConfigJson;
  private session!: SessionInfo;
  private cloudIndex = 0;
  private positions: Float32Array = new Float32Array(0);
  private centerOffset: number[] = [0, 0, 0];
  private mutation: Promise<unknown> = Promise.resolve();
  private dragging: "orbit" | "pan" | null = null;
  private dragMoved = 0;
  private lastPointer: [number, number] = [0, 0];
  private frameTimes: number[] = [];

  constructor(
    private canvas: HTMLCanvasElement,
    private client: ProtocolClient,
  ) {
    this.camera = defaultCamera([canvas.width, canvas.height]);
  }

  async boot(): Promise<void> {
    const gl = this.canvas.getContext("webgl2", { preserveDrawingBuffer: false });
    if (!gl) throw new Error("WebGL2 required");
    this.renderer = new PointRenderer(gl);
    this.canvas.addEventListener("webglcontextlost", (e) => e.preventDefault());
    this.canvas.addEventListener("webglcontextrestored", () => this.renderer.restore());

    this.config = await this.client.config();
    this.session = await this.client.session();
    this.state = new ViewerState(this.config.categories);
    this.camera = {
      ...this.camera,
      fovDeg: this.config.viewer.fov_deg,
      near: this.config.viewer.near,
      far: this.config.viewer.far,
    };
    this.panels = new Panels(
      document.getElementById("panel")!,
      this.config.categories,
      {
        onMode: (mode) => {
          this.state.setMode(mode);
          this.state.setStatus(`${mode} mode`);
        },
        onCategory: (name) => this.state.setCategory(name),
        onSelectBox: (index) => {
          this.state.selectedBox = index;
          if (index !== null) this.state.setMode("correction");
        },
        onDeleteBox: (index) => this.state.removeBox(index),
        onFieldEdit: (field, value) => this.editField(field, value),
        onNavigate: (step) => void this.navigateClouds(step),
        onSave: () => void this.saveLabels(),
      },
    );
    this.bindInput();
    if (this.session.clouds.length > 0) {
      await this.loadCloud(0);
    } else {
      this.state.setStatus("no clouds in session folder");
    }
    requestAnimationFrame((t) => this.frame(t));
  }

  private async loadCloud(index: number): Promise<void> {
    this.cloudIndex = index;
    const entry = this.session.clouds[index];
    this.state.boxes = [];
    this.state.selectedBox = null;
    this.state.dirty = false;
    this.state.resetDraft();
    const payload = await this.client.points(entry.id); // once per cloud
    this.positions = payload.positions;
    this.renderer.uploadCloud(payload.positions, payload.colors);
    const labels = await this.client.labels(entry.id);
    this.centerOffset = labels.center_offset ?? [0, 0, 0];
    this.state.boxes = boxesFromWire(labels);
    this.fitCamera();
    this.state.setStatus(`loaded ${entry.name} (${payload.count} points)`);
  }

  private fitCamera(): void {
    let radius = 1;
    for (let i = 0; i < this.positions.length; i += 3) {
      const r = Math.hypot(
        this.positions[i], this.positions[i + 1], this.positions[i + 2],
      );
      if (r > radius) radius = r;
    }
    this.camera = clampCamera({
      ...this.camera,
      target: [0, 0, 0],
      distance: radius * 2.2,
    });
  }

  private async saveLabels(): Promise<void> {
    const entry = this.session.clouds[this.cloudIndex];
    const wire = boxesToWire(
      this.state.boxes, entry.name, entry.name, this.centerOffset,
    );
    await this.enqueue(async () => {
      await this.client.saveLabels(entry.id, wire);
      this.state.dirty = false;
      this.session = await this.client.session();
      this.state.setStatus(`saved ${this.state.boxes.length} boxes`);
    });
  }

  private async navigateClouds(step: 1 | -1): Promise<void> {
    if (this.state.dirty) {
      await this.saveLabels(); // auto-save before navigating
    }
    const count = this.session.clouds.length;
    const next = (this.cloudIndex + step + count) % count;
    await this.loadCloud(next);
  }

  /** Serialize mutating requests: one in flight, later ones queue. */
  private enqueue<T>(op: () => Promise<T>): Promise<T> {
    const next = this.mutation.then(op, op);
    this.mutation = next.catch(() => undefined);
    return next;
  }

  private bindInput(): void {
    const canvas = this.canvas;
    canvas.addEventListener("contextmenu", (e) => e.preventDefault());
    canvas.addEventListener("pointerdown", (e) => {
      canvas.setPointerCapture(e.pointerId);
      this.dragging = e.button === 2 ? "pan" : "orbit";
      this.dragMoved = 0;
      this.lastPointer = [e.offsetX, e.offsetY];
    });
    canvas.addEventListener("pointermove", (e) => {
      const [lx, ly] = this.lastPointer;
      const dx = e.offsetX - lx;
      const dy = e.offsetY - ly;
      this.lastPointer = [e.offsetX, e.offsetY];
      if (this.dragging) {
        this.dragMoved += Math.abs(dx) + Math.abs(dy);
        if (this.dragging === "orbit") {
          this.camera = clampCamera({
            ...this.camera,
            azimuthDeg: this.camera.azimuthDeg - dx * ORBIT_RATE_DEG,
            elevationDeg: this.camera.elevationDeg + dy * ORBIT_RATE_DEG,
          });
        } else {
          this.pan(dx, dy);
        }
      } else if (this.state.mode === "correction") {
        this.updateHoveredFace(e.offsetX, e.offsetY);
      }
    });
    canvas.addEventListener("pointerup", (e) => {
      const wasClick = this.dragging === "orbit" && this.dragMoved < 3;
      this.dragging = null;
      if (wasClick && e.button === 0) {
        void this.handleClick(e.offsetX, e.offsetY);
      }
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      const notches = e.deltaY > 0 ? 1 : -1;
      if (this.state.mode === "picking") {
        // wheel adjusts the draft yaw
        this.state.scrollYaw(-notches, this.config.steps.rotation_deg);
        return;
      }
      if (
        this.state.mode === "correction" &&
        this.state.hoveredFace &&
        this.state.selectedBox !== null
      ) {
        void this.pullHoveredFace(-notches);
        return;
      }
      this.camera = clampCamera({
        ...this.camera,
        distance:
          this.camera.distance * this.config.viewer.zoom_base ** -notches,
      });
    }, { passive: false });

    window.addEventListener("keydown", (e) => void this.handleKey(e.key));
  }

  private pan(dx: number, dy: number): void {
    const { fovDeg, distance, viewport } = this.camera;
    const perPixel =
      (2 * distance * Math.tan((fovDeg * Math.PI) / 360)) / viewport[1];
    const ray = pixelRay(this.camera, viewport[0] / 2, viewport[1] / 2);
    // view-plane basis via two more rays is overkill; reuse camera basis math
    void ray;
    const az = (this.camera.azimuthDeg * Math.PI) / 180;
    const el = (this.camera.elevationDeg * Math.PI) / 180;
    const right = [-Math.sin(az), Math.cos(az), 0];
    const up = [
      -Math.sin(el) * Math.cos(az),
      -Math.sin(el) * Math.sin(az),
      Math.cos(el),
    ];
    this.camera = clampCamera({
      ...this.camera,
      target: [
        this.camera.target[0] + perPixel * (dx * right[0] + dy * up[0]),
        this.camera.target[1] + perPixel * (dx * right[1] + dy * up[1]),
        this.camera.target[2] + perPixel * (dx * right[2] + dy * up[2]),
      ],
    });
  }

  private updateHoveredFace(px: number, py: number): void {
    if (this.state.selectedBox === null) {
      this.state.hoveredFace = null;
      return;
    }
    const box = this.state.boxes[this.state.selectedBox];
    const ray = pixelRay(this.camera, px, py);
    const hit = rayBoxFace(ray.origin, ray.dir, box);
    this.state.hoveredFace = hit ? hit.face : null;
  }

  private readPatch(px: number, py: number): Float32Array {
    const radius = this.config.selection.smoothing_radius_px;
    const size = this.config.viewer.point_size_px;
    if (this.renderer.floatTargetSupported) {
      return this.renderer.readDepthPatch(this.camera, px, py, radius, size);
    }
    return softwareDepthPatch(this.positions, this.camera, px, py, radius, size);
  }

  private async handleClick(px: number, py: number): Promise<void> {
    if (this.state.mode === "correction") {
      this.selectBoxAt(px, py);
      return;
    }
    const radius = this.config.selection.smoothing_radius_px;
    const patch = this.readPatch(px, py);
    await this.enqueue(async () => {
      let point: Vec3;
      try {
        point = await this.client.select(this.camera, px, py, radius, patch);
      } catch (err) {
        if (err instanceof ProtocolError) {
          this.state.setStatus(err.message); // e.g. "no point near click"
          return;
        }
        throw err;
      }
      if (this.state.mode === "spanning") {
        await this.advanceSpan(point);
      } else {
        await this.commitPick(point);
      }
    });
  }

  private async advanceSpan(point: Vec3): Promise<void> {
    this.state.addSpanPick(point);
    const draft = this.state.draft;
    if (draft.kind !== "spanning") return;
    if (draft.picks.length < 2) {
      this.state.setStatus(`span: ${draft.picks.length}/4 points`);
      return;
    }
    const box = await this.client.spanning(draft.picks, this.state.category.name);
    if (box.complete) {
      const index = this.state.commitBox(box);
      this.state.setStatus(`span complete: box ${index}`);
    } else {
      this.state.setSpanPreview(box);
      this.state.setStatus(`span: ${draft.picks.length}/4 points`);
    }
  }

  private async commitPick(point: Vec3): Promise<void> {
    const draft = this.state.draft;
    const yawDeg = draft.kind === "picking" ? draft.yawDeg : 0;
    const dims = this.state.category.default_dimensions;
    let box: BoxJson = {
      name: this.state.category.name,
      centroid: point,
      dimensions: { length: dims[0], width: dims[1], height: dims[2] },
      rotations: { x: 0, y: 0, z: 0 },
    };
    if (yawDeg !== 0) {
      // route the rotation through the core so the stored box is core math
      box = await this.client.transform(box, {
        kind: "rotate",
        axis: "z",
        angle_deg: yawDeg,
      });
    }
    const index = this.state.commitBox(box);
    this.state.setStatus(`picked box ${index}`);
  }

  private selectBoxAt(px: number, py: number): void {
    const ray = pixelRay(this.camera, px, py);
    let best: { index: number; t: number } | null = null;
    this.state.boxes.forEach((box, index) => {
      const hit = rayBoxFace(ray.origin, ray.dir, box);
      if (hit && (best === null || hit.t < best.t)) {
        best = { index, t: hit.t };
      }
    });
    this.state.selectedBox = best ? (best as { index: number }).index : null;
  }

  private async pullHoveredFace(notches: number): Promise<void> {
    const index = this.state.selectedBox;
    const face = this.state.hoveredFace;
    if (index === null || !face) return;
    const delta = notches * this.config.steps.scaling;
    await this.enqueue(async () => {
      const updated = await this.client.facePull(this.state.boxes[index], face, delta);
      this.state.replaceBox(index, updated);
      this.state.setStatus(`pull ${face} ${delta > 0 ? "+" : ""}${delta.toFixed(2)} m`);
    });
  }

  private async editField(field: FieldName, value: number): Promise<void> {
    const index = this.state.selectedBox;
    if (index === null) return;
    const box = this.state.boxes[index];
    let op: TransformOp;
    if (field === "cx" || field === "cy" || field === "cz") {
      const delta: [number, number, number] = [0, 0, 0];
      const axis = { cx: 0, cy: 1, cz: 2 }[field];
      const current = [box.centroid.x, box.centroid.y, box.centroid.z][axis];
      delta[axis] = value - current;
      op = { kind: "translate", delta };
    } else if (field === "length" || field === "width" || field === "height") {
      op = { kind: "scale", axis: field, delta: value - box.dimensions[field] };
    } else {
      const axis = field.slice(1) as "x" | "y" | "z";
      op = { kind: "rotate", axis, angle_deg: value - box.rotations[axis] };
    }
    await this.enqueue(async () => {
      const updated = await this.client.transform(box, op);
      this.state.replaceBox(index, updated);
    });
  }

  private async handleKey(key: string): Promise<void> {
    const index = this.state.selectedBox;
    if (index === null) return;
    const step = this.config.steps;
    const moves: Record<string, TransformOp> = {
      a: { kind: "translate", delta: [-step.translation, 0, 0] },
      d: { kind: "translate", delta: [step.translation, 0, 0] },
      w: { kind: "translate", delta: [0, step.translation, 0] },
      s: { kind: "translate", delta: [0, -step.translation, 0] },
      q: { kind: "translate", delta: [0, 0, step.translation] },
      e: { kind: "translate", delta: [0, 0, -step.translation] },
      z: { kind: "rotate", axis: "z", angle_deg: step.rotation_deg },
      x: { kind: "rotate", axis: "z", angle_deg: -step.rotation_deg },
    };
    const op = moves[key];
    if (!op) return;
    await this.enqueue(async () => {
      const updated = await this.client.transform(this.state.boxes[index], op);
      this.state.replaceBox(index, updated);
    });
  }

  private drawables(): DrawableBox[] {
    const boxes: DrawableBox[] = this.state.boxes.map((box, index) => ({
      ...box,
      color: parseHexColor(
        this.state.selectedBox === index ? "#ffd166" : this.state.colorFor(box),
      ),
    }));
    const draft = this.state.draft;
    if (draft.kind === "spanning" && draft.preview) {
      boxes.push({ ...draft.preview, color: [0.4, 0.9, 1.0, 1.0] });
    }
    if (draft.kind === "picking" && draft.hover) {
      const dims = this.state.category.default_dimensions;
      boxes.push({
        centroid: draft.hover,
        dimensions: { length: dims[0], width: dims[1], height: dims[2] },
        rotations: { x: 0, y: 0, z: draft.yawDeg },
        color: [0.4, 0.9, 1.0, 1.0],
      });
    }
    return boxes;
  }

  private frame(now: number): void {
    this.resizeCanvas();
    this.renderer.drawFrame(
      this.camera, this.drawables(), this.config.viewer.point_size_px,
    );
    this.frameTimes.push(now);
    while (this.frameTimes.length > 0 && now - this.frameTimes[0] > 1000) {
      this.frameTimes.shift();
    }
    const entry = this.session.clouds[this.cloudIndex];
    const progress: Progress | null = this.session.progress ?? null;
    this.panels.update(
      this.state, entry ? entry.name : "-", progress, this.frameTimes.length,
    );
    requestAnimationFrame((t) => this.frame(t));
  }

  private resizeCanvas(): void {
    const width = this.canvas.clientWidth;
    const height = this.canvas.clientHeight;
    if (this.canvas.width !== width || this.canvas.height !== height) {
      this.canvas.width = width;
      this.canvas.height = height;
    }
    this.camera = { ...this.camera, viewport: [width, height] };
  }
}

const canvas = document.getElementById("viewer") as HTMLCanvasElement | null;
if (canvas) {
  const app = new App(canvas, new ProtocolClient(""));
  app.boot().catch((err) => {
    const status = document.getElementById("panel");
    if (status) status.textContent = `failed to start: ${err}`;
    console.error(err);
  });
}
