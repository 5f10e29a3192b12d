/**
 * Typed client for the session protocol. The core owns all geometry and
 * selection math; this module only moves bytes and JSON.
 *
 * `pointFetches` logs how often each cloud's points were downloaded so tests
 * can pin the fetched-once-per-session contract.
 */

import type { OrbitCamera, Vec3 } from "./math.js";

export interface CloudEntry {
  id: number;
  name: string;
  labeled: boolean;
}

export interface Progress {
  total_clouds: number;
  labeled_clouds: number;
  fraction: number;
}

export interface SessionInfo {
  folder: string;
  clouds: CloudEntry[];
  progress: Progress;
}

export interface BoxJson {
  name: string;
  centroid: Vec3;
  dimensions: { length: number; width: number; height: number };
  rotations: Vec3; // degrees
  complete?: boolean;
  clamped?: boolean;
}

export interface LabelsJson {
  cloud_name: string;
  path: string;
  frame?: string;
  center_offset?: number[];
  objects: BoxJson[];
}

export interface CategoryJson {
  name: string;
  color: string;
  default_dimensions: [number, number, number];
}

export interface ConfigJson {
  categories: CategoryJson[];
  steps: { translation: number; rotation_deg: number; scaling: number };
  selection: {
    smoothing_radius_px: number;
    minimization_radius_px: number;
    background_threshold: number;
  };
  viewer: {
    fov_deg: number;
    near: number;
    far: number;
    point_size_px: number;
    zoom_base: number;
  };
  export: { format: string; precision: number };
  min_dimension: number;
}

export interface PointPayload {
  count: number;
  positions: Float32Array;
  colors: Uint8Array | null;
}

export type TransformOp =
  | { kind: "translate"; delta: [number, number, number] }
  | { kind: "rotate"; axis: "x" | "y" | "z"; angle_deg: number }
  | { kind: "scale"; axis: "length" | "width" | "height"; delta: number };

export class ProtocolError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

/** Parse the binary point stream: LCPC, u32-le count, u8 flags, payload. */
export function parsePointStream(buffer: ArrayBuffer): PointPayload {
  const view = new DataView(buffer);
  if (
    buffer.byteLength < 9 ||
    view.getUint8(0) !== 0x4c || // L
    view.getUint8(1) !== 0x43 || // C
    view.getUint8(2) !== 0x50 || // P
    view.getUint8(3) !== 0x43 // C
  ) {
    throw new Error("bad point stream magic");
  }
  const count = view.getUint32(4, true);
  const flags = view.getUint8(8);
  const xyzBytes = count * 3 * 4;
  if (buffer.byteLength < 9 + xyzBytes) {
    throw new Error(
      `truncated point stream: need ${9 + xyzBytes} bytes, got ${buffer.byteLength}`,
    );
  }
  const positions = new Float32Array(buffer.slice(9, 9 + xyzBytes));
  let colors: Uint8Array | null = null;
  if (flags & 1) {
    const rgbBytes = count * 3;
    if (buffer.byteLength < 9 + xyzBytes + rgbBytes) {
      throw new Error("truncated color block in point stream");
    }
    colors = new Uint8Array(buffer.slice(9 + xyzBytes, 9 + xyzBytes + rgbBytes));
  }
  return { count, positions, colors };
}

export function cameraJson(cam: OrbitCamera): Record<string, unknown> {
  return {
    target: cam.target,
    distance: cam.distance,
    azimuth_deg: cam.azimuthDeg,
    elevation_deg: cam.elevationDeg,
    fov_deg: cam.fovDeg,
    near: cam.near,
    far: cam.far,
    viewport: cam.viewport,
  };
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ProtocolClient {
  readonly pointFetches = new Map<number, number>();

  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    const body = await response.text();
    if (!response.ok) {
      let code = "http_error";
      let message = body || response.statusText;
      try {
        const envelope = JSON.parse(body);
        code = envelope.code ?? code;
        message = envelope.message ?? message;
      } catch {
        // non-JSON error body; keep the raw text
      }
      throw new ProtocolError(code, message, response.status);
    }
    return JSON.parse(body) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  session(): Promise<SessionInfo> {
    return this.json("/api/session");
  }

  config(): Promise<ConfigJson> {
    return this.json("/api/config");
  }

  async points(cloudId: number): Promise<PointPayload> {
    this.pointFetches.set(cloudId, (this.pointFetches.get(cloudId) ?? 0) + 1);
    const response = await this.fetchImpl(`${this.base}/api/clouds/${cloudId}/points`);
    if (!response.ok) {
      throw new ProtocolError("http_error", response.statusText, response.status);
    }
    return parsePointStream(await response.arrayBuffer());
  }

  labels(cloudId: number): Promise<LabelsJson> {
    return this.json(`/api/clouds/${cloudId}/labels`);
  }

  saveLabels(cloudId: number, labels: LabelsJson): Promise<{ ok: boolean }> {
    return this.post(`/api/clouds/${cloudId}/labels`, labels);
  }

  async select(
    camera: OrbitCamera,
    px: number,
    py: number,
    radius: number,
    depths: Float32Array | number[],
  ): Promise<Vec3> {
    const reply = await this.post<{ point: Vec3 }>("/api/selection", {
      camera: cameraJson(camera),
      click: { px, py },
      patch: { radius, depths: Array.from(depths) },
    });
    return reply.point;
  }

  spanning(
    picks: Vec3[],
    category: string,
  ): Promise<BoxJson> {
    const payload: Record<string, unknown> = { category };
    picks.slice(0, 4).forEach((p, i) => {
      payload[`p${i + 1}`] = [p.x, p.y, p.z];
    });
    return this.post("/api/geometry/spanning", payload);
  }

  facePull(box: BoxJson, face: string, delta: number): Promise<BoxJson> {
    return this.post("/api/geometry/face_pull", { bbox: box, face, delta });
  }

  transform(box: BoxJson, op: TransformOp): Promise<BoxJson> {
    return this.post("/api/geometry/transform", { bbox: box, op });
  }
}
