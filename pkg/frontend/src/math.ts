/**
 * Camera model and the small amount of linear algebra the viewer needs.
 *
 * The camera mirrors the core's orbit model (z-up, right-handed, normalized
 * depth near=0 far=1) so depth patches read back from our framebuffer mean
 * the same thing to the selection endpoint. Box math here is display and
 * input targeting only (wireframe corners, ray/face hover); every box
 * mutation goes through the core's geometry endpoints.
 */

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export interface OrbitCamera {
  target: [number, number, number];
  distance: number;
  azimuthDeg: number;
  elevationDeg: number;
  fovDeg: number;
  near: number;
  far: number;
  viewport: [number, number];
}

export const ELEVATION_LIMIT_DEG = 90 - (1e-3 * 180) / Math.PI;

const DEG = Math.PI / 180;

export function defaultCamera(viewport: [number, number]): OrbitCamera {
  return {
    target: [0, 0, 0],
    distance: 6,
    azimuthDeg: 20,
    elevationDeg: 30,
    fovDeg: 45,
    near: 0.01,
    far: 300,
    viewport,
  };
}

export function clampCamera(cam: OrbitCamera): OrbitCamera {
  return {
    ...cam,
    elevationDeg: Math.min(
      ELEVATION_LIMIT_DEG,
      Math.max(-ELEVATION_LIMIT_DEG, cam.elevationDeg),
    ),
    distance: Math.max(cam.distance, cam.near),
    azimuthDeg: normalizeDegrees(cam.azimuthDeg),
  };
}

/** Wrap degrees into (-180, 180]. */
export function normalizeDegrees(angle: number): number {
  let a = ((angle + 180) % 360 + 360) % 360;
  if (a === 0) a = 360;
  return a - 180;
}

export function cameraEye(cam: OrbitCamera): [number, number, number] {
  const az = cam.azimuthDeg * DEG;
  const el = cam.elevationDeg * DEG;
  const ce = Math.cos(el);
  return [
    cam.target[0] + cam.distance * ce * Math.cos(az),
    cam.target[1] + cam.distance * ce * Math.sin(az),
    cam.target[2] + cam.distance * Math.sin(el),
  ];
}

export function cameraBasis(cam: OrbitCamera): {
  right: [number, number, number];
  up: [number, number, number];
  forward: [number, number, number];
} {
  const eye = cameraEye(cam);
  const forward = normalize([
    cam.target[0] - eye[0],
    cam.target[1] - eye[1],
    cam.target[2] - eye[2],
  ]);
  const right = normalize(cross(forward, [0, 0, 1]));
  const up = cross(right, forward);
  return { right, up, forward };
}

/** Column-major 4x4 view matrix (WebGL layout). */
export function viewMatrix(cam: OrbitCamera): Float32Array {
  const eye = cameraEye(cam);
  const { right, up, forward } = cameraBasis(cam);
  const m = new Float32Array(16);
  m[0] = right[0]; m[4] = right[1]; m[8] = right[2];
  m[1] = up[0]; m[5] = up[1]; m[9] = up[2];
  m[2] = -forward[0]; m[6] = -forward[1]; m[10] = -forward[2];
  m[12] = -dot(right, eye);
  m[13] = -dot(up, eye);
  m[14] = dot(forward, eye);
  m[15] = 1;
  return m;
}

export function projectionMatrix(cam: OrbitCamera): Float32Array {
  const t = 1 / Math.tan((cam.fovDeg * DEG) / 2);
  const aspect = cam.viewport[0] / cam.viewport[1];
  const { near, far } = cam;
  const m = new Float32Array(16);
  m[0] = t / aspect;
  m[5] = t;
  m[10] = -(far + near) / (far - near);
  m[14] = (-2 * far * near) / (far - near);
  m[11] = -1;
  return m;
}

export function multiply4(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16);
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let sum = 0;
      for (let k = 0; k < 4; k++) sum += a[row + 4 * k] * b[k + 4 * col];
      out[row + 4 * col] = sum;
    }
  }
  return out;
}

export function viewProjection(cam: OrbitCamera): Float32Array {
  return multiply4(projectionMatrix(cam), viewMatrix(cam));
}

/** Pixel position (top-left origin) and depth of a world point, or null. */
export function projectPoint(
  cam: OrbitCamera,
  p: [number, number, number],
): { px: number; py: number; depth: number } | null {
  const m = viewProjection(cam);
  const cx = m[0] * p[0] + m[4] * p[1] + m[8] * p[2] + m[12];
  const cy = m[1] * p[0] + m[5] * p[1] + m[9] * p[2] + m[13];
  const cz = m[2] * p[0] + m[6] * p[1] + m[10] * p[2] + m[14];
  const cw = m[3] * p[0] + m[7] * p[1] + m[11] * p[2] + m[15];
  if (cw <= cam.near * 1e-9 || cw <= 0) return null;
  const ndcX = cx / cw;
  const ndcY = cy / cw;
  const depth = (cz / cw + 1) / 2;
  return {
    px: ((ndcX + 1) / 2) * cam.viewport[0],
    py: ((1 - ndcY) / 2) * cam.viewport[1],
    depth,
  };
}

/** World-space ray through a viewport pixel. */
export function pixelRay(
  cam: OrbitCamera,
  px: number,
  py: number,
): { origin: [number, number, number]; dir: [number, number, number] } {
  const { right, up, forward } = cameraBasis(cam);
  const tanHalf = Math.tan((cam.fovDeg * DEG) / 2);
  const aspect = cam.viewport[0] / cam.viewport[1];
  const ndcX = (2 * px) / cam.viewport[0] - 1;
  const ndcY = 1 - (2 * py) / cam.viewport[1];
  const dir = normalize([
    forward[0] + tanHalf * (ndcX * aspect * right[0] + ndcY * up[0]),
    forward[1] + tanHalf * (ndcX * aspect * right[1] + ndcY * up[1]),
    forward[2] + tanHalf * (ndcX * aspect * right[2] + ndcY * up[2]),
  ]);
  return { origin: cameraEye(cam), dir };
}

// --- display-side box helpers (read-only mirrors of the core's conventions) ---

export interface BoxLike {
  centroid: Vec3;
  dimensions: { length: number; width: number; height: number };
  rotations: Vec3; // degrees, roll/pitch/yaw about x/y/z
}

/** Rz(yaw) Ry(pitch) Rx(roll), row-major 3x3. */
export function rotationRows(rotDeg: Vec3): number[][] {
  const r = rotDeg.x * DEG;
  const p = rotDeg.y * DEG;
  const y = rotDeg.z * DEG;
  const cr = Math.cos(r), sr = Math.sin(r);
  const cp = Math.cos(p), sp = Math.sin(p);
  const cy = Math.cos(y), sy = Math.sin(y);
  return [
    [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
    [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
    [-sp, cp * sr, cp * cr],
  ];
}

/** The 8 corners in the core's bit-pattern order (bit0=+x, bit1=+y, bit2=+z). */
export function boxCorners(box: BoxLike): [number, number, number][] {
  const rot = rotationRows(box.rotations);
  const h = [
    box.dimensions.length / 2,
    box.dimensions.width / 2,
    box.dimensions.height / 2,
  ];
  const c = box.centroid;
  const corners: [number, number, number][] = [];
  for (let i = 0; i < 8; i++) {
    const local = [
      (i & 1 ? 1 : -1) * h[0],
      (i & 2 ? 1 : -1) * h[1],
      (i & 4 ? 1 : -1) * h[2],
    ];
    corners.push([
      c.x + rot[0][0] * local[0] + rot[0][1] * local[1] + rot[0][2] * local[2],
      c.y + rot[1][0] * local[0] + rot[1][1] * local[1] + rot[1][2] * local[2],
      c.z + rot[2][0] * local[0] + rot[2][1] * local[1] + rot[2][2] * local[2],
    ]);
  }
  return corners;
}

export type FaceName = "front" | "back" | "right" | "left" | "top" | "bottom";

const FACE_BY_AXIS: Record<number, [FaceName, FaceName]> = {
  0: ["front", "back"],
  1: ["right", "left"],
  2: ["top", "bottom"],
};

/**
 * Slab-test a pixel ray against a box; returns the entry face and distance.
 * Input targeting only: which face the cursor hovers for side pulling.
 */
export function rayBoxFace(
  origin: [number, number, number],
  dir: [number, number, number],
  box: BoxLike,
): { face: FaceName; t: number } | null {
  const rot = rotationRows(box.rotations);
  const rel = [
    origin[0] - box.centroid.x,
    origin[1] - box.centroid.y,
    origin[2] - box.centroid.z,
  ];
  // into the box frame: local = R^T * world
  const lo = [0, 1, 2].map(
    (i) => rot[0][i] * rel[0] + rot[1][i] * rel[1] + rot[2][i] * rel[2],
  );
  const ld = [0, 1, 2].map(
    (i) => rot[0][i] * dir[0] + rot[1][i] * dir[1] + rot[2][i] * dir[2],
  );
  const half = [
    box.dimensions.length / 2,
    box.dimensions.width / 2,
    box.dimensions.height / 2,
  ];
  let tEnter = -Infinity;
  let tExit = Infinity;
  let enterAxis = -1;
  let enterSign = 1;
  for (let axis = 0; axis < 3; axis++) {
    if (Math.abs(ld[axis]) < 1e-12) {
      if (Math.abs(lo[axis]) > half[axis]) return null;
      continue;
    }
    let t0 = (-half[axis] - lo[axis]) / ld[axis];
    let t1 = (half[axis] - lo[axis]) / ld[axis];
    let sign = -1;
    if (t0 > t1) {
      [t0, t1] = [t1, t0];
      sign = 1;
    }
    if (t0 > tEnter) {
      tEnter = t0;
      enterAxis = axis;
      enterSign = sign;
    }
    tExit = Math.min(tExit, t1);
    if (tEnter > tExit) return null;
  }
  if (enterAxis < 0 || tEnter < 0) return null;
  const [positive, negative] = FACE_BY_AXIS[enterAxis];
  return { face: enterSign > 0 ? positive : negative, t: tEnter };
}

function cross(
  a: [number, number, number],
  b: [number, number, number],
): [number, number, number] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function dot(a: [number, number, number], b: [number, number, number]): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function normalize(v: [number, number, number]): [number, number, number] {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}
