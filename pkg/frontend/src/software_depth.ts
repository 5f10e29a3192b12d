/**
 * CPU point splatter producing the same normalized depth the GL pipeline
 * writes. Two jobs: the depth-patch fallback when float render targets are
 * unavailable, and headless tests (no WebGL in node).
 *
 * Semantics mirror the renderer: each visible point covers a
 * pointSize x pointSize pixel square, every pixel keeps the minimum depth,
 * background stays exactly 1.
 */

import type { OrbitCamera } from "./math.js";
import { viewProjection } from "./math.js";

export function depthPatch(
  positions: Float32Array,
  camera: OrbitCamera,
  clickX: number,
  clickY: number,
  radius: number,
  pointSize: number,
): Float32Array {
  const side = 2 * radius + 1;
  const patch = new Float32Array(side * side).fill(1);
  const [width, height] = camera.viewport;
  const m = viewProjection(camera);
  const x0 = Math.floor(clickX) - radius;
  const y0 = Math.floor(clickY) - radius;
  const half = Math.floor(pointSize / 2);

  for (let i = 0; i < positions.length; i += 3) {
    const x = positions[i];
    const y = positions[i + 1];
    const z = positions[i + 2];
    const cw = m[3] * x + m[7] * y + m[11] * z + m[15];
    if (cw <= 1e-12) continue;
    const ndcX = (m[0] * x + m[4] * y + m[8] * z + m[12]) / cw;
    const ndcY = (m[1] * x + m[5] * y + m[9] * z + m[13]) / cw;
    const depth = ((m[2] * x + m[6] * y + m[10] * z + m[14]) / cw + 1) / 2;
    if (depth < 0 || depth >= 1) continue;
    const px = Math.floor(((ndcX + 1) / 2) * width);
    const py = Math.floor(((1 - ndcY) / 2) * height);
    for (let dy = -half; dy < pointSize - half; dy++) {
      for (let dx = -half; dx < pointSize - half; dx++) {
        const sx = px + dx;
        const sy = py + dy;
        if (sx < 0 || sx >= width || sy < 0 || sy >= height) continue;
        const lx = sx - x0;
        const ly = sy - y0;
        if (lx < 0 || lx >= side || ly < 0 || ly >= side) continue;
        const idx = ly * side + lx;
        if (depth < patch[idx]) patch[idx] = depth;
      }
    }
  }
  return patch;
}
