import { describe, expect, it } from "vitest";

import {
  boxCorners,
  clampCamera,
  defaultCamera,
  ELEVATION_LIMIT_DEG,
  normalizeDegrees,
  pixelRay,
  projectPoint,
  rayBoxFace,
  rotationRows,
  viewProjection,
  type BoxLike,
  type OrbitCamera,
} from "../src/math.js";

function camera(overrides: Partial<OrbitCamera> = {}): OrbitCamera {
  return { ...defaultCamera([640, 480]), ...overrides };
}

describe("normalizeDegrees", () => {
  it("wraps 370 to 10", () => {
    expect(normalizeDegrees(370)).toBeCloseTo(10, 12);
  });

  it("maps into (-180, 180]", () => {
    expect(normalizeDegrees(180)).toBeCloseTo(180, 12);
    expect(normalizeDegrees(-180)).toBeCloseTo(180, 12);
    expect(normalizeDegrees(-190)).toBeCloseTo(170, 12);
  });
});

describe("camera", () => {
  it("projects the orbit target to the viewport center", () => {
    const cam = camera({ target: [1, 2, 3], azimuthDeg: 33, elevationDeg: 21 });
    const hit = projectPoint(cam, [1, 2, 3]);
    expect(hit).not.toBeNull();
    expect(hit!.px).toBeCloseTo(320, 3);
    expect(hit!.py).toBeCloseTo(240, 3);
    expect(hit!.depth).toBeGreaterThan(0);
    expect(hit!.depth).toBeLessThan(1);
  });

  it("returns null behind the eye", () => {
    const cam = camera({ azimuthDeg: 0, elevationDeg: 0, distance: 5 });
    expect(projectPoint(cam, [20, 0, 0])).toBeNull();
  });

  it("clamps elevation and distance", () => {
    const clamped = clampCamera(camera({ elevationDeg: 200, distance: 0 }));
    expect(clamped.elevationDeg).toBeCloseTo(ELEVATION_LIMIT_DEG, 9);
    expect(clamped.distance).toBe(clamped.near);
  });

  it("pixel rays pass through their pixels", () => {
    const cam = camera({ azimuthDeg: 40, elevationDeg: 25 });
    const ray = pixelRay(cam, 100, 350);
    const along: [number, number, number] = [
      ray.origin[0] + 4 * ray.dir[0],
      ray.origin[1] + 4 * ray.dir[1],
      ray.origin[2] + 4 * ray.dir[2],
    ];
    const hit = projectPoint(cam, along);
    expect(hit).not.toBeNull();
    expect(hit!.px).toBeCloseTo(100, 3);
    expect(hit!.py).toBeCloseTo(350, 3);
  });

  it("view-projection is finite", () => {
    const m = viewProjection(camera());
    for (const v of m) expect(Number.isFinite(v)).toBe(true);
  });
});

describe("box display helpers", () => {
  const box: BoxLike = {
    centroid: { x: 0, y: 0, z: 0 },
    dimensions: { length: 2, width: 4, height: 6 },
    rotations: { x: 0, y: 0, z: 0 },
  };

  it("corners follow the bit-pattern order", () => {
    const corners = boxCorners(box);
    expect(corners[0]).toEqual([-1, -2, -3]);
    expect(corners[1]).toEqual([1, -2, -3]); // bit0 -> +length
    expect(corners[2]).toEqual([-1, 2, -3]); // bit1 -> +width
    expect(corners[4]).toEqual([-1, -2, 3]); // bit2 -> +height
    expect(corners[7]).toEqual([1, 2, 3]);
  });

  it("rotation matrix matches a quarter turn", () => {
    const rows = rotationRows({ x: 0, y: 0, z: 90 });
    // Rz(90) maps +x to +y
    expect(rows[0][0]).toBeCloseTo(0, 12);
    expect(rows[1][0]).toBeCloseTo(1, 12);
  });

  it("ray hits the face turned toward the camera", () => {
    const hit = rayBoxFace([10, 0, 0], [-1, 0, 0], box);
    expect(hit).not.toBeNull();
    expect(hit!.face).toBe("front");
    const topHit = rayBoxFace([0, 0, 10], [0, 0, -1], box);
    expect(topHit!.face).toBe("top");
    const yawed: BoxLike = { ...box, rotations: { x: 0, y: 0, z: 90 } };
    // after a quarter turn the +length face points along +y
    const sideHit = rayBoxFace([0, 10, 0], [0, -1, 0], yawed);
    expect(sideHit!.face).toBe("front");
  });

  it("misses are null", () => {
    expect(rayBoxFace([10, 10, 10], [1, 0, 0], box)).toBeNull();
  });
});
