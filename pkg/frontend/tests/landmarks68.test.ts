import { describe, expect, it } from "vitest";

import {
  MEDIAPIPE_TO_68,
  SYMMETRIC_68_PAIRS,
  mapMediaPipeTo68,
  mirrorLandmarks,
  unmirrorLandmarks,
  type NormalizedPoint,
} from "../src/landmarks68.js";
import type { Point } from "../src/types.js";

const MESH_SIZE = 468;

function syntheticMesh(): NormalizedPoint[] {
  // Distinct, exactly-representable coordinates per mesh index.
  return Array.from({ length: MESH_SIZE }, (_, i) => ({
    x: i / 1024,
    y: (i + 1) / 1024,
  }));
}

describe("MEDIAPIPE_TO_68", () => {
  it("maps each of the 68 canonical points to a distinct mesh index", () => {
    expect(MEDIAPIPE_TO_68).toHaveLength(68);
    expect(new Set(MEDIAPIPE_TO_68).size).toBe(68);
    for (const idx of MEDIAPIPE_TO_68) {
      expect(Number.isInteger(idx)).toBe(true);
      expect(idx).toBeGreaterThanOrEqual(0);
      expect(idx).toBeLessThan(MESH_SIZE);
    }
  });

  it("pins the anatomical anchor points", () => {
    expect(MEDIAPIPE_TO_68[8]).toBe(152); // chin
    expect(MEDIAPIPE_TO_68[36]).toBe(33); // image-left eye outer corner
    expect(MEDIAPIPE_TO_68[45]).toBe(263); // image-right eye outer corner
    expect(MEDIAPIPE_TO_68[48]).toBe(61); // image-left mouth corner
    expect(MEDIAPIPE_TO_68[54]).toBe(291); // image-right mouth corner
    expect(MEDIAPIPE_TO_68[33]).toBe(2); // nostril line midpoint
  });
});

describe("SYMMETRIC_68_PAIRS", () => {
  it("covers all off-midline points exactly once", () => {
    const seen = new Set<number>();
    for (const [a, b] of SYMMETRIC_68_PAIRS) {
      expect(a).not.toBe(b);
      for (const idx of [a, b]) {
        expect(idx).toBeGreaterThanOrEqual(0);
        expect(idx).toBeLessThan(68);
        expect(seen.has(idx)).toBe(false);
        seen.add(idx);
      }
    }
    const midline = [...Array(68).keys()].filter((i) => !seen.has(i));
    expect(midline).toEqual([8, 27, 28, 29, 30, 33, 51, 57, 62, 66]);
  });
});

describe("mapMediaPipeTo68", () => {
  it("selects mapped points and scales normalized coordinates to pixels", () => {
    const mesh = syntheticMesh();
    const out = mapMediaPipeTo68(mesh, 640, 512);
    expect(out).toHaveLength(68);
    for (let i = 0; i < 68; i += 1) {
      const src = MEDIAPIPE_TO_68[i];
      expect(out[i][0]).toBe((src / 1024) * 640);
      expect(out[i][1]).toBe(((src + 1) / 1024) * 512);
    }
  });

  it("rejects meshes that are too short and degenerate frame sizes", () => {
    const mesh = syntheticMesh();
    expect(() => mapMediaPipeTo68(mesh.slice(0, 100), 640, 480)).toThrow(
      RangeError,
    );
    expect(() => mapMediaPipeTo68(mesh, 0, 480)).toThrow(RangeError);
    expect(() => mapMediaPipeTo68(mesh, 640, -1)).toThrow(RangeError);
  });
});

describe("mirrorLandmarks", () => {
  const WIDTH = 640;

  /** A plausible asymmetric 68-point set with dyadic coordinates. */
  function facePoints(): Point[] {
    const mesh = syntheticMesh();
    return mapMediaPipeTo68(mesh, 512, 512).map(
      ([x, y], i) => [x + (i % 7) * 0.5, y] as const,
    );
  }

  it("is its own inverse", () => {
    const points = facePoints();
    const roundTrip = mirrorLandmarks(mirrorLandmarks(points, WIDTH), WIDTH);
    expect(roundTrip).toEqual(points);
  });

  it("keeps canonical indices on the correct image side after a flip", () => {
    // Eyes at plausible positions: image-left eye (36-41) near x=200,
    // image-right eye (42-47) near x=420.
    const points: Point[] = Array.from({ length: 68 }, (_, i) => {
      if (i >= 36 && i <= 41) return [200 + i, 240] as const;
      if (i >= 42 && i <= 47) return [420 + i, 240] as const;
      return [319.5, 100 + i] as const;
    });
    const mirrored = mirrorLandmarks(points, WIDTH);
    const meanX = (idxs: number[]) =>
      idxs.reduce((acc, i) => acc + mirrored[i][0], 0) / idxs.length;
    const leftEye = meanX([36, 37, 38, 39, 40, 41]);
    const rightEye = meanX([42, 43, 44, 45, 46, 47]);
    // Index 36 must still be the image-left eye, not a flipped-to-the-right
    // one; otherwise downstream alignment sees the face upside down.
    expect(leftEye).toBeLessThan(rightEye);
    expect(leftEye).toBeCloseTo(WIDTH - 1 - (420 + 44.5), 10);
    expect(rightEye).toBeCloseTo(WIDTH - 1 - (200 + 38.5), 10);
  });

  it("leaves points on the mirror axis fixed", () => {
    const axis = (WIDTH - 1) / 2;
    const points: Point[] = Array.from(
      { length: 68 },
      (_, i) => [axis, i] as const,
    );
    const mirrored = mirrorLandmarks(points, WIDTH);
    // Midline points keep both coordinate and identity.
    for (const i of [8, 27, 28, 29, 30, 33, 51, 57, 62, 66]) {
      expect(mirrored[i]).toEqual([axis, i]);
    }
    // Paired points keep the coordinate but trade y (their identity moved).
    expect(mirrored[36]).toEqual([axis, 45]);
    expect(mirrored[45]).toEqual([axis, 36]);
  });

  it("rejects sets that are not exactly 68 points", () => {
    expect(() => mirrorLandmarks([[1, 2]], WIDTH)).toThrow(RangeError);
  });

  it("unmirrorLandmarks is the same involution", () => {
    expect(unmirrorLandmarks).toBe(mirrorLandmarks);
  });
});
