/**
 * Conversion from MediaPipe FaceLandmarker output (468+ normalized points)
 * to the 68-point canonical layout the server expects.
 *
 * Canonical layout (classic 68-point annotation, image coordinates of an
 * UN-mirrored camera frame, so "image-left" is the subject's right side):
 *   0–16  jaw line, image-left ear to image-right ear, chin at 8
 *   17–21 image-left eyebrow (outer to inner)
 *   22–26 image-right eyebrow (inner to outer)
 *   27–30 nose bridge, top to tip
 *   31–35 nostril line, image-left to image-right
 *   36–41 image-left eye (outer corner, top x2, inner corner, bottom x2)
 *   42–47 image-right eye (inner corner, top x2, outer corner, bottom x2)
 *   48–59 outer lip contour, starting at image-left corner, clockwise
 *   60–67 inner lip contour, starting at image-left corner, clockwise
 */

import type { Point } from "./types.js";

/** `MEDIAPIPE_TO_68[i]` is the MediaPipe mesh index used for canonical point `i`. */
export const MEDIAPIPE_TO_68: readonly number[] = [
  // 0-16 jaw line (face oval, lower half), chin = 152 at canonical 8
  234, 93, 132, 58, 172, 136, 149, 148, 152, 377, 378, 365, 397, 288, 361, 323, 454,
  // 17-21 image-left eyebrow, outer -> inner
  70, 63, 105, 66, 107,
  // 22-26 image-right eyebrow, inner -> outer
  336, 296, 334, 293, 300,
  // 27-30 nose bridge, top -> tip
  168, 6, 197, 195,
  // 31-35 nostril line, image-left -> image-right
  98, 97, 2, 326, 327,
  // 36-41 image-left eye
  33, 160, 158, 133, 153, 144,
  // 42-47 image-right eye
  362, 385, 387, 263, 373, 380,
  // 48-59 outer lips
  61, 39, 37, 0, 267, 269, 291, 405, 314, 17, 84, 181,
  // 60-67 inner lips
  78, 82, 13, 312, 308, 317, 14, 87,
];

/**
 * Canonical index pairs that swap under a horizontal flip. Indices absent
 * here (chin, nose bridge, lip centers, ...) sit on the face midline.
 */
export const SYMMETRIC_68_PAIRS: ReadonlyArray<readonly [number, number]> = [
  // jaw
  [0, 16], [1, 15], [2, 14], [3, 13], [4, 12], [5, 11], [6, 10], [7, 9],
  // eyebrows
  [17, 26], [18, 25], [19, 24], [20, 23], [21, 22],
  // nostril line
  [31, 35], [32, 34],
  // eyes
  [36, 45], [37, 44], [38, 43], [39, 42], [40, 47], [41, 46],
  // outer lips
  [48, 54], [49, 53], [50, 52], [55, 59], [56, 58],
  // inner lips
  [60, 64], [61, 63], [65, 67],
];

export interface NormalizedPoint {
  x: number;
  y: number;
}

/**
 * Select the 68 canonical points from a MediaPipe landmark list and scale
 * the normalized [0, 1] coordinates to pixel coordinates of a
 * `width` x `height` frame.
 */
export function mapMediaPipeTo68(
  meshPoints: ReadonlyArray<NormalizedPoint>,
  width: number,
  height: number,
): Point[] {
  const needed = Math.max(...MEDIAPIPE_TO_68) + 1;
  if (meshPoints.length < needed) {
    throw new RangeError(
      `expected at least ${needed} mesh points, got ${meshPoints.length}`,
    );
  }
  if (!(width > 0) || !(height > 0)) {
    throw new RangeError(`frame size must be positive, got ${width}x${height}`);
  }
  return MEDIAPIPE_TO_68.map((meshIndex) => {
    const p = meshPoints[meshIndex];
    return [p.x * width, p.y * height] as const;
  });
}

/**
 * Convert a 68-point set between a frame and its horizontal mirror.
 *
 * A horizontal flip does two things at once: every x coordinate maps to
 * `(width - 1) - x` (pixel-center convention), and the subject's left and
 * right sides trade places, so symmetric canonical indices must swap too.
 * Flipping coordinates without swapping indices would label the wrong eye
 * as point 36 — downstream alignment would then rotate the face 180 degrees.
 *
 * The function is its own inverse, so it converts in either direction
 * (use it to un-mirror landmarks detected on a mirrored preview stream).
 */
export function mirrorLandmarks(
  points: ReadonlyArray<Point>,
  width: number,
): Point[] {
  if (points.length !== 68) {
    throw new RangeError(`expected 68 points, got ${points.length}`);
  }
  const flipped: Point[] = points.map(([x, y]) => [width - 1 - x, y] as const);
  for (const [a, b] of SYMMETRIC_68_PAIRS) {
    const tmp = flipped[a];
    flipped[a] = flipped[b];
    flipped[b] = tmp;
  }
  return flipped;
}

export const unmirrorLandmarks = mirrorLandmarks;
