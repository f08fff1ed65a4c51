"""Face image pipeline: eye-based alignment, landmark masking, HOG features.

The pipeline canonicalizes a face crop before any description is computed:

1. align: a similarity transform (rotation + uniform scale + translation)
   maps the two eye centers onto fixed, horizontally level positions in an
   S x S output frame; pixels are bilinearly resampled, landmarks are mapped
   through the same transform.
2. mask: pixels outside the convex hull of the 68 aligned landmarks are
   zeroed, so the descriptor never sees background.
3. hog: a dense histogram-of-oriented-gradients descriptor over the masked
   face.

The final feature vector is the HOG descriptor followed by the 136 aligned
landmark coordinates divided by the frame size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GrayImage, LandmarkSet, MimicLabError


class DegenerateEyes(MimicLabError):
    """Eye centers coincide; no similarity transform exists."""


class BadDimensions(MimicLabError):
    """Image shape incompatible with the descriptor grid."""


# Landmark index ranges of the two eye contours (standard 68-point scheme).
LEFT_EYE = slice(36, 42)
RIGHT_EYE = slice(42, 48)

DEFAULT_OUT_SIZE = 112

# HOG geometry.  Orientation bins are unsigned (gradient direction modulo
# 180 degrees) with bin centers at (i + 0.5) * (180 / HOG_BINS); a vote is
# split linearly between the two nearest centers, wrapping around.  0 degrees
# therefore sits exactly between the last and first bin centers.
HOG_BINS = 8
HOG_CELL = 8
HOG_BLOCK = 2  # cells per block side, blocks slide with stride one cell
HOG_CLIP = 0.2
HOG_EPS = 1e-12


def hog_length(size: int) -> int:
    cells = size // HOG_CELL
    blocks = cells - HOG_BLOCK + 1
    return blocks * blocks * HOG_BLOCK * HOG_BLOCK * HOG_BINS


FEATURE_LENGTH = hog_length(DEFAULT_OUT_SIZE) + 2 * 68  # 5408 + 136 = 5544


def eye_centers(landmarks: LandmarkSet) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic means of the left and right eye contour points."""
    pts = landmarks.points
    return pts[LEFT_EYE].mean(axis=0), pts[RIGHT_EYE].mean(axis=0)


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> scale * R(rotation) @ (p - src_center) + dst_center."""

    rotation: float  # radians, the rotation applied to source points
    scale: float
    src_center: tuple[float, float]
    dst_center: tuple[float, float]

    @property
    def rotation_deg(self) -> float:
        return math.degrees(self.rotation)

    def _matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64) - np.asarray(self.src_center)
        return (self.scale * p) @ self._matrix().T + np.asarray(self.dst_center)

    def invert(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64) - np.asarray(self.dst_center)
        return (p / self.scale) @ self._matrix() + np.asarray(self.src_center)


@dataclass(frozen=True)
class AlignedFace:
    image: GrayImage
    landmarks: LandmarkSet
    transform: SimilarityTransform
    out_size: int


def _bilinear_sample(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample pixels at float coordinates; outside the grid reads as zero."""
    h, w = pixels.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    out = np.zeros(xs.shape, dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            if np.any(valid):
                vals = np.zeros(xs.shape, dtype=np.float64)
                vals[valid] = pixels[yi[valid], xi[valid]]
                out += weight * vals
    return out


def align_face(
    image: GrayImage,
    landmarks: LandmarkSet,
    out_size: int = DEFAULT_OUT_SIZE,
    canonical_iod: float | None = None,
) -> AlignedFace:
    """Rotate, scale, and translate the face so the eyes sit on a fixed line.

    The eye centers land at ((S - iod) / 2, 0.4 * S) and ((S + iod) / 2,
    0.4 * S), symmetric about the vertical midline.  ``canonical_iod``
    defaults to 0.3 * S, which keeps chin and forehead of a typically
    proportioned face inside the frame.  Pixels pulled from outside the
    source read as zero.
    """
    if out_size < 2 * HOG_CELL:
        raise BadDimensions(f"output size {out_size} is too small")
    iod = 0.3 * out_size if canonical_iod is None else float(canonical_iod)
    left, right = eye_centers(landmarks)
    delta = right - left
    dist = float(np.hypot(delta[0], delta[1]))
    if dist < 1e-9:
        raise DegenerateEyes("eye centers coincide")

    theta = math.atan2(delta[1], delta[0])
    transform = SimilarityTransform(
        rotation=-theta,
        scale=iod / dist,
        src_center=(float((left[0] + right[0]) / 2), float((left[1] + right[1]) / 2)),
        dst_center=(out_size / 2.0, 0.4 * out_size),
    )

    xs, ys = np.meshgrid(np.arange(out_size, dtype=np.float64),
                         np.arange(out_size, dtype=np.float64))
    grid = np.stack([xs.ravel(), ys.ravel()], axis=1)
    src = transform.invert(grid)
    resampled = _bilinear_sample(
        image.pixels, src[:, 0].reshape(out_size, out_size), src[:, 1].reshape(out_size, out_size)
    )
    moved = transform.apply(landmarks.points)
    return AlignedFace(GrayImage(resampled), LandmarkSet(moved), transform, out_size)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull vertices (monotone chain), oriented so that interior
    points have non-negative cross products against every edge."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def hull_mask(points: np.ndarray, height: int, width: int) -> np.ndarray:
    """Boolean inside-the-hull mask for every pixel center; hull-boundary
    pixels count as inside."""
    hull = convex_hull(points)
    if len(hull) < 3:
        return np.zeros((height, width), dtype=bool)
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    inside = np.ones((height, width), dtype=bool)
    n = len(hull)
    for i in range(n):
        x0, y0 = hull[i]
        x1, y1 = hull[(i + 1) % n]
        cross = (x1 - x0) * (ys - y0) - (y1 - y0) * (xs - x0)
        inside &= cross >= -1e-9
    return inside


def mask_face(face: AlignedFace) -> AlignedFace:
    """Zero out everything outside the convex hull of the landmarks."""
    mask = hull_mask(face.landmarks.points, face.image.height, face.image.width)
    return AlignedFace(
        GrayImage(np.where(mask, face.image.pixels, 0.0)),
        face.landmarks,
        face.transform,
        face.out_size,
    )


def _gradients(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference gradients [-1, 0, 1]; border rows/columns get zero
    gradient along the axis that lacks a neighbor."""
    gx = np.zeros_like(pixels)
    gy = np.zeros_like(pixels)
    gx[:, 1:-1] = pixels[:, 2:] - pixels[:, :-2]
    gy[1:-1, :] = pixels[2:, :] - pixels[:-2, :]
    return gx, gy


def compute_hog(image: GrayImage) -> np.ndarray:
    """Dense HOG descriptor of a square image.

    8 unsigned orientation bins, 8x8-pixel cells, 2x2-cell blocks sliding
    with stride one cell, L2-Hys block normalization (epsilon 1e-12, clip at
    0.2, renormalize).  The output concatenates blocks in row-major order;
    within a block, cells are row-major, then bins.  For the default 112x112
    frame this yields 13 * 13 * 2 * 2 * 8 = 5408 values.
    """
    pixels = image.pixels
    h, w = pixels.shape
    if h != w:
        raise BadDimensions(f"expected a square image, got {h}x{w}")
    if h % HOG_CELL != 0:
        raise BadDimensions(f"image size {h} is not a multiple of the {HOG_CELL}px cell")
    cells = h // HOG_CELL
    if cells < HOG_BLOCK:
        raise BadDimensions(f"image size {h} yields fewer than {HOG_BLOCK} cells")

    gx, gy = _gradients(pixels)
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), np.pi)  # unsigned orientation in [0, pi)

    bin_width = np.pi / HOG_BINS
    coord = angle / bin_width - 0.5
    lower = np.floor(coord)
    frac = coord - lower
    bin_lo = np.mod(lower.astype(np.int64), HOG_BINS)
    bin_hi = np.mod(bin_lo + 1, HOG_BINS)

    row_cells = np.arange(h) // HOG_CELL
    col_cells = np.arange(w) // HOG_CELL
    cell_index = row_cells[:, None] * cells + col_cells[None, :]

    hist = np.zeros(cells * cells * HOG_BINS, dtype=np.float64)
    flat_lo = cell_index.ravel() * HOG_BINS + bin_lo.ravel()
    flat_hi = cell_index.ravel() * HOG_BINS + bin_hi.ravel()
    np.add.at(hist, flat_lo, (magnitude * (1.0 - frac)).ravel())
    np.add.at(hist, flat_hi, (magnitude * frac).ravel())
    hist = hist.reshape(cells, cells, HOG_BINS)

    blocks = cells - HOG_BLOCK + 1
    out = np.empty((blocks, blocks, HOG_BLOCK, HOG_BLOCK, HOG_BINS), dtype=np.float64)
    for dy in range(HOG_BLOCK):
        for dx in range(HOG_BLOCK):
            out[:, :, dy, dx, :] = hist[dy:dy + blocks, dx:dx + blocks, :]
    flat = out.reshape(blocks * blocks, -1)
    norms = np.sqrt(np.sum(flat * flat, axis=1, keepdims=True) + HOG_EPS)
    clipped = np.minimum(flat / norms, HOG_CLIP)
    norms2 = np.sqrt(np.sum(clipped * clipped, axis=1, keepdims=True) + HOG_EPS)
    return (clipped / norms2).reshape(-1)


def extract_features(
    image: GrayImage,
    landmarks: LandmarkSet,
    out_size: int = DEFAULT_OUT_SIZE,
    canonical_iod: float | None = None,
) -> np.ndarray:
    """Full per-frame feature vector: HOG of the masked aligned face, then
    the aligned landmark coordinates divided by the frame size.

    For the default frame this is 5408 + 136 = 5544 values.
    """
    aligned = align_face(image, landmarks, out_size=out_size, canonical_iod=canonical_iod)
    masked = mask_face(aligned)
    descriptor = compute_hog(masked.image)
    normalized = (masked.landmarks.points / out_size).reshape(-1)
    return np.concatenate([descriptor, normalized])
