"""Vanishing-point aware orientation channel.

The dominant vanishing point is found by voting pairwise intersections of
Hough segments. The luminance plane is then resampled in polar coordinates
around it (rows = angle, columns = radius). Edges that follow the perspective
run along rays from the vanishing point and are therefore constant along the
radius axis, so contrast measured along radius keeps only structure that
breaks the perspective. The result is mapped back to image space.

When no vanishing point is found the channel falls back to the classic
four-orientation Gabor map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .attention import (
    CENTER_LEVELS,
    as_plane,
    gaussian_pyramid,
    luminance,
    normalize_map,
    pyramid_contrast,
    reduce,
    rescale,
    upsample,
    valid_pairs,
)
from .errors import ImageTooSmall, NoVanishingPoint

MIN_VP_IMAGE = 64
EDGE_PERCENTILE = 90.0
MIN_SEGMENT_FRACTION = 0.05
AXIS_EXCLUSION_DEG = 5.0
ACCUMULATOR_CELL = 4
PEAK_FRACTION = 0.05
MIN_SEGMENTS = 10

ANGULAR_BINS = 720
# Radius (fraction of the image diagonal) around the vanishing point that is
# left out of the radial contrast: there a pixel spans many angle rows, so
# pixel-scale aliasing of converging edges reads as radial change.
VP_CORE_FRACTION = 0.04

GABOR_ANGLES = (0.0, 45.0, 90.0, 135.0)
GABOR_WAVELENGTH = 8.0
GABOR_ASPECT = 0.5
GABOR_SIGMA = 4.0


@dataclass(frozen=True)
class VanishingPoint:
    x: float = float("nan")
    y: float = float("nan")
    score: float = 0.0
    found: bool = False


NOT_FOUND = VanishingPoint()


@dataclass
class PolarFrame:
    """Polar resampling of a plane around ``origin``.

    ``plane`` has one row per angle (``2*pi*row/angular_bins``) and one
    column per unit of radius. ``valid`` flags samples that fell inside the
    source image.
    """

    origin: VanishingPoint
    plane: np.ndarray
    valid: np.ndarray

    @property
    def angular_bins(self) -> int:
        return self.plane.shape[0]

    @property
    def radial_bins(self) -> int:
        return self.plane.shape[1]


# -- vanishing point -----------------------------------------------------------

def detect_segments(img: np.ndarray) -> np.ndarray:
    """Probabilistic-Hough segments on the strongest 10% of luminance gradients.

    Returns an (N, 4) float array of ``x1, y1, x2, y2``.
    """
    lum = luminance(img)
    gx = cv2.Sobel(lum, cv2.CV_32F, 1, 0, ksize=3)
    gy = cv2.Sobel(lum, cv2.CV_32F, 0, 1, ksize=3)
    magnitude = cv2.magnitude(gx, gy)
    threshold = np.percentile(magnitude, EDGE_PERCENTILE)
    edges = (magnitude > threshold).astype(np.uint8) * 255
    h, w = lum.shape
    min_length = MIN_SEGMENT_FRACTION * math.hypot(w, h)
    lines = cv2.HoughLinesP(
        edges,
        rho=1,
        theta=np.pi / 180,
        threshold=max(10, int(min_length / 2)),
        minLineLength=min_length,
        maxLineGap=3,
    )
    if lines is None:
        return np.zeros((0, 4))
    return lines.reshape(-1, 4).astype(np.float64)


def _off_axis(segments: np.ndarray) -> np.ndarray:
    dx = segments[:, 2] - segments[:, 0]
    dy = segments[:, 3] - segments[:, 1]
    angle = np.degrees(np.arctan2(dy, dx)) % 90.0
    return (angle > AXIS_EXCLUSION_DEG) & (angle < 90.0 - AXIS_EXCLUSION_DEG)


def vote_intersections(segments: np.ndarray, width: int, height: int) -> VanishingPoint:
    """Accumulate length-weighted pairwise intersections and return the peak."""
    p1 = np.column_stack([segments[:, :2], np.ones(len(segments))])
    p2 = np.column_stack([segments[:, 2:], np.ones(len(segments))])
    lines = np.cross(p1, p2)
    lengths = np.hypot(segments[:, 2] - segments[:, 0], segments[:, 3] - segments[:, 1])

    i, j = np.triu_indices(len(segments), k=1)
    points = np.cross(lines[i], lines[j])
    weights = lengths[i] * lengths[j]
    finite = np.abs(points[:, 2]) > 1e-9
    points, weights = points[finite], weights[finite]
    xs = points[:, 0] / points[:, 2]
    ys = points[:, 1] / points[:, 2]

    # Accumulator spans [-W, 2W) x [-H, 2H).
    nx = math.ceil(3 * width / ACCUMULATOR_CELL)
    ny = math.ceil(3 * height / ACCUMULATOR_CELL)
    cx = np.floor((xs + width) / ACCUMULATOR_CELL)
    cy = np.floor((ys + height) / ACCUMULATOR_CELL)
    inside = (cx >= 0) & (cx < nx) & (cy >= 0) & (cy < ny)
    if not inside.any():
        return NOT_FOUND
    xs, ys, weights = xs[inside], ys[inside], weights[inside]
    cx, cy = cx[inside].astype(np.int64), cy[inside].astype(np.int64)
    votes = np.bincount(cy * nx + cx, weights=weights, minlength=nx * ny)
    total = float(weights.sum())
    peak = int(np.argmax(votes))
    score = float(votes[peak])
    if score < PEAK_FRACTION * total:
        return NOT_FOUND
    py, px = divmod(peak, nx)
    near = (np.abs(cx - px) <= 1) & (np.abs(cy - py) <= 1)
    wn = weights[near]
    return VanishingPoint(
        x=float(np.dot(xs[near], wn) / wn.sum()),
        y=float(np.dot(ys[near], wn) / wn.sum()),
        score=score,
        found=True,
    )


def detect_vanishing_point(img: np.ndarray) -> VanishingPoint:
    """Locate the single dominant vanishing point of a render.

    Segments within 5 degrees of horizontal or vertical do not vote: in
    one-point perspective they are frontal edges meeting at infinity.

    Raises:
        ImageTooSmall: if either side is below 64 pixels.
    """
    h, w = img.shape[:2]
    if min(h, w) < MIN_VP_IMAGE:
        raise ImageTooSmall(f"vanishing point detection needs >= {MIN_VP_IMAGE}px, got {w}x{h}")
    segments = detect_segments(img)
    segments = segments[_off_axis(segments)] if len(segments) else segments
    if len(segments) < MIN_SEGMENTS:
        return NOT_FOUND
    return vote_intersections(segments, w, h)


# -- polar warp ------------------------------------------------------------------

def radial_extent(vp: VanishingPoint, width: int, height: int) -> int:
    corners = ((0, 0), (width - 1, 0), (0, height - 1), (width - 1, height - 1))
    return max(1, math.ceil(max(math.hypot(x - vp.x, y - vp.y) for x, y in corners)))


def polar_project(plane: np.ndarray, vp: VanishingPoint, angular_bins: int = ANGULAR_BINS) -> PolarFrame:
    """Resample ``plane`` on an (angle, radius) grid centred on ``vp``.

    Raises:
        NoVanishingPoint: if ``vp.found`` is false.
    """
    if not vp.found:
        raise NoVanishingPoint("polar projection needs a detected vanishing point")
    plane = as_plane(plane)
    h, w = plane.shape
    radii = np.arange(radial_extent(vp, w, h), dtype=np.float64)
    theta = 2.0 * np.pi * np.arange(angular_bins, dtype=np.float64) / angular_bins
    xs = vp.x + np.outer(np.cos(theta), radii)
    ys = vp.y + np.outer(np.sin(theta), radii)
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    sampled = cv2.remap(
        plane, xs.astype(np.float32), ys.astype(np.float32), cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_REPLICATE,
    )
    return PolarFrame(vp, np.where(valid, sampled, 0).astype(np.float32), valid)


def polar_unproject(frame: PolarFrame, width: int, height: int) -> np.ndarray:
    """Map a polar frame back onto a ``height x width`` image.

    Bilinear lookup uses valid polar samples only; pixels whose neighbourhood
    holds none get 0.
    """
    vp = frame.origin
    n_angles, n_radii = frame.plane.shape
    yy, xx = np.mgrid[0:height, 0:width]
    dx, dy = xx - vp.x, yy - vp.y
    radius = np.hypot(dx, dy).astype(np.float32)
    row = (np.mod(np.arctan2(dy, dx), 2 * np.pi) * (n_angles / (2 * np.pi))).astype(np.float32)

    weight = frame.valid.astype(np.float32)
    # Close the angle axis by repeating row 0 after the last row.
    num = np.vstack([frame.plane * weight, frame.plane[:1] * weight[:1]])
    den = np.vstack([weight, weight[:1]])
    kw = dict(interpolation=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=0)
    num = cv2.remap(num, radius, row, **kw)
    den = cv2.remap(den, radius, row, **kw)
    out = np.zeros((height, width), dtype=np.float32)
    hit = den > 1e-6
    out[hit] = num[hit] / den[hit]
    return out


# -- orientation channels ----------------------------------------------------------

def _radial_pyramid(num: np.ndarray, den: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """1-D pyramid along the radius axis, carrying validity as a weight plane."""
    n = min(9, int(np.floor(np.log2(num.shape[1]))) + 1)
    levels = [(num, den)]
    for _ in range(n - 1):
        a, b = levels[-1]
        levels.append((reduce(a, axis=1), reduce(b, axis=1)))
    return levels


def radial_contrast(frame: PolarFrame, min_radius: int = 0) -> np.ndarray:
    """Center-surround contrast along the radius axis of a polar frame.

    Invalid samples, and samples closer than ``min_radius`` to the origin,
    are excluded through normalized convolution so neither the image border
    nor the unresolvable core around the vanishing point reads as an edge.
    Returns the summed N(.) maps at the frame's resolution, zero where
    excluded.
    """
    valid = frame.valid.copy()
    valid[:, :min_radius] = False
    weight = valid.astype(np.float32)
    pyr = _radial_pyramid(frame.plane * weight, weight)
    shape = frame.plane.shape
    total = np.zeros(shape, dtype=np.float32)
    for c, s in valid_pairs(len(pyr)):
        c_num, c_den = pyr[c]
        s_num = upsample(pyr[s][0], c_num.shape, (1, 2 ** (s - c)))
        s_den = upsample(pyr[s][1], c_num.shape, (1, 2 ** (s - c)))
        ok = (c_den > 0.5) & (s_den > 0.5)
        contrast = np.zeros(c_num.shape, dtype=np.float32)
        contrast[ok] = np.abs(c_num[ok] / c_den[ok] - s_num[ok] / s_den[ok])
        total += upsample(normalize_map(contrast), shape, (1, 2**c))
    return np.where(valid, total, 0).astype(np.float32)


def gabor_kernel(theta_deg: float) -> np.ndarray:
    half = int(math.ceil(3 * GABOR_SIGMA / GABOR_ASPECT))
    kernel = cv2.getGaborKernel(
        (2 * half + 1, 2 * half + 1), GABOR_SIGMA, math.radians(theta_deg),
        GABOR_WAVELENGTH, GABOR_ASPECT, 0.0, ktype=cv2.CV_64F,
    )
    # Zero DC so flat regions give exactly no response.
    return (kernel - kernel.mean()).astype(np.float32)


def gabor_orientation_conspicuity(img: np.ndarray) -> np.ndarray:
    """Classic orientation channel from 0/45/90/135 degree Gabor energy."""
    shape = img.shape[:2]
    pyr = gaussian_pyramid(luminance(img))
    total = np.zeros(shape, dtype=np.float32)
    for theta in GABOR_ANGLES:
        kernel = gabor_kernel(theta)
        # Levels below the finest center are never read.
        energy = [
            np.abs(cv2.filter2D(level, cv2.CV_32F, kernel, borderType=cv2.BORDER_REPLICATE))
            if k >= CENTER_LEVELS[0] else level
            for k, level in enumerate(pyr)
        ]
        total += normalize_map(pyramid_contrast(energy, shape))
    return rescale(total)


def perspective_orientation_conspicuity(img: np.ndarray, vp: VanishingPoint) -> np.ndarray:
    """Orientation channel that highlights structure breaking the perspective.

    Contrast is measured along each ray from the vanishing point, so edges
    running through it stay flat and score nothing. The result is clipped
    rather than stretched to keep N(.)'s suppression of repeated structure.
    Falls back to the Gabor channel when no vanishing point was found.
    """
    if not vp.found:
        return gabor_orientation_conspicuity(img)
    h, w = img.shape[:2]
    frame = polar_project(luminance(img), vp)
    core = int(math.ceil(VP_CORE_FRACTION * math.hypot(w, h)))
    contrast = normalize_map(radial_contrast(frame, core))
    return np.clip(polar_unproject(PolarFrame(vp, contrast, frame.valid), w, h), 0.0, 1.0)
