"""Multi-scale saliency machinery and the intensity, color and depth channels.

Planes are 2-D ``float32`` arrays indexed ``[row, col]``. Pyramids use a
separable [1, 4, 6, 4, 1] / 16 binomial blur with clamp-to-edge borders and
keep every second sample; across-scale differences upsample the coarse level
bilinearly onto the fine one, with samples aligned on the decimation grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import InvalidScalePair

MAX_LEVELS = 9
CENTER_LEVELS = (2, 3, 4)
SURROUND_DELTAS = (3, 4)
SCALE_PAIRS = tuple((c, c + d) for c in CENTER_LEVELS for d in SURROUND_DELTAS)

NORMALIZATION_GRID = 16
# Planes whose dynamic range is below this are float noise around a constant.
FLAT_RANGE = 1e-5
COLOR_GATE = 0.1

BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0], dtype=np.float32) / 16.0


@dataclass
class ConspicuitySet:
    intensity: np.ndarray
    color: np.ndarray
    orientation: np.ndarray
    depth: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "intensity": self.intensity,
            "color": self.color,
            "orientation": self.orientation,
            "depth": self.depth,
        }


def as_plane(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.float32)


def level_count(height: int, width: int) -> int:
    """Number of pyramid levels: halve until the short side hits 1, capped at 9."""
    short = min(height, width)
    return min(MAX_LEVELS, int(np.floor(np.log2(short))) + 1)


def blur(plane: np.ndarray, axis: int | None = None, border: int = cv2.BORDER_REPLICATE) -> np.ndarray:
    """Binomial blur along both axes, or along one axis (0 = rows, 1 = columns)."""
    one = np.ones(1, dtype=np.float32)
    kx = BINOMIAL if axis in (None, 1) else one
    ky = BINOMIAL if axis in (None, 0) else one
    return cv2.sepFilter2D(as_plane(plane), cv2.CV_32F, kx, ky, borderType=border)


def reduce(plane: np.ndarray, axis: int | None = None, border: int = cv2.BORDER_REPLICATE) -> np.ndarray:
    """Blur then keep every second sample (floor halving, minimum 1)."""
    h, w = plane.shape
    out = blur(plane, axis, border)
    if axis in (None, 0):
        out = out[: max(1, h // 2) * 2 : 2]
    if axis in (None, 1):
        out = out[:, : max(1, w // 2) * 2 : 2]
    return np.ascontiguousarray(out)


def gaussian_pyramid(plane: np.ndarray, levels: int | None = None) -> list[np.ndarray]:
    """Dyadic Gaussian pyramid; level 0 is the input at full resolution."""
    plane = as_plane(plane)
    n = level_count(*plane.shape) if levels is None else levels
    pyr = [plane]
    for _ in range(n - 1):
        pyr.append(reduce(pyr[-1]))
    return pyr


def _axis_taps(n_out: int, n_in: int, factor: int):
    pos = np.arange(n_out, dtype=np.float64) / factor
    i0 = np.minimum(pos.astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, (pos - i0).clip(0.0, 1.0).astype(np.float32)


def upsample(plane: np.ndarray, shape: tuple[int, int], factor: int | tuple[int, int]) -> np.ndarray:
    """Bilinear upsampling on the decimation grid.

    Sample ``j`` of a plane ``factor`` times coarser sits at fine position
    ``factor * j`` because reduction keeps every second sample starting at
    0. Positions past the last coarse sample hold its value.
    """
    fy, fx = (factor, factor) if np.isscalar(factor) else factor
    plane = as_plane(plane)
    if plane.shape == tuple(shape) and fy == fx == 1:
        return plane
    i0, i1, w = _axis_taps(shape[0], plane.shape[0], fy)
    rows = plane[i0] * (1 - w)[:, None] + plane[i1] * w[:, None]
    j0, j1, w = _axis_taps(shape[1], plane.shape[1], fx)
    return np.ascontiguousarray(rows[:, j0] * (1 - w) + rows[:, j1] * w)


def valid_pairs(n_levels: int) -> list[tuple[int, int]]:
    return [(c, s) for c, s in SCALE_PAIRS if s < n_levels]


def center_surround(pyr: list[np.ndarray], c: int, s: int) -> np.ndarray:
    """|level c - upsampled level s| at level-c resolution.

    Raises:
        InvalidScalePair: unless c in {2, 3, 4}, s - c in {3, 4} and s exists.
    """
    if c not in CENTER_LEVELS or s - c not in SURROUND_DELTAS or s >= len(pyr):
        raise InvalidScalePair(f"(c={c}, s={s}) with {len(pyr)} levels")
    center = pyr[c]
    return np.abs(center - upsample(pyr[s], center.shape, 2 ** (s - c)))


def rescale(plane: np.ndarray) -> np.ndarray:
    """Min-max stretch to [0, 1]; (near-)constant planes become zero."""
    plane = as_plane(plane)
    lo, hi = float(plane.min()), float(plane.max())
    if hi - lo <= FLAT_RANGE:
        return np.zeros_like(plane)
    return (plane - lo) / np.float32(hi - lo)


def _cell_edges(n: int) -> np.ndarray:
    cells = min(NORMALIZATION_GRID, n)
    return (np.arange(cells + 1) * n) // cells


def mean_local_maxima(plane: np.ndarray) -> float:
    """Mean of per-cell local maxima on a 16x16 grid, skipping the global-max cell.

    Only strict-or-plateau local maxima (a pixel not below any of its eight
    neighbours) with a positive value count; cells without one are ignored.
    """
    h, w = plane.shape
    peaks = (plane >= cv2.dilate(plane, np.ones((3, 3), np.uint8))) & (plane > 0)
    candidates = np.where(peaks, plane, 0).astype(np.float32)
    rows, cols = _cell_edges(h), _cell_edges(w)
    cell_max = np.maximum.reduceat(candidates, rows[:-1], axis=0)
    cell_max = np.maximum.reduceat(cell_max, cols[:-1], axis=1)
    gy, gx = np.unravel_index(int(np.argmax(plane)), plane.shape)
    cy = np.searchsorted(rows, gy, side="right") - 1
    cx = np.searchsorted(cols, gx, side="right") - 1
    cell_max[cy, cx] = 0
    others = cell_max[cell_max > 0]
    return float(others.mean()) if others.size else 0.0


def normalize_map(plane: np.ndarray) -> np.ndarray:
    """Itti's N(.) operator.

    Rescales to [0, 1] and weights the map by (1 - m)^2, m being the mean of
    the other local maxima, so one dominant peak survives and many comparable
    peaks cancel out.
    """
    scaled = rescale(plane)
    if not scaled.any():
        return scaled
    m = mean_local_maxima(scaled)
    return scaled * np.float32((1.0 - m) ** 2)


def pyramid_contrast(pyr: list[np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    """Sum of N(center-surround) over every valid scale pair of ``pyr``, at ``shape``.

    Maps sharing a center level are added before the (linear) upsampling.
    """
    by_center: dict[int, np.ndarray] = {}
    for c, s in valid_pairs(len(pyr)):
        contrast = normalize_map(center_surround(pyr, c, s))
        by_center[c] = by_center[c] + contrast if c in by_center else contrast
    total = np.zeros(shape, dtype=np.float32)
    for c, acc in by_center.items():
        total += upsample(acc, shape, 2**c)
    return total


def feature_sum(planes: list[np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    """``pyramid_contrast`` summed over the Gaussian pyramids of ``planes``."""
    total = np.zeros(shape, dtype=np.float32)
    for plane in planes:
        total += pyramid_contrast(gaussian_pyramid(plane), shape)
    return total


def luminance(img: np.ndarray) -> np.ndarray:
    """I = (R + G + B) / 3 on gamma-encoded values."""
    return as_plane(np.asarray(img, dtype=np.float32).mean(axis=2))


def intensity_conspicuity(img: np.ndarray) -> np.ndarray:
    return rescale(feature_sum([luminance(img)], img.shape[:2]))


def opponent_channels(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Red-green and blue-yellow opponency from broadly tuned r, g, b, y.

    Pixels darker than a tenth of the brightest intensity are gated to zero
    so hue noise in near-black areas does not register as color contrast.
    """
    img = np.asarray(img, dtype=np.float32)
    red, green, blue = img[..., 0], img[..., 1], img[..., 2]
    r = np.maximum(red - (green + blue) / 2, 0)
    g = np.maximum(green - (red + blue) / 2, 0)
    b = np.maximum(blue - (red + green) / 2, 0)
    y = np.maximum((red + green) / 2 - np.abs(red - green) / 2 - blue, 0)
    intensity = img.mean(axis=2)
    dark = intensity < COLOR_GATE * intensity.max()
    for channel in (r, g, b, y):
        channel[dark] = 0
    return as_plane(r - g), as_plane(b - y)


def color_conspicuity(img: np.ndarray) -> np.ndarray:
    return rescale(feature_sum(list(opponent_channels(img)), img.shape[:2]))


def near_field(depth: np.ndarray) -> np.ndarray:
    """Invert and stretch depth so the nearest surface is 1 and the farthest 0."""
    depth = np.asarray(depth, dtype=np.float64)
    lo, hi = depth.min(), depth.max()
    if hi <= lo:
        return np.zeros(depth.shape, dtype=np.float32)
    return as_plane((hi - depth) / (hi - lo))


def depth_conspicuity(depth: np.ndarray) -> np.ndarray:
    return rescale(feature_sum([near_field(depth)], depth.shape))
