"""Four-channel saliency: intensity, color, orientation and depth.

``compute_saliency`` runs every channel on a scene bundle and ``combine``
averages the normalized conspicuity maps into one map peaking at 1.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from typing import MutableMapping

import numpy as np

from .attention import (
    ConspicuitySet,
    color_conspicuity,
    depth_conspicuity,
    intensity_conspicuity,
    normalize_map,
)
from .errors import DimensionMismatch
from .perspective import (
    VanishingPoint,
    detect_vanishing_point,
    gabor_orientation_conspicuity,
    perspective_orientation_conspicuity,
)
from .scene_io import SceneBundle

MODES = ("perspective", "baseline")


@contextmanager
def timed(timings: MutableMapping[str, float] | None, stage: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        if timings is not None:
            timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - start


def combine(maps: ConspicuitySet) -> np.ndarray:
    """Average the four normalized maps and scale the result so its max is 1.

    Raises:
        DimensionMismatch: if the maps do not share one shape.
    """
    planes = list(maps.as_dict().values())
    shape = planes[0].shape
    if len(shape) != 2 or any(p.shape != shape for p in planes):
        raise DimensionMismatch(f"conspicuity maps disagree in shape: {[p.shape for p in planes]}")
    total = sum(normalize_map(p) for p in planes) / np.float32(4.0)
    peak = float(total.max())
    if peak <= 0.0:
        return np.zeros(shape, dtype=np.float32)
    return (total / np.float32(peak)).astype(np.float32)


def orientation_conspicuity(img: np.ndarray, mode: str, vp: VanishingPoint | None = None) -> np.ndarray:
    """Orientation channel for ``mode``; ``vp`` is detected when not given."""
    if mode == "baseline":
        return gabor_orientation_conspicuity(img)
    if mode != "perspective":
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if vp is None:
        vp = detect_vanishing_point(img)
    return perspective_orientation_conspicuity(img, vp)


def compute_saliency(
    bundle: SceneBundle,
    mode: str = "perspective",
    *,
    vp: VanishingPoint | None = None,
    depth_map: np.ndarray | None = None,
    timings: MutableMapping[str, float] | None = None,
) -> tuple[np.ndarray, ConspicuitySet]:
    """Run all four channels on ``bundle`` and combine them.

    Args:
        bundle: validated scene.
        mode: ``"perspective"`` for the vanishing-point orientation channel,
            ``"baseline"`` for the Gabor one.
        vp: vanishing point to reuse instead of detecting one.
        depth_map: depth conspicuity to reuse; it only depends on geometry.
        timings: if given, per-stage seconds are added under ``channels``,
            ``vp`` and ``combine``.

    Returns:
        The saliency map and the conspicuity maps it was built from.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    img = bundle.image
    if mode == "perspective" and vp is None:
        with timed(timings, "vp"):
            vp = detect_vanishing_point(img)
    with timed(timings, "channels"):
        maps = ConspicuitySet(
            intensity=intensity_conspicuity(img),
            color=color_conspicuity(img),
            orientation=orientation_conspicuity(img, mode, vp),
            depth=depth_conspicuity(bundle.depth) if depth_map is None else depth_map,
        )
    with timed(timings, "combine"):
        saliency = combine(maps)
    return saliency, maps
