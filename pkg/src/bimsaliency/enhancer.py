"""Profile-driven recoloring that makes relevant elements dominate saliency.

The gain ``ge = s_r / (s_r + s_i)`` compares the mean saliency of the
relevant pixels with that of the irrelevant ones. While it stays below 0.5
the irrelevant pixels are pulled in hue toward the opponent of the relevant
region's color, with ``ge`` as blend weight, and saliency is recomputed.
Relevant pixels are never touched and HSV value is kept, so only color
coded information changes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, MutableMapping

import numpy as np
from skimage.color import hsv2rgb, rgb2hsv

from .attention import ConspicuitySet, depth_conspicuity
from .errors import EmptyRelevantRegion
from .perspective import detect_vanishing_point
from .profiles import Profile, classify, relevance_masks
from .saliency import compute_saliency, timed
from .scene_io import SceneBundle

ACHROMATIC_SAT = 0.1
INJECTED_SAT = 0.8
CONVERGED_GE = 0.5
STALL_DELTA = 1e-3
DEFAULT_MAX_ITERS = 10


class TargetColor(enum.Enum):
    RED = 0
    YELLOW = 60
    GREEN = 120
    BLUE = 240

    @property
    def hue(self) -> float:
        return float(self.value)

    @property
    def label(self) -> str:
        return self.name.capitalize()


OPPONENT = {
    TargetColor.RED: TargetColor.GREEN,
    TargetColor.YELLOW: TargetColor.BLUE,
    TargetColor.GREEN: TargetColor.RED,
    TargetColor.BLUE: TargetColor.YELLOW,
}


@dataclass(frozen=True)
class RegionStats:
    s_r: float
    s_i: float
    ge: float
    mean_hue_r: float | None
    mean_sat_r: float
    mean_val_r: float


@dataclass(frozen=True)
class IterationRecord:
    index: int
    ge: float


@dataclass
class EnhancementReport:
    profile: str
    target: TargetColor
    converged: bool = False
    iterations: list[IterationRecord] = field(default_factory=list)

    @property
    def passes(self) -> int:
        """Number of recolor passes applied."""
        return max(0, len(self.iterations) - 1)

    @property
    def ge_history(self) -> list[float]:
        return [it.ge for it in self.iterations]

    def to_json(self) -> dict:
        return {
            "profile": self.profile,
            "target_color": self.target.label,
            "converged": self.converged,
            "iterations": [{"index": it.index, "ge": it.ge} for it in self.iterations],
        }


def hue_distance(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def gain(s_r: float, s_i: float) -> float:
    """``s_r / (s_r + s_i)``; 1 when only relevant pixels are salient.

    With no saliency anywhere neither set dominates, so the gain is 0.5.
    """
    total = s_r + s_i
    if total <= 0.0:
        return 0.5
    return s_r / total


def region_stats(
    saliency: np.ndarray, img: np.ndarray, relevant: np.ndarray, irrelevant: np.ndarray
) -> RegionStats:
    """Saliency gain and HSV color summary of the relevant region.

    The hue mean is circular and only counts pixels with saturation of at
    least 0.1; it is ``None`` when every relevant pixel is achromatic.

    Raises:
        EmptyRelevantRegion: if ``relevant`` selects no pixel.
    """
    if not relevant.any():
        raise EmptyRelevantRegion("no pixel belongs to a relevant element")
    saliency = np.asarray(saliency, dtype=np.float64)
    s_r = float(saliency[relevant].mean())
    s_i = float(saliency[irrelevant].mean()) if irrelevant.any() else 0.0

    hsv = rgb2hsv(np.asarray(img, dtype=np.float64)[relevant][np.newaxis])[0]
    hue, sat, val = hsv[:, 0] * 360.0, hsv[:, 1], hsv[:, 2]
    chromatic = sat >= ACHROMATIC_SAT
    mean_hue = None
    if chromatic.any():
        rad = np.radians(hue[chromatic])
        mean_hue = float(np.degrees(np.arctan2(np.sin(rad).mean(), np.cos(rad).mean())) % 360.0)
    return RegionStats(s_r, s_i, gain(s_r, s_i), mean_hue, float(sat.mean()), float(val.mean()))


def pick_target(stats: RegionStats) -> TargetColor:
    """Opponent of the relevant region's color; Green for achromatic regions.

    The mean hue snaps to the nearest of Red, Yellow, Green and Blue, ties
    going to the smaller hue.
    """
    if stats.mean_hue_r is None:
        return TargetColor.GREEN
    nearest = min(TargetColor, key=lambda c: (hue_distance(stats.mean_hue_r, c.hue), c.hue))
    return OPPONENT[nearest]


def recolor_pass(img: np.ndarray, irrelevant: np.ndarray, target: TargetColor, ge: float) -> np.ndarray:
    """Move irrelevant pixels toward ``target`` hue by ``ge`` along the short arc.

    Near-gray pixels (saturation below 0.1) take the target hue outright and
    gain saturation toward 0.8. HSV value is untouched and relevant pixels
    are copied unchanged.
    """
    out = np.array(img, dtype=np.float64, copy=True)
    if ge <= 0.0 or not irrelevant.any():
        return out
    hsv = rgb2hsv(out[irrelevant][np.newaxis])[0]
    hue, sat = hsv[:, 0] * 360.0, hsv[:, 1]
    delta = (target.hue - hue + 180.0) % 360.0 - 180.0
    new_hue = (hue + ge * delta) % 360.0
    gray = sat < ACHROMATIC_SAT
    new_hue[gray] = target.hue
    sat[gray] += ge * (INJECTED_SAT - sat[gray])
    hsv[:, 0] = new_hue / 360.0
    out[irrelevant] = np.clip(hsv2rgb(hsv[np.newaxis])[0], 0.0, 1.0)
    return out


def enhance(
    bundle: SceneBundle,
    profile: Profile,
    mode: str = "perspective",
    max_iters: int = DEFAULT_MAX_ITERS,
    timings: MutableMapping[str, float] | None = None,
    observer: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, EnhancementReport, ConspicuitySet]:
    """Recolor irrelevant pixels until the relevant ones hold most of the saliency.

    The target color is picked once from the initial statistics. Each pass
    recolors with the current gain, then saliency and gain are recomputed.
    The loop ends when the gain reaches 0.5 (converged), after ``max_iters``
    passes, or when the gain moves less than 1e-3 in a pass (stalled).

    Depth and the vanishing point depend only on geometry, which recoloring
    leaves alone, so both are computed once.

    ``observer``, when given, is called as ``observer(index, image, saliency)``
    for the input (index 0) and after every pass.

    Raises:
        EmptyRelevantRegion: if the profile marks no visible pixel relevant.
        ValueError: if ``max_iters`` is below 1.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    relevant, irrelevant = relevance_masks(bundle.labels, classify(bundle.catalog, profile))
    if not relevant.any():
        raise EmptyRelevantRegion(f"profile {profile.name!r} marks no visible element relevant")

    vp = None
    if mode == "perspective":
        with timed(timings, "vp"):
            vp = detect_vanishing_point(bundle.image)
    with timed(timings, "channels"):
        depth_map = depth_conspicuity(bundle.depth)

    def measure(index, image):
        saliency, maps = compute_saliency(
            bundle.with_image(image), mode, vp=vp, depth_map=depth_map, timings=timings
        )
        if observer is not None:
            observer(index, image, saliency)
        return region_stats(saliency, image, relevant, irrelevant), maps

    image = np.array(bundle.image, dtype=np.float64, copy=True)
    stats, maps = measure(0, image)
    target = pick_target(stats)
    report = EnhancementReport(profile.name, target, iterations=[IterationRecord(0, stats.ge)])
    ge = stats.ge
    if ge >= CONVERGED_GE:
        report.converged = True
        return image, report, maps

    for index in range(1, max_iters + 1):
        with timed(timings, "recolor_loop"):
            image = recolor_pass(image, irrelevant, target, ge)
        stats, maps = measure(index, image)
        report.iterations.append(IterationRecord(index, stats.ge))
        if stats.ge >= CONVERGED_GE:
            report.converged = True
            break
        if abs(stats.ge - ge) < STALL_DELTA:
            break
        ge = stats.ge
    return image, report, maps
